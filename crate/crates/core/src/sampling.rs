//! Low-discrepancy sampling: Halton points with a seeded Cranley-Patterson
//! shift, mapped to the sphere through the inverse normal CDF.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::norm;

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    acc
}

/// RNG for one task: the seed picks the key, the task index the stream.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Halton sequence in `dim` dimensions starting at base offset `first_prime`,
/// shifted modulo 1 by a seeded random vector.
#[derive(Debug, Clone)]
pub struct ShiftedHalton {
    bases: Vec<u32>,
    shift: Vec<f64>,
}

impl ShiftedHalton {
    pub fn new(dim: usize, first_prime: usize, seed: u64, stream: u64) -> Self {
        assert!(first_prime + dim <= PRIMES.len(), "dimension too large for the prime table");
        let mut rng = task_rng(seed, stream);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        ShiftedHalton { bases: PRIMES[first_prime..first_prime + dim].to_vec(), shift }
    }

    /// Point number `i` (skipping index 0, which would be the origin).
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.bases
            .iter()
            .zip(&self.shift)
            .map(|(&b, &s)| {
                let v = radical_inverse(i as u64 + 1, b) + s;
                v - libm::floor(v)
            })
            .collect()
    }
}

/// Acklam's rational approximation to the standard normal quantile
/// (relative error below 1.2e-9 on (0, 1)).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    let low = 0.02425;
    if p < low {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Low-discrepancy unit directions on `S^{n-1}`.
#[derive(Debug, Clone)]
pub struct SphereSequence {
    halton: ShiftedHalton,
}

impl SphereSequence {
    pub fn new(n: usize, seed: u64, stream: u64) -> Self {
        SphereSequence { halton: ShiftedHalton::new(n, 0, seed, stream) }
    }

    pub fn direction(&self, i: usize) -> Vec<f64> {
        let g: Vec<f64> = self.halton.point(i).into_iter().map(inverse_normal_cdf).collect();
        let r = norm(&g);
        if r == 0.0 {
            let mut e = alloc::vec![0.0; g.len()];
            e[0] = 1.0;
            return e;
        }
        g.into_iter().map(|v| v / r).collect()
    }
}

/// Low-discrepancy points in the box `[-w, w]^p`, using primes disjoint from
/// the direction sequence of an `n`-dimensional source.
#[derive(Debug, Clone)]
pub struct BoxSequence {
    halton: ShiftedHalton,
    half_width: f64,
}

impl BoxSequence {
    pub fn new(p: usize, skip: usize, half_width: f64, seed: u64, stream: u64) -> Self {
        BoxSequence { halton: ShiftedHalton::new(p, skip, seed, stream), half_width }
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.halton.point(i).into_iter().map(|v| (2.0 * v - 1.0) * self.half_width).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn quantile_accuracy() {
        assert!(inverse_normal_cdf(0.5).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-8);
        assert!((inverse_normal_cdf(0.001) + 3.090232306167813).abs() < 1e-8);
    }

    #[test]
    fn sphere_points_are_unit_and_reproducible() {
        let s = SphereSequence::new(4, 7, 1);
        let t = SphereSequence::new(4, 7, 1);
        for i in 0..50 {
            let d = s.direction(i);
            assert!((norm(&d) - 1.0).abs() < 1e-14);
            assert_eq!(d, t.direction(i));
        }
        assert_ne!(SphereSequence::new(4, 8, 1).direction(0), s.direction(0));
    }

    #[test]
    fn sphere_points_cover_both_hemispheres() {
        let s = SphereSequence::new(3, 1, 0);
        let pos = (0..200).filter(|&i| s.direction(i)[2] > 0.0).count();
        assert!((80..120).contains(&pos), "{pos}");
    }

    #[test]
    fn box_points_inside() {
        let b = BoxSequence::new(2, 6, 10.0, 3, 2);
        for i in 0..100 {
            assert!(b.point(i).iter().all(|v| v.abs() <= 10.0));
        }
    }
}
