//! Pointwise regularity functions of a Jacobian matrix: Rabier's `nu`, Kuo's
//! `kappa`, the Gaffney minor ratio, and the two indicators built on them.
//!
//! All three functions go through the vector of maximal minors, so they vanish
//! together exactly when that vector is exactly zero.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::polymap::PolyMap;

/// A non-negative real or `+inf`, kept as a tag rather than a float infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Extended::Finite(0.0)
    }

    /// Multiplication by a non-negative scalar; `0 * inf` stays `inf`.
    pub fn scale(self, c: f64) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(v * c),
            Extended::Infinite => Extended::Infinite,
        }
    }

    /// Ordering with `Infinite` above every finite value.
    pub fn lt(self, threshold: f64) -> bool {
        matches!(self, Extended::Finite(v) if v < threshold)
    }
}

fn check(a: &Mat) -> Result<()> {
    if a.rows() > a.cols() {
        return Err(Error::TooManyRows { rows: a.rows(), cols: a.cols() });
    }
    Ok(())
}

/// `nu(A) = inf_{|phi| = 1} |A^T phi|`, the smallest singular value.
pub fn rabier_nu(a: &Mat) -> Result<f64> {
    linalg::sigma_min(a)
}

/// Minimum over rows of the distance from the row to the span of the others.
///
/// Uses `dist(row_j, span others) = |C_p(A)| / |C_{p-1}(A without row j)|`
/// (a ratio of volumes); when the maximal minors all vanish the rows are
/// dependent and some row lies in the span of the rest, so the value is 0.
pub fn kuo_kappa(a: &Mat) -> Result<f64> {
    check(a)?;
    let p = a.rows();
    if p == 0 {
        return Ok(0.0);
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s = a.scaled(1.0 / scale);
    let top = linalg::norm(&linalg::maximal_minors(&s));
    if top == 0.0 {
        return Ok(0.0);
    }
    if p == 1 {
        return Ok(scale * top);
    }
    let lower = linalg::deleted_row_minors(&s);
    let best = (0..p).map(|j| linalg::norm(lower.row(j))).fold(0.0, f64::max);
    Ok(scale * top / best)
}

/// Ratio of the norm of all `p x p` minors to the norm of all `(p-1) x (p-1)`
/// minors taken with one row deleted. For `p = 1` the denominator is 1.
///
/// Returns the ratio and a flag that is `true` when both norms vanish (the
/// ratio is then reported as 0).
pub fn gaffney_ratio_flagged(a: &Mat) -> Result<(Extended, bool)> {
    check(a)?;
    let p = a.rows();
    let scale = a.max_abs();
    if p == 0 || scale == 0.0 {
        return Ok((Extended::Finite(0.0), true));
    }
    let s = a.scaled(1.0 / scale);
    let top = linalg::norm(&linalg::maximal_minors(&s));
    let bottom = if p == 1 { 1.0 } else { linalg::deleted_row_minors(&s).frobenius() };
    Ok(match (top == 0.0, bottom == 0.0) {
        (true, true) => (Extended::Finite(0.0), true),
        (true, false) => (Extended::Finite(0.0), false),
        (false, true) => (Extended::Infinite, false),
        (false, false) => (Extended::Finite(scale * top / bottom), false),
    })
}

pub fn gaffney_ratio(a: &Mat) -> Result<Extended> {
    gaffney_ratio_flagged(a).map(|r| r.0)
}

/// `|x| * nu(Df(x))`.
pub fn kos_indicator(map: &PolyMap, x: &[f64]) -> Result<f64> {
    let j = map.jacobian_eval(x)?;
    Ok(linalg::norm(x) * rabier_nu(&j.matrix)?)
}

/// `|x| * gaffney(Df(x))`; `+inf` propagates.
pub fn malgrange_indicator(map: &PolyMap, x: &[f64]) -> Result<Extended> {
    let j = map.jacobian_eval(x)?;
    Ok(gaffney_ratio(&j.matrix)?.scale(linalg::norm(x)))
}

/// All regularity functions at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityPanel {
    pub point: Vec<f64>,
    pub nu: f64,
    pub kappa: f64,
    pub gaffney: Extended,
    pub kos_indicator: f64,
    pub malgrange_indicator: Extended,
}

impl RegularityPanel {
    pub fn compute(map: &PolyMap, x: &[f64]) -> Result<Self> {
        let j = map.jacobian_eval(x)?;
        Self::from_jacobian(x, &j.matrix)
    }

    pub fn from_jacobian(x: &[f64], a: &Mat) -> Result<Self> {
        let r = linalg::norm(x);
        let nu = rabier_nu(a)?;
        let kappa = kuo_kappa(a)?;
        let gaffney = gaffney_ratio(a)?;
        Ok(RegularityPanel {
            point: x.to_vec(),
            nu,
            kappa,
            gaffney,
            kos_indicator: r * nu,
            malgrange_indicator: gaffney.scale(r),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn m(rows: &[&[f64]]) -> Mat {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn nu_examples() {
        assert_eq!(rabier_nu(&m(&[&[3.0, 4.0]])).unwrap(), 5.0);
        assert!((rabier_nu(&m(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0]])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rabier_nu(&m(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0]])).unwrap(), 0.0);
        assert!(rabier_nu(&m(&[&[1.0], &[2.0]])).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kuo_kappa(&m(&[&[3.0, 4.0]])).unwrap(), 5.0);
        assert_eq!(kuo_kappa(&m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]])).unwrap(), 1.0);
        assert_eq!(kuo_kappa(&m(&[&[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0]])).unwrap(), 0.0);
        // distance of (1,1,0) to span{(1,0,0)} is 1; of (1,0,0) to span{(1,1,0)} is 1/sqrt 2
        let k = kuo_kappa(&m(&[&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]])).unwrap();
        assert!((k - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn gaffney_examples() {
        assert_eq!(gaffney_ratio(&m(&[&[3.0, 4.0]])).unwrap(), Extended::Finite(5.0));
        let g = gaffney_ratio(&m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]])).unwrap();
        assert!((g.finite().unwrap() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let (g, degenerate) = gaffney_ratio_flagged(&Mat::zeros(2, 3)).unwrap();
        assert_eq!(g, Extended::Finite(0.0));
        assert!(degenerate);
    }

    #[test]
    fn indicators_on_broughton_curve() {
        let f = crate::polymap::int_map("b", 2, &[&[(1, &[1, 0]), (1, &[2, 1])]]).unwrap();
        let s = 100.0;
        let x = [-1.0 / (2.0 * s), s];
        let k = kos_indicator(&f, &x).unwrap();
        let expect = linalg::norm(&x) * 1.0 / (4.0 * s * s);
        assert!((k - expect).abs() < 1e-9 * expect, "{k} vs {expect}");
        assert_eq!(malgrange_indicator(&f, &x).unwrap(), Extended::Finite(k));
    }

    #[test]
    fn malgrange_zero_on_exfair_singular_plane() {
        let f = crate::polymap::int_map("e", 3, &[&[(1, &[2, 0, 0])], &[(1, &[1, 1, 0])]]).unwrap();
        assert_eq!(malgrange_indicator(&f, &[0.0, 3.0, -2.0]).unwrap(), Extended::Finite(0.0));
        let panel = RegularityPanel::compute(&f, &[0.0, 3.0, -2.0]).unwrap();
        assert_eq!((panel.nu, panel.kappa), (0.0, 0.0));
        assert_eq!(panel.point, vec![0.0, 3.0, -2.0]);
    }
}
