//! Polynomial maps `R^n -> R^p`, their Jacobians, and the real lift of
//! complex maps.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::eval::MapEvaluator;
use crate::linalg::Mat;
use crate::poly::{Exponents, Polynomial};

/// A polynomial map with `n > p > 0`.
#[derive(Clone)]
pub struct PolyMap {
    name: String,
    n: usize,
    components: Vec<Polynomial>,
    eval: MapEvaluator,
}

/// Jacobian matrix at a point; row `i` is the gradient of component `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianEval {
    pub point: Vec<f64>,
    pub matrix: Mat,
}

impl PolyMap {
    pub fn new(name: impl Into<String>, n: usize, components: Vec<Polynomial>) -> Result<Self> {
        let p = components.len();
        if p == 0 || n <= p {
            return Err(Error::InvalidDimensions { n, p });
        }
        for c in &components {
            if c.n_vars() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.n_vars() });
            }
        }
        let eval = MapEvaluator::new(n, &components);
        Ok(PolyMap { name: name.into(), n, components, eval })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn evaluator(&self) -> &MapEvaluator {
        &self.eval
    }

    pub fn is_constant(&self) -> bool {
        self.components.iter().all(Polynomial::is_constant)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.eval.value(x))
    }

    pub fn jacobian_eval(&self, x: &[f64]) -> Result<JacobianEval> {
        self.check_len(x)?;
        Ok(JacobianEval { point: x.to_vec(), matrix: self.eval.jacobian(x) })
    }

    /// Symbolic Jacobian: entry `[i][j]` is `d f_i / d x_j`.
    pub fn jacobian_poly(&self) -> Vec<Vec<Polynomial>> {
        self.components
            .iter()
            .map(|c| (0..self.n).map(|j| c.partial(j).expect("index in range")).collect())
            .collect()
    }

    /// The map `c * f`.
    pub fn scaled(&self, c: &BigRational) -> Self {
        let comps = self.components.iter().map(|p| p.scale(c)).collect();
        PolyMap::new(self.name.clone(), self.n, comps).expect("same dimensions")
    }

    /// Maximum total degree over the components (0 for constants).
    pub fn max_degree(&self) -> u32 {
        self.components.iter().filter_map(|c| c.degree().finite()).max().unwrap_or(0)
    }
}

impl PartialEq for PolyMap {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.n == other.n && self.components == other.components
    }
}

impl fmt::Debug for PolyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolyMap")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("components", &self.components)
            .finish()
    }
}

/// Gaussian rational `re + i im`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaussRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussRational { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        GaussRational { re, im: BigRational::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// A polynomial map `C^m -> C^q` with Gaussian-rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPolyMap {
    pub name: String,
    pub m: usize,
    pub components: Vec<BTreeMap<Exponents, GaussRational>>,
}

/// Real and imaginary parts of a complex-valued polynomial in real variables.
#[derive(Clone)]
struct Split {
    re: Polynomial,
    im: Polynomial,
}

impl Split {
    fn mul(&self, other: &Split) -> Split {
        Split {
            re: &(&self.re * &other.re) - &(&self.im * &other.im),
            im: &(&self.re * &other.im) + &(&self.im * &other.re),
        }
    }
}

impl ComplexPolyMap {
    pub fn new(name: impl Into<String>, m: usize) -> Self {
        ComplexPolyMap { name: name.into(), m, components: Vec::new() }
    }

    /// Appends a component given as `(coefficient, exponents)` pairs;
    /// duplicate exponents are merged and zero coefficients dropped.
    pub fn push_component<I>(&mut self, terms: I) -> Result<()>
    where
        I: IntoIterator<Item = (GaussRational, Exponents)>,
    {
        let mut map: BTreeMap<Exponents, GaussRational> = BTreeMap::new();
        for (c, e) in terms {
            if e.len() != self.m {
                return Err(Error::DimensionMismatch { expected: self.m, found: e.len() });
            }
            let entry =
                map.entry(e).or_insert_with(|| GaussRational::new(BigRational::zero(), BigRational::zero()));
            entry.re += c.re;
            entry.im += c.im;
        }
        map.retain(|_, c| !c.is_zero());
        self.components.push(map);
        Ok(())
    }

    /// Real lift as bare components over `2m` variables ordered
    /// `(u_1, v_1, u_2, v_2, ...)` with `z_j = u_j + i v_j`; the output lists
    /// `(Re f_1, Im f_1, Re f_2, ...)`. No dimension hypothesis is checked.
    pub fn realify_components(&self) -> Vec<Polynomial> {
        let nv = 2 * self.m;
        let zs: Vec<Split> = (0..self.m)
            .map(|j| Split {
                re: Polynomial::var(nv, 2 * j).expect("in range"),
                im: Polynomial::var(nv, 2 * j + 1).expect("in range"),
            })
            .collect();
        let mut out = Vec::with_capacity(2 * self.components.len());
        for comp in &self.components {
            let mut acc = Split { re: Polynomial::zero(nv), im: Polynomial::zero(nv) };
            for (e, c) in comp {
                let mut term = Split {
                    re: Polynomial::constant(nv, c.re.clone()),
                    im: Polynomial::constant(nv, c.im.clone()),
                };
                for (z, &k) in zs.iter().zip(e) {
                    for _ in 0..k {
                        term = term.mul(z);
                    }
                }
                acc.re = &acc.re + &term.re;
                acc.im = &acc.im + &term.im;
            }
            out.push(acc.re);
            out.push(acc.im);
        }
        out
    }

    /// Real lift as a map `R^{2m} -> R^{2q}`; fails if `2m <= 2q`.
    pub fn realify(&self) -> Result<PolyMap> {
        PolyMap::new(self.name.clone(), 2 * self.m, self.realify_components())
    }

    /// Evaluation at a complex point given as `(re, im)` pairs, used to test the lift.
    pub fn eval_complex(&self, z: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
        if z.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: z.len() });
        }
        let cmul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        Ok(self
            .components
            .iter()
            .map(|comp| {
                let mut acc = (0.0, 0.0);
                for (e, c) in comp {
                    let mut t = (crate::poly::rational_to_f64(&c.re), crate::poly::rational_to_f64(&c.im));
                    for (&zj, &k) in z.iter().zip(e) {
                        for _ in 0..k {
                            t = cmul(t, zj);
                        }
                    }
                    acc = (acc.0 + t.0, acc.1 + t.1);
                }
                acc
            })
            .collect())
    }
}

/// The Paunescu-Zaharia family `f_{n,q}(x,y,z) = x - 3x^{2n+1}y^{2q} + 2x^{3n+1}y^{3q} + yz`
/// as a complex map `C^3 -> C`.
pub fn paunescu_zaharia(n: u32, q: u32) -> ComplexPolyMap {
    let int = |v: i64| GaussRational::real(BigRational::from_integer(v.into()));
    let mut m = ComplexPolyMap::new(alloc::format!("pz_{n}_{q}"), 3);
    m.push_component([
        (int(1), vec![1, 0, 0]),
        (int(-3), vec![2 * n + 1, 2 * q, 0]),
        (int(2), vec![3 * n + 1, 3 * q, 0]),
        (int(1), vec![0, 1, 1]),
    ])
    .expect("three variables");
    m
}

/// Convenience constructor for integer-coefficient real maps.
pub fn int_map(name: &str, n: usize, comps: &[&[(i64, &[u32])]]) -> Result<PolyMap> {
    let comps = comps.iter().map(|t| Polynomial::from_int_terms(n, t)).collect::<Result<Vec<_>>>()?;
    PolyMap::new(name, n, comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn broughton() -> PolyMap {
        int_map("broughton", 2, &[&[(1, &[1, 0]), (1, &[2, 1])]]).unwrap()
    }

    fn exfair() -> PolyMap {
        int_map("exfair", 3, &[&[(1, &[2, 0, 0])], &[(1, &[1, 1, 0])]]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(broughton().eval(&[1.0, 1.0]).unwrap(), vec![2.0]);
        assert_eq!(exfair().eval(&[2.0, 3.0, 5.0]).unwrap(), vec![4.0, 6.0]);
        assert_eq!(exfair().eval(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(broughton().eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(broughton().jacobian_eval(&[1.0, 1.0]).unwrap().matrix.to_rows(), vec![vec![3.0, 1.0]]);
        let j = exfair().jacobian_eval(&[0.0, 1.5, 4.0]).unwrap();
        assert_eq!(j.matrix.to_rows(), vec![vec![0.0, 0.0, 0.0], vec![1.5, 0.0, 0.0]]);
        let lin = int_map("lin", 3, &[&[(2, &[1, 0, 0]), (-1, &[0, 0, 1])], &[(5, &[0, 1, 0])]]).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, -7.0, 3.5]] {
            assert_eq!(
                lin.jacobian_eval(&x).unwrap().matrix.to_rows(),
                vec![vec![2.0, 0.0, -1.0], vec![0.0, 5.0, 0.0]]
            );
        }
    }

    #[test]
    fn dimension_hypothesis() {
        let p = Polynomial::from_int_terms(1, &[(1, &[2])]).unwrap();
        assert!(matches!(PolyMap::new("sq", 1, vec![p]), Err(Error::InvalidDimensions { n: 1, p: 1 })));
        assert!(matches!(PolyMap::new("none", 2, vec![]), Err(Error::InvalidDimensions { .. })));
    }

    #[test]
    fn realify_square_and_product() {
        let two = |v: i64| GaussRational::real(BigRational::from_integer(v.into()));
        let mut sq = ComplexPolyMap::new("sq", 1);
        sq.push_component([(two(1), vec![2])]).unwrap();
        let parts = sq.realify_components();
        let want_re = Polynomial::from_int_terms(2, &[(1, &[2, 0]), (-1, &[0, 2])]).unwrap();
        let want_im = Polynomial::from_int_terms(2, &[(2, &[1, 1])]).unwrap();
        assert_eq!(parts, vec![want_re, want_im]);
        assert!(sq.realify().is_err());

        let mut prod = ComplexPolyMap::new("zw", 2);
        prod.push_component([(two(1), vec![1, 1])]).unwrap();
        let parts = prod.realify_components();
        // variables (u, v, w_u, w_v)
        let re = Polynomial::from_int_terms(4, &[(1, &[1, 0, 1, 0]), (-1, &[0, 1, 0, 1])]).unwrap();
        let im = Polynomial::from_int_terms(4, &[(1, &[1, 0, 0, 1]), (1, &[0, 1, 1, 0])]).unwrap();
        assert_eq!(parts, vec![re, im]);
    }

    #[test]
    fn realified_pz_matches_real_evaluation() {
        let c = paunescu_zaharia(1, 1);
        let r = c.realify().unwrap();
        assert_eq!((r.n(), r.p()), (6, 2));
        let real = int_map(
            "f11",
            3,
            &[&[(1, &[1, 0, 0]), (-3, &[3, 2, 0]), (2, &[4, 3, 0]), (1, &[0, 1, 1])]],
        )
        .unwrap();
        let mut s: u64 = 12345;
        for _ in 0..100 {
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            };
            let (x, y, z) = (next(), next(), next());
            let lifted = r.eval(&[x, 0.0, y, 0.0, z, 0.0]).unwrap();
            let direct = real.eval(&[x, y, z]).unwrap()[0];
            assert!((lifted[0] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
            assert_eq!(lifted[1], 0.0);
        }
    }
}
