//! Compiled evaluation of a polynomial map, its Jacobian and Hessians.
//!
//! Coefficients are converted from exact rationals once, when the evaluator
//! is built. Each evaluation builds a table of coordinate powers and reuses it
//! for every term of every derived polynomial.

use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;

use crate::dd::Dd;
use crate::linalg::Mat;
use crate::poly::{rational_to_f64, Polynomial};

#[derive(Debug, Clone)]
struct Term {
    c: f64,
    c_lo: f64,
    start: u32,
    len: u32,
}

/// One polynomial flattened into `(coefficient, [(var, exponent)])` terms.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    terms: Vec<Term>,
    factors: Vec<(u16, u16)>,
}

fn split_rational(r: &BigRational) -> (f64, f64) {
    let hi = rational_to_f64(r);
    if !hi.is_finite() {
        return (hi, 0.0);
    }
    let rest = match BigRational::from_float(hi) {
        Some(h) => r - h,
        None => return (hi, 0.0),
    };
    (hi, rational_to_f64(&rest))
}

impl CompiledPoly {
    pub fn new(p: &Polynomial) -> Self {
        let mut terms = Vec::with_capacity(p.n_terms());
        let mut factors = Vec::new();
        for (e, c) in p.terms() {
            let (hi, lo) = split_rational(c);
            let start = factors.len() as u32;
            for (v, &k) in e.iter().enumerate() {
                if k > 0 {
                    factors.push((v as u16, k as u16));
                }
            }
            terms.push(Term { c: hi, c_lo: lo, start, len: factors.len() as u32 - start });
        }
        CompiledPoly { terms, factors }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    #[inline]
    fn eval(&self, pw: &PowerTable<f64>) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.c;
            for &(var, k) in &self.factors[t.start as usize..(t.start + t.len) as usize] {
                v *= pw.get(var as usize, k as usize);
            }
            acc += v;
        }
        acc
    }

    fn eval_dd(&self, pw: &PowerTable<Dd>) -> Dd {
        let mut acc = Dd::ZERO;
        for t in &self.terms {
            let mut v = Dd::new(t.c, t.c_lo);
            for &(var, k) in &self.factors[t.start as usize..(t.start + t.len) as usize] {
                v = v * pw.get(var as usize, k as usize);
            }
            acc = acc + v;
        }
        acc
    }
}

struct PowerTable<T> {
    stride: usize,
    data: Vec<T>,
}

impl<T: Copy> PowerTable<T> {
    #[inline]
    fn get(&self, var: usize, k: usize) -> T {
        self.data[var * self.stride + k]
    }
}

fn power_table_f64(x: &[f64], max_exp: usize) -> PowerTable<f64> {
    let stride = max_exp + 1;
    let mut data = vec![1.0; x.len() * stride];
    for (v, &xi) in x.iter().enumerate() {
        for k in 1..stride {
            data[v * stride + k] = data[v * stride + k - 1] * xi;
        }
    }
    PowerTable { stride, data }
}

fn power_table_dd(x: &[Dd], max_exp: usize) -> PowerTable<Dd> {
    let stride = max_exp + 1;
    let mut data = vec![Dd::ONE; x.len() * stride];
    for (v, &xi) in x.iter().enumerate() {
        for k in 1..stride {
            data[v * stride + k] = data[v * stride + k - 1] * xi;
        }
    }
    PowerTable { stride, data }
}

/// Evaluator for the components of a map `R^n -> R^p`, the Jacobian rows and
/// (optionally) the component Hessians.
#[derive(Debug, Clone)]
pub struct MapEvaluator {
    n: usize,
    p: usize,
    max_exp: usize,
    values: Vec<CompiledPoly>,
    grads: Vec<CompiledPoly>,
    /// Upper triangle `(i, j)` with `i <= j`, per component.
    hess: Vec<CompiledPoly>,
}

impl MapEvaluator {
    /// Evaluator with values, gradients and Hessians.
    pub fn new(n: usize, components: &[Polynomial]) -> Self {
        Self::build(n, components, true)
    }

    /// Evaluator with values and gradients only.
    pub fn first_order(n: usize, components: &[Polynomial]) -> Self {
        Self::build(n, components, false)
    }

    fn build(n: usize, components: &[Polynomial], with_hessians: bool) -> Self {
        let p = components.len();
        let mut max_exp = 0;
        let mut values = Vec::with_capacity(p);
        let mut grads = Vec::with_capacity(p * n);
        let mut hess = Vec::with_capacity(p * n * (n + 1) / 2);
        for c in components {
            max_exp = max_exp.max(c.max_exponents().into_iter().max().unwrap_or(0) as usize);
            values.push(CompiledPoly::new(c));
            let partials: Vec<Polynomial> =
                (0..n).map(|i| c.partial(i).expect("variable index in range")).collect();
            for d in &partials {
                grads.push(CompiledPoly::new(d));
            }
            if with_hessians {
                for i in 0..n {
                    for j in i..n {
                        hess.push(CompiledPoly::new(&partials[i].partial(j).expect("in range")));
                    }
                }
            }
        }
        MapEvaluator { n, p, max_exp, values, grads, hess }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let pw = power_table_f64(x, self.max_exp);
        self.values.iter().map(|c| c.eval(&pw)).collect()
    }

    /// Values written into `out`, reusing `scratch` for the power table.
    pub fn value_into(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        let stride = self.max_exp + 1;
        scratch.clear();
        scratch.resize(x.len() * stride, 1.0);
        for (v, &xi) in x.iter().enumerate() {
            for k in 1..stride {
                scratch[v * stride + k] = scratch[v * stride + k - 1] * xi;
            }
        }
        let pw = PowerTable { stride, data: core::mem::take(scratch) };
        for (o, c) in out.iter_mut().zip(&self.values) {
            *o = c.eval(&pw);
        }
        *scratch = pw.data;
    }

    pub fn jacobian(&self, x: &[f64]) -> Mat {
        let pw = power_table_f64(x, self.max_exp);
        self.jacobian_from(&pw)
    }

    fn jacobian_from(&self, pw: &PowerTable<f64>) -> Mat {
        let data = self.grads.iter().map(|c| c.eval(pw)).collect();
        Mat::from_vec(self.p, self.n, data)
    }

    /// Values, Jacobian and the `p` Hessians at once.
    ///
    /// Panics if the evaluator was built by [`MapEvaluator::first_order`].
    pub fn second_order(&self, x: &[f64]) -> (Vec<f64>, Mat, Vec<Mat>) {
        let pw = power_table_f64(x, self.max_exp);
        let vals = self.values.iter().map(|c| c.eval(&pw)).collect();
        let jac = self.jacobian_from(&pw);
        let n = self.n;
        let per = n * (n + 1) / 2;
        assert_eq!(self.hess.len(), self.p * per, "evaluator built without Hessians");
        let mut hs = Vec::with_capacity(self.p);
        for k in 0..self.p {
            let mut h = Mat::zeros(n, n);
            let mut idx = k * per;
            for i in 0..n {
                for j in i..n {
                    let v = self.hess[idx].eval(&pw);
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                    idx += 1;
                }
            }
            hs.push(h);
        }
        (vals, jac, hs)
    }

    /// Values and Jacobian at a double-double point.
    pub fn first_order_dd(&self, x: &[Dd]) -> (Vec<Dd>, Vec<Dd>) {
        let pw = power_table_dd(x, self.max_exp);
        let vals = self.values.iter().map(|c| c.eval_dd(&pw)).collect();
        let jac = self.grads.iter().map(|c| c.eval_dd(&pw)).collect();
        (vals, jac)
    }

    /// Jacobian evaluated in double-double and rounded to `f64` entrywise.
    pub fn jacobian_dd(&self, x: &[f64]) -> Mat {
        let xd: Vec<Dd> = x.iter().map(|&v| Dd::from_f64(v)).collect();
        let (_, jac) = self.first_order_dd(&xd);
        Mat::from_vec(self.p, self.n, jac.into_iter().map(Dd::to_f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn broughton() -> Polynomial {
        Polynomial::from_int_terms(2, &[(1, &[1, 0]), (1, &[2, 1])]).unwrap()
    }

    #[test]
    fn values_and_derivatives() {
        let ev = MapEvaluator::new(2, &[broughton()]);
        assert_eq!(ev.value(&[1.0, 1.0]), vec![2.0]);
        let (mut scratch, mut out) = (Vec::new(), [0.0]);
        ev.value_into(&[2.0, -1.0], &mut scratch, &mut out);
        assert_eq!(out, [-2.0]);
        let (_, jac, hs) = ev.second_order(&[1.0, 1.0]);
        assert_eq!(jac.row(0), &[3.0, 1.0]);
        // Hessian of x + x^2 y is [[2y, 2x], [2x, 0]]
        assert_eq!(hs[0].to_rows(), vec![vec![2.0, 2.0], vec![2.0, 0.0]]);
    }

    #[test]
    fn dd_gradient_survives_cancellation() {
        // 1 + 2xy at x = -1/(2y) (rounded): f64 gives garbage relative to the true residual
        let ev = MapEvaluator::new(2, &[broughton()]);
        let y = 1.0e6;
        let x = -1.0 / (2.0 * y);
        let exact = {
            let xr = BigRational::from_float(x).unwrap();
            let yr = BigRational::from_float(y).unwrap();
            let one = BigRational::from_integer(1.into());
            let two = BigRational::from_integer(2.into());
            rational_to_f64(&(one + two * xr * yr))
        };
        let g = ev.jacobian_dd(&[x, y]);
        assert!((g[(0, 0)] - exact).abs() <= 1e-15 * exact.abs().max(1e-300));
    }

    #[test]
    fn third_coefficient_kept_in_low_word() {
        let third = BigRational::new(1.into(), 3.into());
        let (hi, lo) = split_rational(&third);
        assert!(lo != 0.0 && (hi - 1.0 / 3.0).abs() == 0.0);
    }
}
