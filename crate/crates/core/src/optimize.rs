//! Levenberg-Marquardt least squares on a sphere `|x| = R` or on all of `R^n`.
//!
//! Steps are computed in an orthonormal basis of the tangent space, scaled by
//! the current column norms of the reduced Jacobian, solved by QR of the
//! stacked damped system, and pulled back to the sphere by normalization. The
//! damping follows Nielsen's gain-ratio update.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Mat};

/// A least-squares objective `0.5 |r(x)|^2`.
pub trait Residual {
    /// Residual vector and its Jacobian with respect to the ambient `x`
    /// (rows = residual entries). `None` marks a point where the objective is
    /// undefined; the optimizer treats it as a rejected step.
    fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Sphere { radius: f64 },
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when an accepted step is shorter than `xtol * (xtol + |x|)`.
    pub xtol: f64,
    /// Stop when the cost falls to this value.
    pub cost_floor: f64,
    /// Number of trailing accepted steps whose lengths are summed in
    /// [`LmOutcome::recent_motion`].
    pub motion_window: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 200, xtol: 1e-15, cost_floor: 0.0, motion_window: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// Total length of the last `motion_window` accepted steps.
    pub recent_motion: f64,
    pub converged: bool,
}

fn project(domain: Domain, x: &mut [f64]) {
    if let Domain::Sphere { radius } = domain {
        let r = linalg::norm(x);
        if r > 0.0 {
            x.iter_mut().for_each(|v| *v *= radius / r);
        }
    }
}

fn half_sq(r: &[f64]) -> f64 {
    let n = linalg::norm(r);
    0.5 * n * n
}

pub fn levenberg_marquardt<R: Residual>(res: &mut R, x0: &[f64], domain: Domain, opts: &LmOptions) -> LmOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(domain, &mut x);
    let mut steps: Vec<f64> = Vec::new();
    let Some((mut r, mut jac)) = res.eval(&x) else {
        return LmOutcome { x, cost: f64::INFINITY, iterations: 0, recent_motion: 0.0, converged: false };
    };
    let mut cost = half_sq(&r);
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if cost <= opts.cost_floor {
            converged = true;
            break;
        }
        iterations += 1;
        let basis = match domain {
            Domain::Sphere { radius } => {
                let u: Vec<f64> = x.iter().map(|v| v / radius).collect();
                Some(linalg::complement_basis(&u))
            }
            Domain::Free => None,
        };
        let jt = match &basis {
            Some(b) => jac.matmul(b),
            None => jac.clone(),
        };
        let m = jt.cols();
        let mut colnorm: Vec<f64> = (0..m).map(|c| linalg::norm(&(0..jt.rows()).map(|i| jt[(i, c)]).collect::<Vec<_>>())).collect();
        let cmax = colnorm.iter().cloned().fold(0.0, f64::max);
        if cmax == 0.0 || !cmax.is_finite() {
            break;
        }
        colnorm.iter_mut().for_each(|c| *c = c.max(1e-12 * cmax));
        // Second-order effect of the retraction: along a tangent step d the cost
        // changes by an extra -0.5 * curv * |d|^2, with curv = x.J^T r / R^2.
        let curv = match domain {
            Domain::Sphere { radius } => {
                let jx: Vec<f64> = (0..jac.rows()).map(|i| linalg::dot(jac.row(i), &x)).collect();
                linalg::dot(&jx, &r) / (radius * radius)
            }
            Domain::Free => 0.0,
        };
        let damp: Vec<f64> = colnorm
            .iter()
            .map(|c| {
                let d2 = c * c * lambda;
                libm::sqrt(f64::max(d2 - curv, 0.25 * d2))
            })
            .collect();
        let Some(d) = linalg::damped_least_squares(&jt, &r, &damp) else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                break;
            }
            continue;
        };
        let delta: Vec<f64> = match &basis {
            Some(b) => (0..n).map(|i| linalg::dot(b.row(i), &d)).collect(),
            None => d.clone(),
        };
        let step_len = linalg::norm(&delta);
        let xn = linalg::norm(&x);
        let mut trial: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        project(domain, &mut trial);
        let predicted = {
            let jd: Vec<f64> = (0..jt.rows()).map(|i| linalg::dot(jt.row(i), &d)).collect();
            let after: Vec<f64> = r.iter().zip(&jd).map(|(a, b)| a + b).collect();
            let dn = linalg::norm(&d);
            cost - (half_sq(&after) - 0.5 * curv * dn * dn)
        };
        let evaluated = res.eval(&trial);
        let accepted = match evaluated {
            Some((rt, jtn)) => {
                let ct = half_sq(&rt);
                let gain = if predicted > 0.0 { (cost - ct) / predicted } else { -1.0 };
                if ct.is_finite() && ct < cost && gain > 0.0 {
                    let moved: f64 = linalg::norm(&x.iter().zip(&trial).map(|(a, b)| a - b).collect::<Vec<_>>());
                    steps.push(moved);
                    x = trial;
                    r = rt;
                    jac = jtn;
                    cost = ct;
                    let t = 2.0 * gain - 1.0;
                    lambda *= f64::max(1.0 / 3.0, 1.0 - t * t * t);
                    lambda = lambda.max(1e-15);
                    nu = 2.0;
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        if !accepted {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                converged = true;
                break;
            }
        } else if step_len <= opts.xtol * (opts.xtol + xn) {
            converged = true;
            break;
        }
    }
    let k = steps.len().saturating_sub(opts.motion_window);
    let recent_motion = steps[k..].iter().sum();
    LmOutcome { x, cost, iterations, recent_motion, converged }
}

/// Appends soft value targets `w * s * asinh((f_i - t_i) / s)` to a residual:
/// linear within `s` of the target, logarithmic beyond.
pub fn push_targets(r: &mut Vec<f64>, rows: &mut Vec<Vec<f64>>, values: &[f64], grads: &Mat, target: &[f64], w: f64, s: f64) {
    for i in 0..values.len() {
        let d = (values[i] - target[i]) / s;
        r.push(w * s * libm::asinh(d));
        let g = w / libm::sqrt(1.0 + d * d);
        rows.push(grads.row(i).iter().map(|v| v * g).collect());
    }
}

/// Builds a matrix from a leading block and extra rows.
pub fn stack_rows(top: &Mat, extra: Vec<Vec<f64>>) -> Mat {
    let cols = top.cols();
    let mut data = top.as_slice().to_vec();
    let rows = top.rows() + extra.len();
    for row in extra {
        debug_assert_eq!(row.len(), cols);
        data.extend(row);
    }
    Mat::from_vec(rows, cols, data)
}

/// Zero matrix helper used by residuals that have no Jacobian block yet.
pub fn zeros(rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, vec![0.0; rows * cols])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as residuals (1 - x, 10 (y - x^2)).
    struct Rosen;
    impl Residual for Rosen {
        fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)> {
            let r = vec![1.0 - x[0], 10.0 * (x[1] - x[0] * x[0])];
            let j = Mat::from_rows(&[vec![-1.0, 0.0], vec![-20.0 * x[0], 10.0]]);
            Some((r, j))
        }
    }

    /// Distance from a fixed point, restricted to the sphere.
    struct Nearest(Vec<f64>);
    impl Residual for Nearest {
        fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)> {
            let r = x.iter().zip(&self.0).map(|(a, b)| a - b).collect();
            Some((r, Mat::identity(x.len())))
        }
    }

    #[test]
    fn rosenbrock_free() {
        let out = levenberg_marquardt(&mut Rosen, &[-1.2, 1.0], Domain::Free, &LmOptions::default());
        assert!((out.x[0] - 1.0).abs() < 1e-10 && (out.x[1] - 1.0).abs() < 1e-10, "{out:?}");
    }

    #[test]
    fn nearest_point_on_sphere() {
        let target = vec![3.0, 4.0, 0.0];
        let out = levenberg_marquardt(
            &mut Nearest(target),
            &[0.0, -1.0, 1.0],
            Domain::Sphere { radius: 10.0 },
            &LmOptions::default(),
        );
        // cost differences below ~1e-16 of 12.5 are invisible in f64, so sqrt(eps) accuracy
        assert!((out.x[0] - 6.0).abs() < 1e-6 && (out.x[1] - 8.0).abs() < 1e-6, "{out:?}");
        assert!((linalg::norm(&out.x) - 10.0).abs() < 1e-12);
    }
}
