//! Least-squares residuals whose zeros (or small values) mark the points the
//! scans look for. Covectors `phi` are eliminated: at every evaluation they
//! are set to the exact minimizer, and the Jacobian treats them as constant.

use alloc::vec::Vec;

use crate::chart::ChartMap;
use crate::eval::MapEvaluator;
use crate::infinity::RhoSpec;
use crate::linalg::{self, Mat};
use crate::optimize::{push_targets, stack_rows, Residual};
use crate::polymap::PolyMap;

/// Soft value target appended to a residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub value: Vec<f64>,
    pub weight: f64,
    /// Distance from the target below which the pull is linear.
    pub scale: f64,
}

impl Target {
    pub fn new(value: Vec<f64>, weight: f64) -> Self {
        Target { value, weight, scale: 1.0 }
    }
}

fn weighted_hessian(hs: &[Mat], phi: &[f64], scale: f64) -> Mat {
    let n = hs[0].rows();
    let mut out = Mat::zeros(n, n);
    for (h, &w) in hs.iter().zip(phi) {
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += scale * w * h[(i, j)];
            }
        }
    }
    out
}

fn mat_t_vec(a: &Mat, v: &[f64]) -> Vec<f64> {
    (0..a.cols()).map(|j| (0..a.rows()).map(|i| a[(i, j)] * v[i]).sum()).collect()
}

/// `R * Df(x)^T phi` on the sphere of radius `R`: its norm is the KOS indicator.
pub struct KosResidual<'a> {
    pub map: &'a PolyMap,
    pub radius: f64,
    pub target: Option<Target>,
    phi: Option<Vec<f64>>,
}

impl<'a> KosResidual<'a> {
    pub fn new(map: &'a PolyMap, radius: f64, target: Option<Target>) -> Self {
        KosResidual { map, radius, target, phi: None }
    }
}

impl Residual for KosResidual<'_> {
    fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)> {
        let (vals, jac, hs) = self.map.evaluator().second_order(x);
        let phi = linalg::min_left_singular_vector(&jac, self.phi.as_deref());
        let mut r: Vec<f64> = mat_t_vec(&jac, &phi).into_iter().map(|v| v * self.radius).collect();
        let top = weighted_hessian(&hs, &phi, self.radius);
        let mut extra = Vec::new();
        if let Some(t) = &self.target {
            push_targets(&mut r, &mut extra, &vals, &jac, &t.value, t.weight, t.scale);
        }
        self.phi = Some(phi);
        if r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((r, stack_rows(&top, extra)))
    }
}

/// Lagrange residual `Df^T phi - mu g_hat` for the Milnor set of `(f, rho)`,
/// with `phi` and `mu` eliminated; its norm is the smallest singular value of
/// `Df` restricted to the orthogonal complement of `grad rho`.
pub struct LagrangeResidual<'a> {
    pub map: &'a PolyMap,
    pub rho: &'a RhoSpec,
    pub target: Option<Target>,
    phi: Option<Vec<f64>>,
}

impl<'a> LagrangeResidual<'a> {
    pub fn new(map: &'a PolyMap, rho: &'a RhoSpec, target: Option<Target>) -> Self {
        LagrangeResidual { map, rho, target, phi: None }
    }
}

impl Residual for LagrangeResidual<'_> {
    fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)> {
        let n = x.len();
        let (vals, jac, hs) = self.map.evaluator().second_order(x);
        let g = self.rho.gradient_row(x);
        let gn = linalg::norm(&g);
        if gn == 0.0 || !gn.is_finite() {
            return None;
        }
        let gh: Vec<f64> = g.iter().map(|v| v / gn).collect();
        // Df P with P = I - g_hat g_hat^T
        let mut jp = jac.clone();
        for i in 0..jac.rows() {
            let c = linalg::dot(jac.row(i), &gh);
            for j in 0..n {
                jp[(i, j)] -= c * gh[j];
            }
        }
        let phi = linalg::min_left_singular_vector(&jp, self.phi.as_deref());
        let dfphi = mat_t_vec(&jac, &phi);
        let mu = linalg::dot(&dfphi, &gh);
        let mut r: Vec<f64> = dfphi.iter().zip(&gh).map(|(a, b)| a - mu * b).collect();
        // r = P v with v = Df^T phi, so dr = P H dx - mu dg_hat - g_hat (v . dg_hat),
        // where dg_hat = P Dg dx / |g| and H = sum phi_i Hess f_i
        let dg = self.rho.gradient_jacobian_diag(x);
        let h = weighted_hessian(&hs, &phi, 1.0);
        let mut dgh = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let proj = if i == j { 1.0 } else { 0.0 } - gh[i] * gh[j];
                dgh[(i, j)] = proj * dg[j] / gn;
            }
        }
        let vdg: Vec<f64> = (0..n).map(|j| (0..n).map(|i| dfphi[i] * dgh[(i, j)]).sum()).collect();
        let mut top = Mat::zeros(n, n);
        for j in 0..n {
            let ghh: f64 = (0..n).map(|l| gh[l] * h[(l, j)]).sum();
            for i in 0..n {
                top[(i, j)] = h[(i, j)] - gh[i] * ghh - mu * dgh[(i, j)] - gh[i] * vdg[j];
            }
        }
        let mut extra = Vec::new();
        if let Some(t) = &self.target {
            push_targets(&mut r, &mut extra, &vals, &jac, &t.value, t.weight, t.scale);
        }
        self.phi = Some(phi);
        if r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((r, stack_rows(&top, extra)))
    }
}

/// `x'_k E^T Df^T phi`, the covector form of the t-regularity gap in a chart:
/// `E` spans the non-chart rotated axes and `x'_k` is the chart coordinate.
/// An optional cone term keeps the point near the axis direction `u`.
pub struct TgapResidual<'a> {
    pub chart: &'a ChartMap,
    pub target: Option<Target>,
    /// `(u, weight / (R * half_angle))`: residual `weight * (x - (x.u)u) / (R half_angle)`.
    pub cone: Option<(Vec<f64>, f64)>,
    phi: Option<Vec<f64>>,
    e: Mat,
    qk: Vec<f64>,
}

impl<'a> TgapResidual<'a> {
    pub fn new(chart: &'a ChartMap, target: Option<Target>, cone: Option<(Vec<f64>, f64)>) -> Self {
        let q = chart.rotation_f64();
        let n = q.rows();
        let k = chart.chart_index() - 1;
        let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        // E = Q^T restricted to the non-chart columns: E[j][c] = Q[others[c]][j]
        let mut e = Mat::zeros(n, n - 1);
        for j in 0..n {
            for (c, &i) in others.iter().enumerate() {
                e[(j, c)] = q[(i, j)];
            }
        }
        TgapResidual { chart, target, cone, phi: None, e, qk: q.row(k).to_vec() }
    }
}

impl Residual for TgapResidual<'_> {
    fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)> {
        let n = x.len();
        let (vals, jac, hs) = self.chart.base().evaluator().second_order(x);
        let xk = linalg::dot(&self.qk, x);
        let je = jac.matmul(&self.e);
        let phi = linalg::min_left_singular_vector(&je, self.phi.as_deref());
        let v = mat_t_vec(&je, &phi); // E^T Df^T phi, length n-1
        let mut r: Vec<f64> = v.iter().map(|a| a * xk).collect();
        let h = weighted_hessian(&hs, &phi, 1.0);
        let eth = self.e.transpose().matmul(&h);
        let mut top = Mat::zeros(n - 1, n);
        for a in 0..n - 1 {
            for j in 0..n {
                top[(a, j)] = v[a] * self.qk[j] + xk * eth[(a, j)];
            }
        }
        let mut extra = Vec::new();
        if let Some(t) = &self.target {
            push_targets(&mut r, &mut extra, &vals, &jac, &t.value, t.weight, t.scale);
        }
        if let Some((u, w)) = &self.cone {
            let xu = linalg::dot(x, u);
            for i in 0..n {
                r.push(w * (x[i] - xu * u[i]));
                extra.push((0..n).map(|j| w * (if i == j { 1.0 } else { 0.0 } - u[i] * u[j])).collect());
            }
        }
        self.phi = Some(phi);
        if r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((r, stack_rows(&top, extra)))
    }
}

/// `f(x) - t`: moves a start onto the fiber over `t` before the indicator
/// descents, which would otherwise only feel a saturated pull from far away.
pub struct FiberResidual<'a> {
    pub map: &'a PolyMap,
    pub target: &'a [f64],
}

impl Residual for FiberResidual<'_> {
    fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)> {
        let ev = self.map.evaluator();
        let r: Vec<f64> = ev.value(x).iter().zip(self.target).map(|(a, b)| a - b).collect();
        if r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((r, ev.jacobian(x)))
    }
}

/// The vector of maximal minors of `Df` as polynomials, for locating `Sing f`.
pub struct MinorsResidual<'a> {
    pub minors: &'a MapEvaluator,
}

impl Residual for MinorsResidual<'_> {
    fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, Mat)> {
        let r = self.minors.value(x);
        if r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((r, self.minors.jacobian(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{levenberg_marquardt, Domain, LmOptions};
    use crate::polymap::int_map;
    use alloc::vec;

    #[test]
    fn kos_residual_norm_is_indicator() {
        let f = int_map("e", 3, &[&[(1, &[2, 0, 0])], &[(1, &[1, 1, 0])]]).unwrap();
        let x = [1.0, 2.0, 2.0];
        let (r, _) = KosResidual::new(&f, 3.0, None).eval(&x).unwrap();
        let k = crate::regfuncs::kos_indicator(&f, &x).unwrap();
        assert!((linalg::norm(&r) - k).abs() < 1e-12 * k);
    }

    #[test]
    fn kos_descent_finds_broughton_valley() {
        let f = int_map("b", 2, &[&[(1, &[1, 0]), (1, &[2, 1])]]).unwrap();
        let r = 1.0e3;
        let mut res = KosResidual::new(&f, r, Some(Target::new(vec![0.0], 1.0)));
        let out = levenberg_marquardt(&mut res, &[0.3 * r, 0.95 * r], Domain::Sphere { radius: r }, &LmOptions::default());
        let k = crate::regfuncs::kos_indicator(&f, &out.x).unwrap();
        assert!(k < 1e-2, "{out:?} {k}");
        assert!(f.eval(&out.x).unwrap()[0].abs() < 1e-2);
    }

    #[test]
    fn lagrange_residual_vanishes_on_milnor_set() {
        // x + x^2 y at (1, 1/2): y + 2 x y^2 - x^3 = 0
        let f = int_map("b", 2, &[&[(1, &[1, 0]), (1, &[2, 1])]]).unwrap();
        let rho = RhoSpec::Euclidean;
        let (r, _) = LagrangeResidual::new(&f, &rho, None).eval(&[1.0, 0.5]).unwrap();
        assert!(linalg::norm(&r) < 1e-15);
        let (r, _) = LagrangeResidual::new(&f, &rho, None).eval(&[1.0, 1.0]).unwrap();
        assert!(linalg::norm(&r) > 0.1);
    }

    #[test]
    fn tgap_residual_matches_chart_gap() {
        let f = int_map("e", 3, &[&[(1, &[2, 0, 0])], &[(1, &[1, 1, 0]), (1, &[0, 0, 1])]]).unwrap();
        let cm = ChartMap::for_direction(f.clone(), &[0.2, 0.3, 0.9]).unwrap();
        let x = [1.5, 2.0, 9.0];
        let (r, _) = TgapResidual::new(&cm, None, None).eval(&x).unwrap();
        let y = cm.to_chart(&x).unwrap();
        let t = f.eval(&x).unwrap();
        let gap = crate::infinity::t_gap(&cm, &y, &t).unwrap();
        assert!((linalg::norm(&r) - gap).abs() < 1e-10 * gap, "{} {gap}", linalg::norm(&r));
    }

    #[test]
    fn residual_jacobians_match_finite_differences() {
        // p = 1, so the eliminated covector is locally constant and the
        // Jacobians are exact
        let f = int_map("c", 3, &[&[(1, &[2, 0, 0]), (3, &[0, 1, 1]), (-1, &[1, 1, 1])]]).unwrap();
        let rho = RhoSpec::Weighted { weights: vec![1, 2, 1] };
        let cm = ChartMap::for_direction(f.clone(), &[0.1, 0.7, 0.7]).unwrap();
        let x = [0.7, -1.3, 2.1];
        let tg = Some(Target::new(vec![0.5], 0.7));
        let mut res: Vec<alloc::boxed::Box<dyn Residual>> = vec![
            alloc::boxed::Box::new(KosResidual::new(&f, 2.0, tg.clone())),
            alloc::boxed::Box::new(LagrangeResidual::new(&f, &rho, tg.clone())),
            alloc::boxed::Box::new(TgapResidual::new(&cm, tg.clone(), Some((vec![0.0, 0.6, 0.8], 0.3)))),
        ];
        for r in res.iter_mut() {
            let (_, j) = r.eval(&x).unwrap();
            for k in 0..3 {
                let h = 1e-6;
                let mut xp = x;
                xp[k] += h;
                let mut xm = x;
                xm[k] -= h;
                let (rp, _) = r.eval(&xp).unwrap();
                let (rm, _) = r.eval(&xm).unwrap();
                for i in 0..rp.len() {
                    let fd = (rp[i] - rm[i]) / (2.0 * h);
                    assert!((fd - j[(i, k)]).abs() <= 1e-6 * (1.0 + fd.abs()), "row {i} col {k}: {fd} vs {}", j[(i, k)]);
                }
            }
        }
    }
}
