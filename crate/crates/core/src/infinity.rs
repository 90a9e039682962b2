//! Localization at infinity: the t-regularity gap in a chart, the Milnor-set
//! residual for Euclidean and weighted distance functions, and the singular
//! locus through maximal minors.

use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::chart::{canonical_sign, ChartMap};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::eval::MapEvaluator;
use crate::linalg::{self, Mat};
use crate::optimize::{levenberg_marquardt, Domain, LmOptions};
use crate::poly::Polynomial;
use crate::polymap::PolyMap;
use crate::regfuncs::kos_indicator;
use crate::residuals::MinorsResidual;
use crate::sampling::SphereSequence;
use crate::scanner::{cluster_values, ClusterKind, Fanout, ScanConfig, ValueCluster, Witness};

/// A point `[0 : u]` of the hyperplane at infinity together with a value `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAtInfinity {
    pub direction: Vec<f64>,
    pub value: Vec<f64>,
}

impl PointAtInfinity {
    /// Normalizes the direction and fixes its sign (first nonzero entry positive).
    pub fn new(direction: &[f64], value: &[f64]) -> Result<Self> {
        let r = linalg::norm(direction);
        if r == 0.0 || !r.is_finite() {
            return Err(Error::ZeroVector);
        }
        let mut d: Vec<f64> = direction.iter().map(|v| v / r).collect();
        canonical_sign(&mut d);
        Ok(PointAtInfinity { direction: d, value: value.to_vec() })
    }
}

/// The distance-like function whose level sets define the Milnor set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoSpec {
    Euclidean,
    /// `rho(x) = (sum |x_i|^{2 p_i})^{1/(2p)}` with `p = lcm(w)` and `p_i = p / w_i`.
    Weighted { weights: Vec<u32> },
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl RhoSpec {
    pub fn weighted(weights: Vec<u32>) -> Result<Self> {
        if weights.is_empty() || weights.contains(&0) {
            return Err(Error::Config("weights must be positive integers".into()));
        }
        Ok(RhoSpec::Weighted { weights })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let RhoSpec::Weighted { weights } = self {
            if weights.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: weights.len() });
            }
            if weights.contains(&0) {
                return Err(Error::Config("weights must be positive integers".into()));
            }
        }
        Ok(())
    }

    /// `p = lcm(w_1, ..., w_n)`; 1 for the Euclidean kind.
    pub fn lcm(&self) -> u64 {
        match self {
            RhoSpec::Euclidean => 1,
            RhoSpec::Weighted { weights } => weights.iter().fold(1u64, |l, &w| l / gcd(l, w as u64) * w as u64),
        }
    }

    /// The exponents `p_i = p / w_i` (all 1 for the Euclidean kind).
    pub fn exponents(&self, n: usize) -> Vec<u32> {
        match self {
            RhoSpec::Euclidean => vec![1; n],
            RhoSpec::Weighted { weights } => {
                let p = self.lcm();
                weights.iter().map(|&w| (p / w as u64) as u32).collect()
            }
        }
    }

    pub fn rho(&self, x: &[f64]) -> f64 {
        match self {
            RhoSpec::Euclidean => linalg::norm(x),
            RhoSpec::Weighted { .. } => {
                let p = self.lcm() as f64;
                let s: f64 = x.iter().zip(self.exponents(x.len())).map(|(v, e)| libm::pow(v.abs(), 2.0 * e as f64)).sum();
                libm::pow(s, 1.0 / (2.0 * p))
            }
        }
    }

    /// A vector parallel to `grad rho(x)`: `x` itself, or `p_i x_i^{2 p_i - 1}`.
    pub fn gradient_row(&self, x: &[f64]) -> Vec<f64> {
        match self {
            RhoSpec::Euclidean => x.to_vec(),
            RhoSpec::Weighted { .. } => x
                .iter()
                .zip(self.exponents(x.len()))
                .map(|(&v, e)| e as f64 * crate::poly::powi(v, 2 * e - 1))
                .collect(),
        }
    }

    pub fn gradient_row_dd(&self, x: &[Dd]) -> Vec<Dd> {
        match self {
            RhoSpec::Euclidean => x.to_vec(),
            RhoSpec::Weighted { .. } => {
                x.iter().zip(self.exponents(x.len())).map(|(&v, e)| v.powi(2 * e - 1).mul_f64(e as f64)).collect()
            }
        }
    }

    /// Diagonal of the Jacobian of [`RhoSpec::gradient_row`].
    pub fn gradient_jacobian_diag(&self, x: &[f64]) -> Vec<f64> {
        match self {
            RhoSpec::Euclidean => vec![1.0; x.len()],
            RhoSpec::Weighted { .. } => x
                .iter()
                .zip(self.exponents(x.len()))
                .map(|(&v, e)| (e * (2 * e - 1)) as f64 * crate::poly::powi(v, 2 * e - 2))
                .collect(),
        }
    }
}

/// Milnor-set residual at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilnorResidualEval {
    pub point: Vec<f64>,
    pub residual: f64,
    /// Numerical rank of the row-normalized stacked matrix `[Df; grad rho]`.
    pub stacked_rank_hint: usize,
}

/// Smallest singular value of the `p x (n-1)` block of `dF/dy` without the
/// `y_0` column.
pub fn t_gap(cm: &ChartMap, y: &[f64], t: &[f64]) -> Result<f64> {
    let parts = cm.chart_partials(y, t)?;
    Ok(gap_from_partials(&parts.dfdy))
}

pub(crate) fn gap_from_partials(dfdy: &Mat) -> f64 {
    let p = dfdy.rows();
    let n = dfdy.cols();
    let cols: Vec<usize> = (1..n).collect();
    let rows: Vec<usize> = (0..p).collect();
    linalg::sigma_min(&dfdy.select(&rows, &cols)).expect("n - 1 >= p")
}

/// `t_gap` at a source point `x`, in the chart `cm`, with `t = f(x)`.
pub fn t_gap_at(cm: &ChartMap, x: &[f64]) -> Result<f64> {
    let xr = cm.rotate(x);
    if xr[cm.chart_index() - 1] == 0.0 {
        return Err(Error::OnHyperplaneAtInfinity);
    }
    let jac = cm.base().jacobian_eval(x)?.matrix;
    Ok(gap_from_partials(&cm.partials_from(&xr, &jac)))
}

fn residual_from_rows(point: Vec<f64>, jac: &Mat, g: &[f64]) -> MilnorResidualEval {
    let p = jac.rows();
    let n = jac.cols();
    if (0..p).any(|i| jac.row(i).iter().all(|v| *v == 0.0)) {
        return MilnorResidualEval { point, residual: 0.0, stacked_rank_hint: p };
    }
    let mut rows = Vec::with_capacity(p + 1);
    for i in 0..p {
        let r = linalg::norm(jac.row(i));
        rows.push(jac.row(i).iter().map(|v| v / r).collect::<Vec<_>>());
    }
    let gn = linalg::norm(g);
    rows.push(g.iter().map(|v| v / gn).collect());
    let m = Mat::from_rows(&rows);
    let residual = linalg::sigma_min(&m).expect("p + 1 <= n");
    let sv = linalg::singular_values(&m);
    let rank = sv.iter().filter(|s| **s > 1e-10).count().min(if residual <= 1e-10 { p } else { p + 1 });
    debug_assert!(n > p);
    MilnorResidualEval { point, residual, stacked_rank_hint: rank }
}

/// Smallest singular value of the row-normalized `(p+1) x n` matrix
/// `[Df(x); grad rho(x)]`; 0 by convention when some gradient row vanishes.
/// The Jacobian is evaluated in double-double so that cancellation in the
/// partials does not dominate the residual.
pub fn milnor_residual(map: &PolyMap, x: &[f64], rho: &RhoSpec) -> Result<MilnorResidualEval> {
    if x.len() != map.n() {
        return Err(Error::DimensionMismatch { expected: map.n(), found: x.len() });
    }
    let xd: Vec<Dd> = x.iter().map(|&v| Dd::from_f64(v)).collect();
    milnor_residual_dd(map, &xd, rho)
}

/// [`milnor_residual`] at a double-double point.
pub fn milnor_residual_dd(map: &PolyMap, x: &[Dd], rho: &RhoSpec) -> Result<MilnorResidualEval> {
    if x.len() != map.n() {
        return Err(Error::DimensionMismatch { expected: map.n(), found: x.len() });
    }
    rho.validate(map.n())?;
    let point: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
    if point.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroVector);
    }
    let (_, jd) = map.evaluator().first_order_dd(x);
    let jac = Mat::from_vec(map.p(), map.n(), jd.into_iter().map(Dd::to_f64).collect());
    let g: Vec<f64> = rho.gradient_row_dd(x).into_iter().map(Dd::to_f64).collect();
    Ok(residual_from_rows(point, &jac, &g))
}

fn det_poly(m: &[Vec<Polynomial>], n_vars: usize) -> Polynomial {
    let k = m.len();
    if k == 0 {
        return Polynomial::constant(n_vars, BigRational::from_integer(1.into()));
    }
    if k == 1 {
        return m[0][0].clone();
    }
    let mut acc = Polynomial::zero(n_vars);
    for c in 0..k {
        if m[0][c].is_zero() {
            continue;
        }
        let sub: Vec<Vec<Polynomial>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, p)| p.clone()).collect()).collect();
        let term = &m[0][c] * &det_poly(&sub, n_vars);
        acc = if c % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}

/// All `C(n, p)` maximal minors of the Jacobian as exact polynomials, in
/// lexicographic order of the column subsets.
pub fn sing_minors(map: &PolyMap) -> Vec<Polynomial> {
    let jp = map.jacobian_poly();
    let n = map.n();
    linalg::combinations(n, map.p())
        .into_iter()
        .map(|cols| {
            let sub: Vec<Vec<Polynomial>> = jp.iter().map(|row| cols.iter().map(|&c| row[c].clone()).collect()).collect();
            det_poly(&sub, n)
        })
        .collect()
}

/// Samples `f(Sing f)`: local minimization of the squared minors from
/// `n_dirs * n_radii` starts, keeping points where the sum falls below
/// `eps_sing` and the descent has settled (escaping valleys, where the sum
/// only tends to 0 at infinity, keep moving and are rejected).
pub fn singular_values_estimate<F: Fanout>(map: &PolyMap, cfg: &ScanConfig, fanout: &F) -> Result<Vec<ValueCluster>> {
    cfg.validate(map.n())?;
    let minors = sing_minors(map);
    if minors.iter().any(|m| m.is_constant() && !m.is_zero()) {
        return Ok(Vec::new());
    }
    let n = map.n();
    let ev = MapEvaluator::first_order(n, &minors);
    let dirs = SphereSequence::new(n, cfg.seed, crate::scanner::STREAM_SINGULAR);
    let radii = cfg.radii_values();
    let r0 = radii[0];
    let nd = cfg.n_dirs;
    let opts = LmOptions { max_iter: cfg.opt_budget, xtol: 1e-15, cost_floor: 1e-60, motion_window: 10 };
    let found: Vec<Option<Witness>> = fanout.run(nd * radii.len(), |task| {
        let k = task / nd;
        let i = task % nd;
        let start_r = radii[k] / r0;
        let x0: Vec<f64> = dirs.direction(i).into_iter().map(|v| v * start_r).collect();
        let mut res = MinorsResidual { minors: &ev };
        let out = levenberg_marquardt(&mut res, &x0, Domain::Free, &opts);
        let sum = 2.0 * out.cost;
        let settled = out.recent_motion <= 1e-3 * (1.0 + linalg::norm(&out.x));
        // Near-critical valleys at infinity can push the minors below eps_sing
        // (they scale like |grad|^(2p)); the scale-free |x| nu stays large there.
        let nu_ok = || kos_indicator(map, &out.x).map_or(false, |k| k <= libm::sqrt(cfg.eps_sing));
        if sum < cfg.eps_sing && settled && nu_ok() {
            let value = map.eval(&out.x).ok()?;
            Some(Witness { point: out.x, radius: start_r, indicator: sum, value })
        } else {
            None
        }
    });
    let witnesses: Vec<Witness> = found.into_iter().flatten().collect();
    let samples: Vec<(Vec<f64>, f64)> = witnesses.iter().map(|w| (w.value.clone(), 1.0)).collect();
    let clusters = cluster_values(&samples, cfg.cluster_tol);
    Ok(clusters
        .into_iter()
        .map(|c| {
            let ws: Vec<Witness> = c.members.iter().map(|&m| witnesses[m].clone()).collect();
            ValueCluster::new(c.centroid, ClusterKind::Singular, ws, Vec::new())
        })
        .collect())
}

/// Newton refinement of a Milnor point in double-double precision.
///
/// Solves `Df^T phi - mu g(x) = 0`, `|x|^2 = R^2`, `|phi|^2 = 1` where `g` is
/// the (unnormalized) gradient direction of `rho`; residuals are evaluated in
/// double-double, corrections computed in `f64` (mixed-precision iterative
/// refinement). Returns the refined point and its Milnor residual.
pub fn polish_milnor(map: &PolyMap, x0: &[f64], radius: f64, rho: &RhoSpec, iterations: usize) -> (Vec<Dd>, MilnorResidualEval) {
    let n = map.n();
    let p = map.p();
    let ev = map.evaluator();
    let mut x: Vec<Dd> = x0.iter().map(|&v| Dd::from_f64(v)).collect();
    // initial multipliers from the f64 Lagrange conditions
    let jac = ev.jacobian(x0);
    let g = rho.gradient_row(x0);
    let gn = linalg::norm(&g);
    let gh: Vec<f64> = g.iter().map(|v| v / gn).collect();
    let mut jp = jac.clone();
    for i in 0..p {
        let c = linalg::dot(jac.row(i), &gh);
        for j in 0..n {
            jp[(i, j)] -= c * gh[j];
        }
    }
    let phi0 = linalg::min_left_singular_vector(&jp, None);
    let mu0 = (0..n).map(|j| (0..p).map(|i| jac[(i, j)] * phi0[i]).sum::<f64>() * g[j]).sum::<f64>() / (gn * gn);
    let mut phi: Vec<Dd> = phi0.iter().map(|&v| Dd::from_f64(v)).collect();
    let mut mu = Dd::from_f64(mu0);

    let eval_res = |x: &[Dd], phi: &[Dd], mu: Dd| -> Vec<f64> {
        let (_, jd) = ev.first_order_dd(x);
        let gd = rho.gradient_row_dd(x);
        let mut out = Vec::with_capacity(n + 2);
        for j in 0..n {
            let mut acc = Dd::ZERO;
            for i in 0..p {
                acc = acc + jd[i * n + j] * phi[i];
            }
            out.push((acc - mu * gd[j]).to_f64());
        }
        let mut xx = Dd::ZERO;
        for v in x {
            xx = xx + *v * *v;
        }
        out.push(((xx - Dd::from_f64(radius) * Dd::from_f64(radius)).to_f64()) / (2.0 * radius));
        let mut pp = Dd::ZERO;
        for v in phi {
            pp = pp + *v * *v;
        }
        out.push((pp - Dd::ONE).to_f64() * 0.5);
        out
    };

    let score = |x: &[Dd]| milnor_residual_dd(map, x, rho).map(|e| e.residual).unwrap_or(f64::INFINITY);
    let mut best_x = x.clone();
    let mut best = score(&x);
    let mut gres = eval_res(&x, &phi, mu);
    for _ in 0..iterations {
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
        let (_, jac, hs) = ev.second_order(&xf);
        let phif: Vec<f64> = phi.iter().map(|v| v.to_f64()).collect();
        let muf = mu.to_f64();
        let gf = rho.gradient_row(&xf);
        let dg = rho.gradient_jacobian_diag(&xf);
        let gnorm = linalg::norm(&gf).max(f64::MIN_POSITIVE);
        // unknown scaling: x by R, phi by 1, mu by 1/|g|
        let cols = n + p + 1;
        let mut a = Mat::zeros(n + 2, cols);
        for r in 0..n {
            for c in 0..n {
                let mut h = 0.0;
                for (k, hk) in hs.iter().enumerate() {
                    h += phif[k] * hk[(r, c)];
                }
                if r == c {
                    h -= muf * dg[r];
                }
                a[(r, c)] = h * radius;
            }
            for k in 0..p {
                a[(r, n + k)] = jac[(k, r)];
            }
            a[(r, n + p)] = -gf[r] / gnorm;
        }
        for c in 0..n {
            a[(n, c)] = xf[c];
        }
        for k in 0..p {
            a[(n + 1, n + k)] = phif[k];
        }
        let rhs: Vec<f64> = gres.iter().map(|v| -v).collect();
        let Some(d) = linalg::min_norm_solve(&a, &rhs) else { break };
        let nx: Vec<Dd> = x.iter().zip(&d[..n]).map(|(v, dv)| *v + Dd::from_f64(dv * radius)).collect();
        let nphi: Vec<Dd> = phi.iter().zip(&d[n..n + p]).map(|(v, dv)| *v + Dd::from_f64(*dv)).collect();
        let nmu = mu + Dd::from_f64(d[n + p] / gnorm);
        let ng = eval_res(&nx, &nphi, nmu);
        if !(linalg::norm(&ng) < linalg::norm(&gres)) {
            break;
        }
        x = nx;
        phi = nphi;
        mu = nmu;
        gres = ng;
        let s = score(&x);
        if s < best {
            best = s;
            best_x = x.clone();
        }
    }
    let eval = milnor_residual_dd(map, &best_x, rho).unwrap_or(MilnorResidualEval {
        point: best_x.iter().map(|v| v.to_f64()).collect(),
        residual: f64::INFINITY,
        stacked_rank_hint: 0,
    });
    (best_x, eval)
}

/// `true` when every polynomial in the list is identically zero.
pub fn all_zero(polys: &[Polynomial]) -> bool {
    polys.iter().all(Polynomial::is_zero)
}

/// Exact check that every minor vanishes at a rational point.
pub fn minors_vanish_at(minors: &[Polynomial], x: &[BigRational]) -> Result<bool> {
    for m in minors {
        if !m.eval_exact(x)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymap::int_map;

    fn broughton() -> PolyMap {
        int_map("b", 2, &[&[(1, &[1, 0]), (1, &[2, 1])]]).unwrap()
    }

    #[test]
    fn gap_examples() {
        // witness curve x = -1/(2s), y = s in chart U_2: gap = s (1 + 2xy) = 0
        let cm = ChartMap::new(broughton(), 2).unwrap();
        let s = 64.0;
        let x = [-1.0 / (2.0 * s), s];
        assert_eq!(t_gap_at(&cm, &x).unwrap(), 0.0);
        // f = x_1 in chart U_2: gap = |x_2|
        let lin = int_map("l", 2, &[&[(1, &[1, 0])]]).unwrap();
        let cm = ChartMap::new(lin, 2).unwrap();
        let y = cm.to_chart(&[3.0, 250.0]).unwrap();
        assert!((t_gap(&cm, &y, &[3.0]).unwrap() - 250.0).abs() < 1e-9);
    }

    #[test]
    fn milnor_residual_examples() {
        let sq = int_map("q", 3, &[&[(1, &[2, 0, 0]), (1, &[0, 2, 0]), (1, &[0, 0, 2])]]).unwrap();
        assert!(milnor_residual(&sq, &[1.0, -2.0, 0.5], &RhoSpec::Euclidean).unwrap().residual < 1e-15);
        let f = broughton();
        let off = milnor_residual(&f, &[1.0, 1.0], &RhoSpec::Euclidean).unwrap();
        assert!(off.residual > 0.1 && off.stacked_rank_hint == 2);
        let on = milnor_residual(&f, &[1.0, 0.5], &RhoSpec::Euclidean).unwrap();
        assert!(on.residual < 1e-10);
        assert!(milnor_residual(&f, &[0.0, 0.0], &RhoSpec::Euclidean).is_err());
        // invariance under f -> 2f
        let two = BigRational::from_integer(2.into());
        let g = f.scaled(&two);
        let a = milnor_residual(&f, &[0.3, -1.7], &RhoSpec::Euclidean).unwrap().residual;
        let b = milnor_residual(&g, &[0.3, -1.7], &RhoSpec::Euclidean).unwrap().residual;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn weighted_rho_quantities() {
        let rho = RhoSpec::weighted(vec![1, 2]).unwrap();
        assert_eq!(rho.lcm(), 2);
        assert_eq!(rho.exponents(2), vec![2, 1]);
        assert_eq!(rho.gradient_row(&[2.0, 3.0]), vec![16.0, 3.0]);
        // rho = (x^4 + y^2)^(1/4)
        assert!((rho.rho(&[1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((rho.rho(&[0.0, 4.0]) - 2.0).abs() < 1e-15);
        assert!(RhoSpec::weighted(vec![1, 0]).is_err());
        assert!(rho.validate(3).is_err());
        // quasihomogeneous x^4 - y^2 is transversal to the weighted spheres off the axes
        let f = int_map("qh", 2, &[&[(1, &[4, 0]), (-1, &[0, 2])]]).unwrap();
        assert!(milnor_residual(&f, &[1.3, 0.7], &rho).unwrap().residual > 0.1);
    }

    #[test]
    fn minors_examples() {
        let ex = int_map("e", 3, &[&[(1, &[2, 0, 0])], &[(1, &[1, 1, 0])]]).unwrap();
        let m = sing_minors(&ex);
        let two_x2 = Polynomial::from_int_terms(3, &[(2, &[2, 0, 0])]).unwrap();
        assert_eq!(m, vec![two_x2, Polynomial::zero(3), Polynomial::zero(3)]);
        let b = sing_minors(&broughton());
        assert_eq!(b, vec![broughton().components()[0].partial(0).unwrap(), broughton().components()[0].partial(1).unwrap()]);
        let lin = int_map("l", 3, &[&[(2, &[1, 0, 0]), (1, &[0, 1, 0])], &[(1, &[0, 0, 1])]]).unwrap();
        let m = sing_minors(&lin);
        assert!(m.iter().all(|p| p.is_constant()));
        assert_eq!(m[0].coefficient(&[0, 0, 0]), BigRational::from_integer(0.into()));
        assert_eq!(m[1].coefficient(&[0, 0, 0]), BigRational::from_integer(2.into()));
        assert_eq!(m[2].coefficient(&[0, 0, 0]), BigRational::from_integer(1.into()));
    }

    #[test]
    fn polish_reaches_double_double_milnor_point() {
        // near x = -1/(2y), y = 1e6 the f64 residual is stuck near 1e-4
        let f = broughton();
        let r = 1.0e6;
        let y = r;
        let x0 = [-1.0 / (2.0 * y), y];
        let before = milnor_residual(&f, &x0, &RhoSpec::Euclidean).unwrap().residual;
        let (_, after) = polish_milnor(&f, &x0, r, &RhoSpec::Euclidean, 12);
        assert!(after.residual < 1e-9, "{before} -> {}", after.residual);
    }
}
