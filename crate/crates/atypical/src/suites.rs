//! Property suites run by the corpus: each compares a library quantity with an
//! independent computation (finite differences, grid minimization, exact
//! rational arithmetic) and records the raw discrepancy.

use atypical_core::chart::ChartMap;
use atypical_core::infinity::t_gap_at;
use atypical_core::linalg::{combinations, Mat};
use atypical_core::poly::rational_to_f64;
use atypical_core::regfuncs::{kos_indicator, kuo_kappa, malgrange_indicator, rabier_nu};
use atypical_core::sampling::{task_rng, SphereSequence};
use atypical_core::scanner::fit_slope;
use atypical_core::{Fanout, PolyMap};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mapfile::parse_rational;

/// Largest normwise relative error of `chart_partials` against central
/// differences, over the rows of the Jacobian of `F(y, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialsCheck {
    pub points: usize,
    pub max_rel_err: f64,
}

fn row_rel_err(exact: &[f64], approx: &[f64]) -> f64 {
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = exact.iter().zip(approx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

/// Random chart points with `|y_0|` log-uniform in `[1e-3, 1]`, other chart
/// coordinates and `t` uniform in `[-1, 1]`, in the chart `U_n`.
pub fn chart_partials_check<F: Fanout>(map: &PolyMap, points: usize, seed: u64, stream: u64, fanout: &F) -> PartialsCheck {
    let n = map.n();
    let p = map.p();
    let cm = ChartMap::new(map.clone(), n).expect("chart index n is valid");
    let h_rule = f64::EPSILON.sqrt();
    let errs = fanout.run(points, |k| {
        let mut rng = task_rng(seed, stream.wrapping_mul(1 << 20).wrapping_add(k as u64));
        let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        y[0] = sign * 10f64.powf(rng.gen_range(-3.0..=0.0));
        let t: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let parts = cm.chart_partials(&y, &t).expect("y0 is nonzero");
        let mut fd_y = Mat::zeros(p, n);
        for i in 0..n {
            // y0 can be as small as 1e-3, so its step scales with |y0| alone
            let h = h_rule * if i == 0 { y[0].abs() } else { y[i].abs().max(1.0) };
            let (mut yp, mut ym) = (y.clone(), y.clone());
            yp[i] += h;
            ym[i] -= h;
            let (fp, fm) = (cm.eval(&yp, &t).unwrap(), cm.eval(&ym, &t).unwrap());
            for j in 0..p {
                fd_y[(j, i)] = (fp[j] - fm[j]) / (yp[i] - ym[i]);
            }
        }
        let mut fd_t = Mat::zeros(p, p);
        for l in 0..p {
            let h = h_rule * t[l].abs().max(1.0);
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp[l] += h;
            tm[l] -= h;
            let (fp, fm) = (cm.eval(&y, &tp).unwrap(), cm.eval(&y, &tm).unwrap());
            for j in 0..p {
                fd_t[(j, l)] = (fp[j] - fm[j]) / (tp[l] - tm[l]);
            }
        }
        // rows of the full Jacobian of F(y, t); differences in t alone are
        // swamped by cancellation against |f| when |y0| is small
        (0..p)
            .map(|j| {
                let exact: Vec<f64> = parts.dfdy.row(j).iter().chain(parts.dfdt.row(j)).copied().collect();
                let approx: Vec<f64> = fd_y.row(j).iter().chain(fd_t.row(j)).copied().collect();
                row_rel_err(&exact, &approx)
            })
            .fold(0.0f64, f64::max)
    });
    PartialsCheck { points, max_rel_err: errs.into_iter().fold(0.0, f64::max) }
}

pub const SEQUENCE_RADII: [f64; 4] = [1e2, 1e3, 1e4, 1e5];

/// Agreement of the decay classification of `kos_indicator` and `t_gap`
/// along sequences `R_k u + b` with `u` on the sphere and `b` in `[-1, 1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovanishingCheck {
    pub sequences: usize,
    pub agreements: usize,
    pub fraction: f64,
    /// `(kos slope, t_gap slope)` of every sequence classified differently.
    pub disagreements: Vec<(Option<f64>, Option<f64>)>,
    /// Whether every disagreement has both slopes within a factor 10 of the threshold.
    pub disagreements_near_threshold: bool,
    /// For `p = 1`: largest pointwise relative difference between the
    /// Malgrange and KOS indicators on the sequence points.
    pub malgrange_max_rel_err: Option<f64>,
}

fn log_slope(radii: &[f64], values: &[f64]) -> (Option<f64>, bool) {
    if values.iter().any(|v| *v == 0.0) {
        return (None, true);
    }
    let pts: Vec<(f64, f64)> = radii.iter().zip(values).map(|(r, v)| (r.ln(), v.ln())).collect();
    (fit_slope(&pts), false)
}

pub fn covanishing_check<F: Fanout>(
    map: &PolyMap,
    sequences: usize,
    threshold: f64,
    seed: u64,
    stream: u64,
    fanout: &F,
) -> CovanishingCheck {
    let n = map.n();
    let dirs = SphereSequence::new(n, seed, stream);
    let rows = fanout.run(sequences, |k| {
        let u = dirs.direction(k);
        let mut rng = task_rng(seed, stream.wrapping_mul(1 << 20).wrapping_add(k as u64));
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let cm = ChartMap::for_direction(map.clone(), &u).expect("unit direction");
        let mut kos = Vec::new();
        let mut gap = Vec::new();
        let mut malg_err: f64 = 0.0;
        for &r in &SEQUENCE_RADII {
            let x: Vec<f64> = u.iter().zip(&b).map(|(ui, bi)| r * ui + bi).collect();
            let k_ind = kos_indicator(map, &x).expect("dimensions match");
            kos.push(k_ind);
            gap.push(t_gap_at(&cm, &x).expect("chart coordinate is of order R"));
            if map.p() == 1 {
                let m = malgrange_indicator(map, &x).expect("dimensions match").finite().unwrap_or(f64::INFINITY);
                let e = if k_ind == 0.0 { m.abs() } else { (m - k_ind).abs() / k_ind };
                malg_err = malg_err.max(e);
            }
        }
        let (ks, kv) = log_slope(&SEQUENCE_RADII, &kos);
        let (gs, gv) = log_slope(&SEQUENCE_RADII, &gap);
        let decays = |s: Option<f64>, v: bool| v || matches!(s, Some(s) if s <= threshold);
        (ks, gs, decays(ks, kv) == decays(gs, gv), malg_err)
    });
    let agreements = rows.iter().filter(|r| r.2).count();
    let disagreements: Vec<(Option<f64>, Option<f64>)> = rows.iter().filter(|r| !r.2).map(|r| (r.0, r.1)).collect();
    let (lo, hi) = (threshold.min(threshold * 10.0).min(threshold / 10.0), threshold.max(threshold * 10.0).max(threshold / 10.0));
    let near = |s: Option<f64>| s.is_none_or(|s| lo <= s && s <= hi);
    CovanishingCheck {
        sequences,
        agreements,
        fraction: if sequences == 0 { 1.0 } else { agreements as f64 / sequences as f64 },
        disagreements_near_threshold: disagreements.iter().all(|d| near(d.0) && near(d.1)),
        disagreements,
        malgrange_max_rel_err: (map.p() == 1).then(|| rows.iter().map(|r| r.3).fold(0.0, f64::max)),
    }
}

/// `min_{|phi| = 1} |A^T phi|` by a grid over the unit sphere of `R^p`
/// (`p <= 3`), refined by a compass search on the angles.
pub fn nu_grid_oracle(a: &Mat) -> f64 {
    let p = a.rows();
    let q = |phi: &[f64]| -> f64 {
        (0..a.cols()).map(|c| (0..p).map(|r| phi[r] * a[(r, c)]).sum::<f64>().powi(2)).sum()
    };
    let sphere = |ang: &[f64]| -> Vec<f64> {
        match p {
            1 => vec![1.0],
            2 => vec![ang[0].cos(), ang[0].sin()],
            _ => vec![ang[0].sin() * ang[1].cos(), ang[0].sin() * ang[1].sin(), ang[0].cos()],
        }
    };
    let best_of = |ang: &[f64]| q(&sphere(ang));
    let (mut ang, steps) = match p {
        1 => return q(&[1.0]).sqrt(),
        2 => {
            let m = 3600;
            let k = (0..m).map(|i| std::f64::consts::PI * i as f64 / m as f64);
            let a0 = k.min_by(|x, y| best_of(&[*x]).total_cmp(&best_of(&[*y]))).unwrap();
            (vec![a0], vec![std::f64::consts::PI / m as f64])
        }
        3 => {
            let (mt, mp) = (180, 720);
            let mut best = (f64::INFINITY, vec![0.0, 0.0]);
            for i in 0..=mt {
                for j in 0..mp {
                    let g = vec![
                        std::f64::consts::FRAC_PI_2 * i as f64 / mt as f64,
                        2.0 * std::f64::consts::PI * j as f64 / mp as f64,
                    ];
                    let v = best_of(&g);
                    if v < best.0 {
                        best = (v, g);
                    }
                }
            }
            (best.1, vec![std::f64::consts::FRAC_PI_2 / mt as f64, 2.0 * std::f64::consts::PI / mp as f64])
        }
        _ => panic!("grid oracle supports p <= 3"),
    };
    let mut step = steps;
    let mut cur = best_of(&ang);
    while step.iter().any(|s| *s > 1e-13) {
        let mut moved = false;
        for d in 0..ang.len() {
            for sgn in [1.0, -1.0] {
                let mut trial = ang.clone();
                trial[d] += sgn * step[d];
                let v = best_of(&trial);
                if v < cur {
                    cur = v;
                    ang = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    cur.max(0.0).sqrt()
}

fn det_exact(m: &[Vec<BigRational>]) -> BigRational {
    let k = m.len();
    let mut a = m.to_vec();
    let mut det = BigRational::one();
    for c in 0..k {
        let Some(piv) = (c..k).find(|&r| !a[r][c].is_zero()) else {
            return BigRational::zero();
        };
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c].clone();
        for r in c + 1..k {
            let f = &a[r][c] / &a[c][c];
            for j in c..k {
                let v = &a[c][j] * &f;
                a[r][j] -= v;
            }
        }
    }
    det
}

/// All `p x p` minors of an exact matrix.
pub fn exact_maximal_minors(a: &[Vec<BigRational>]) -> Vec<BigRational> {
    let p = a.len();
    let n = a.first().map_or(0, |r| r.len());
    combinations(n, p)
        .into_iter()
        .map(|cols| det_exact(&a.iter().map(|r| cols.iter().map(|&c| r[c].clone()).collect()).collect::<Vec<_>>()))
        .collect()
}

/// Random-matrix checks of `rabier_nu` against the grid oracle, and of the
/// co-vanishing of `nu`, `kappa` and the exact maximal minors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabierCheck {
    pub matrices: usize,
    /// Largest `|nu_svd - nu_grid| / (1 + nu_svd)`.
    pub max_scaled_discrepancy: f64,
    pub covanishing_cases: usize,
    /// Cases where `nu ~ 0`, `kappa ~ 0` and "all minors are 0" did not agree.
    pub covanishing_failures: usize,
}

/// Numerical zero used for `nu` and `kappa` on integer matrices.
pub const NUMERICAL_ZERO: f64 = 1e-12;

pub fn rabier_check<F: Fanout>(matrices: usize, covanishing_cases: usize, seed: u64, stream: u64, fanout: &F) -> RabierCheck {
    let disc = fanout.run(matrices, |k| {
        let mut rng = task_rng(seed, stream.wrapping_mul(1 << 20).wrapping_add(k as u64));
        let p = rng.gen_range(1..=3usize);
        let n = rng.gen_range(p..=p + 2);
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                let s = 10f64.powf(rng.gen_range(-2.0..=2.0));
                (0..n).map(|_| s * rng.gen_range(-1.0..=1.0)).collect()
            })
            .collect();
        let a = Mat::from_rows(&rows);
        let nu = rabier_nu(&a).expect("p <= n");
        (nu - nu_grid_oracle(&a)).abs() / (1.0 + nu)
    });
    let failures = fanout.run(covanishing_cases, |k| {
        let mut rng = task_rng(seed, (stream + 1).wrapping_mul(1 << 20).wrapping_add(k as u64));
        let p = rng.gen_range(2..=3usize);
        let n = rng.gen_range(p..=p + 2);
        let mut rows: Vec<Vec<i64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-5..=5)).collect()).collect();
        if k % 2 == 0 {
            // last row an integer combination of the others
            let w: Vec<i64> = (0..p - 1).map(|_| rng.gen_range(-3..=3)).collect();
            rows[p - 1] = (0..n).map(|c| (0..p - 1).map(|r| w[r] * rows[r][c]).sum()).collect();
        }
        let exact: Vec<Vec<BigRational>> =
            rows.iter().map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect()).collect();
        let minors_zero = exact_maximal_minors(&exact).iter().all(|m| m.is_zero());
        let a = Mat::from_rows(&rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect::<Vec<_>>());
        let tol = NUMERICAL_ZERO * a.max_abs().max(1.0);
        let nu_zero = rabier_nu(&a).expect("p <= n") <= tol;
        let kappa_zero = kuo_kappa(&a).expect("p <= n") <= tol;
        !(nu_zero == kappa_zero && kappa_zero == minors_zero)
    });
    RabierCheck {
        matrices,
        max_scaled_discrepancy: disc.into_iter().fold(0.0, f64::max),
        covanishing_cases,
        covanishing_failures: failures.into_iter().filter(|f| *f).count(),
    }
}

/// Malgrange indicator trace of a monomial curve `x_i = c_i s^{e_i}` at
/// `s = m^6`, computed in exact rational arithmetic (the exponents have
/// denominators dividing 6, so every sample point is rational).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactCurveCheck {
    pub parameters: Vec<u32>,
    pub norms: Vec<f64>,
    pub indicators: Vec<f64>,
    pub slope: Option<f64>,
    pub vanishing: bool,
}

fn pow_exact(base: &BigRational, e: i64) -> BigRational {
    let r = num_traits::pow(base.clone(), e.unsigned_abs() as usize);
    if e < 0 {
        r.recip()
    } else {
        r
    }
}

pub fn exact_curve_check(map: &PolyMap, coefficients: &[String], exponents: &[String], ms: &[u32]) -> Result<ExactCurveCheck, String> {
    let n = map.n();
    let p = map.p();
    if coefficients.len() != n || exponents.len() != n {
        return Err("template length does not match the map".into());
    }
    let cs = coefficients.iter().map(|c| parse_rational(c)).collect::<Result<Vec<_>, _>>()?;
    let es = exponents.iter().map(|e| parse_rational(e)).collect::<Result<Vec<_>, _>>()?;
    let six = BigInt::from(6);
    let jac = map.jacobian_poly();
    let (mut norms, mut inds, mut pts) = (Vec::new(), Vec::new(), Vec::new());
    let mut vanishing = false;
    for &m in ms {
        let mr = BigRational::from_integer(BigInt::from(m));
        let x: Vec<BigRational> = cs
            .iter()
            .zip(&es)
            .map(|(c, e)| {
                let k = e * BigRational::from_integer(six.clone());
                if !k.is_integer() {
                    return Err(format!("exponent {e} does not have a denominator dividing 6"));
                }
                let k: i64 = k.to_integer().try_into().map_err(|_| "exponent too large".to_string())?;
                Ok(c * pow_exact(&mr, k))
            })
            .collect::<Result<_, String>>()?;
        let a: Vec<Vec<BigRational>> =
            jac.iter().map(|row| row.iter().map(|d| d.eval_exact(&x).expect("n values")).collect()).collect();
        let top: BigRational = exact_maximal_minors(&a).iter().map(|v| v * v).sum();
        let bottom: BigRational = if p == 1 {
            BigRational::one()
        } else {
            (0..p)
                .flat_map(|j| {
                    let rest: Vec<Vec<BigRational>> =
                        a.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, r)| r.clone()).collect();
                    exact_maximal_minors(&rest)
                })
                .map(|v| &v * &v)
                .sum()
        };
        let norm2: BigRational = x.iter().map(|v| v * v).sum();
        let nx = rational_to_f64(&norm2).sqrt();
        let ind = if top.is_zero() {
            0.0
        } else if bottom.is_zero() {
            f64::INFINITY
        } else {
            rational_to_f64(&(norm2 * top / bottom)).sqrt()
        };
        vanishing = ind == 0.0;
        norms.push(nx);
        inds.push(ind);
        if ind > 0.0 && ind.is_finite() {
            pts.push((nx.ln(), ind.ln()));
        }
    }
    Ok(ExactCurveCheck { parameters: ms.to_vec(), norms, indicators: inds, slope: fit_slope(&pts), vanishing })
}
