//! Monomial curve search for Malgrange witnesses.
//!
//! A template `x_i(s) = a_i s^{alpha_i}` is scored by the Malgrange indicator
//! along `s = m^6` for integers `m` matched to the radii schedule. With every
//! exponent a multiple of 1/6, each coordinate is an integer power of `m`
//! times a rational, so the curve points and the Jacobian are evaluated in
//! double-double: witness curves typically cancel huge terms exactly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::CheckedMul;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::polymap::PolyMap;
use crate::regfuncs::{gaffney_ratio, Extended};
use crate::sampling::task_rng;
use crate::scanner::{fit_slope, ScanConfig, STREAM_CURVE};

pub type Q = Ratio<i64>;

/// Coefficient values tried per coordinate.
pub const COEFFICIENT_GRID: [(i64, i64); 7] = [(0, 1), (1, 2), (-1, 2), (1, 1), (-1, 1), (2, 1), (-2, 1)];
/// Exponent values tried per coordinate.
pub const EXPONENT_GRID: [(i64, i64); 13] =
    [(0, 1), (1, 3), (-1, 3), (1, 2), (-1, 2), (1, 1), (-1, 1), (3, 2), (-3, 2), (2, 1), (-2, 1), (3, 1), (-3, 1)];

fn q((a, b): (i64, i64)) -> Q {
    Q::new(a, b)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonomialCurve {
    pub coefficients: Vec<Q>,
    pub exponents: Vec<Q>,
}

impl MonomialCurve {
    /// Exponents must be multiples of 1/6 and at least one coordinate with a
    /// nonzero coefficient must have a positive exponent.
    pub fn new(coefficients: Vec<Q>, exponents: Vec<Q>) -> Result<Self> {
        if coefficients.len() != exponents.len() {
            return Err(Error::DimensionMismatch { expected: coefficients.len(), found: exponents.len() });
        }
        if exponents.iter().any(|e| 6 % e.denom() != 0 || e.numer().abs() > 60) {
            return Err(Error::Config(String::from("curve exponents must be multiples of 1/6 with |alpha| <= 10")));
        }
        let c = MonomialCurve { coefficients, exponents };
        if !c.escapes() {
            return Err(Error::NonEscapingTemplate);
        }
        Ok(c)
    }

    fn escapes(&self) -> bool {
        self.coefficients.iter().zip(&self.exponents).any(|(a, e)| *a.numer() != 0 && *e.numer() > 0)
    }

    pub fn n(&self) -> usize {
        self.coefficients.len()
    }

    /// The point at `s = m^6`.
    pub fn point_dd(&self, m: u32) -> Vec<Dd> {
        let md = Dd::from_f64(m as f64);
        self.coefficients
            .iter()
            .zip(&self.exponents)
            .map(|(a, e)| {
                if *a.numer() == 0 {
                    return Dd::ZERO;
                }
                let k = (e * 6).to_integer();
                let pw = md.powi(k.unsigned_abs() as u32);
                let pw = if k < 0 { pw.recip() } else { pw };
                let c = Dd::from_f64(*a.numer() as f64) * Dd::from_f64(*a.denom() as f64).recip();
                c * pw
            })
            .collect()
    }

    pub fn describe(&self) -> (Vec<String>, Vec<String>) {
        (
            self.coefficients.iter().map(|a| format!("{a}")).collect(),
            self.exponents.iter().map(|a| format!("{a}")).collect(),
        )
    }
}

/// Integers `m` with `m^6` close to each radius (strictly increasing, at least 2).
pub fn sample_parameters(cfg: &ScanConfig) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::new();
    for r in cfg.radii_values() {
        let m = (libm::round(libm::pow(r, 1.0 / 6.0)) as u32).max(2);
        let m = match out.last() {
            Some(&last) if m <= last => last + 1,
            _ => m,
        };
        out.push(m);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub s: f64,
    pub norm: f64,
    pub value: Vec<f64>,
    pub indicator: Extended,
}

/// Indicator trace of one template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub coefficients: Vec<String>,
    pub exponents: Vec<String>,
    pub samples: Vec<CurveSample>,
    /// Slope of `ln(indicator)` against `ln |x(s)|`.
    pub slope: Option<f64>,
    /// The indicator is exactly 0 at the last sample.
    pub vanishing: bool,
    /// The curve grows at least tenfold over the schedule, stays in the value
    /// window and has finite indicators.
    pub admissible: bool,
}

impl CurveReport {
    /// Admissible and decaying at least as fast as `threshold`.
    pub fn decays(&self, threshold: f64) -> bool {
        self.admissible && (self.vanishing || matches!(self.slope, Some(s) if s <= threshold))
    }

    fn objective(&self) -> f64 {
        if !self.admissible {
            return f64::INFINITY;
        }
        match self.samples.last().map(|s| s.indicator) {
            Some(Extended::Finite(v)) => v,
            _ => f64::INFINITY,
        }
    }
}

/// Malgrange indicator trace of `curve` at `s = m^6` for each `m`.
pub fn evaluate_curve(map: &PolyMap, curve: &MonomialCurve, ms: &[u32], window: f64) -> Result<CurveReport> {
    if curve.n() != map.n() {
        return Err(Error::DimensionMismatch { expected: map.n(), found: curve.n() });
    }
    let ev = map.evaluator();
    let mut samples = Vec::with_capacity(ms.len());
    for &m in ms {
        let x = curve.point_dd(m);
        let (vals, jac) = ev.first_order_dd(&x);
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
        let a = Mat::from_vec(map.p(), map.n(), jac.into_iter().map(Dd::to_f64).collect());
        let norm = linalg::norm(&xf);
        let indicator = if a.as_slice().iter().all(|v| v.is_finite()) && norm.is_finite() {
            gaffney_ratio(&a)?.scale(norm)
        } else {
            Extended::Infinite
        };
        samples.push(CurveSample {
            s: libm::pow(m as f64, 6.0),
            norm,
            value: vals.into_iter().map(Dd::to_f64).collect(),
            indicator,
        });
    }
    let finite = samples.iter().all(|s| matches!(s.indicator, Extended::Finite(v) if v.is_finite()));
    let grows = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => b.norm >= 10.0 * a.norm && a.norm > 0.0,
        _ => false,
    };
    let bounded = samples.iter().all(|s| s.value.iter().all(|v| v.is_finite() && v.abs() <= window));
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|s| match s.indicator {
            Extended::Finite(v) if v > 0.0 => Some((libm::log(s.norm), libm::log(v))),
            _ => None,
        })
        .collect();
    let vanishing = matches!(samples.last().map(|s| s.indicator), Some(Extended::Finite(v)) if v == 0.0);
    let (coefficients, exponents) = curve.describe();
    Ok(CurveReport {
        coefficients,
        exponents,
        slope: fit_slope(&pts),
        vanishing,
        admissible: finite && grows && bounded,
        samples,
    })
}

struct Search<'a> {
    map: &'a PolyMap,
    ms: Vec<u32>,
    window: f64,
    threshold: f64,
    budget: usize,
    evaluated: usize,
    cache: BTreeMap<MonomialCurve, f64>,
    /// Admissible template with the smallest slope so far.
    steepest: Option<(MonomialCurve, CurveReport)>,
}

impl Search<'_> {
    /// Objective of a template, or `None` once the budget is spent.
    fn score(&mut self, c: &MonomialCurve) -> Option<f64> {
        if let Some(&v) = self.cache.get(c) {
            return Some(v);
        }
        if self.evaluated >= self.budget {
            return None;
        }
        self.evaluated += 1;
        let rep = evaluate_curve(self.map, c, &self.ms, self.window).ok()?;
        let obj = rep.objective();
        if rep.admissible {
            let key = |r: &CurveReport| if r.decays(self.threshold) && r.vanishing { f64::NEG_INFINITY } else { r.slope.unwrap_or(f64::INFINITY) };
            let better = match &self.steepest {
                None => true,
                Some((_, b)) => key(&rep) < key(b),
            };
            if better {
                self.steepest = Some((c.clone(), rep));
            }
        }
        self.cache.insert(c.clone(), obj);
        Some(obj)
    }

    /// Coordinate descent over the grid, then dyadic coefficient refinement.
    fn descend(&mut self, start: MonomialCurve) -> (MonomialCurve, f64) {
        let mut cur = start;
        let Some(mut best) = self.score(&cur) else { return (cur, f64::INFINITY) };
        loop {
            let mut improved = false;
            for i in 0..cur.n() {
                for &cg in &COEFFICIENT_GRID {
                    for &eg in &EXPONENT_GRID {
                        if cg.0 == 0 && eg.0 != 0 {
                            continue;
                        }
                        let mut c = cur.clone();
                        c.coefficients[i] = q(cg);
                        c.exponents[i] = q(eg);
                        if c == cur || !c.escapes() {
                            continue;
                        }
                        let Some(v) = self.score(&c) else { return (cur, best) };
                        if v < best {
                            best = v;
                            cur = c;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        loop {
            let mut improved = false;
            for i in 0..cur.n() {
                if *cur.coefficients[i].numer() == 0 {
                    continue;
                }
                for j in 1..=10 {
                    for sign in [1i64, -1] {
                        let mut c = cur.clone();
                        let f = Q::new((1i64 << j) + sign, 1i64 << j);
                        match cur.coefficients[i].checked_mul(&f) {
                            Some(v) if *v.denom() <= 1 << 40 && v.numer().abs() <= 1 << 40 => c.coefficients[i] = v,
                            _ => continue,
                        }
                        let Some(v) = self.score(&c) else { return (cur, best) };
                        if v < best {
                            best = v;
                            cur = c;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        (cur, best)
    }
}

/// Descent from one template over the coefficient/exponent grid plus local
/// refinement, minimizing the indicator at the largest sample. Reports the
/// trace of the final template.
pub fn curve_descent(map: &PolyMap, cfg: &ScanConfig, template: &MonomialCurve) -> Result<CurveReport> {
    if template.n() != map.n() {
        return Err(Error::DimensionMismatch { expected: map.n(), found: template.n() });
    }
    if !template.escapes() {
        return Err(Error::NonEscapingTemplate);
    }
    let mut s = Search::new(map, cfg);
    let (best, _) = s.descend(template.clone());
    evaluate_curve(map, &best, &s.ms, cfg.value_window)
}

impl<'a> Search<'a> {
    fn new(map: &'a PolyMap, cfg: &ScanConfig) -> Self {
        Search {
            map,
            ms: sample_parameters(cfg),
            window: cfg.value_window,
            threshold: cfg.decay_slope,
            budget: cfg.template_budget,
            evaluated: 0,
            cache: BTreeMap::new(),
            steepest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSearchReport {
    /// Admissible template with the smallest slope among all evaluated.
    pub steepest: Option<CurveReport>,
    /// Whether some evaluated template decays with slope at most `decay_slope`.
    pub found: bool,
    pub templates_evaluated: usize,
}

/// Multi-start curve descent within `template_budget` evaluations: first
/// from every single-coordinate escape `x_i = ±s`, then from random grid
/// templates drawn from a seeded stream.
pub fn curve_search(map: &PolyMap, cfg: &ScanConfig) -> Result<CurveSearchReport> {
    cfg.validate(map.n())?;
    let n = map.n();
    let zero = Q::new(0, 1);
    let mut s = Search::new(map, cfg);
    let mut seeds = Vec::new();
    for i in 0..n {
        for a in [1, -1] {
            let mut c = MonomialCurve { coefficients: vec![zero; n], exponents: vec![zero; n] };
            c.coefficients[i] = Q::new(a, 1);
            c.exponents[i] = Q::new(1, 1);
            seeds.push(c);
        }
    }
    for seed in seeds {
        if s.evaluated >= s.budget {
            break;
        }
        s.descend(seed);
    }
    let mut rng = task_rng(cfg.seed, STREAM_CURVE);
    let mut attempts = 0usize;
    while s.evaluated < s.budget && attempts < 100 * s.budget.max(1) {
        attempts += 1;
        let mut c = MonomialCurve { coefficients: vec![zero; n], exponents: vec![zero; n] };
        for i in 0..n {
            c.coefficients[i] = q(COEFFICIENT_GRID[rng.gen_range(0..COEFFICIENT_GRID.len())]);
            c.exponents[i] = q(EXPONENT_GRID[rng.gen_range(0..EXPONENT_GRID.len())]);
        }
        if !c.escapes() || s.cache.contains_key(&c) {
            continue;
        }
        s.descend(c);
    }
    let steepest = s.steepest.map(|(_, r)| r);
    let found = steepest.as_ref().map_or(false, |r| r.decays(cfg.decay_slope));
    Ok(CurveSearchReport { steepest, found, templates_evaluated: s.evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymap::int_map;

    fn cfg() -> ScanConfig {
        ScanConfig { template_budget: 2000, ..ScanConfig::default() }
    }

    fn curve(c: &[(i64, i64)], e: &[(i64, i64)]) -> MonomialCurve {
        MonomialCurve::new(c.iter().map(|&v| q(v)).collect(), e.iter().map(|&v| q(v)).collect()).unwrap()
    }

    #[test]
    fn template_validation() {
        let bad = MonomialCurve::new(vec![q((1, 1)), q((1, 1))], vec![q((-1, 1)), q((0, 1))]);
        assert_eq!(bad, Err(Error::NonEscapingTemplate));
        let zero_coef = MonomialCurve::new(vec![q((0, 1)), q((1, 1))], vec![q((1, 1)), q((-1, 1))]);
        assert_eq!(zero_coef, Err(Error::NonEscapingTemplate));
        assert!(MonomialCurve::new(vec![q((1, 1))], vec![q((1, 5))]).is_err());
    }

    #[test]
    fn parameters_track_radii() {
        assert_eq!(sample_parameters(&ScanConfig::default()), vec![2, 3, 5, 7, 10]);
    }

    #[test]
    fn broughton_witness_curve() {
        let f = int_map("b", 2, &[&[(1, &[1, 0]), (1, &[2, 1])]]).unwrap();
        let w = curve(&[(-1, 2), (1, 1)], &[(-1, 1), (1, 1)]);
        let rep = evaluate_curve(&f, &w, &sample_parameters(&cfg()), 10.0).unwrap();
        assert!(rep.admissible);
        assert!((rep.slope.unwrap() + 1.0).abs() < 1e-3, "{rep:?}");
        let start = curve(&[(0, 1), (1, 1)], &[(0, 1), (1, 1)]);
        let found = curve_descent(&f, &cfg(), &start).unwrap();
        assert_eq!(found.coefficients, vec!["-1/2", "1"]);
        assert_eq!(found.exponents, vec!["-1", "1"]);
        assert!(curve_search(&f, &cfg()).unwrap().found);
    }

    #[test]
    fn linear_map_has_no_decay() {
        let f = int_map("lin", 2, &[&[(1, &[1, 0])]]).unwrap();
        let rep = curve_search(&f, &cfg()).unwrap();
        assert!(!rep.found);
        assert!(rep.steepest.unwrap().slope.unwrap() >= 1.0 - 1e-6);
    }
}
