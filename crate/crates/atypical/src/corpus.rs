//! The bundled example corpus: each map is run through the analyses that
//! characterise it, and every expectation is recorded as a named check next
//! to the raw data it was decided on.

use std::path::Path;

use atypical_core::curve::{curve_search, sample_parameters, CurveSearchReport};
use atypical_core::fiber::{fiber_census, FiberCensus, FiberConfig};
use atypical_core::infinity::{sing_minors, singular_values_estimate};
use atypical_core::scanner::{covered_by_kos, kos_scan, milnor_scan};
use atypical_core::{Fanout, PolyMap, Polynomial, RhoSpec, ScanConfig, ValueCluster};
use serde::{Deserialize, Serialize};

use crate::mapfile::{load_map, parse_map, LoadedMap, MapError, BUNDLED};
use crate::report::{ConfigEcho, InclusionVerdict, MapInfo, SCHEMA, TOOL_VERSION};
use crate::suites::{
    chart_partials_check, covanishing_check, exact_curve_check, rabier_check, CovanishingCheck, ExactCurveCheck,
    PartialsCheck, RabierCheck,
};

/// Name under which the random-matrix suite can be selected with `--only`.
pub const RABIER: &str = "rabier";

pub const PARTIALS_POINTS: usize = 1000;
pub const COVANISHING_SEQUENCES: usize = 200;
pub const RABIER_MATRICES: usize = 500;
pub const RABIER_COVANISHING_CASES: usize = 200;
pub const FIBER_VALUES: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
pub const FIBER_BOX: f64 = 20.0;
pub const FIBER_RESOLUTIONS: [usize; 2] = [2000, 4000];

const STREAM_PARTIALS: u64 = 1000;
const STREAM_COVANISHING: u64 = 2000;
const STREAM_RABIER: u64 = 3000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub map: MapInfo,
    pub config: ConfigEcho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kos: Option<Vec<ValueCluster>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub milnor: Option<Vec<ValueCluster>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular: Option<Vec<ValueCluster>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sing_minors: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion: Option<InclusionVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_search: Option<CurveSearchReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_curve: Option<ExactCurveCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fibers: Vec<FiberCensus>,
    pub partials: PartialsCheck,
    pub covanishing: CovanishingCheck,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub schema: String,
    pub tool_version: String,
    pub seed: u64,
    pub entries: Vec<EntryReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabier: Option<RabierCheck>,
    #[serde(default)]
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl CorpusReport {
    pub fn all_checks(&self) -> impl Iterator<Item = &Check> {
        self.entries.iter().flat_map(|e| e.checks.iter()).chain(self.checks.iter())
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusOptions {
    pub seed: u64,
    /// Map names (and/or [`RABIER`]) to run; everything when `None`.
    pub only: Option<Vec<String>>,
    /// Read `<name>.json` from this directory instead of the bundled copies.
    pub maps_dir: Option<std::path::PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{name}: {source}")]
    Map { name: String, source: MapError },
    #[error("unknown corpus entry {0:?}")]
    UnknownEntry(String),
    #[error("{name}: {source}")]
    Analysis { name: String, source: atypical_core::Error },
}

pub fn entry_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).chain([RABIER]).collect()
}

/// The selected entries in corpus order, after validating `--only`.
pub fn selected(opts: &CorpusOptions) -> Result<Vec<&'static str>, CorpusError> {
    let all = entry_names();
    match &opts.only {
        None => Ok(all),
        Some(names) => {
            if let Some(bad) = names.iter().find(|n| !all.contains(&n.as_str())) {
                return Err(CorpusError::UnknownEntry(bad.clone()));
            }
            Ok(all.into_iter().filter(|n| names.iter().any(|m| m == n)).collect())
        }
    }
}

pub fn load_entry(name: &str, maps_dir: Option<&Path>) -> Result<LoadedMap, CorpusError> {
    let wrap = |source| CorpusError::Map { name: name.to_string(), source };
    match maps_dir {
        Some(dir) => load_map(&dir.join(format!("{name}.json"))).map_err(wrap),
        None => {
            let text = BUNDLED.iter().find(|(n, _)| *n == name).ok_or_else(|| CorpusError::UnknownEntry(name.into()))?.1;
            parse_map(text).map_err(wrap)
        }
    }
}

fn near_zero(v: &[f64], tol: f64) -> bool {
    v.iter().map(|x| x * x).sum::<f64>().sqrt() <= tol
}

fn describe_values(cs: &[ValueCluster]) -> String {
    let vals: Vec<String> = cs.iter().map(|c| format!("{:?}", c.value)).collect();
    format!("{} cluster(s) {}", cs.len(), vals.join(" "))
}

fn single_cluster_at_zero(name: &str, cs: &[ValueCluster], tol: f64) -> Check {
    check(name, cs.len() == 1 && near_zero(&cs[0].value, tol), describe_values(cs))
}

fn inclusion(map: &PolyMap, milnor: &[ValueCluster], kos: &[ValueCluster], cfg: &ScanConfig) -> InclusionVerdict {
    let violations: Vec<Vec<f64>> =
        milnor.iter().filter(|m| !covered_by_kos(map, m, kos, cfg)).map(|m| m.value.clone()).collect();
    InclusionVerdict { passed: violations.is_empty(), violations }
}

fn census<F: Fanout>(map: &PolyMap, values: &[f64], res: usize, fanout: &F) -> atypical_core::Result<FiberCensus> {
    let cfg = FiberConfig { box_half_width: FIBER_BOX, resolution: res, background: Vec::new() };
    fiber_census(map, values, &cfg, fanout)
}

/// Runs one corpus map.
pub fn run_entry<F: Fanout>(name: &str, loaded: &LoadedMap, seed: u64, fanout: &F) -> Result<EntryReport, CorpusError> {
    let wrap = |source| CorpusError::Analysis { name: name.to_string(), source };
    let map = &loaded.map;
    let cfg = ScanConfig { seed, ..ScanConfig::default() };
    let index = BUNDLED.iter().position(|(n, _)| *n == name).unwrap_or(BUNDLED.len()) as u64;
    let rho = match name {
        "quasihom" => RhoSpec::weighted(vec![1, 2]).map_err(wrap)?,
        _ => RhoSpec::Euclidean,
    };
    let partials = chart_partials_check(map, PARTIALS_POINTS, seed, STREAM_PARTIALS + index, fanout);
    let covanishing =
        covanishing_check(map, COVANISHING_SEQUENCES, cfg.decay_slope, seed, STREAM_COVANISHING + index, fanout);
    let mut e = EntryReport {
        map: MapInfo::of(loaded),
        config: ConfigEcho { scan: cfg.clone(), rho: Some(rho.clone()) },
        kos: None,
        milnor: None,
        singular: None,
        sing_minors: None,
        inclusion: None,
        curve_search: None,
        exact_curve: None,
        fibers: Vec::new(),
        partials,
        covanishing,
        checks: Vec::new(),
    };
    let wants = |what: &str| -> bool {
        match what {
            "kos" => matches!(name, "broughton" | "exfair" | "linear"),
            "milnor" => matches!(name, "broughton" | "exfair" | "pz_2_1" | "quasihom" | "linear"),
            "singular" => matches!(name, "broughton" | "exfair" | "quasihom" | "linear" | "cube"),
            "curve" => name.starts_with("pz_"),
            "fibers" => matches!(name, "broughton" | "cube"),
            _ => false,
        }
    };
    if wants("kos") {
        e.kos = Some(kos_scan(map, &cfg, fanout).map_err(wrap)?);
    }
    if wants("milnor") {
        e.milnor = Some(milnor_scan(map, &cfg, &rho, fanout).map_err(wrap)?);
    }
    if wants("singular") {
        e.singular = Some(singular_values_estimate(map, &cfg, fanout).map_err(wrap)?);
    }
    if let (Some(k), Some(m)) = (&e.kos, &e.milnor) {
        e.inclusion = Some(inclusion(map, m, k, &cfg));
    }
    if wants("curve") {
        let cs = curve_search(map, &cfg).map_err(wrap)?;
        if let Some(best) = cs.steepest.as_ref().filter(|_| cs.found) {
            e.exact_curve =
                exact_curve_check(map, &best.coefficients, &best.exponents, &sample_parameters(&cfg)).ok();
        }
        e.curve_search = Some(cs);
    }
    if wants("fibers") {
        for res in FIBER_RESOLUTIONS {
            e.fibers.push(census(map, &FIBER_VALUES, res, fanout).map_err(wrap)?);
        }
    }
    if name == "exfair" {
        e.sing_minors = Some(sing_minors(map).iter().map(|p| p.to_string()).collect());
    }
    e.checks = entry_checks(name, map, &e, &cfg);
    Ok(e)
}

fn exfair_minors_exact(map: &PolyMap) -> bool {
    let x2 = Polynomial::from_int_terms(3, &[(2, &[2, 0, 0])]).expect("three variables");
    sing_minors(map) == vec![x2, Polynomial::zero(3), Polynomial::zero(3)]
}

fn entry_checks(name: &str, map: &PolyMap, e: &EntryReport, cfg: &ScanConfig) -> Vec<Check> {
    let tol = cfg.cluster_tol;
    let mut out = Vec::new();
    let pre = |s: &str| format!("{name}.{s}");
    let empty = |c: &Option<Vec<ValueCluster>>| c.as_ref().is_some_and(|v| v.is_empty());
    let show = |c: &Option<Vec<ValueCluster>>| c.as_deref().map(describe_values).unwrap_or_default();
    let contains_zero = |c: &Option<Vec<ValueCluster>>| c.as_ref().is_some_and(|v| v.iter().any(|c| near_zero(&c.value, tol)));
    match name {
        "broughton" => {
            out.push(single_cluster_at_zero(&pre("kos_single_cluster_at_0"), e.kos.as_deref().unwrap_or(&[]), tol));
            out.push(single_cluster_at_zero(&pre("milnor_single_cluster_at_0"), e.milnor.as_deref().unwrap_or(&[]), tol));
            out.push(check(&pre("singular_empty"), empty(&e.singular), show(&e.singular)));
            let counts: Vec<Vec<usize>> = e.fibers.iter().map(|f| f.counts.clone()).collect();
            let expected = vec![2, 2, 3, 2, 2];
            out.push(check(
                &pre("fiber_counts"),
                counts.first() == Some(&expected) && counts.iter().all(|c| *c == expected),
                format!("{counts:?} at resolutions {FIBER_RESOLUTIONS:?}"),
            ));
        }
        "exfair" => {
            out.push(check(&pre("sing_minors_exact"), exfair_minors_exact(map), format!("{:?}", e.sing_minors)));
            out.push(single_cluster_at_zero(&pre("singular_at_origin"), e.singular.as_deref().unwrap_or(&[]), tol));
            let m = e.milnor.as_deref().unwrap_or(&[]);
            let t2 = m.iter().map(|c| c.value[1]);
            let (lo, hi) = (t2.clone().fold(f64::INFINITY, f64::min), t2.fold(f64::NEG_INFINITY, f64::max));
            out.push(check(
                &pre("milnor_on_t1_axis"),
                !m.is_empty() && m.iter().all(|c| c.value[0].abs() < tol),
                format!("{} clusters, max |t1| = {:e}", m.len(), m.iter().map(|c| c.value[0].abs()).fold(0.0, f64::max)),
            ));
            out.push(check(&pre("milnor_spread_covers_unit_interval"), lo <= -1.0 && hi >= 1.0, format!("t2 in [{lo}, {hi}]")));
        }
        "pz_1_1" | "pz_1_2" => {
            let cs = e.curve_search.as_ref();
            out.push(check(
                &pre("no_decaying_curve"),
                cs.is_some_and(|c| !c.found),
                format!("steepest slope {:?}", cs.and_then(|c| c.steepest.as_ref()).and_then(|s| s.slope)),
            ));
        }
        "pz_2_1" => {
            let cs = e.curve_search.as_ref();
            let exact_ok = e.exact_curve.as_ref().is_some_and(|x| x.vanishing || x.slope.is_some_and(|s| s <= cfg.decay_slope));
            out.push(check(
                &pre("decaying_curve_found"),
                cs.is_some_and(|c| c.found) && exact_ok,
                format!(
                    "steepest {:?}, exact slope {:?}",
                    cs.and_then(|c| c.steepest.as_ref()).map(|s| (&s.coefficients, &s.exponents, s.slope)),
                    e.exact_curve.as_ref().and_then(|x| x.slope)
                ),
            ));
            out.push(check(&pre("milnor_empty"), empty(&e.milnor), show(&e.milnor)));
        }
        "quasihom" => {
            out.push(check(&pre("weighted_milnor_empty"), empty(&e.milnor), show(&e.milnor)));
            out.push(check(&pre("singular_contains_0"), contains_zero(&e.singular), show(&e.singular)));
        }
        "linear" => {
            out.push(check(&pre("kos_empty"), empty(&e.kos), show(&e.kos)));
            out.push(check(&pre("milnor_empty"), empty(&e.milnor), show(&e.milnor)));
            out.push(check(&pre("singular_empty"), empty(&e.singular), show(&e.singular)));
        }
        "cube" => {
            let counts: Vec<Vec<usize>> = e.fibers.iter().map(|f| f.counts.clone()).collect();
            out.push(check(
                &pre("fiber_count_constant_1"),
                !counts.is_empty() && counts.iter().flatten().all(|c| *c == 1),
                format!("{counts:?}"),
            ));
            out.push(check(&pre("singular_contains_0"), contains_zero(&e.singular), show(&e.singular)));
        }
        _ => {}
    }
    if let Some(inc) = &e.inclusion {
        out.push(check(&pre("milnor_inside_kos"), inc.passed, format!("violations {:?}", inc.violations)));
    }
    out.push(check(
        &pre("chart_partials_vs_differences"),
        e.partials.max_rel_err < 1e-6,
        format!("max relative error {:e} over {} points", e.partials.max_rel_err, e.partials.points),
    ));
    let cv = &e.covanishing;
    out.push(check(
        &pre("kos_tgap_agree"),
        cv.fraction >= 0.95 && cv.disagreements_near_threshold,
        format!("{}/{} agree, disagreements {:?}", cv.agreements, cv.sequences, cv.disagreements),
    ));
    if let Some(err) = cv.malgrange_max_rel_err {
        out.push(check(&pre("malgrange_equals_kos"), err <= 1e-10, format!("max relative difference {err:e}")));
    }
    out
}

pub fn rabier_checks(r: &RabierCheck) -> Vec<Check> {
    vec![
        check(
            "rabier.nu_vs_grid",
            r.max_scaled_discrepancy <= 1e-3,
            format!("max |nu - grid| / (1 + nu) = {:e} over {} matrices", r.max_scaled_discrepancy, r.matrices),
        ),
        check(
            "rabier.covanishing",
            r.covanishing_failures == 0,
            format!("{} of {} cases disagree", r.covanishing_failures, r.covanishing_cases),
        ),
    ]
}

pub fn run_rabier<F: Fanout>(seed: u64, fanout: &F) -> RabierCheck {
    rabier_check(RABIER_MATRICES, RABIER_COVANISHING_CASES, seed, STREAM_RABIER, fanout)
}

/// Assembles a report from already computed parts.
pub fn assemble(seed: u64, entries: Vec<EntryReport>, rabier: Option<RabierCheck>) -> CorpusReport {
    let checks = rabier.as_ref().map(rabier_checks).unwrap_or_default();
    let mut r = CorpusReport {
        schema: SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        seed,
        entries,
        rabier,
        checks,
        passed: false,
    };
    let passed = r.all_checks().all(|c| c.passed);
    r.passed = passed;
    r
}

/// Loads every selected map first (so a broken file fails before any work),
/// then runs them in order. `progress` is called with each finished entry.
pub fn run_corpus<F: Fanout>(
    opts: &CorpusOptions,
    fanout: &F,
    mut progress: impl FnMut(&str, std::time::Duration),
) -> Result<CorpusReport, CorpusError> {
    let names = selected(opts)?;
    let maps: Vec<(&str, LoadedMap)> = names
        .iter()
        .filter(|n| **n != RABIER)
        .map(|n| load_entry(n, opts.maps_dir.as_deref()).map(|m| (*n, m)))
        .collect::<Result<_, _>>()?;
    let mut entries = Vec::new();
    for (name, m) in &maps {
        let start = std::time::Instant::now();
        entries.push(run_entry(name, m, opts.seed, fanout)?);
        progress(name, start.elapsed());
    }
    let rabier = names.contains(&RABIER).then(|| {
        let start = std::time::Instant::now();
        let r = run_rabier(opts.seed, fanout);
        progress(RABIER, start.elapsed());
        r
    });
    Ok(assemble(opts.seed, entries, rabier))
}
