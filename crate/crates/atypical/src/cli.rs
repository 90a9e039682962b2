//! Command-line surface. Exit codes: 0 success, 2 input error (unreadable or
//! malformed map file), 3 configuration error (bad flags or parameters),
//! 4 invariant violation (a Milnor value without KOS evidence, or a failed
//! corpus check).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use atypical_core::infinity::singular_values_estimate;
use atypical_core::scanner::{covered_by_kos, kos_scan, milnor_scan, tcheck};
use atypical_core::{PointAtInfinity, RhoSpec, ScanConfig};
use clap::{Args, Parser, Subcommand};

use crate::corpus::{run_corpus, CorpusError, CorpusOptions};
use crate::mapfile::{load_map, LoadedMap};
use crate::parallel::{pool, resolve_threads, Rayon};
use crate::report::{to_json, Command, ConfigEcho, InclusionVerdict, ScanReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "atypical", version, about = "Estimate atypical values at infinity of real polynomial maps")]
struct Cli {
    /// Seed for every stochastic choice (default 0, or the seed of `--config`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to ATYPICAL_THREADS, then to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Values approached along sequences with |x| nu(Df(x)) -> 0.
    Kos {
        map: PathBuf,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Values of escaping branches of the Milnor set.
    Milnor {
        map: PathBuf,
        /// `euclid` or `weighted:w1,...,wn`.
        #[arg(long, default_value = "euclid")]
        rho: String,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Follow the chart gap toward the point at infinity ([0:u], t0).
    Tcheck {
        map: PathBuf,
        /// Comma-separated direction u.
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
        /// Comma-separated value t0.
        #[arg(long, allow_hyphen_values = true)]
        value: String,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Count connected components of plane fibers (maps R^2 -> R only); CSV output.
    Fibers {
        map: PathBuf,
        /// `t1,t2,...` or `start:stop:count`.
        #[arg(long = "t-grid", allow_hyphen_values = true)]
        t_grid: String,
        /// Half-width L of the box [-L, L]^2.
        #[arg(long = "box", default_value_t = 20.0)]
        half_width: f64,
        /// Cells per side.
        #[arg(long, default_value_t = 2000)]
        res: usize,
    },
    /// Run the bundled example corpus and report every check.
    Corpus {
        /// Comma-separated entry names.
        #[arg(long)]
        only: Option<String>,
        /// Directory with `<name>.json` map files replacing the bundled ones.
        #[arg(long)]
        maps_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// JSON file with a complete scan configuration (e.g. the `config.scan`
    /// echo of an earlier report); individual flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_dirs: Option<usize>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    radius_factor: Option<f64>,
    #[arg(long)]
    radii_count: Option<usize>,
    #[arg(long)]
    opt_budget: Option<usize>,
    #[arg(long)]
    cluster_tol: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps_res: Option<f64>,
    #[arg(long)]
    eps_sing: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    decay_slope: Option<f64>,
    #[arg(long)]
    value_window: Option<f64>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn input(message: impl ToString) -> Failure {
    Failure { code: EXIT_INPUT, message: message.to_string() }
}

fn config(message: impl ToString) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.to_string() }
}

impl ScanArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<ScanConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?
            }
            None => ScanConfig::default(),
        };
        if let Some(s) = seed {
            c.seed = s;
        }
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(c.n_dirs, self.n_dirs);
        set!(c.radii.r0, self.r0);
        set!(c.radii.factor, self.radius_factor);
        set!(c.radii.count, self.radii_count);
        set!(c.opt_budget, self.opt_budget);
        set!(c.cluster_tol, self.cluster_tol);
        set!(c.delta, self.delta);
        set!(c.eps_res, self.eps_res);
        set!(c.eps_sing, self.eps_sing);
        set!(c.decay_slope, self.decay_slope);
        set!(c.value_window, self.value_window);
        Ok(c)
    }
}

/// Parses `euclid` or `weighted:w1,...,wn`.
pub fn parse_rho(s: &str) -> Result<RhoSpec, String> {
    match s.trim() {
        "euclid" | "euclidean" => Ok(RhoSpec::Euclidean),
        other => {
            let Some(ws) = other.strip_prefix("weighted:") else {
                return Err(format!("--rho must be `euclid` or `weighted:w1,...,wn`, got {other:?}"));
            };
            let weights = ws
                .split(',')
                .map(|w| w.trim().parse::<u32>().map_err(|_| format!("bad weight {w:?} in --rho")))
                .collect::<Result<Vec<_>, _>>()?;
            RhoSpec::weighted(weights).map_err(|e| e.to_string())
        }
    }
}

fn parse_vector(s: &str, what: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| {
            v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("bad {what} entry {v:?}"))
        })
        .collect()
}

/// Parses `t1,t2,...` or `start:stop:count` (inclusive endpoints).
pub fn parse_t_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => parse_vector(s, "t-grid"),
        [a, b, k] => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad t-grid start {a:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad t-grid stop {b:?}"))?;
            let k: usize = k.trim().parse().map_err(|_| format!("bad t-grid count {k:?}"))?;
            if !(a.is_finite() && b.is_finite()) || k == 0 {
                return Err("t-grid needs finite endpoints and a positive count".into());
            }
            if k == 1 {
                return Ok(vec![a]);
            }
            Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect())
        }
        _ => Err(format!("t-grid must be `t1,t2,...` or `start:stop:count`, got {s:?}")),
    }
}

fn load(path: &PathBuf) -> Result<LoadedMap, Failure> {
    load_map(path).map_err(input)
}

fn core_config(e: atypical_core::Error) -> Failure {
    config(e)
}

fn scan_report(cli_seed: Option<u64>, cmd: &Cmd) -> Result<(String, i32), Failure> {
    match cmd {
        Cmd::Kos { map, scan } => {
            let m = load(map)?;
            let cfg = scan.resolve(cli_seed)?;
            cfg.validate(m.map.n()).map_err(core_config)?;
            let mut r = ScanReport::new(Command::Kos, &m, ConfigEcho { scan: cfg.clone(), rho: None });
            r.clusters.kos = Some(kos_scan(&m.map, &cfg, &Rayon).map_err(core_config)?);
            r.clusters.singular = Some(singular_values_estimate(&m.map, &cfg, &Rayon).map_err(core_config)?);
            Ok((to_json(&r), EXIT_OK))
        }
        Cmd::Milnor { map, rho, scan } => {
            let rho = parse_rho(rho).map_err(config)?;
            let m = load(map)?;
            let cfg = scan.resolve(cli_seed)?;
            cfg.validate(m.map.n()).map_err(core_config)?;
            rho.validate(m.map.n()).map_err(core_config)?;
            let mut r = ScanReport::new(Command::Milnor, &m, ConfigEcho { scan: cfg.clone(), rho: Some(rho.clone()) });
            let milnor = milnor_scan(&m.map, &cfg, &rho, &Rayon).map_err(core_config)?;
            let kos = kos_scan(&m.map, &cfg, &Rayon).map_err(core_config)?;
            let violations: Vec<Vec<f64>> =
                milnor.iter().filter(|c| !covered_by_kos(&m.map, c, &kos, &cfg)).map(|c| c.value.clone()).collect();
            let passed = violations.is_empty();
            r.inclusion = Some(InclusionVerdict { passed, violations });
            r.clusters.milnor = Some(milnor);
            r.clusters.kos = Some(kos);
            r.clusters.singular = Some(singular_values_estimate(&m.map, &cfg, &Rayon).map_err(core_config)?);
            if !passed {
                eprintln!("invariant violation: Milnor values without KOS evidence: {:?}", r.inclusion.as_ref().map(|i| &i.violations));
            }
            Ok((to_json(&r), if passed { EXIT_OK } else { EXIT_INVARIANT }))
        }
        Cmd::Tcheck { map, direction, value, scan } => {
            let u = parse_vector(direction, "direction").map_err(config)?;
            let t0 = parse_vector(value, "value").map_err(config)?;
            let m = load(map)?;
            if u.len() != m.map.n() || t0.len() != m.map.p() {
                return Err(config(format!(
                    "direction needs {} entries and value {} entries",
                    m.map.n(),
                    m.map.p()
                )));
            }
            let point = PointAtInfinity::new(&u, &t0).map_err(core_config)?;
            let cfg = scan.resolve(cli_seed)?;
            cfg.validate(m.map.n()).map_err(core_config)?;
            let mut r = ScanReport::new(Command::Tcheck, &m, ConfigEcho { scan: cfg.clone(), rho: None });
            r.tcheck = Some(tcheck(&m.map, &point, &cfg, &Rayon).map_err(core_config)?);
            Ok((to_json(&r), EXIT_OK))
        }
        Cmd::Fibers { map, t_grid, half_width, res } => {
            let grid = parse_t_grid(t_grid).map_err(config)?;
            let m = load(map)?;
            if (m.map.n(), m.map.p()) != (2, 1) {
                return Err(config(format!(
                    "fiber census needs a map R^2 -> R, got R^{} -> R^{}",
                    m.map.n(),
                    m.map.p()
                )));
            }
            let cfg = atypical_core::fiber::FiberConfig {
                box_half_width: *half_width,
                resolution: *res,
                background: Vec::new(),
            };
            let census = atypical_core::fiber::fiber_census(&m.map, &grid, &cfg, &Rayon).map_err(core_config)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["t", "count", "L", "res"]).expect("in-memory write");
            for (t, c) in census.t_grid.iter().zip(&census.counts) {
                w.write_record([t.to_string(), c.to_string(), half_width.to_string(), res.to_string()])
                    .expect("in-memory write");
            }
            let bytes = w.into_inner().expect("in-memory flush");
            Ok((String::from_utf8(bytes).expect("ASCII output"), EXIT_OK))
        }
        Cmd::Corpus { only, maps_dir } => {
            let opts = CorpusOptions {
                seed: cli_seed.unwrap_or(0),
                only: only.as_ref().map(|s| s.split(',').map(|n| n.trim().to_string()).collect()),
                maps_dir: maps_dir.clone(),
            };
            let report = run_corpus(&opts, &Rayon, |name, took| eprintln!("{name}: {:.1} s", took.as_secs_f64()))
                .map_err(|e| match e {
                    CorpusError::Map { .. } => input(e),
                    _ => config(e),
                })?;
            for c in report.all_checks() {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok((to_json(&report), if report.passed { EXIT_OK } else { EXIT_INVARIANT }))
        }
    }
}

/// Runs the CLI on `args` (including the program name), writing the result to
/// standard output and diagnostics to standard error; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = match resolve_threads(cli.threads) {
        Ok(t) => t,
        Err(m) => {
            eprintln!("error: {m}");
            return EXIT_CONFIG;
        }
    };
    let pool = match pool(threads) {
        Ok(p) => p,
        Err(m) => {
            eprintln!("error: {m}");
            return EXIT_CONFIG;
        }
    };
    let start = Instant::now();
    match pool.install(|| scan_report(cli.seed, &cli.command)) {
        Ok((out, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return EXIT_INPUT;
            }
            eprintln!("done in {:.2} s", start.elapsed().as_secs_f64());
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_syntax() {
        assert_eq!(parse_rho("euclid").unwrap(), RhoSpec::Euclidean);
        assert_eq!(parse_rho("weighted:1,2").unwrap(), RhoSpec::Weighted { weights: vec![1, 2] });
        for bad in ["weighted:", "weighted:1,x", "weighted:0,1", "manhattan", "weighted 1,2"] {
            assert!(parse_rho(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn t_grid_syntax() {
        assert_eq!(parse_t_grid("-1,0,1").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_t_grid("-1:1:5").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(parse_t_grid("2:3:1").unwrap(), vec![2.0]);
        for bad in ["", "1:2", "a,b", "0:1:0", "1:2:3:4", "nan"] {
            assert!(parse_t_grid(bad).is_err(), "{bad}");
        }
    }
}
