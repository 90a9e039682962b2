use std::path::PathBuf;
use std::process::{Command, Output};

use atypical::report::ScanReport;
use atypical_core::scanner::TVerdict;

fn maps() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("maps")
}

fn map(name: &str) -> String {
    maps().join(format!("{name}.json")).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atypical"))
        .args(args)
        .env_remove("ATYPICAL_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(o: &Output) -> ScanReport {
    serde_json::from_slice(&o.stdout).expect("stdout is a report")
}

const QUICK: [&str; 4] = ["--n-dirs", "48", "--radii-count", "4"];

fn with_quick<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(QUICK).collect()
}

#[test]
fn kos_reports_broughton_cluster_and_round_trips() {
    let b = map("broughton");
    let o = run(&with_quick(&["kos", &b, "--seed", "7"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r.schema, "atypical/1");
    assert_eq!(r.config.scan.seed, 7);
    let kos = r.clusters.kos.as_ref().unwrap();
    assert_eq!(kos.len(), 1);
    assert!(kos[0].value[0].abs() < 1e-2);
    assert_eq!(kos[0].decay_trace.len(), 4);
    // parse(emit(report)) == report, and emitting again gives the same bytes
    let text = atypical::report::to_json(&r);
    assert_eq!(text.as_bytes(), o.stdout.as_slice());
    assert_eq!(serde_json::from_str::<ScanReport>(&text).unwrap(), r);
}

#[test]
fn kos_on_linear_map_is_empty() {
    let o = run(&with_quick(&["kos", &map("linear")]));
    assert_eq!(code(&o), 0);
    assert!(report(&o).clusters.kos.unwrap().is_empty());
}

#[test]
fn output_is_independent_of_thread_count() {
    let b = map("broughton");
    let one = run(&with_quick(&["kos", &b, "--threads", "1"]));
    let three = run(&with_quick(&["kos", &b, "--threads", "3"]));
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, three.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_atypical"))
        .args(with_quick(&["kos", &b]))
        .env("ATYPICAL_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(env.stdout, one.stdout);
    let bad_env = Command::new(env!("CARGO_BIN_EXE_atypical"))
        .args(["kos", &b])
        .env("ATYPICAL_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad_env), 3);
}

#[test]
fn seed_determines_the_run_and_config_echo_reproduces_it() {
    let b = map("broughton");
    let a = run(&with_quick(&["kos", &b, "--seed", "3"]));
    let again = run(&with_quick(&["kos", &b, "--seed", "3"]));
    assert_eq!(a.stdout, again.stdout);
    let other = run(&with_quick(&["kos", &b, "--seed", "4"]));
    assert_ne!(a.stdout, other.stdout, "the seed should change the witnesses");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, serde_json::to_string(&report(&a).config.scan).unwrap()).unwrap();
    let replay = run(&["kos", &b, "--config", cfg.to_str().unwrap()]);
    assert_eq!(replay.stdout, a.stdout);
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(code(&run(&["kos", "missing.json"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": \"x\", ").unwrap();
    assert_eq!(code(&run(&["kos", bad.to_str().unwrap()])), 2);
    std::fs::write(&bad, r#"{"name":"x","space":"real","vars":["x"],"components":[{"terms":[{"c":"1","e":[1]}]}]}"#).unwrap();
    assert_eq!(code(&run(&["milnor", bad.to_str().unwrap()])), 2, "n <= p is a map-file error");
}

#[test]
fn configuration_errors_exit_3() {
    let b = map("broughton");
    assert_eq!(code(&run(&["milnor", &b, "--rho", "weighted:1,x"])), 3);
    assert_eq!(code(&run(&["milnor", &b, "--rho", "weighted:1,2,3"])), 3);
    assert_eq!(code(&run(&["kos", &b, "--n-dirs", "2"])), 3);
    assert_eq!(code(&run(&["kos", &b, "--radius-factor", "0.5"])), 3);
    assert_eq!(code(&run(&["kos", &b, "--threads", "0"])), 3);
    assert_eq!(code(&run(&["kos", &b, "--no-such-flag"])), 3);
    assert_eq!(code(&run(&["tcheck", &b, "--direction", "0,0", "--value", "0"])), 3);
    assert_eq!(code(&run(&["tcheck", &b, "--direction", "1,0,0", "--value", "0"])), 3);
    assert_eq!(code(&run(&["fibers", &map("exfair"), "--t-grid", "0,1"])), 3);
    assert_eq!(code(&run(&["fibers", &b, "--t-grid", "0:1"])), 3);
    assert_eq!(code(&run(&["fibers", &b, "--t-grid", "0", "--res", "10"])), 3);
    assert_eq!(code(&run(&["corpus", "--only", "nonesuch"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn tcheck_verdicts() {
    let o = run(&with_quick(&["tcheck", &map("broughton"), "--direction", "0,1", "--value", "0"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r.tcheck.as_ref().unwrap().verdict, TVerdict::SuspectIrregular);
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"suspect-irregular\""));
    for u in ["1,0", "0,1", "0.6,-0.8"] {
        let o = run(&with_quick(&["tcheck", &map("linear"), "--direction", u, "--value", "0.5"]));
        assert_eq!(report(&o).tcheck.unwrap().verdict, TVerdict::Regular, "direction {u}");
    }
}

#[test]
fn fibers_csv() {
    let o = run(&["fibers", &map("broughton"), "--t-grid=-0.5,0,0.5", "--res", "2000"]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["t", "count", "L", "res"]);
    let counts: Vec<String> = rdr.records().map(|r| r.unwrap()[1].to_string()).collect();
    assert_eq!(counts, ["2", "3", "2"]);

    let o = run(&["fibers", &map("cube"), "--t-grid=-1:1:5", "--res", "400", "--box", "5"]);
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| &r[1] == "1" && &r[2] == "5" && &r[3] == "400"));
}

#[test]
fn milnor_weighted_quasihomogeneous_is_empty_and_inclusion_recorded() {
    let o = run(&with_quick(&["milnor", &map("quasihom"), "--rho", "weighted:1,2"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert!(r.clusters.milnor.as_ref().unwrap().is_empty());
    assert!(r.inclusion.as_ref().unwrap().passed);
    assert!(r.clusters.singular.unwrap().iter().any(|c| c.value[0].abs() < 1e-2));
}

#[test]
fn corpus_subset_exit_codes() {
    let o = run(&["corpus", "--only", "linear"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: atypical::corpus::CorpusReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.entries.len(), 1);
    assert!(r.passed && r.rabier.is_none());

    // a corrupted corpus file is an input error
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("linear.json"), "[1, 2").unwrap();
    let o = run(&["corpus", "--only", "linear", "--maps-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    // a valid file with the wrong content fails its checks: invariant violation
    std::fs::copy(maps().join("cube.json"), dir.path().join("linear.json")).unwrap();
    let o = run(&["corpus", "--only", "linear", "--maps-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
