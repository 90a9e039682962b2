use atypical_core::polymap::int_map;
use atypical_core::scanner::{kos_scan, milnor_scan, RadiiSchedule};
use atypical_core::{PolyMap, RhoSpec, ScanConfig, Sequential};
use num_bigint::BigInt;
use num_rational::BigRational;

fn small_config(seed: u64) -> ScanConfig {
    ScanConfig {
        radii: RadiiSchedule { r0: 1e2, factor: 10.0, count: 4 },
        n_dirs: 48,
        seed,
        ..ScanConfig::default()
    }
}

/// Broughton's polynomial shifted by a constant, so its atypical value is `c`.
fn shifted_broughton(c: i64) -> PolyMap {
    int_map("b", 2, &[&[(1, &[1, 0]), (1, &[2, 1]), (c, &[0, 0])]]).unwrap()
}

fn values(cs: &[atypical_core::ValueCluster]) -> Vec<f64> {
    cs.iter().map(|c| c.value[0]).collect()
}

#[test]
fn kos_values_follow_affine_changes_of_the_target() {
    let cfg = small_config(0);
    let base = kos_scan(&shifted_broughton(1), &cfg, &Sequential).unwrap();
    assert_eq!(base.len(), 1);
    assert!((base[0].value[0] - 1.0).abs() < 1e-2, "{:?}", values(&base));

    let scaled = shifted_broughton(1).scaled(&BigRational::from_integer(BigInt::from(3)));
    let s = kos_scan(&scaled, &cfg, &Sequential).unwrap();
    assert_eq!(s.len(), 1);
    assert!((s[0].value[0] - 3.0).abs() < 3e-2, "{:?}", values(&s));

    let neg = shifted_broughton(1).scaled(&BigRational::from_integer(BigInt::from(-2)));
    let s = kos_scan(&neg, &cfg, &Sequential).unwrap();
    assert!(s.len() == 1 && (s[0].value[0] + 2.0).abs() < 2e-2, "{:?}", values(&s));
}

#[test]
fn same_seed_same_clusters_and_other_seeds_agree_on_values() {
    let f = shifted_broughton(0);
    let a = kos_scan(&f, &small_config(4), &Sequential).unwrap();
    let b = kos_scan(&f, &small_config(4), &Sequential).unwrap();
    assert_eq!(a, b);
    let c = kos_scan(&f, &small_config(5), &Sequential).unwrap();
    assert_eq!(c.len(), 1);
    assert!(c[0].value[0].abs() < 1e-2);
}

#[test]
fn milnor_scan_of_a_submersion_without_bad_branches_is_empty() {
    let lin = int_map("lin", 3, &[&[(1, &[1, 0, 0]), (2, &[0, 1, 0])], &[(1, &[0, 0, 1])]]).unwrap();
    assert!(milnor_scan(&lin, &small_config(0), &RhoSpec::Euclidean, &Sequential).unwrap().is_empty());
}

#[test]
fn scans_reject_invalid_configurations() {
    let f = shifted_broughton(0);
    let mut cfg = small_config(0);
    cfg.n_dirs = 3;
    assert!(kos_scan(&f, &cfg, &Sequential).is_err());
    let mut cfg = small_config(0);
    cfg.radii.factor = 1.0;
    assert!(kos_scan(&f, &cfg, &Sequential).is_err());
}
