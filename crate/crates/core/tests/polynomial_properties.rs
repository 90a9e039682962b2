use atypical_core::chart::ChartMap;
use atypical_core::polymap::{int_map, paunescu_zaharia};
use atypical_core::regfuncs::{gaffney_ratio, kuo_kappa, rabier_nu};
use atypical_core::{linalg::Mat, Polynomial};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

prop_compose! {
    fn poly(n: usize)(terms in prop::collection::vec(
        ((-20i64..=20, 1i64..=6), prop::collection::vec(0u32..=3, n)), 0..6)) -> Polynomial {
        Polynomial::from_terms(n, terms.into_iter().map(|((a, b), e)| (q(a, b), e))).unwrap()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn differentiation_is_linear(p in poly(3), r in poly(3), a in -5i64..=5, b in 1i64..=4, i in 0usize..3) {
        let (ca, cb) = (q(a, b), q(b, 7));
        let lhs = (&p.scale(&ca) + &r.scale(&cb)).partial(i).unwrap();
        let rhs = &p.partial(i).unwrap().scale(&ca) + &r.partial(i).unwrap().scale(&cb);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn leibniz_rule_holds_exactly(p in poly(2), r in poly(2), i in 0usize..2) {
        let lhs = (&p * &r).partial(i).unwrap();
        let rhs = &(&p.partial(i).unwrap() * &r) + &(&p * &r.partial(i).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn exact_evaluation_is_a_ring_homomorphism(p in poly(2), r in poly(2), x in (-9i64..=9, -9i64..=9)) {
        let pt = [q(x.0, 3), q(x.1, 2)];
        let prod = (&p * &r).eval_exact(&pt).unwrap();
        prop_assert_eq!(prod, p.eval_exact(&pt).unwrap() * r.eval_exact(&pt).unwrap());
        let sum = (&p + &r).eval_exact(&pt).unwrap();
        prop_assert_eq!(sum, p.eval_exact(&pt).unwrap() + r.eval_exact(&pt).unwrap());
    }

    #[test]
    fn regularity_functions_are_ordered(rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..=3)) {
        let a = Mat::from_rows(&rows);
        let nu = rabier_nu(&a).unwrap();
        let kappa = kuo_kappa(&a).unwrap();
        // nu <= kappa: the distance of a row to the span of the others bounds |A^T phi|
        // for the normalised covector attached to that row
        prop_assert!(nu >= 0.0 && nu <= kappa * (1.0 + 1e-9) + 1e-12, "nu {} kappa {}", nu, kappa);
        if rows.len() == 1 {
            let g = gaffney_ratio(&a).unwrap().finite().unwrap();
            prop_assert!(rel(g, nu) < 1e-12 || (g == 0.0 && nu == 0.0));
        }
    }
}

#[test]
fn floating_evaluation_of_a_product_matches_the_product_of_evaluations() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let p = Polynomial::from_int_terms(3, &[(3, &[2, 1, 0]), (-1, &[0, 0, 3]), (5, &[1, 1, 1]), (2, &[0, 0, 0])]).unwrap();
    let r = Polynomial::from_int_terms(3, &[(1, &[1, 0, 0]), (-4, &[0, 2, 1]), (7, &[0, 0, 0])]).unwrap();
    let pr = &p * &r;
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let (a, b, c) = (p.eval_f64(&x).unwrap(), r.eval_f64(&x).unwrap(), pr.eval_f64(&x).unwrap());
        // relative to the size of the terms, so that near-cancellation does not count
        let scale = (a.abs() + 10.0) * (b.abs() + 10.0);
        assert!((c - a * b).abs() <= 1e-12 * scale, "{x:?}: {c} vs {}", a * b);
    }
}

/// Complex evaluation with num-complex, independent of the library's own.
fn complex_eval(terms: &[(Complex64, [u32; 3])], z: &[Complex64; 3]) -> Complex64 {
    terms.iter().map(|(c, e)| c * z[0].powu(e[0]) * z[1].powu(e[1]) * z[2].powu(e[2])).sum()
}

#[test]
fn realification_commutes_with_complex_evaluation() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    for (n, qq) in [(1, 1), (1, 2), (2, 1)] {
        let cm = paunescu_zaharia(n, qq);
        let real = cm.realify().unwrap();
        let terms = [
            (Complex64::new(1.0, 0.0), [1, 0, 0]),
            (Complex64::new(-3.0, 0.0), [2 * n + 1, 2 * qq, 0]),
            (Complex64::new(2.0, 0.0), [3 * n + 1, 3 * qq, 0]),
            (Complex64::new(1.0, 0.0), [0, 1, 1]),
        ];
        for _ in 0..100 {
            let z: [Complex64; 3] = std::array::from_fn(|_| Complex64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)));
            let want = complex_eval(&terms, &z);
            let x: Vec<f64> = z.iter().flat_map(|c| [c.re, c.im]).collect();
            let got = real.eval(&x).unwrap();
            let scale = terms.iter().map(|(c, e)| c.norm() * z[0].norm().powi(e[0] as i32) * z[1].norm().powi(e[1] as i32) * z[2].norm().powi(e[2] as i32)).sum::<f64>();
            assert!((got[0] - want.re).abs() <= 1e-12 * scale && (got[1] - want.im).abs() <= 1e-12 * scale);
            // real points: the lift agrees with the original real polynomial
            let xr: Vec<f64> = z.iter().flat_map(|c| [c.re, 0.0]).collect();
            let zr = [Complex64::new(z[0].re, 0.0), Complex64::new(z[1].re, 0.0), Complex64::new(z[2].re, 0.0)];
            let v = real.eval(&xr).unwrap();
            assert!(rel(v[0], complex_eval(&terms, &zr).re) < 1e-12 || v[0].abs() < 1e-12 * scale);
            assert_eq!(v[1], 0.0);
        }
    }
}

#[test]
fn complex_square_and_product_lift() {
    let mut sq = atypical_core::ComplexPolyMap::new("sq", 1);
    sq.push_component([(atypical_core::GaussRational::real(q(1, 1)), vec![2])]).unwrap();
    let parts = sq.realify_components();
    let u2 = Polynomial::from_int_terms(2, &[(1, &[2, 0]), (-1, &[0, 2])]).unwrap();
    let uv = Polynomial::from_int_terms(2, &[(2, &[1, 1])]).unwrap();
    assert_eq!(parts, vec![u2, uv]);
    assert!(sq.realify().is_err(), "C -> C lifts to R^2 -> R^2, which violates n > p");
}

#[test]
fn chart_partials_match_direct_composition_on_random_rotations() {
    let f = int_map("e", 3, &[&[(1, &[2, 0, 0])], &[(1, &[1, 1, 0])]]).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..50 {
        let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cm = ChartMap::for_direction(f.clone(), &u).unwrap();
        let y = [rng.gen_range(0.01..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let t = [0.3, -0.2];
        let parts = cm.chart_partials(&y, &t).unwrap();
        for i in 0..3 {
            let h = 1e-6 * y[i].abs().max(0.01);
            let (mut yp, mut ym) = (y, y);
            yp[i] += h;
            ym[i] -= h;
            let (fp, fm) = (cm.eval(&yp, &t).unwrap(), cm.eval(&ym, &t).unwrap());
            for j in 0..2 {
                let fd = (fp[j] - fm[j]) / (2.0 * h);
                let scale = parts.dfdy.row(j).iter().fold(1.0f64, |m, v| m.max(v.abs()));
                assert!((fd - parts.dfdy[(j, i)]).abs() <= 1e-5 * scale, "{fd} vs {}", parts.dfdy[(j, i)]);
            }
        }
    }
}
