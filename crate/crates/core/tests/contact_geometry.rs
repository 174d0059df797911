use std::f64::consts::PI;

use proptest::prelude::*;
use reeblab::contact_geometry::*;
use reeblab::flows::LensSpaceParams;

fn phi() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

#[test]
fn round_sphere_matches_quadrature() {
    let oracle = ellipsoid_quadrature_oracle(1.0, 1.0).unwrap();
    assert!((oracle - 4.0 * PI * PI).abs() < 1e-6, "{oracle}");
    let r = contact_volume(
        &LensSpaceParams::ellipsoid(vec![1.0, 1.0]).unwrap(),
        20_000,
        1,
    )
    .unwrap();
    assert!(((r.value - oracle) / oracle).abs() < 0.01, "{}", r.value);
    assert!(r.warning.is_none());
}

#[test]
fn irrational_ellipsoid_matches_quadrature() {
    let a = [1.0, phi()];
    let oracle = ellipsoid_quadrature_oracle(a[0], a[1]).unwrap();
    let closed = contact_volume_closed_form(&LensSpaceParams::ellipsoid(a.to_vec()).unwrap()).value;
    assert!((oracle - closed).abs() < 1e-6 * closed);
    let r = contact_volume(&LensSpaceParams::ellipsoid(a.to_vec()).unwrap(), 40_000, 3).unwrap();
    // In dimension 3 the pulled-back density is constant on the sphere, so the
    // estimate is exact up to rounding and the interval collapses.
    let (lo, hi) = r.ci.unwrap();
    assert!(
        lo - 1e-8 * oracle <= oracle && oracle <= hi + 1e-8 * oracle,
        "{lo} {hi} vs {oracle}"
    );
}

#[test]
fn higher_dimension_closed_form() {
    let p = LensSpaceParams::ellipsoid(vec![1.0, 2.0, 0.5]).unwrap();
    let r = contact_volume(&p, 40_000, 11).unwrap();
    let c = contact_volume_closed_form(&p).value;
    assert!(((r.value - c) / c).abs() < 0.02, "{} vs {c}", r.value);
}

#[test]
fn lens_quotient_exact() {
    let lens = LensSpaceParams::new(vec![2, 1], vec![1.0, phi()]).unwrap();
    let ell = LensSpaceParams::ellipsoid(vec![1.0, phi()]).unwrap();
    let rl = contact_volume(&lens, 5_000, 9).unwrap();
    let re = contact_volume(&ell, 5_000, 9).unwrap();
    assert_eq!(rl.value, re.value / 2.0);
    assert_eq!(rl.ellipsoid_value, re.value);
    assert!(rl.warning.is_some());
    let c = contact_volume_closed_form(&lens);
    assert_eq!(c.value, c.ellipsoid_value / 2.0);
}

#[test]
fn deterministic_and_worker_invariant() {
    let p = LensSpaceParams::ellipsoid(vec![1.3, 0.7]).unwrap();
    let a = contact_volume(&p, 3_000, 42).unwrap();
    let b = contact_volume(&p, 3_000, 42).unwrap();
    let c = contact_volume_with_workers(&p, 3_000, 42, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.value, c.value);
}

#[test]
fn metric_contact_examples() {
    assert_eq!(leading_term_metric_contact(1, 2.0 * PI * PI), -0.25);
    assert_eq!(leading_term_metric_contact(3, 0.0), 0.0);
    let v = 7.5;
    assert!((leading_term_metric_contact(2, v) + v / (8.0 * PI.powi(3))).abs() < 1e-15);
}

#[test]
fn general_leading_term() {
    let p = LensSpaceParams::ellipsoid(vec![1.0, 1.0]).unwrap();
    let n = 20_000;
    let zero = leading_term_general(&p, &|_| 0.0, n, 5).unwrap();
    assert_eq!(zero.value, 0.0);

    let vol = contact_volume(&p, n, 5).unwrap().value;
    let c = 3.0;
    let lt = leading_term_general(&p, &|_| c, n, 5).unwrap();
    let expect = -0.5 * (2.0 * PI).powi(-2) * c * vol;
    assert!((lt.value - expect).abs() < 1e-12 * expect.abs());

    let calibrated = leading_term_general(&p, &|_| metric_contact_trace(1), n, 5).unwrap();
    let target = leading_term_metric_contact(1, 4.0 * PI * PI);
    assert!(((calibrated.value - target) / target).abs() < 0.01);

    // Linearity in the field.
    let f = |z: &[f64]| z[0] * z[0] + z[1] * z[1];
    let g = |z: &[f64]| 1.0 + z[2] * z[2];
    let lf = leading_term_general(&p, &f, n, 8).unwrap().value;
    let lg = leading_term_general(&p, &g, n, 8).unwrap().value;
    let lsum = leading_term_general(&p, &|z| 2.0 * f(z) - g(z), n, 8)
        .unwrap()
        .value;
    assert!((lsum - (2.0 * lf - lg)).abs() < 1e-12);
}

#[test]
fn rejects_too_few_samples() {
    let p = LensSpaceParams::ellipsoid(vec![1.0, 1.0]).unwrap();
    assert!(matches!(
        contact_volume(&p, 1, 0),
        Err(GeometryError::TooFewSamples(1))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_law(a0 in 0.5f64..2.0, a1 in 0.5f64..2.0, c in 0.3f64..3.0) {
        let base = contact_volume(&LensSpaceParams::ellipsoid(vec![a0, a1]).unwrap(), 4_000, 17).unwrap();
        let scaled = contact_volume(&LensSpaceParams::ellipsoid(vec![c * a0, c * a1]).unwrap(), 4_000, 17).unwrap();
        let (lo, hi) = base.ci.unwrap();
        let want = scaled.value * c * c;
        prop_assert!(want > lo - 1e-9 * want && want < hi + 1e-9 * want);
    }

    #[test]
    fn density_positive(w in prop::collection::vec(-1.0f64..1.0, 4), a0 in 0.3f64..3.0, a1 in 0.3f64..3.0) {
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3);
        let w: Vec<f64> = w.iter().map(|x| x / n).collect();
        prop_assert!(contact_density(&[a0, a1], &w) > 0.0);
    }
}
