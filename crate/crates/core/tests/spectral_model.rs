use std::f64::consts::PI;

use proptest::prelude::*;
use reeblab::spectral_model::*;

#[test]
fn thresholds_m1() {
    let t = thresholds(&ModelParams::new(vec![1.0]).unwrap(), 3.0).unwrap();
    assert_eq!(t.lambdas, vec![1.0, 2.0, 3.0]);
    let expect = [2f64.sqrt(), 2.0, 6f64.sqrt()];
    for (v, e) in t.values.iter().zip(expect) {
        assert!((v - e).abs() < 1e-15);
    }
    assert_eq!(t.multiplicities, vec![1, 1, 1]);
}

#[test]
fn thresholds_m2_equal() {
    let t = thresholds(&ModelParams::new(vec![1.0, 1.0]).unwrap(), 2.5).unwrap();
    assert_eq!(t.lambdas, vec![1.0, 2.0]);
    assert_eq!(t.multiplicities, vec![2, 3]);
}

#[test]
fn thresholds_rejects_small_cut() {
    assert!(thresholds(&ModelParams::new(vec![1.0]).unwrap(), 0.5).is_err());
}

// Brute-force count of nonzero k in N_0^m with sum k_j mu_j <= cut.
fn brute_count(mu: &[f64], cut: f64) -> u64 {
    fn rec(mu: &[f64], left: f64) -> u64 {
        match mu.split_first() {
            None => 1,
            Some((m, rest)) => {
                let mut c = 0;
                let mut k = 0.0;
                while k * m <= left * (1.0 + 1e-12) {
                    c += rec(rest, left - k * m);
                    k += 1.0;
                }
                c
            }
        }
    }
    rec(mu, cut) - 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn thresholds_conserve_enumeration(mu in prop::collection::vec(0.3f64..3.0, 1..4), cut in 3.0f64..8.0) {
        let p = ModelParams::new(mu).unwrap();
        let t = thresholds(&p, cut).unwrap();
        prop_assert_eq!(t.multiplicities.iter().sum::<u64>(), brute_count(&p.mu, cut));
        prop_assert!((t.values[0] - p.gap_edge()).abs() < 1e-15);
        prop_assert!(t.lambdas.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn threshold_ibp(a in 1u32..4, b in -1i32..3, c in 0i32..3, lambda in 0.2f64..2.0, center in -2.0f64..2.0) {
        let phi = Gaussian { center, sigma: 0.8, scale: 1.0 };
        let lhs = eval_v_threshold(a, b, c, lambda, &phi).unwrap();
        // <d^a v, phi> = -<d^{a-1} v, phi'>: phi' has derivatives shifted by one.
        struct Shifted(Gaussian);
        impl TestFunction for Shifted {
            fn derivative(&self, order: u32, s: f64) -> f64 {
                self.0.derivative(order + 1, s)
            }
        }
        let rhs = -eval_v_threshold(a - 1, b, c, lambda, &Shifted(phi)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn threshold_linear(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let g1 = Gaussian { center: 0.5, sigma: 1.0, scale: x };
        let g2 = Gaussian { center: -1.0, sigma: 0.7, scale: y };
        struct Sum(Gaussian, Gaussian);
        impl TestFunction for Sum {
            fn derivative(&self, k: u32, s: f64) -> f64 {
                self.0.derivative(k, s) + self.1.derivative(k, s)
            }
        }
        let lhs = eval_v_threshold(1, 1, 1, 0.7, &Sum(g1, g2)).unwrap();
        let rhs = eval_v_threshold(1, 1, 1, 0.7, &g1).unwrap() + eval_v_threshold(1, 1, 1, 0.7, &g2).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn u0_even_and_constant(l in -1.4f64..1.4) {
        let p = ModelParams::new(vec![1.0]).unwrap();
        prop_assert_eq!(u0_density(&p, l).unwrap(), u0_density(&p, -l).unwrap());
    }
}

#[test]
fn v_poly_examples() {
    assert!((eval_v_poly(0, &Gaussian::density()).unwrap() - 1.0).abs() < 1e-10);
    assert!(eval_v_poly(1, &Gaussian::standard()).unwrap().abs() < 1e-12);
    assert!((eval_v_poly(2, &Gaussian::standard()).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-9);
}

#[test]
fn v_threshold_closed_form() {
    let v = eval_v_threshold(0, 0, 0, 0.5, &Gaussian::standard()).unwrap();
    let oracle = (2.0 * PI).sqrt() * (-0.5f64).exp();
    assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    assert!((v - 1.52035).abs() < 1e-5);
}

#[test]
fn v_threshold_support_and_parity() {
    let inside = Bump {
        center: 0.1,
        radius: 0.5,
    };
    for (a, b, c) in [(0, 0, 0), (2, 1, 1), (1, -1, 3)] {
        assert_eq!(eval_v_threshold(a, b, c, 0.5, &inside).unwrap(), 0.0);
    }
    let odd = OddGaussianPair {
        offset: 1.3,
        sigma: 0.6,
    };
    for b in [0, 2] {
        assert!(eval_v_threshold(0, b, 1, 0.4, &odd).unwrap().abs() < 1e-10);
    }
    assert!(matches!(
        eval_v_threshold(0, 0, -1, 0.5, &Gaussian::standard()),
        Err(SpectralError::Singularity(-1))
    ));
}

#[test]
fn u0_at_zero_formula() {
    let sets: [Vec<f64>; 5] = [
        vec![1.0],
        vec![1.0, 2.0],
        vec![0.5],
        vec![1.0, 1.0, 1.0],
        vec![0.3, 1.7, 2.2, 4.0],
    ];
    for mu in sets {
        let p = ModelParams::new(mu.clone()).unwrap();
        let n = (2 * mu.len() + 1) as f64;
        let expect = mu.iter().product::<f64>() / (4.0 * PI).powf(n / 2.0);
        assert_eq!(u0_density(&p, 0.0).unwrap(), expect);
    }
    let p1 = ModelParams::new(vec![1.0]).unwrap();
    assert!((u0_at_zero(&p1) - 0.0224484).abs() < 1e-7);
    let p2 = ModelParams::new(vec![1.0, 2.0]).unwrap();
    assert!((u0_at_zero(&p2) - 0.0035728).abs() < 1e-7);
    assert!(u0_density(&p1, 2f64.sqrt()).is_err());
}

// Model Landau spectrum on a periodic box: the lowest Landau level gives the
// branch lambda = xi, each mode with degeneracy prod_j flux_j; the other
// levels give +-sqrt(xi^2 + 2 Lambda_k). Inside the gap only the first branch
// contributes, so the eigenvalue density there is flat.
#[test]
fn gap_density_flat_on_box_spectrum() {
    let mu = [1.0, 2.5];
    let box_len: f64 = 40.0;
    let flux: Vec<u64> = mu
        .iter()
        .map(|m| (m * box_len * box_len / (2.0 * PI)).round() as u64)
        .collect();
    let degeneracy: u64 = flux.iter().product();
    let edge = (2.0 * mu[0]).sqrt();
    let mut spectrum: Vec<(f64, u64)> = Vec::new();
    let kmax = 8;
    for j in -200i64..=200 {
        let xi = 2.0 * PI * j as f64 / box_len;
        spectrum.push((xi, degeneracy));
        for k1 in 0..kmax {
            for k2 in 0..kmax {
                if k1 + k2 == 0 {
                    continue;
                }
                let l = k1 as f64 * mu[0] + k2 as f64 * mu[1];
                let e = (xi * xi + 2.0 * l).sqrt();
                spectrum.push((e, degeneracy));
                spectrum.push((-e, degeneracy));
            }
        }
    }
    let bins = 8;
    let width = 2.0 * edge * 0.95 / bins as f64;
    let counts: Vec<u64> = (0..bins)
        .map(|b| {
            let lo = -0.95 * edge + b as f64 * width;
            spectrum
                .iter()
                .filter(|(e, _)| *e >= lo && *e < lo + width)
                .map(|(_, d)| d)
                .sum()
        })
        .collect();
    let (mn, mx) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
    assert!(mx - mn <= degeneracy, "{counts:?}");
}

#[test]
fn stream_examples() {
    let s = synthesize_stream(
        &StreamSpec::Progression {
            a: 0.25,
            spacing: 1.0,
        },
        3.0,
    )
    .unwrap();
    assert_eq!(s.eigenvalues, vec![-2.75, -1.75, -0.75, 0.25, 1.25, 2.25]);
    let sym = synthesize_stream(
        &StreamSpec::Progression {
            a: 0.5,
            spacing: 1.0,
        },
        7.3,
    )
    .unwrap();
    assert_eq!(
        sym,
        EigenvalueStream {
            label: sym.label.clone(),
            ..sym.negated()
        }
    );
    let u = synthesize_stream(
        &StreamSpec::Density {
            profile: DensityProfile::uniform(-1.0, 1.0, 2.0),
            count: Some(4),
        },
        5.0,
    )
    .unwrap();
    assert_eq!(u.eigenvalues, vec![-0.75, -0.25, 0.25, 0.75]);
    let d = DensityProfile {
        knots: vec![-2.0, -0.5, 0.5, 2.0],
        rates: vec![3.0, 7.0, 3.0],
    };
    let s = synthesize_stream(
        &StreamSpec::Density {
            profile: d,
            count: None,
        },
        5.0,
    )
    .unwrap();
    assert_eq!(s.eigenvalues, s.negated().eigenvalues);
    assert!(synthesize_stream(
        &StreamSpec::Progression {
            a: 0.5,
            spacing: 1.0
        },
        0.1
    )
    .is_err());
}

#[test]
fn stream_json_roundtrip() {
    let s = synthesize_stream(
        &StreamSpec::Progression {
            a: 0.3,
            spacing: 1.0,
        },
        4.0,
    )
    .unwrap();
    let j = serde_json::to_string(&s).unwrap();
    assert_eq!(EigenvalueStream::from_json(&j).unwrap(), s);
    let bad = r#"{"eigenvalues":[1.0,0.5],"multiplicities":[1,1],"cutoff":2.0,"label":"x"}"#;
    assert!(EigenvalueStream::from_json(bad).is_err());
    let spec: StreamSpec = serde_json::from_str(r#"{"kind":"progression","a":0.25}"#).unwrap();
    assert_eq!(
        spec,
        StreamSpec::Progression {
            a: 0.25,
            spacing: 1.0
        }
    );
}
