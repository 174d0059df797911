//! Contact volume `int a ^ (da)^m` of ellipsoids and lens spaces for the
//! tautological form `a = sum (x_j dy_j - y_j dx_j)`, and the leading term of
//! the rescaled eta invariant.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flows::{Flow, LensFlow, LensSpaceParams};
use crate::numeric::{integrate, map_chunks, pairwise_sum, stream_rng, NumericError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension m = {0} is outside the supported range 1..=5")]
    Dimension(usize),
    #[error(transparent)]
    Quadrature(#[from] NumericError),
}

/// Below this many samples the confidence interval is flagged as unreliable.
pub const SAMPLE_FLOOR: usize = 10_000;
const CHUNKS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    MonteCarlo,
    AnalyticOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactVolumeResult {
    pub value: f64,
    pub method: VolumeMethod,
    /// 95% interval (Monte Carlo only).
    pub ci: Option<(f64, f64)>,
    pub samples: usize,
    /// The ellipsoid value the lens value was divided from.
    pub ellipsoid_value: f64,
    pub q0: u64,
    pub warning: Option<String>,
}

/// `(2 pi)^{m+1} / (q0 prod a_j)`, from Stokes on the solid ellipsoid.
pub fn contact_volume_closed_form(params: &LensSpaceParams) -> ContactVolumeResult {
    let m = params.m();
    let e = TAU.powi(m as i32 + 1) / params.a.iter().product::<f64>();
    ContactVolumeResult {
        value: e / params.q0() as f64,
        method: VolumeMethod::AnalyticOracle,
        ci: None,
        samples: 0,
        ellipsoid_value: e,
        q0: params.q0(),
        warning: None,
    }
}

/// Area of the unit sphere `S^{2m+1}`: `2 pi^{m+1} / m!`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * PI.powi(m as i32 + 1) / factorial(m)
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Pfaffian by expansion along the first row (fine for the 2m x 2m minors used
/// here, m <= 5).
pub fn pfaffian(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    if n % 2 == 1 {
        return 0.0;
    }
    let idx: Vec<usize> = (0..n).collect();
    pf_rec(a, &idx)
}

fn pf_rec(a: &[Vec<f64>], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let i = idx[0];
    let mut acc = 0.0;
    for (k, &j) in idx.iter().enumerate().skip(1) {
        let rest: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != 0 && p != k)
            .map(|(_, &v)| v)
            .collect();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * a[i][j] * pf_rec(a, &rest);
    }
    acc
}

fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

/// Orthonormal tangent frame of the unit sphere at `w`, oriented so that
/// `(w, e_1, ..., e_{2m+1})` is positive.
pub fn tangent_frame(w: &[f64]) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    let mut basis: Vec<Vec<f64>> = vec![w.to_vec()];
    for k in 0..n {
        if frame.len() == n - 1 {
            break;
        }
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v.clone());
            frame.push(v);
        }
    }
    if det(basis) < 0.0 {
        frame[0].iter_mut().for_each(|x| *x = -*x);
    }
    frame
}

/// Density of the pulled-back form `a ^ (da)^m` on the unit `w`-sphere, where
/// `z_j = w_j / sqrt(a_j)`, relative to the round area. Evaluated on an
/// orthonormal frame as `m! sum_i (-1)^i alpha_i Pf(Omega without i)`.
pub fn contact_density(a_weights: &[f64], w: &[f64]) -> f64 {
    let frame = tangent_frame(w);
    let alpha = |v: &[f64]| -> f64 {
        a_weights
            .iter()
            .enumerate()
            .map(|(j, aj)| (w[2 * j] * v[2 * j + 1] - w[2 * j + 1] * v[2 * j]) / aj)
            .sum()
    };
    let omega = |u: &[f64], v: &[f64]| -> f64 {
        a_weights
            .iter()
            .enumerate()
            .map(|(j, aj)| 2.0 / aj * (u[2 * j] * v[2 * j + 1] - u[2 * j + 1] * v[2 * j]))
            .sum()
    };
    let d = frame.len();
    let al: Vec<f64> = frame.iter().map(|e| alpha(e)).collect();
    let om: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|k| omega(&frame[i], &frame[k])).collect())
        .collect();
    let m = (d - 1) / 2;
    let mut acc = 0.0;
    for i in 0..d {
        let keep: Vec<usize> = (0..d).filter(|&k| k != i).collect();
        let minor: Vec<Vec<f64>> = keep
            .iter()
            .map(|&r| keep.iter().map(|&c| om[r][c]).collect())
            .collect();
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * al[i] * pfaffian(&minor);
    }
    factorial(m) * acc
}

// Sample sums (f, f^2) of `field * density` over one chunk.
fn chunk_moments(
    flow: &LensFlow,
    field: &(dyn Fn(&[f64]) -> f64 + Sync),
    seed: u64,
    chunk: usize,
    count: usize,
) -> (f64, f64) {
    let mut rng = stream_rng(seed, chunk as u64);
    let mut vals = Vec::with_capacity(count);
    for _ in 0..count {
        let p = flow.sample(&mut rng);
        let w = flow.embed(&p);
        vals.push(field(&p.coords) * contact_density(&flow.params.a, &w));
    }
    let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
    (pairwise_sum(&vals), pairwise_sum(&sq))
}

fn mc_integral(
    params: &LensSpaceParams,
    field: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Result<(f64, f64), GeometryError> {
    if n_samples < 2 {
        return Err(GeometryError::TooFewSamples(n_samples));
    }
    let m = params.m();
    if !(1..=5).contains(&m) {
        return Err(GeometryError::Dimension(m));
    }
    let flow = LensFlow::new(
        LensSpaceParams::ellipsoid(params.a.clone()).expect("weights already validated"),
    );
    let parts = map_chunks(CHUNKS, workers, |c| {
        let count = n_samples / CHUNKS + usize::from(c < n_samples % CHUNKS);
        chunk_moments(&flow, field, seed, c, count)
    });
    let s: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let s2: Vec<f64> = parts.iter().map(|p| p.1).collect();
    let n = n_samples as f64;
    let mean = pairwise_sum(&s) / n;
    let var = ((pairwise_sum(&s2) / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let area = sphere_area(m);
    Ok((area * mean, area * (var / n).sqrt()))
}

/// Monte Carlo contact volume. Samples are uniform on the `w`-sphere
/// (`w_j = sqrt(a_j) z_j`); the lens value is the ellipsoid value over `q0`.
pub fn contact_volume(
    params: &LensSpaceParams,
    n_samples: usize,
    seed: u64,
) -> Result<ContactVolumeResult, GeometryError> {
    contact_volume_with_workers(params, n_samples, seed, 1)
}

pub fn contact_volume_with_workers(
    params: &LensSpaceParams,
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Result<ContactVolumeResult, GeometryError> {
    let (e, se) = mc_integral(params, &|_| 1.0, n_samples, seed, workers)?;
    let q0 = params.q0() as f64;
    let warning = (n_samples < SAMPLE_FLOOR).then(|| {
        format!("{n_samples} samples is below the floor of {SAMPLE_FLOOR}; interval unreliable")
    });
    Ok(ContactVolumeResult {
        value: e / q0,
        method: VolumeMethod::MonteCarlo,
        ci: Some(((e - 1.96 * se) / q0, (e + 1.96 * se) / q0)),
        samples: n_samples,
        ellipsoid_value: e,
        q0: params.q0(),
        warning,
    })
}

/// Contact volume of `E(a0, a1)` by iterated quadrature in the coordinates
/// `r0^2 = s / a0`, `r1^2 = (1 - s) / a1`, `theta0`, `theta1`: the 3-form is
/// evaluated on the coordinate vectors of this chart in `C^2`.
pub fn ellipsoid_quadrature_oracle(a0: f64, a1: f64) -> Result<f64, GeometryError> {
    // Ambient point and coordinate tangents at (s, t0, t1).
    let chart = |s: f64, t0: f64, t1: f64| -> [[f64; 4]; 4] {
        let (r0, r1) = ((s / a0).sqrt(), ((1.0 - s) / a1).sqrt());
        let (s0, c0) = t0.sin_cos();
        let (s1, c1) = t1.sin_cos();
        let p = [r0 * c0, r0 * s0, r1 * c1, r1 * s1];
        let dr0 = 0.5 / (a0 * r0);
        let dr1 = -0.5 / (a1 * r1);
        let ds = [dr0 * c0, dr0 * s0, dr1 * c1, dr1 * s1];
        let dt0 = [-r0 * s0, r0 * c0, 0.0, 0.0];
        let dt1 = [0.0, 0.0, -r1 * s1, r1 * c1];
        [p, ds, dt0, dt1]
    };
    let form = |s: f64, t0: f64, t1: f64| -> f64 {
        let [p, u, v, w] = chart(s, t0, t1);
        let alpha = |x: &[f64; 4]| p[0] * x[1] - p[1] * x[0] + p[2] * x[3] - p[3] * x[2];
        let omega = |x: &[f64; 4], y: &[f64; 4]| {
            2.0 * (x[0] * y[1] - x[1] * y[0] + x[2] * y[3] - x[3] * y[2])
        };
        alpha(&u) * omega(&v, &w) - alpha(&v) * omega(&u, &w) + alpha(&w) * omega(&u, &v)
    };
    let tol = 1e-10;
    let inner =
        |s: f64, t0: f64| integrate(|t1| form(s, t0, t1), 0.0, TAU, &[], tol).unwrap_or(f64::NAN);
    let middle = |s: f64| integrate(|t0| inner(s, t0), 0.0, TAU, &[], tol).unwrap_or(f64::NAN);
    let v = integrate(middle, 1e-12, 1.0 - 1e-12, &[], tol)?;
    Ok(v.abs())
}

/// `-(m/2) (2 pi)^{-(m+1)} vol_X`.
pub fn leading_term_metric_contact(m: usize, vol_x: f64) -> f64 {
    -(m as f64 / 2.0) * TAU.powi(-(m as i32 + 1)) * vol_x
}

/// The constant trace field for which [`leading_term_general`] reduces to
/// [`leading_term_metric_contact`] with `vol_X` the contact volume: `m * m!`.
pub fn metric_contact_trace(m: usize) -> f64 {
    m as f64 * factorial(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingTerm {
    pub value: f64,
    pub ci: (f64, f64),
    pub samples: usize,
}

/// `-1/2 (2 pi)^{-(m+1)} (1/m!) int field a ^ (da)^m` over the lens space, by
/// Monte Carlo. `field` receives the chart coordinates `(re z_0, im z_0, ...)`
/// and must be invariant under the cyclic action.
pub fn leading_term_general(
    params: &LensSpaceParams,
    field: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_samples: usize,
    seed: u64,
) -> Result<LeadingTerm, GeometryError> {
    let m = params.m();
    let (i, se) = mc_integral(params, field, n_samples, seed, 1)?;
    let k = -0.5 * TAU.powi(-(m as i32 + 1)) / factorial(m) / params.q0() as f64;
    let (lo, hi) = (k * (i - 1.96 * se), k * (i + 1.96 * se));
    Ok(LeadingTerm {
        value: k * i,
        ci: (lo.min(hi), lo.max(hi)),
        samples: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfaffian_small() {
        assert_eq!(pfaffian(&[vec![0.0, 3.0], vec![-3.0, 0.0]]), 3.0);
        // Pf of 4x4 = a12 a34 - a13 a24 + a14 a23
        let a = vec![
            vec![0.0, 1.0, 2.0, 3.0],
            vec![-1.0, 0.0, 4.0, 5.0],
            vec![-2.0, -4.0, 0.0, 6.0],
            vec![-3.0, -5.0, -6.0, 0.0],
        ];
        assert_eq!(pfaffian(&a), 6.0 - 10.0 + 12.0);
    }

    #[test]
    fn round_sphere_density_constant() {
        let w = [0.5, 0.5, 0.5, 0.5];
        let d = contact_density(&[1.0, 1.0], &w);
        assert!((d - 2.0).abs() < 1e-12, "{d}");
        let w2 = [0.0, 0.0, 0.6, 0.8];
        assert!((contact_density(&[1.0, 1.0], &w2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn frame_is_orthonormal() {
        let w = [0.1, -0.3, 0.5, 0.2, (1.0f64 - 0.39).sqrt(), 0.0];
        let f = tangent_frame(&w);
        assert_eq!(f.len(), 5);
        for (i, e) in f.iter().enumerate() {
            assert!(e.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>().abs() < 1e-12);
            for (k, g) in f.iter().enumerate() {
                let d: f64 = e.iter().zip(g).map(|(x, y)| x * y).sum();
                assert!((d - if i == k { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
