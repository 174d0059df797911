//! Eta invariants of eigenvalue streams: the erfc heat tail, Hurwitz-zeta
//! continuation for progressions, small-time providers and planted remainder
//! experiments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{fit_line, pairwise_sum, LineFit};
use crate::presets::Preset;
use crate::spectral_model::{EigenvalueStream, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EtaError {
    #[error("a = {0} must lie in (0, 1)")]
    Domain(f64),
    #[error("Hurwitz zeta needs s != 1 and a > 0 (s = {s}, a = {a})")]
    Zeta { s: f64, a: f64 },
    #[error("degenerate family: {0}")]
    DegenerateFamily(String),
    #[error(transparent)]
    Stream(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMethod {
    ErfcTail,
    ZetaHurwitz,
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaResult {
    pub value: f64,
    pub method: EtaMethod,
    pub cutoff: f64,
    /// Estimate of the contribution of eigenvalues beyond the cutoff.
    pub tail_bound: f64,
    /// Zero eigenvalues (with multiplicity); they contribute 0 to eta.
    pub zero_modes: u64,
    /// The small-time local term was not supplied.
    pub small_t_omitted: bool,
    pub small_t: Option<f64>,
}

impl EtaResult {
    /// `(k + eta) / 2`.
    pub fn reduced(&self) -> f64 {
        0.5 * (self.zero_modes as f64 + self.value)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `E(x) = sign(x) erfc(|x|)`, `sign(0) = 0`.
pub fn e_function(x: f64) -> f64 {
    sign(x) * libm::erfc(x.abs())
}

fn zero_modes(stream: &EigenvalueStream) -> u64 {
    stream
        .iter()
        .filter(|(x, _)| *x == 0.0)
        .map(|(_, m)| m as u64)
        .sum()
}

// Density near the cutoff from the outer 10% band, times e^{-cutoff^2}.
fn tail_bound(stream: &EigenvalueStream) -> f64 {
    let c = stream.cutoff;
    if !(c > 0.0) || stream.is_empty() {
        return 0.0;
    }
    let band = 0.1 * c;
    let n: u64 = stream
        .iter()
        .filter(|(x, _)| x.abs() >= c - band)
        .map(|(_, m)| m as u64)
        .sum();
    n as f64 / (2.0 * band) * (-c * c).exp()
}

/// `sum sign(lambda) g(|lambda|)` with multiplicity. Both signs are summed in
/// order of increasing `|lambda|` so that negating the stream negates the
/// result bit for bit.
fn signed_sum(stream: &EigenvalueStream, g: impl Fn(f64) -> f64) -> f64 {
    let pos: Vec<f64> = stream
        .iter()
        .filter(|(x, _)| *x > 0.0)
        .map(|(x, m)| m as f64 * g(x))
        .collect();
    let neg: Vec<f64> = stream
        .iter()
        .rev()
        .filter(|(x, _)| *x < 0.0)
        .map(|(x, m)| m as f64 * g(-x))
        .collect();
    pairwise_sum(&pos) - pairwise_sum(&neg)
}

/// `sum sign(lambda) erfc(|lambda|)` with multiplicity.
pub fn eta_erfc(stream: &EigenvalueStream) -> EtaResult {
    EtaResult {
        value: signed_sum(stream, libm::erfc),
        method: EtaMethod::ErfcTail,
        cutoff: stream.cutoff,
        tail_bound: tail_bound(stream),
        zero_modes: zero_modes(stream),
        small_t_omitted: true,
        small_t: None,
    }
}

// Bernoulli numbers B_2 .. B_24.
const BERNOULLI: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Hurwitz zeta `zeta(s, a) = sum_{n >= 0} (n + a)^{-s}`, continued to all real
/// `s != 1` by Euler-Maclaurin summation.
pub fn hurwitz_zeta(s: f64, a: f64) -> Result<f64, EtaError> {
    if s == 1.0 || !(a > 0.0) || !s.is_finite() {
        return Err(EtaError::Zeta { s, a });
    }
    let n = 12usize + (s.abs().ceil() as usize);
    let direct: Vec<f64> = (0..n).map(|k| (k as f64 + a).powf(-s)).collect();
    let x = n as f64 + a;
    let mut acc = pairwise_sum(&direct) + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // sum_k B_{2k}/(2k)! s(s+1)...(s+2k-2) x^{-s-2k+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xp = x.powf(-s - 1.0);
    for (k, b) in BERNOULLI.iter().enumerate() {
        let term = b / fact * rising * xp;
        acc += term;
        if term == 0.0 || term.abs() < 1e-17 * acc.abs() {
            break;
        }
        let j = 2.0 * (k as f64 + 1.0);
        rising *= (s + j - 1.0) * (s + j);
        fact *= (j + 1.0) * (j + 2.0);
        xp /= x * x;
    }
    Ok(acc)
}

/// `eta(s)` of `{c (n + a) : n in Z}`: `c^{-s} (zeta(s, a) - zeta(s, 1 - a))`.
pub fn eta_function_progression(a: f64, c: f64, s: f64) -> Result<f64, EtaError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(EtaError::Domain(a));
    }
    Ok(c.powf(-s) * (hurwitz_zeta(s, a)? - hurwitz_zeta(s, 1.0 - a)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressionEta {
    pub result: EtaResult,
    /// Partial sum of `sign(lambda) |lambda|^{-2}` over `|lambda| <= cutoff`.
    pub partial_s2: f64,
    /// `zeta(2, a) - zeta(2, 1 - a)`.
    pub zeta_s2: f64,
    /// Bound on the omitted terms of the `s = 2` partial sum.
    pub s2_tail_bound: f64,
}

/// `eta(0)` of `{n + a : n in Z}` by Hurwitz continuation (`= 1 - 2a`), with
/// the `s = 2` series cross-check up to `cutoff`.
pub fn eta_zeta_progression(a: f64, cutoff: f64) -> Result<ProgressionEta, EtaError> {
    let value = eta_function_progression(a, 1.0, 0.0)?;
    let lo = (-cutoff - a).ceil() as i64;
    let hi = (cutoff - a).floor() as i64;
    let terms: Vec<f64> = (lo..=hi)
        .map(|n| {
            let x = n as f64 + a;
            sign(x) / (x * x)
        })
        .collect();
    let partial_s2 = pairwise_sum(&terms);
    let zeta_s2 = eta_function_progression(a, 1.0, 2.0)?;
    // Omitted tails on each side are below 1/(cutoff - 1); their difference
    // is smaller, this keeps the bound simple.
    let s2_tail_bound = 2.0 / (cutoff - 1.0).max(1.0);
    Ok(ProgressionEta {
        result: EtaResult {
            value,
            method: EtaMethod::ZetaHurwitz,
            cutoff,
            tail_bound: 0.0,
            zero_modes: 0,
            small_t_omitted: false,
            small_t: None,
        },
        partial_s2,
        zeta_s2,
        s2_tail_bound,
    })
}

/// Small-time contribution `int_0^1 (pi t)^{-1/2} tr[D e^{-t D^2}] dt` of a
/// stream, which the stream alone cannot determine for infinite spectra.
pub trait SmallTimeProvider {
    fn small_t(&self, stream: &EigenvalueStream) -> f64;
    fn describe(&self) -> String;
}

/// Exact value for the full progression `{c (n + a)}`, from Poisson summation:
/// `sum_{k >= 1} (2 / (pi k)) sin(2 pi k a) exp(-pi^2 k^2 / c^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressionSmallTime {
    pub a: f64,
    pub spacing: f64,
}

impl ProgressionSmallTime {
    pub fn scaled(&self, c: f64) -> Self {
        ProgressionSmallTime {
            a: self.a,
            spacing: self.spacing * c,
        }
    }
}

impl SmallTimeProvider for ProgressionSmallTime {
    fn small_t(&self, _stream: &EigenvalueStream) -> f64 {
        let c = self.spacing;
        let mut terms = Vec::new();
        for k in 1.. {
            let kf = k as f64;
            let damp = (-(PI * kf / c).powi(2)).exp();
            if damp < 1e-18 {
                break;
            }
            terms.push(2.0 / (PI * kf) * (2.0 * PI * kf * self.a).sin() * damp);
        }
        pairwise_sum(&terms)
    }

    fn describe(&self) -> String {
        format!("progression(a={}, spacing={})", self.a, self.spacing)
    }
}

/// For a finite spectrum the small-time integral is `sum sign(lambda) erf(|lambda|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteStreamSmallTime;

impl SmallTimeProvider for FiniteStreamSmallTime {
    fn small_t(&self, stream: &EigenvalueStream) -> f64 {
        signed_sum(stream, libm::erf)
    }

    fn describe(&self) -> String {
        "finite stream".into()
    }
}

/// `eta_erfc(stream)` plus the small-time term when a provider is given.
pub fn eta_full_from_stream(
    stream: &EigenvalueStream,
    provider: Option<&dyn SmallTimeProvider>,
) -> EtaResult {
    let mut r = eta_erfc(stream);
    if let Some(p) = provider {
        let s = p.small_t(stream);
        r.value += s;
        r.small_t = Some(s);
        r.small_t_omitted = false;
        r.method = EtaMethod::Split;
    }
    r
}

/// Synthetic family: a symmetric bulk plus `round(h^{-m} u0 vol / T(h))`
/// eigenvalues planted inside the Weyl window `(0, sqrt(h) / T)`, so that
/// `h^m eta = u0 vol / T(h)` up to rounding. `recipe = None` plants nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFamily {
    pub m: u32,
    pub u0: f64,
    pub vol: f64,
    pub recipe: Option<Preset>,
    /// Bulk eigenvalues per side (kept small; the bulk is symmetric).
    pub bulk: usize,
}

impl PlantedFamily {
    pub fn planted_count(&self, h: f64) -> u64 {
        match &self.recipe {
            None => 0,
            Some(p) => (h.powi(-(self.m as i32)) * self.u0 * self.vol / p.time(h)).round() as u64,
        }
    }

    pub fn stream(&self, h: f64) -> Result<EigenvalueStream, EtaError> {
        let mut vals: Vec<f64> = Vec::with_capacity(2 * self.bulk + 1);
        for j in 0..self.bulk {
            let x = 0.5 + 3.0 * (j as f64 + 0.5) / self.bulk as f64;
            vals.push(x);
            vals.push(-x);
        }
        let mut s = EigenvalueStream::new(vals, 4.0, format!("planted(h={h})"))?;
        let k = self.planted_count(h);
        if k > 0 {
            let t = self.recipe.as_ref().unwrap().time(h);
            let w = 0.5 * h.sqrt() / t;
            let i = s.eigenvalues.partition_point(|&x| x < w);
            s.eigenvalues.insert(i, w);
            s.multiplicities.insert(
                i,
                u32::try_from(k)
                    .map_err(|_| EtaError::DegenerateFamily("plant too large".into()))?,
            );
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateTarget {
    /// `|R| ~ C h^{exponent}`.
    Power { exponent: f64 },
    /// `|R| ~ C / |ln h|`.
    ReciprocalLog,
}

impl RateTarget {
    fn shape(&self, h: f64) -> f64 {
        match *self {
            RateTarget::Power { exponent } => h.powf(exponent),
            RateTarget::ReciprocalLog => 1.0 / h.ln().abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderPoint {
    pub h: f64,
    pub eta: f64,
    /// `h^m eta - leading`.
    pub remainder: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub points: Vec<RemainderPoint>,
    /// Least-squares `C` in `|R| = C shape(h)`.
    pub constant: f64,
    /// Log-log fit of `|R|` against `h` (slope = fitted exponent).
    pub power_fit: Option<LineFit>,
    /// Best `C` and RMS log-residual of `|R| = C / |ln h|`.
    pub reclog_constant: Option<f64>,
    pub reclog_residual: Option<f64>,
    /// Reciprocal-log residual below the power-law residual.
    pub prefers_reclog: Option<bool>,
}

/// Evaluates `R(h) = h^m eta(h) - leading` over a family and fits it.
pub fn remainder_experiment(
    family: &dyn Fn(f64) -> Result<EigenvalueStream, EtaError>,
    hs: &[f64],
    m: u32,
    leading: f64,
    target: RateTarget,
) -> Result<RemainderReport, EtaError> {
    if hs.len() < 3 {
        return Err(EtaError::DegenerateFamily(format!(
            "need at least 3 values of h, got {}",
            hs.len()
        )));
    }
    let mut points = Vec::with_capacity(hs.len());
    for &h in hs {
        let s = family(h)?;
        let eta = eta_full_from_stream(&s, Some(&FiniteStreamSmallTime)).value;
        points.push(RemainderPoint {
            h,
            eta,
            remainder: h.powi(m as i32) * eta - leading,
        });
    }
    let num: f64 = points
        .iter()
        .map(|p| p.remainder.abs() * target.shape(p.h))
        .sum();
    let den: f64 = points.iter().map(|p| target.shape(p.h).powi(2)).sum();
    let constant = num / den;
    let positive: Vec<&RemainderPoint> =
        points.iter().filter(|p| p.remainder.abs() > 0.0).collect();
    let (mut power_fit, mut reclog_constant, mut reclog_residual, mut prefers_reclog) =
        (None, None, None, None);
    if positive.len() >= 3 {
        let xs: Vec<f64> = positive.iter().map(|p| p.h.ln()).collect();
        let ys: Vec<f64> = positive.iter().map(|p| p.remainder.abs().ln()).collect();
        let fit = fit_line(&xs, &ys).map_err(|e| EtaError::DegenerateFamily(e.to_string()))?;
        let zs: Vec<f64> = positive
            .iter()
            .map(|p| p.remainder.abs().ln() + p.h.ln().abs().ln())
            .collect();
        let lc = zs.iter().sum::<f64>() / zs.len() as f64;
        let res = (zs.iter().map(|z| (z - lc).powi(2)).sum::<f64>() / zs.len() as f64).sqrt();
        prefers_reclog = Some(res < fit.residual);
        reclog_constant = Some(lc.exp());
        reclog_residual = Some(res);
        power_fit = Some(fit);
    }
    Ok(RemainderReport {
        points,
        constant,
        power_fit,
        reclog_constant,
        reclog_residual,
        prefers_reclog,
    })
}
