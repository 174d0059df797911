//! Model Landau-Dirac spectral data: the threshold lattice, the elementary
//! distributions paired with test functions, the density `u_0` on the gap and
//! synthetic eigenvalue streams.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{integrate_to_inf, NumericError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("threshold enumeration exceeds budget of {0} multi-indices")]
    Budget(usize),
    #[error("c = {0} < 0 is outside the distribution family")]
    Singularity(i32),
    #[error("|lambda| = {lambda} is outside the gap (-{edge}, {edge})")]
    OutsideGap { lambda: f64, edge: f64 },
    #[error("stream is empty")]
    EmptyStream,
    #[error(transparent)]
    Quadrature(#[from] NumericError),
}

/// Spectrum `mu_1 <= ... <= mu_m` of `|J|` at a point; `n = 2m + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: Vec<f64>,
}

impl ModelParams {
    pub fn new(mut mu: Vec<f64>) -> Result<Self, SpectralError> {
        if mu.is_empty() {
            return Err(SpectralError::InvalidParams("m must be at least 1".into()));
        }
        if mu.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(SpectralError::InvalidParams(
                "all mu_j must be positive".into(),
            ));
        }
        mu.sort_by(|a, b| a.total_cmp(b));
        Ok(ModelParams { mu })
    }

    pub fn m(&self) -> usize {
        self.mu.len()
    }

    pub fn n(&self) -> usize {
        2 * self.m() + 1
    }

    pub fn det(&self) -> f64 {
        self.mu.iter().product()
    }

    /// Edge of the spectral gap, `sqrt(2 mu_1)`.
    pub fn gap_edge(&self) -> f64 {
        (2.0 * self.mu[0]).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdLattice {
    /// Sorted distinct `Lambda` values.
    pub lambdas: Vec<f64>,
    /// `sqrt(2 Lambda)`.
    pub values: Vec<f64>,
    pub multiplicities: Vec<u64>,
}

const THRESHOLD_BUDGET: usize = 5_000_000;

/// All `Lambda = sum k_j mu_j <= cut` over nonzero `k in N_0^m`, merged within
/// 1e-12 (relative) and counted.
pub fn thresholds(params: &ModelParams, cut: f64) -> Result<ThresholdLattice, SpectralError> {
    if !(cut > params.mu[0]) {
        return Err(SpectralError::InvalidParams(format!(
            "cut {cut} must exceed mu_1 = {}",
            params.mu[0]
        )));
    }
    let mut raw: Vec<f64> = Vec::new();
    let mut k = vec![0u64; params.m()];
    // Odometer over the box k_j <= cut / mu_j, pruned by the running sum.
    'outer: loop {
        let mut j = 0;
        loop {
            if j == k.len() {
                break 'outer;
            }
            k[j] += 1;
            let s: f64 = k
                .iter()
                .zip(&params.mu)
                .map(|(ki, mi)| *ki as f64 * mi)
                .sum();
            if s <= cut * (1.0 + 1e-12) {
                raw.push(s);
                if raw.len() > THRESHOLD_BUDGET {
                    return Err(SpectralError::Budget(THRESHOLD_BUDGET));
                }
                break;
            }
            k[j] = 0;
            j += 1;
        }
    }
    raw.sort_by(|a, b| a.total_cmp(b));
    let mut lambdas: Vec<f64> = Vec::new();
    let mut multiplicities: Vec<u64> = Vec::new();
    for s in raw {
        match lambdas.last() {
            Some(&l) if (s - l).abs() <= 1e-12 * l.max(1.0) => {
                *multiplicities.last_mut().unwrap() += 1
            }
            _ => {
                lambdas.push(s);
                multiplicities.push(1);
            }
        }
    }
    let values = lambdas.iter().map(|l| (2.0 * l).sqrt()).collect();
    Ok(ThresholdLattice {
        lambdas,
        values,
        multiplicities,
    })
}

/// Test function with derivatives of every order used by the pairings.
pub trait TestFunction {
    fn derivative(&self, order: u32, s: f64) -> f64;

    fn value(&self, s: f64) -> f64 {
        self.derivative(0, s)
    }

    /// Interval outside of which the function vanishes, if any.
    fn support(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `scale * exp(-(s - center)^2 / (2 sigma^2))` with Hermite derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub center: f64,
    pub sigma: f64,
    pub scale: f64,
}

impl Gaussian {
    pub fn standard() -> Self {
        Gaussian {
            center: 0.0,
            sigma: 1.0,
            scale: 1.0,
        }
    }

    pub fn density() -> Self {
        Gaussian {
            center: 0.0,
            sigma: 1.0,
            scale: 1.0 / (2.0 * PI).sqrt(),
        }
    }
}

// Probabilists' Hermite polynomial He_k(x).
fn hermite(k: u32, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = x * h1 - j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

impl TestFunction for Gaussian {
    fn derivative(&self, order: u32, s: f64) -> f64 {
        let x = (s - self.center) / self.sigma;
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        self.scale * sign * hermite(order, x) * (-0.5 * x * x).exp() / self.sigma.powi(order as i32)
    }
}

/// Odd test function `g(s - c) - g(s + c)` built from two Gaussians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddGaussianPair {
    pub offset: f64,
    pub sigma: f64,
}

impl TestFunction for OddGaussianPair {
    fn derivative(&self, order: u32, s: f64) -> f64 {
        let g = |c| {
            Gaussian {
                center: c,
                sigma: self.sigma,
                scale: 1.0,
            }
            .derivative(order, s)
        };
        g(self.offset) - g(-self.offset)
    }
}

/// Smooth bump `exp(-1/(1 - x^2))`, `x = (s - center)/radius`, with
/// derivatives by central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
}

impl TestFunction for Bump {
    fn derivative(&self, order: u32, s: f64) -> f64 {
        let f = |s: f64| {
            let x = (s - self.center) / self.radius;
            if x.abs() >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - x * x)).exp()
            }
        };
        central_difference(&f, order, s, 1e-3 * self.radius)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some((self.center - self.radius, self.center + self.radius))
    }
}

/// `order`-th derivative by the central difference of step `h`.
pub fn central_difference<F: Fn(f64) -> f64>(f: &F, order: u32, s: f64, h: f64) -> f64 {
    if order == 0 {
        return f(s);
    }
    // sum_i (-1)^i C(k, i) f(s + (k/2 - i) h) / h^k
    let k = order as i32;
    let mut acc = 0.0;
    let mut binom = 1.0;
    for i in 0..=k {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(s + (k as f64 / 2.0 - i as f64) * h);
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    acc / h.powi(k)
}

const QUAD_TOL: f64 = 1e-11;

/// `<v_{a;p}, phi> = int s^a phi(s) ds`.
pub fn eval_v_poly(a: u32, phi: &dyn TestFunction) -> Result<f64, SpectralError> {
    let pos = integrate_to_inf(|s| s.powi(a as i32) * phi.value(s), 0.0, QUAD_TOL)?;
    let neg = integrate_to_inf(|s| (-s).powi(a as i32) * phi.value(-s), 0.0, QUAD_TOL)?;
    Ok(pos + neg)
}

/// `<d_s^a [ |s| s^b (s^2 - 2 Lambda)^{c - 1/2} H(s^2 - 2 Lambda) ], phi>`.
///
/// The derivatives go onto `phi` with sign `(-1)^a`; on each branch
/// `s = +-sqrt(2 Lambda + u^2)` turns `|s| (s^2 - 2 Lambda)^{c-1/2} ds` into
/// `u^{2c} du`, so the integrand is smooth at the threshold.
pub fn eval_v_threshold(
    a: u32,
    b: i32,
    c: i32,
    lambda: f64,
    phi: &dyn TestFunction,
) -> Result<f64, SpectralError> {
    if c < 0 {
        return Err(SpectralError::Singularity(c));
    }
    if !(lambda > 0.0) {
        return Err(SpectralError::InvalidParams(format!(
            "Lambda = {lambda} must be positive"
        )));
    }
    let two_l = 2.0 * lambda;
    let edge = two_l.sqrt();
    if let Some((lo, hi)) = phi.support() {
        if lo >= -edge && hi <= edge {
            return Ok(0.0);
        }
    }
    let branch = |sign: f64| {
        integrate_to_inf(
            |u| {
                let s = sign * (two_l + u * u).sqrt();
                s.powi(b) * u.powi(2 * c) * phi.derivative(a, s)
            },
            0.0,
            QUAD_TOL,
        )
    };
    let total = branch(1.0)? + branch(-1.0)?;
    Ok(if a.is_multiple_of(2) { total } else { -total })
}

/// Leading density `u_0` on the gap: `det|J| / (4 pi)^{n/2}` at 0, extended
/// as the same constant on `(-sqrt(2 mu_1), sqrt(2 mu_1))`.
pub fn u0_density(params: &ModelParams, lambda: f64) -> Result<f64, SpectralError> {
    let edge = params.gap_edge();
    if !(lambda.abs() < edge) {
        return Err(SpectralError::OutsideGap {
            lambda: lambda.abs(),
            edge,
        });
    }
    Ok(u0_at_zero(params))
}

pub fn u0_at_zero(params: &ModelParams) -> f64 {
    params.det() / (4.0 * PI).powf(params.n() as f64 / 2.0)
}

/// Sorted multiset of real eigenvalues with a symmetric cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueStream {
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<u32>,
    pub cutoff: f64,
    pub label: String,
}

impl EigenvalueStream {
    /// Sorts, merges equal values and drops everything beyond the cutoff.
    pub fn new(
        mut values: Vec<f64>,
        cutoff: f64,
        label: impl Into<String>,
    ) -> Result<Self, SpectralError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::InvalidParams("non-finite eigenvalue".into()));
        }
        values.retain(|v| v.abs() <= cutoff);
        values.sort_by(|a, b| a.total_cmp(b));
        let mut eigenvalues: Vec<f64> = Vec::with_capacity(values.len());
        let mut multiplicities: Vec<u32> = Vec::with_capacity(values.len());
        for v in values {
            if eigenvalues.last() == Some(&v) {
                *multiplicities.last_mut().unwrap() += 1;
            } else {
                eigenvalues.push(v);
                multiplicities.push(1);
            }
        }
        Ok(EigenvalueStream {
            eigenvalues,
            multiplicities,
            cutoff,
            label: label.into(),
        })
    }

    pub fn empty(cutoff: f64) -> Self {
        EigenvalueStream {
            eigenvalues: vec![],
            multiplicities: vec![],
            cutoff,
            label: "empty".into(),
        }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.eigenvalues.len() != self.multiplicities.len() {
            return Err(SpectralError::InvalidParams(
                "eigenvalues and multiplicities differ in length".into(),
            ));
        }
        if self.multiplicities.contains(&0) {
            return Err(SpectralError::InvalidParams("multiplicity 0".into()));
        }
        if self.eigenvalues.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SpectralError::InvalidParams(
                "eigenvalues not strictly sorted".into(),
            ));
        }
        if self.eigenvalues.iter().any(|v| !(v.abs() <= self.cutoff)) {
            return Err(SpectralError::InvalidParams(
                "eigenvalue beyond cutoff".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, SpectralError> {
        let st: EigenvalueStream =
            serde_json::from_str(s).map_err(|e| SpectralError::InvalidParams(e.to_string()))?;
        st.validate()?;
        Ok(st)
    }

    /// Count with multiplicity.
    pub fn total(&self) -> u64 {
        self.multiplicities.iter().map(|&m| m as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (f64, u32)> + ExactSizeIterator + '_ {
        self.eigenvalues
            .iter()
            .copied()
            .zip(self.multiplicities.iter().copied())
    }

    pub fn negated(&self) -> Self {
        EigenvalueStream {
            eigenvalues: self.eigenvalues.iter().rev().map(|v| -v).collect(),
            multiplicities: self.multiplicities.iter().rev().copied().collect(),
            cutoff: self.cutoff,
            label: format!("-({})", self.label),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0, "scale must be positive");
        EigenvalueStream {
            eigenvalues: self.eigenvalues.iter().map(|v| c * v).collect(),
            multiplicities: self.multiplicities.clone(),
            cutoff: c * self.cutoff,
            label: format!("{}*({})", c, self.label),
        }
    }

    pub fn shifted(&self, d: f64) -> Self {
        EigenvalueStream {
            eigenvalues: self.eigenvalues.iter().map(|v| v + d).collect(),
            multiplicities: self.multiplicities.clone(),
            cutoff: self.cutoff + d.abs(),
            label: format!("({})+{}", self.label, d),
        }
    }
}

/// Piecewise-constant density: `rates[i]` eigenvalues per unit length on
/// `[knots[i], knots[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub knots: Vec<f64>,
    pub rates: Vec<f64>,
}

impl DensityProfile {
    pub fn uniform(lo: f64, hi: f64, rate: f64) -> Self {
        DensityProfile {
            knots: vec![lo, hi],
            rates: vec![rate],
        }
    }

    fn validate(&self) -> Result<(), SpectralError> {
        if self.knots.len() < 2 || self.rates.len() + 1 != self.knots.len() {
            return Err(SpectralError::InvalidParams(
                "need knots.len() == rates.len() + 1 >= 2".into(),
            ));
        }
        if self.knots.windows(2).any(|w| !(w[0] < w[1])) || self.rates.iter().any(|r| !(*r >= 0.0))
        {
            return Err(SpectralError::InvalidParams(
                "knots must increase and rates be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.rates
            .iter()
            .zip(self.knots.windows(2))
            .map(|(r, w)| r * (w[1] - w[0]))
            .sum()
    }

    fn is_symmetric(&self) -> bool {
        let k = self.knots.len();
        (0..k).all(|i| self.knots[i] == -self.knots[k - 1 - i])
            && (0..self.rates.len()).all(|i| self.rates[i] == self.rates[self.rates.len() - 1 - i])
    }

    /// Inverse of the cumulative count.
    fn quantile(&self, target: f64) -> f64 {
        let mut acc = 0.0;
        for (r, w) in self.rates.iter().zip(self.knots.windows(2)) {
            let seg = r * (w[1] - w[0]);
            if *r > 0.0 && acc + seg >= target {
                return w[0] + (target - acc) / r;
            }
            acc += seg;
        }
        *self.knots.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSpec {
    /// `{spacing (n + a) : n in Z}`.
    Progression {
        a: f64,
        #[serde(default = "one")]
        spacing: f64,
    },
    /// `count` eigenvalues at the midpoint quantiles `(j - 1/2)/count` of the
    /// profile; `count` defaults to the rounded mass.
    Density {
        profile: DensityProfile,
        #[serde(default)]
        count: Option<usize>,
    },
}

fn one() -> f64 {
    1.0
}

/// Deterministic eigenvalue list for a spec, truncated at `|lambda| <= cutoff`.
pub fn synthesize_stream(
    spec: &StreamSpec,
    cutoff: f64,
) -> Result<EigenvalueStream, SpectralError> {
    let values = match spec {
        StreamSpec::Progression { a, spacing } => {
            if !(*spacing > 0.0) || !a.is_finite() {
                return Err(SpectralError::InvalidParams(
                    "progression needs spacing > 0".into(),
                ));
            }
            let lo = (-cutoff / spacing - a).ceil() as i64;
            let hi = (cutoff / spacing - a).floor() as i64;
            (lo..=hi)
                .map(|n| spacing * (n as f64 + a))
                .collect::<Vec<_>>()
        }
        StreamSpec::Density { profile, count } => {
            profile.validate()?;
            let mass = profile.mass();
            let n = count.unwrap_or(mass.round() as usize);
            if n == 0 || mass <= 0.0 {
                return Err(SpectralError::EmptyStream);
            }
            let at = |j: usize| profile.quantile((j as f64 + 0.5) / n as f64 * mass);
            if profile.is_symmetric() {
                // Mirror the upper half so the stream is exactly symmetric.
                let mut upper: Vec<f64> = (n / 2..n).map(at).collect();
                if n % 2 == 1 {
                    upper[0] = 0.0;
                }
                let mut v: Vec<f64> = upper.iter().skip(n % 2).map(|x| -x).collect();
                v.extend(upper);
                v
            } else {
                (0..n).map(at).collect()
            }
        }
    };
    let label = match spec {
        StreamSpec::Progression { a, spacing } => format!("progression(a={a}, spacing={spacing})"),
        StreamSpec::Density { profile, .. } => format!(
            "density(knots={:?}, rates={:?})",
            profile.knots, profile.rates
        ),
    };
    let s = EigenvalueStream::new(values, cutoff, label)?;
    if s.is_empty() {
        return Err(SpectralError::EmptyStream);
    }
    Ok(s)
}
