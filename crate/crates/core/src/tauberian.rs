//! Smoothed spectral counting: compact-transform kernels, the mollifier
//! `phi`, the convolution comparison bound and local Weyl counting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{integrate, pairwise_sum, NumericError};
use crate::spectral_model::EigenvalueStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TauberianError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Quadrature(#[from] NumericError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `theta_check(xi) = (p/2) M_p(p xi / 2)`: even, unit mass, support `[-1, 1]`.
    Bspline { order: u32 },
    /// Indicator of `[-eps/2, 1 + eps/2]` smoothed by an order-`p` B-spline of
    /// width `eps`, scaled by `1/(1 + eps)`: unit mass and equal to
    /// `1/(1 + eps)` on `[0, 1]`.
    Weyl { order: u32, eps: f64 },
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cardinal B-spline `N_p` on `[0, p]`.
fn cardinal(p: u32, x: f64) -> f64 {
    let pf = p as f64;
    if x <= 0.0 || x >= pf {
        return 0.0;
    }
    let x = if x > pf / 2.0 { pf - x } else { x };
    let mut acc = 0.0;
    for k in 0..=p {
        let d = x - k as f64;
        if d <= 0.0 {
            break;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(p, k) * d.powi(p as i32 - 1);
    }
    acc / factorial(p - 1)
}

/// `int_0^x N_p = sum_{k >= 0} N_{p+1}(x - k)`.
fn cardinal_cdf(p: u32, x: f64) -> f64 {
    let pf = p as f64;
    if x <= 0.0 {
        return 0.0;
    }
    if x >= pf {
        return 1.0;
    }
    if x > pf / 2.0 {
        return 1.0 - cardinal_cdf(p, pf - x);
    }
    (0..p).map(|k| cardinal(p + 1, x - k as f64)).sum()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Pair `(theta, theta_check)` with `theta(omega) = int e^{-i omega xi}
/// theta_check(xi) d xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingKernel {
    pub spec: KernelSpec,
}

pub fn make_kernel(spec: KernelSpec) -> Result<SmoothingKernel, TauberianError> {
    let order = match spec {
        KernelSpec::Bspline { order } => order,
        KernelSpec::Weyl { order, eps } => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(TauberianError::InvalidKernel(format!(
                    "eps = {eps} must be positive"
                )));
            }
            order
        }
    };
    if !(2..=20).contains(&order) {
        return Err(TauberianError::InvalidKernel(format!(
            "order {order} outside 2..=20"
        )));
    }
    Ok(SmoothingKernel { spec })
}

impl SmoothingKernel {
    pub fn bspline(order: u32) -> Result<Self, TauberianError> {
        make_kernel(KernelSpec::Bspline { order })
    }

    pub fn weyl(order: u32, eps: f64) -> Result<Self, TauberianError> {
        make_kernel(KernelSpec::Weyl { order, eps })
    }

    pub fn is_even(&self) -> bool {
        matches!(self.spec, KernelSpec::Bspline { .. })
    }

    pub fn support(&self) -> (f64, f64) {
        match self.spec {
            KernelSpec::Bspline { .. } => (-1.0, 1.0),
            KernelSpec::Weyl { eps, .. } => (-eps, 1.0 + eps),
        }
    }

    /// Points where `theta_check` loses smoothness.
    pub fn knots(&self) -> Vec<f64> {
        match self.spec {
            KernelSpec::Bspline { order } => (0..=order)
                .map(|k| -1.0 + 2.0 * k as f64 / order as f64)
                .collect(),
            KernelSpec::Weyl { order, eps } => {
                let mut v: Vec<f64> = (0..=order)
                    .map(|k| -eps + eps * k as f64 / order as f64)
                    .collect();
                v.extend((0..=order).map(|k| 1.0 + eps * k as f64 / order as f64));
                v
            }
        }
    }

    /// `theta_check(xi)`.
    pub fn check(&self, xi: f64) -> f64 {
        match self.spec {
            KernelSpec::Bspline { order } => {
                let p = order as f64;
                0.5 * p * cardinal(order, p * xi / 2.0 + p / 2.0)
            }
            KernelSpec::Weyl { order, eps } => {
                let c = |y: f64| self_cdf(order, 2.0 * y / eps);
                (c(xi + eps / 2.0) - c(xi - 1.0 - eps / 2.0)) / (1.0 + eps)
            }
        }
    }

    /// `int_{-inf}^y theta_check`.
    pub fn cdf(&self, y: f64) -> f64 {
        match self.spec {
            KernelSpec::Bspline { order } => self_cdf(order, y),
            KernelSpec::Weyl { .. } => {
                let (lo, hi) = self.support();
                if y <= lo {
                    return 0.0;
                }
                let y = y.min(hi);
                integrate(|u| self.check(u), lo, y, &self.knots(), 1e-14).unwrap_or(f64::NAN)
            }
        }
    }

    /// `theta(omega)` as `(re, im)`.
    pub fn theta(&self, omega: f64) -> (f64, f64) {
        match self.spec {
            KernelSpec::Bspline { order } => (sinc(omega / order as f64).powi(order as i32), 0.0),
            KernelSpec::Weyl { order, eps } => {
                let smooth = sinc(omega * eps / (2.0 * order as f64)).powi(order as i32);
                let (a, b) = (-eps / 2.0, 1.0 + eps / 2.0);
                // int_a^b e^{-i omega xi} d xi
                let (re, im) = if omega.abs() < 1e-12 {
                    (b - a, 0.0)
                } else {
                    (
                        ((omega * b).sin() - (omega * a).sin()) / omega,
                        ((omega * b).cos() - (omega * a).cos()) / omega,
                    )
                };
                let s = smooth / (1.0 + eps);
                (re * s, im * s)
            }
        }
    }

    /// `theta_1(y) = int_{-inf}^y |u| theta_check(u) du`.
    pub fn theta1(&self, y: f64) -> Result<f64, TauberianError> {
        let (lo, hi) = self.support();
        if y <= lo {
            return Ok(0.0);
        }
        let mut br = self.knots();
        br.push(0.0);
        Ok(integrate(
            |u| u.abs() * self.check(u),
            lo,
            y.min(hi),
            &br,
            1e-13,
        )?)
    }

    /// `theta_2(y) = int_{u >= y} theta_check(u) du`.
    pub fn theta2(&self, y: f64) -> f64 {
        1.0 - self.cdf(y)
    }
}

fn self_cdf(order: u32, y: f64) -> f64 {
    let p = order as f64;
    cardinal_cdf(order, p * y / 2.0 + p / 2.0)
}

/// `phi(x) = int_{-inf}^0 theta_check(t - x) dt - 1_{(-inf, 0]}(x)` for an
/// even kernel, i.e. `sign(x) theta_2(|x|)`, evaluated at `x / scale`.
/// `phi(0)` is set to 0 so the function is exactly odd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub kernel: SmoothingKernel,
    pub scale: f64,
}

impl Mollifier {
    pub fn new(kernel: SmoothingKernel, scale: f64) -> Result<Self, TauberianError> {
        if !kernel.is_even() {
            return Err(TauberianError::InvalidKernel(
                "mollifier needs an even kernel".into(),
            ));
        }
        if !(scale > 0.0) {
            return Err(TauberianError::InvalidArgument(format!(
                "scale {scale} must be positive"
            )));
        }
        Ok(Mollifier { kernel, scale })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = x / self.scale;
        if y == 0.0 {
            return 0.0;
        }
        let v = self.kernel.theta2(y.abs());
        if y > 0.0 {
            v
        } else {
            -v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub x: f64,
    /// `|phi - phi * theta_check_T|(x)`.
    pub lhs: f64,
    /// `T^{-1} theta_1(|x| T) + 2 theta_2(|x| T)`.
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub t: f64,
    pub rows: Vec<BoundRow>,
    pub holds: bool,
    pub min_slack: f64,
}

/// Both sides of the convolution comparison, with
/// `phi * theta_check_T (x) = int phi(x - y/T) theta_check(y) dy`.
/// For `x < 0` the bound is taken at `|x|` (oddness of `phi`).
pub fn mollifier_bound_check(
    kernel: &SmoothingKernel,
    t: f64,
    xs: &[f64],
    tol: f64,
) -> Result<BoundReport, TauberianError> {
    let phi = Mollifier::new(*kernel, 1.0)?;
    if !(t > 0.0) {
        return Err(TauberianError::InvalidArgument(format!(
            "T = {t} must be positive"
        )));
    }
    let mut rows = Vec::with_capacity(xs.len());
    for &x in xs {
        if x == 0.0 {
            return Err(TauberianError::InvalidArgument(
                "x grid must avoid 0".into(),
            ));
        }
        let mut br = kernel.knots();
        br.push(x * t);
        let conv = integrate(
            |y| (phi.eval(x) - phi.eval(x - y / t)) * kernel.check(y),
            -1.0,
            1.0,
            &br,
            1e-12,
        )?;
        let lhs = conv.abs();
        let y = x.abs() * t;
        let rhs = kernel.theta1(y)? / t + 2.0 * kernel.theta2(y);
        rows.push(BoundRow {
            x,
            lhs,
            rhs,
            slack: rhs - lhs,
        });
    }
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        t,
        holds: min_slack >= -tol,
        rows,
        min_slack,
    })
}

/// Power-of-`h` bookkeeping for a stream of `D / sqrt(h)` in dimension
/// `n = 2m + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HScaling {
    pub h: f64,
    pub m: u32,
}

impl HScaling {
    pub fn new(h: f64, m: u32) -> Result<Self, TauberianError> {
        if !(h > 0.0 && h <= 1.0) || m == 0 {
            return Err(TauberianError::InvalidArgument(format!(
                "need 0 < h <= 1 and m >= 1, got h = {h}, m = {m}"
            )));
        }
        Ok(HScaling { h, m })
    }

    /// Eigenvalue density of `D / sqrt(h)` near 0: `h^{-m-1/2} u_0 vol`.
    pub fn rescaled_density(&self, u0: f64, vol: f64) -> f64 {
        self.h.powf(-(self.m as f64) - 0.5) * u0 * vol
    }

    /// Weyl window `(0, sqrt(h) / T)` for `D / sqrt(h)`.
    pub fn weyl_window(&self, t: f64) -> f64 {
        self.h.sqrt() / t
    }

    /// `h^{-m} T^{-1} u_0 vol`.
    pub fn weyl_bound(&self, t: f64, u0: f64, vol: f64) -> f64 {
        self.h.powi(-(self.m as i32)) * u0 * vol / t
    }

    /// Trace `tr[f(D/sqrt h) (T/h) theta_check(T(lambda sqrt h - D)/h)]` from
    /// the unit-mass value returned by [`smoothed_counting`].
    pub fn trace_from_smoothed(&self, value: f64) -> f64 {
        value / self.h.sqrt()
    }

    /// Eigenvalue of `D` from one of `D / sqrt(h)`.
    pub fn unscale(&self, mu: f64) -> f64 {
        mu * self.h.sqrt()
    }
}

/// `sum_j f(mu_j) (T / sqrt h) theta_check(T (lambda - mu_j) / sqrt h)` over the
/// `D / sqrt(h)` stream, with multiplicity; unit mass in `mu`.
pub fn smoothed_counting(
    stream: &EigenvalueStream,
    kernel: &SmoothingKernel,
    t: f64,
    h: f64,
    f: &dyn Fn(f64) -> f64,
    lambda: f64,
) -> f64 {
    let w = t / h.sqrt();
    let (lo, hi) = kernel.support();
    // theta_check(w (lambda - mu)) != 0 needs mu in (lambda - hi/w, lambda - lo/w).
    let (mlo, mhi) = (lambda - hi / w, lambda - lo / w);
    let ev = &stream.eigenvalues;
    let a = ev.partition_point(|&x| x < mlo);
    let b = ev.partition_point(|&x| x <= mhi);
    let terms: Vec<f64> = (a..b)
        .map(|i| {
            stream.multiplicities[i] as f64 * f(ev[i]) * w * kernel.check(w * (lambda - ev[i]))
        })
        .collect();
    pairwise_sum(&terms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    pub count: u64,
    pub window: f64,
    pub bound: f64,
    pub holds: bool,
    /// Lower bound `T / ((1 + eps) sqrt h) * count` from a Weyl-preset kernel.
    pub smoothed_lower: Option<f64>,
    /// `sum (T/sqrt h) theta_check(T mu / sqrt h)` over the stream.
    pub smoothed_value: Option<f64>,
}

/// Counts eigenvalues of the `D / sqrt(h)` stream in `(0, sqrt(h)/T)` and
/// compares with `h^{-m} T^{-1} u_0 vol (1 + slack)`.
pub fn local_weyl_check(
    stream: &EigenvalueStream,
    kernel: Option<&SmoothingKernel>,
    t: f64,
    scaling: HScaling,
    u0: f64,
    vol: f64,
    slack: f64,
) -> WeylReport {
    let window = scaling.weyl_window(t);
    let count: u64 = stream
        .iter()
        .filter(|(x, _)| *x > 0.0 && *x < window)
        .map(|(_, m)| m as u64)
        .sum();
    let bound = scaling.weyl_bound(t, u0, vol);
    let (smoothed_lower, smoothed_value) = match kernel.map(|k| k.spec) {
        Some(KernelSpec::Weyl { eps, .. }) => {
            let k = kernel.unwrap();
            // The preset is flat on [0, 1], so pair it with the reflected
            // stream: theta_check(T mu / sqrt h) for mu in the window.
            let v = smoothed_counting(&stream.negated(), k, t, scaling.h, &|_| 1.0, 0.0);
            (
                Some(t / ((1.0 + eps) * scaling.h.sqrt()) * count as f64),
                Some(v),
            )
        }
        _ => (None, None),
    };
    WeylReport {
        count,
        window,
        bound,
        holds: count as f64 <= bound * (1.0 + slack),
        smoothed_lower,
        smoothed_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinal_partition_of_unity() {
        for p in 2..8 {
            for x in [0.1, 0.37, 0.9] {
                let s: f64 = (0..p + 1).map(|k| cardinal(p, x + k as f64)).sum();
                assert!((s - 1.0).abs() < 1e-12, "p={p}");
            }
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        let k = SmoothingKernel::bspline(4).unwrap();
        for y in [-0.7, -0.1, 0.0, 0.3, 0.95] {
            let q = integrate(|u| k.check(u), -1.0, y, &k.knots(), 1e-14).unwrap();
            assert!((q - k.cdf(y)).abs() < 1e-12);
        }
    }
}
