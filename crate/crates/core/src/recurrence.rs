//! Monte Carlo volumes of recurrence sets
//! `S_{T,eps} = {x : d(e^{tR} x, x) <= eps for some t in [T0/2, T]}`,
//! their inflated neighbourhoods, the lifted sets in `X x R`, and scaling fits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flows::{Flow, FlowPoint};
use crate::numeric::{fit_line, map_chunks, stream_rng, wilson_interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrenceError {
    #[error("invalid recurrence config: {0}")]
    InvalidConfig(String),
    #[error("{needed} distance evaluations exceed the budget of {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("need at least {needed} series points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("series point {index} is too imprecise for a fit (ci_high / ci_low = {ratio})")]
    Imprecise { index: usize, ratio: f64 },
    #[error("degenerate series: every volume is 0 or 1")]
    Degenerate,
}

/// Default cap on distance evaluations per estimate.
pub const DEFAULT_BUDGET: u128 = 50_000_000_000;
const CHUNKS: usize = 64;

fn default_budget() -> u128 {
    DEFAULT_BUDGET
}

fn one_worker() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub eps: f64,
    /// Time step; `None` picks `eps / (2 L)` with `L` the flow's velocity bound.
    #[serde(default)]
    pub dt: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Shortest period; `None` takes the flow's.
    #[serde(default, rename = "T0")]
    pub t0: Option<f64>,
    #[serde(default = "one_worker")]
    pub workers: usize,
    #[serde(default = "default_budget")]
    pub budget: u128,
}

impl RecurrenceConfig {
    pub fn new(t: f64, eps: f64, n_samples: usize, seed: u64) -> Self {
        RecurrenceConfig {
            t,
            eps,
            dt: None,
            n_samples,
            seed,
            t0: None,
            workers: 1,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    /// Checks the config against a flow and fills in `dt` and `T0`.
    pub fn resolve(&self, flow: &dyn Flow) -> Result<ResolvedConfig, RecurrenceError> {
        let bad = |m: String| Err(RecurrenceError::InvalidConfig(m));
        if !(self.t.is_finite() && self.t > 0.0) {
            return bad(format!("T = {} must be positive", self.t));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad(format!("eps = {} must be positive", self.eps));
        }
        let lip = flow.velocity_bound();
        let max_dt = self.eps / (2.0 * lip);
        let dt = self.dt.unwrap_or(max_dt);
        if !(dt > 0.0 && dt <= max_dt * (1.0 + 1e-12)) {
            return bad(format!(
                "dt = {dt} must lie in (0, eps / (2 L)] = (0, {max_dt}]"
            ));
        }
        let t0 = self.t0.unwrap_or_else(|| flow.shortest_period());
        if !(t0 > 0.0) {
            return bad(format!("T0 = {t0} must be positive"));
        }
        Ok(ResolvedConfig {
            t: self.t,
            eps: self.eps,
            dt,
            t0,
            lip,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub t: f64,
    pub eps: f64,
    pub dt: f64,
    pub t0: f64,
    pub lip: f64,
}

impl ResolvedConfig {
    /// `T0/2, T0/2 + dt, ...` up to `T` (empty when `T < T0/2`), with `T`
    /// appended if the last step falls short of it.
    pub fn grid(&self) -> Vec<f64> {
        let start = 0.5 * self.t0;
        if self.t < start {
            return Vec::new();
        }
        let n = ((self.t - start) / self.dt).floor() as usize;
        let mut g: Vec<f64> = (0..=n).map(|i| start + i as f64 * self.dt).collect();
        if *g.last().unwrap() < self.t {
            g.push(self.t);
        }
        g
    }

    /// Radius for the inflated set: `eps (1 + slack)`, `slack = 1 + dt L / eps`.
    pub fn extended_radius(&self) -> f64 {
        self.eps * (2.0 + self.dt * self.lip / self.eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceEstimate {
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub n_samples: u64,
    #[serde(rename = "T")]
    pub t: f64,
    pub eps: f64,
    /// Test radius actually used (`eps`, or the inflated radius).
    pub radius: f64,
    pub dt: f64,
    pub extended: bool,
    /// Measure of the sampled space relative to the sampler: 1, or the
    /// time-window length for lifted sets.
    pub measure: f64,
}

impl RecurrenceEstimate {
    fn new(
        hits: u64,
        n: u64,
        t: f64,
        eps: f64,
        radius: f64,
        dt: f64,
        extended: bool,
        measure: f64,
    ) -> Self {
        let (lo, hi) = wilson_interval(hits, n);
        RecurrenceEstimate {
            fraction: hits as f64 / n as f64,
            ci_low: lo,
            ci_high: hi,
            hits,
            n_samples: n,
            t,
            eps,
            radius,
            dt,
            extended,
            measure,
        }
    }

    pub fn volume(&self) -> f64 {
        self.fraction * self.measure
    }

    pub fn volume_ci(&self) -> (f64, f64) {
        (self.ci_low * self.measure, self.ci_high * self.measure)
    }
}

/// Whether `x` comes back within `eps` on the time grid of `cfg`. The grid
/// length counts against the budget.
pub fn is_recurrent(
    flow: &dyn Flow,
    x: &FlowPoint,
    cfg: &RecurrenceConfig,
) -> Result<bool, RecurrenceError> {
    let r = cfg.resolve(flow)?;
    check_budget(
        1,
        ((r.t - 0.5 * r.t0).max(0.0) / r.dt) as usize + 2,
        cfg.budget,
    )?;
    let grid = r.grid();
    let hit = flow.return_scanner(&grid).first_hit(x, r.eps).is_some();
    Ok(hit)
}

fn check_budget(n: usize, per: usize, budget: u128) -> Result<(), RecurrenceError> {
    let needed = n as u128 * per.max(1) as u128;
    if needed > budget {
        return Err(RecurrenceError::Budget { needed, budget });
    }
    Ok(())
}

fn chunk_len(n: usize, c: usize) -> usize {
    n / CHUNKS + usize::from(c < n % CHUNKS)
}

/// Fraction of sampled points in `S_{T,eps}` (or its inflation).
pub fn estimate_volume(
    flow: &dyn Flow,
    cfg: &RecurrenceConfig,
    extended: bool,
) -> Result<RecurrenceEstimate, RecurrenceError> {
    let mut v = estimate_series(flow, cfg, &[cfg.t], extended)?;
    Ok(v.remove(0))
}

/// Volumes for several horizons from one set of samples: each sample is
/// scanned once up to `max T` and counted for every horizon past its first
/// hit, so the estimates are nested exactly.
pub fn estimate_series(
    flow: &dyn Flow,
    cfg: &RecurrenceConfig,
    horizons: &[f64],
    extended: bool,
) -> Result<Vec<RecurrenceEstimate>, RecurrenceError> {
    if cfg.n_samples < 100 {
        return Err(RecurrenceError::InvalidConfig(format!(
            "n_samples = {} must be >= 100",
            cfg.n_samples
        )));
    }
    let t_max = horizons.iter().copied().fold(cfg.t, f64::max);
    let mut top = cfg.clone();
    top.t = t_max;
    let r = top.resolve(flow)?;
    let grid = r.grid();
    check_budget(cfg.n_samples, grid.len(), cfg.budget)?;
    let radius = if extended { r.extended_radius() } else { r.eps };
    let parts = map_chunks(CHUNKS, cfg.workers, |c| {
        let scanner = flow.return_scanner(&grid);
        let mut rng = stream_rng(cfg.seed, c as u64);
        (0..chunk_len(cfg.n_samples, c))
            .map(|_| {
                let x = flow.sample(&mut rng);
                scanner.first_hit(&x, radius).map(|i| grid[i])
            })
            .collect::<Vec<Option<f64>>>()
    });
    let first: Vec<Option<f64>> = parts.into_iter().flatten().collect();
    let n = cfg.n_samples as u64;
    Ok(horizons
        .iter()
        .map(|&t| {
            let hits = first.iter().filter(|f| f.is_some_and(|s| s <= t)).count() as u64;
            RecurrenceEstimate::new(hits, n, t, r.eps, radius, r.dt, extended, 1.0)
        })
        .collect())
}

/// Lifted set `{(x, t) : d(e^{tR} x, x) <= eps, t in [T0/2, T]}` in
/// `X x R`, sampled with `t` uniform; the volume is the hit fraction times
/// `T - T0/2`.
pub fn estimate_lifted_volume(
    flow: &dyn Flow,
    cfg: &RecurrenceConfig,
) -> Result<RecurrenceEstimate, RecurrenceError> {
    if cfg.n_samples < 100 {
        return Err(RecurrenceError::InvalidConfig(format!(
            "n_samples = {} must be >= 100",
            cfg.n_samples
        )));
    }
    let r = cfg.resolve(flow)?;
    check_budget(cfg.n_samples, 1, cfg.budget)?;
    let start = 0.5 * r.t0;
    let len = (r.t - start).max(0.0);
    let hits: u64 = map_chunks(CHUNKS, cfg.workers, |c| {
        let mut rng = stream_rng(cfg.seed, c as u64);
        let mut h = 0u64;
        for _ in 0..chunk_len(cfg.n_samples, c) {
            let x = flow.sample(&mut rng);
            let u: f64 = rand::Rng::random(&mut rng);
            if len > 0.0 && flow.distance(&flow.evolve(&x, start + u * len), &x) <= r.eps {
                h += 1;
            }
        }
        h
    })
    .into_iter()
    .sum();
    Ok(RecurrenceEstimate::new(
        hits,
        cfg.n_samples as u64,
        r.t,
        r.eps,
        r.eps,
        r.dt,
        false,
        len,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// `ln V` against `ln T`; the slope is a power.
    Elliptic,
    /// `ln V` against `T`; the slope is an exponential rate.
    Anosov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    #[serde(rename = "T")]
    pub t: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SeriesPoint {
    pub fn exact(t: f64, value: f64) -> Self {
        SeriesPoint {
            t,
            value,
            ci_low: value,
            ci_high: value,
        }
    }
}

impl From<&RecurrenceEstimate> for SeriesPoint {
    fn from(e: &RecurrenceEstimate) -> Self {
        let (lo, hi) = e.volume_ci();
        SeriesPoint {
            t: e.t,
            value: e.volume(),
            ci_low: lo,
            ci_high: hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub mode: ScalingMode,
    /// Power (elliptic) or rate (Anosov).
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    /// 95% interval from the Wilson bounds, propagated through the fit.
    pub slope_ci: (f64, f64),
}

/// Least-squares scaling fit of a volume series.
pub fn scaling_fit(
    series: &[SeriesPoint],
    mode: ScalingMode,
) -> Result<ScalingFit, RecurrenceError> {
    if series.iter().all(|p| p.value == 0.0 || p.value == 1.0) {
        return Err(RecurrenceError::Degenerate);
    }
    if series.len() < 4 {
        return Err(RecurrenceError::TooFewPoints {
            needed: 4,
            got: series.len(),
        });
    }
    for (i, p) in series.iter().enumerate() {
        let ratio = p.ci_high / p.ci_low;
        if !(p.value > 0.0 && p.ci_low > 0.0 && ratio < 3.0) {
            return Err(RecurrenceError::Imprecise { index: i, ratio });
        }
    }
    let xs: Vec<f64> = series
        .iter()
        .map(|p| match mode {
            ScalingMode::Elliptic => p.t.ln(),
            ScalingMode::Anosov => p.t,
        })
        .collect();
    let ys: Vec<f64> = series.iter().map(|p| p.value.ln()).collect();
    let fit = fit_line(&xs, &ys).map_err(|_| RecurrenceError::Degenerate)?;
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let var: f64 = series
        .iter()
        .zip(&xs)
        .map(|(p, x)| {
            let sigma = (p.ci_high.ln() - p.ci_low.ln()) / (2.0 * 1.96);
            ((x - mean) / sxx * sigma).powi(2)
        })
        .sum();
    let half = 1.96 * var.sqrt();
    Ok(ScalingFit {
        mode,
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        slope_ci: (fit.slope - half, fit.slope + half),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{LensFlow, LensSpaceParams};

    #[test]
    fn grid_covers_window() {
        let f = LensFlow::new(LensSpaceParams::ellipsoid(vec![1.0, 1.0]).unwrap());
        let r = RecurrenceConfig::new(7.0, 0.1, 100, 0).resolve(&f).unwrap();
        let g = r.grid();
        assert_eq!(g[0], std::f64::consts::PI);
        assert_eq!(*g.last().unwrap(), 7.0);
        assert!(g.windows(2).all(|w| w[1] - w[0] <= r.dt * (1.0 + 1e-12)));
        let empty = RecurrenceConfig::new(1.0, 0.1, 100, 0).resolve(&f).unwrap();
        assert!(empty.grid().is_empty());
    }

    #[test]
    fn dt_must_respect_velocity() {
        let f = LensFlow::new(LensSpaceParams::ellipsoid(vec![1.0, 2.0]).unwrap());
        assert!(RecurrenceConfig::new(5.0, 0.1, 100, 0)
            .with_dt(0.1)
            .resolve(&f)
            .is_err());
        assert!(RecurrenceConfig::new(5.0, 0.1, 100, 0)
            .with_dt(0.025)
            .resolve(&f)
            .is_ok());
    }
}
