//! Bowen separated sets, topological entropy estimates, Lipschitz constants of
//! distance functions under the flow, and the distorted metrics built from the
//! instability of Anosov flows.

mod kd;
mod metric;

pub use metric::{
    build_metric_construction, verify_entropy_inequality, ConstructionConfig, ConstructionError,
    InequalityReport, MetricConstruction, SandwichReport,
};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::flows::{Flow, FlowPoint};
use crate::numeric::{fit_line, map_chunks, stream_rng};
use kd::KdForest;

/// Multiples of `dt` in `[0, t]`. Grids for different horizons nest, so
/// Bowen distances are nondecreasing in `t`.
pub fn time_grid(t: f64, dt: f64) -> Vec<f64> {
    if t <= 0.0 {
        return vec![0.0];
    }
    let n = (t / dt + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}

/// `max_{t in grid[0, T]} d(e^{tR} x, e^{tR} y)`.
pub fn bowen_distance(flow: &dyn Flow, x: &FlowPoint, y: &FlowPoint, t: f64, dt: f64) -> f64 {
    time_grid(t, dt)
        .into_iter()
        .map(|s| flow.distance(&flow.evolve(x, s), &flow.evolve(y, s)))
        .fold(0.0, f64::max)
}

/// Jittered product lattice for the suspension chart `(x1, x2, s)`:
/// `nx * nx * ns` points, one per cell.
pub fn lattice_cloud(nx: usize, ns: usize, seed: u64) -> Vec<FlowPoint> {
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::with_capacity(nx * nx * ns);
    for i in 0..nx {
        for j in 0..nx {
            for k in 0..ns {
                let x1 = (i as f64 + rng.random::<f64>()) / nx as f64;
                let x2 = (j as f64 + rng.random::<f64>()) / nx as f64;
                let s = (k as f64 + rng.random::<f64>()) / ns as f64;
                out.push(FlowPoint::new(vec![x1, x2, s]));
            }
        }
    }
    out
}

/// `n` points from the flow's sampler.
pub fn random_cloud(flow: &dyn Flow, n: usize, seed: u64) -> Vec<FlowPoint> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| flow.sample(&mut rng)).collect()
}

fn default_restarts() -> usize {
    2
}

fn default_max_points() -> usize {
    200_000
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub eps: f64,
    pub dt: f64,
    #[serde(default = "default_restarts")]
    pub greedy_restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Packing stops (and is flagged saturated) at this many points.
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default = "one")]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    #[serde(rename = "T")]
    pub t: f64,
    pub eps: f64,
    /// Size of the best `(T, eps)`-separated subset found; a lower bound for
    /// `N(T, eps)`.
    pub count: usize,
    pub per_restart: Vec<usize>,
    pub saturated: bool,
}

// Trajectories of the accepted points, f32 embeddings at each grid time.
struct Accepted {
    dim: usize,
    steps: usize,
    data: Vec<f32>,
}

impl Accepted {
    fn at(&self, id: u32, step: usize) -> &[f32] {
        let o = (id as usize * self.steps + step) * self.dim;
        &self.data[o..o + self.dim]
    }
}

fn dist_f32(a: &[f64], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - *y as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Greedy maximal `(T, eps)`-separated subset of `cloud` in one random order.
fn greedy_pack(
    flow: &dyn Flow,
    cloud: &[FlowPoint],
    grid: &[f64],
    eps: f64,
    seed: u64,
    cap: usize,
) -> (usize, bool) {
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(&mut stream_rng(seed, 1));
    let dim = flow.embed(&cloud[0]).len();
    let steps = grid.len();
    let mut acc = Accepted {
        dim,
        steps,
        data: Vec::new(),
    };
    let mut forest = KdForest::new(dim);
    let mut count = 0usize;
    let mut nb = Vec::new();
    for idx in order {
        let x = &cloud[idx];
        let imgs0 = flow.embed_images(x);
        nb.clear();
        for img in &imgs0 {
            forest.query(img, eps, &mut nb);
        }
        nb.sort_unstable();
        nb.dedup();
        // Trajectory images are filled lazily, latest step first, since most
        // candidate neighbours separate by the end of the window.
        let mut cache: Vec<Option<Vec<Vec<f64>>>> = vec![None; steps];
        let mut conflict = false;
        for &j in &nb {
            let mut all_close = true;
            for s in (0..steps).rev() {
                let imgs =
                    cache[s].get_or_insert_with(|| flow.embed_images(&flow.evolve(x, grid[s])));
                let d = imgs
                    .iter()
                    .map(|im| dist_f32(im, acc.at(j, s)))
                    .fold(f64::INFINITY, f64::min);
                if d >= eps {
                    all_close = false;
                    break;
                }
            }
            if all_close {
                conflict = true;
                break;
            }
        }
        if conflict {
            continue;
        }
        for &t in grid {
            acc.data
                .extend(flow.embed(&flow.evolve(x, t)).into_iter().map(|v| v as f32));
        }
        forest.insert(count as u32, flow.embed(x));
        count += 1;
        if count >= cap {
            return (count, true);
        }
    }
    (count, false)
}

/// Best greedy packing over `greedy_restarts` random orders.
pub fn max_separated(flow: &dyn Flow, cloud: &[FlowPoint], cfg: &BowenConfig) -> PackingResult {
    if cloud.is_empty() {
        return PackingResult {
            t: cfg.t,
            eps: cfg.eps,
            count: 0,
            per_restart: vec![],
            saturated: false,
        };
    }
    let grid = time_grid(cfg.t, cfg.dt);
    let restarts = cfg.greedy_restarts.max(1);
    let runs = map_chunks(restarts, cfg.workers, |r| {
        greedy_pack(
            flow,
            cloud,
            &grid,
            cfg.eps,
            cfg.seed.wrapping_add(r as u64),
            cfg.max_points,
        )
    });
    PackingResult {
        t: cfg.t,
        eps: cfg.eps,
        count: runs.iter().map(|r| r.0).max().unwrap(),
        per_restart: runs.iter().map(|r| r.0).collect(),
        saturated: runs.iter().any(|r| r.1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HtopConfig {
    /// Decreasing.
    pub eps_schedule: Vec<f64>,
    /// Increasing.
    #[serde(rename = "T_schedule")]
    pub t_schedule: Vec<f64>,
    pub dt: f64,
    #[serde(default = "default_restarts")]
    pub greedy_restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default = "one")]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSlope {
    pub eps: f64,
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    pub counts: Vec<usize>,
    /// Slope of `ln N` against `T` over the first `fit_len` horizons.
    pub slope: f64,
    pub fit_len: usize,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HtopEstimate {
    pub htop: f64,
    pub per_eps: Vec<EpsSlope>,
    pub warnings: Vec<String>,
}

/// A horizon counts as saturated once the packing hit its cap or the growth
/// from the previous horizon fell below half the largest growth seen so far.
fn unsaturated_prefix(ts: &[f64], counts: &[usize], capped: &[bool]) -> usize {
    let mut best = 0.0f64;
    for i in 1..ts.len() {
        if capped[i] {
            return i;
        }
        let g = ((counts[i] as f64).ln() - (counts[i - 1] as f64).ln()) / (ts[i] - ts[i - 1]);
        if i >= 2 && g < 0.5 * best {
            return i;
        }
        best = best.max(g);
    }
    ts.len()
}

/// `ln N(T, eps)` slopes per `eps`; the estimate is the slope at the smallest
/// `eps`. Greedy packings are lower bounds, so the estimate is biased low.
pub fn estimate_htop(flow: &dyn Flow, cloud: &[FlowPoint], cfg: &HtopConfig) -> HtopEstimate {
    let mut per_eps = Vec::new();
    let mut warnings = Vec::new();
    for &eps in &cfg.eps_schedule {
        let mut counts = Vec::new();
        let mut capped = Vec::new();
        for &t in &cfg.t_schedule {
            let r = max_separated(
                flow,
                cloud,
                &BowenConfig {
                    t,
                    eps,
                    dt: cfg.dt,
                    greedy_restarts: cfg.greedy_restarts,
                    seed: cfg.seed,
                    max_points: cfg.max_points,
                    workers: cfg.workers,
                },
            );
            counts.push(r.count.max(1));
            capped.push(r.saturated);
            // Later horizons cannot enter the fit once saturation shows.
            if unsaturated_prefix(&cfg.t_schedule[..counts.len()], &counts, &capped) < counts.len()
            {
                break;
            }
        }
        let done = &cfg.t_schedule[..counts.len()];
        let fit_len = unsaturated_prefix(done, &counts, &capped);
        let saturated = fit_len < done.len();
        if saturated {
            warnings.push(format!(
                "eps = {eps}: N(T, eps) stops growing after T = {}; cloud resolution reached",
                cfg.t_schedule[fit_len - 1]
            ));
        }
        let slope = if fit_len >= 2 {
            let ys: Vec<f64> = counts[..fit_len].iter().map(|&c| (c as f64).ln()).collect();
            fit_line(&cfg.t_schedule[..fit_len], &ys)
                .map(|f| f.slope)
                .unwrap_or(f64::NAN)
        } else {
            warnings.push(format!("eps = {eps}: fewer than two unsaturated horizons"));
            f64::NAN
        };
        per_eps.push(EpsSlope {
            eps,
            t: done.to_vec(),
            counts,
            slope,
            fit_len,
            saturated,
        });
    }
    let htop = per_eps.last().map(|p| p.slope).unwrap_or(f64::NAN);
    HtopEstimate {
        htop,
        per_eps,
        warnings,
    }
}

/// A distance function with its declared distortion class: `d^g <~ d <~ (d^g)^s`
/// (or `s-` when `exact` is false).
pub struct DistortedMetric<'a> {
    pub eval: Box<dyn Fn(&FlowPoint, &FlowPoint) -> f64 + Sync + 'a>,
    pub s: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    /// `min d / d^g`.
    pub c_lo: f64,
    /// `max d / (d^g)^s`.
    pub c_hi: f64,
}

impl<'a> DistortedMetric<'a> {
    pub fn base(flow: &'a dyn Flow) -> Self {
        DistortedMetric {
            eval: Box::new(move |x, y| flow.distance(x, y)),
            s: 1.0,
            exact: true,
        }
    }

    pub fn distance(&self, x: &FlowPoint, y: &FlowPoint) -> f64 {
        (self.eval)(x, y)
    }

    /// Empirical comparability constants against the flow's base distance.
    pub fn comparability(
        &self,
        flow: &dyn Flow,
        pairs: &[(FlowPoint, FlowPoint)],
    ) -> Comparability {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (x, y) in pairs {
            let g = flow.distance(x, y);
            if g > 0.0 {
                let d = self.distance(x, y);
                lo = lo.min(d / g);
                hi = hi.max(d / g.powf(self.s));
            }
        }
        Comparability { c_lo: lo, c_hi: hi }
    }
}

/// Pairs `(x, perturb(x, scale))` for every scale, plus independent pairs.
pub fn sample_pairs(
    flow: &dyn Flow,
    n_per_scale: usize,
    scales: &[f64],
    seed: u64,
) -> Vec<(FlowPoint, FlowPoint)> {
    let mut rng = stream_rng(seed, 2);
    let mut out = Vec::with_capacity(n_per_scale * (scales.len() + 1));
    for &s in scales {
        for _ in 0..n_per_scale {
            let x = flow.sample(&mut rng);
            let y = flow.perturb(&x, s, &mut rng);
            out.push((x, y));
        }
    }
    for _ in 0..n_per_scale {
        out.push((flow.sample(&mut rng), flow.sample(&mut rng)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `sup d(e^t x, e^t y) / d(x, y)` over the pairs.
    pub lipschitz: f64,
    /// `inf` of the same ratio over the closest 10% of pairs.
    pub local_skewness: f64,
    pub pairs_used: usize,
}

/// Lipschitz constant of the time-`t` map for a distance, over sampled pairs.
pub fn lipschitz_constant(
    metric: &DistortedMetric,
    flow: &dyn Flow,
    time: f64,
    pairs: &[(FlowPoint, FlowPoint)],
) -> LipschitzReport {
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let d = metric.distance(x, y);
        if d > 0.0 {
            let r = if time == 0.0 {
                1.0
            } else {
                metric.distance(&flow.evolve(x, time), &flow.evolve(y, time)) / d
            };
            rows.push((d, r));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let local = rows.len().div_ceil(10);
    LipschitzReport {
        lipschitz: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        local_skewness: rows[..local]
            .iter()
            .map(|r| r.1)
            .fold(f64::INFINITY, f64::min),
        pairs_used: rows.len(),
    }
}
