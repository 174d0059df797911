//! Distances built from the instability of an Anosov flow on a finite sample
//! graph: the separation time `N`, the quasi-distance `rho`, its chain metric
//! `D`, and the family `d_k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flows::{Flow, FlowPoint};
use crate::numeric::{golden_section_min, stream_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("invalid construction parameter: {0}")]
    Invalid(String),
    #[error("no separation within the window J = {0}; the points look orbit-equivalent")]
    WindowExhausted(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructionConfig {
    /// Instability constant `c`.
    pub c: f64,
    /// Expansion `alpha`; estimated from local transversal pairs when `None`.
    pub alpha: Option<f64>,
    /// Scan window `J` for `N(x, y)`.
    pub window: usize,
    /// Largest `k` of the `d_k` family.
    pub k: usize,
    /// Base points come in clusters so that local pairs are present.
    pub clusters: usize,
    pub per_cluster: usize,
    pub cluster_scales: Vec<f64>,
    /// Pairs used to estimate `alpha`.
    pub alpha_pairs: usize,
    pub seed: u64,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        ConstructionConfig {
            c: 0.1,
            alpha: None,
            window: 40,
            k: 4,
            clusters: 30,
            per_cluster: 4,
            cluster_scales: vec![0.004, 0.012, 0.03],
            alpha_pairs: 400,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConstruction {
    pub alpha: f64,
    pub alpha_eps: f64,
    pub c: f64,
    pub window: usize,
    pub k: usize,
    pub n_base: usize,
    /// Vertex `(i, j)` is `e^{jR} x_i`, stored at index `i (k + 1) + j`.
    pub vertices: Vec<FlowPoint>,
    /// Base distance between vertices.
    pub d: Vec<f64>,
    /// Separation time (`u32::MAX` for coincident points).
    pub n: Vec<u32>,
    pub rho: Vec<f64>,
    /// Chain metric: shortest paths of `rho`.
    pub chain: Vec<f64>,
    /// Pairs with no separation inside the window.
    pub exhausted: usize,
}

/// `max(d(e^R x, e^R y), d(e^{-R} x, e^{-R} y)) / d(x, y)` after sliding `y`
/// along its orbit to the point closest to `x`.
fn transversal_expansion(flow: &dyn Flow, x: &FlowPoint, y: &FlowPoint, scale: f64) -> Option<f64> {
    let (t, _) = golden_section_min(
        |t| flow.distance(x, &flow.evolve(y, t)),
        -3.0 * scale,
        3.0 * scale,
        1e-12,
    );
    let y = flow.evolve(y, t);
    let d = flow.distance(x, &y);
    if !(d > 0.0) {
        return None;
    }
    let fwd = flow.distance(&flow.evolve(x, 1.0), &flow.evolve(&y, 1.0));
    let bwd = flow.distance(&flow.evolve(x, -1.0), &flow.evolve(&y, -1.0));
    Some(fwd.max(bwd) / d)
}

/// Median and maximum one-step expansion over local transversal pairs.
pub fn estimate_alpha(flow: &dyn Flow, pairs: usize, scale: f64, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 3);
    let mut r: Vec<f64> = (0..pairs)
        .filter_map(|_| {
            let x = flow.sample(&mut rng);
            let y = flow.perturb(&x, scale, &mut rng);
            transversal_expansion(flow, &x, &y, scale)
        })
        .collect();
    r.sort_by(|a, b| a.total_cmp(b));
    if r.is_empty() {
        return (1.0, 1.0);
    }
    (r[r.len() / 2], *r.last().unwrap())
}

struct Orbits {
    /// Per base point, embeddings / images at integer times `-J ..= J + k`.
    emb: Vec<Vec<Vec<f64>>>,
    imgs: Vec<Vec<Vec<Vec<f64>>>>,
    offset: i64,
}

impl Orbits {
    fn dist(&self, i: usize, ti: i64, j: usize, tj: i64) -> f64 {
        let e = &self.emb[j][(tj + self.offset) as usize];
        self.imgs[i][(ti + self.offset) as usize]
            .iter()
            .map(|im| {
                im.iter()
                    .zip(e)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Separation time and `rho` for the pair `(e^{a} x_i, e^{b} x_j)`:
/// `N = min{K : W_K > c alpha^{-K}}`, `W_K = max_{|s| <= K} d(e^{s+a} x_i, e^{s+b} x_j)`,
/// `rho = min(1, min_{K <= N} max(alpha^{-K}, W_K / c))`.
fn separation(
    o: &Orbits,
    i: usize,
    a: i64,
    j: usize,
    b: i64,
    alpha: f64,
    c: f64,
    window: usize,
) -> (Option<u32>, f64) {
    let mut w = 0.0f64;
    let mut rho = 1.0f64;
    for kk in 0..=window as i64 {
        w = w.max(o.dist(i, a + kk, j, b + kk));
        if kk > 0 {
            w = w.max(o.dist(i, a - kk, j, b - kk));
        }
        let thr = alpha.powi(-(kk as i32));
        rho = rho.min(thr.max(w / c));
        if w > c * thr {
            return (Some(kk as u32), rho);
        }
    }
    (None, rho)
}

/// Builds `N`, `rho` and the chain metric `D` on base points and their orbit
/// points `e^{jR} x_i`, `j = 0..=k`.
pub fn build_metric_construction(
    flow: &dyn Flow,
    cfg: &ConstructionConfig,
) -> Result<MetricConstruction, ConstructionError> {
    if !(cfg.c > 0.0) {
        return Err(ConstructionError::Invalid(format!(
            "c = {} must be positive",
            cfg.c
        )));
    }
    if cfg.k == 0 || cfg.clusters == 0 || cfg.per_cluster == 0 || cfg.window == 0 {
        return Err(ConstructionError::Invalid(
            "k, clusters, per_cluster and window must be positive".into(),
        ));
    }
    let (alpha, alpha_eps) = match cfg.alpha {
        Some(a) => (a, 1.05 * a),
        None => {
            let scale = cfg
                .cluster_scales
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                .min(0.01);
            let (med, max) = estimate_alpha(flow, cfg.alpha_pairs, scale, cfg.seed);
            let med = med.max(1.0);
            (med, (1.05 * med).max(max))
        }
    };
    if !(alpha >= 1.0) {
        return Err(ConstructionError::Invalid(format!(
            "alpha = {alpha} must be >= 1"
        )));
    }
    let mut rng = stream_rng(cfg.seed, 4);
    let mut base = Vec::with_capacity(cfg.clusters * cfg.per_cluster);
    for _ in 0..cfg.clusters {
        let center = flow.sample(&mut rng);
        for p in 0..cfg.per_cluster {
            if p == 0 || cfg.cluster_scales.is_empty() {
                base.push(center.clone());
            } else {
                let s = cfg.cluster_scales[(p - 1) % cfg.cluster_scales.len()];
                base.push(flow.perturb(&center, s, &mut rng));
            }
        }
    }
    let j = cfg.window as i64;
    let k = cfg.k as i64;
    let mut emb = Vec::with_capacity(base.len());
    let mut imgs = Vec::with_capacity(base.len());
    let mut vertices = Vec::with_capacity(base.len() * (cfg.k + 1));
    for x in &base {
        let orbit: Vec<FlowPoint> = (-j..=j + k).map(|t| flow.evolve(x, t as f64)).collect();
        emb.push(orbit.iter().map(|p| flow.embed(p)).collect::<Vec<_>>());
        imgs.push(
            orbit
                .iter()
                .map(|p| flow.embed_images(p))
                .collect::<Vec<_>>(),
        );
        for jj in 0..=k {
            vertices.push(orbit[(jj + j) as usize].clone());
        }
    }
    let o = Orbits {
        emb,
        imgs,
        offset: j,
    };
    let nb = base.len();
    let kv = cfg.k + 1;
    let nv = nb * kv;
    let mut d = vec![0.0; nv * nv];
    let mut n = vec![u32::MAX; nv * nv];
    let mut rho = vec![0.0; nv * nv];
    let mut exhausted = 0;
    for u in 0..nv {
        for v in u + 1..nv {
            let (i, a) = (u / kv, (u % kv) as i64);
            let (jb, b) = (v / kv, (v % kv) as i64);
            let duv = o.dist(i, a, jb, b);
            d[u * nv + v] = duv;
            d[v * nv + u] = duv;
            if duv == 0.0 {
                continue;
            }
            let (nn, r) = separation(&o, i, a, jb, b, alpha, cfg.c, cfg.window);
            let nn = match nn {
                Some(x) => x,
                None => {
                    exhausted += 1;
                    cfg.window as u32 + 1
                }
            };
            n[u * nv + v] = nn;
            n[v * nv + u] = nn;
            rho[u * nv + v] = r;
            rho[v * nv + u] = r;
        }
    }
    let mut chain = rho.clone();
    for m in 0..nv {
        for u in 0..nv {
            let um = chain[u * nv + m];
            if um == 0.0 && u != m {
                // Coincident points share rows.
            }
            for v in 0..nv {
                let via = um + chain[m * nv + v];
                if via < chain[u * nv + v] {
                    chain[u * nv + v] = via;
                }
            }
        }
    }
    Ok(MetricConstruction {
        alpha,
        alpha_eps,
        c: cfg.c,
        window: cfg.window,
        k: cfg.k,
        n_base: nb,
        vertices,
        d,
        n,
        rho,
        chain,
        exhausted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub pairs: usize,
    pub triples: usize,
    /// `D <= rho <= 4 D`.
    pub frink_violations: usize,
    /// `rho(x, z) <= 2 max(rho(x, y), rho(y, z))`.
    pub weak_triangle_violations: usize,
    /// `max(0, ln(c/d)/ln(alpha alpha_eps)) <= N <= max(0, ceil(ln(c/d)/ln alpha))`.
    pub n_lower_violations: usize,
    pub n_upper_violations: usize,
    /// `D(e^j x, e^j y) <= 4 alpha^j D(x, y)`.
    pub growth_violations: usize,
}

const REL: f64 = 1e-12;

impl MetricConstruction {
    fn nv(&self) -> usize {
        self.vertices.len()
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.k + 1) + j
    }

    pub fn rho_at(&self, u: usize, v: usize) -> f64 {
        self.rho[u * self.nv() + v]
    }

    pub fn chain_at(&self, u: usize, v: usize) -> f64 {
        self.chain[u * self.nv() + v]
    }

    pub fn n_at(&self, u: usize, v: usize) -> Option<u32> {
        let x = self.n[u * self.nv() + v];
        (x != u32::MAX).then_some(x)
    }

    /// `N` of a single pair, with the window-exhausted error.
    pub fn separation_time(&self, u: usize, v: usize) -> Result<Option<u32>, ConstructionError> {
        match self.n_at(u, v) {
            Some(x) if x as usize > self.window => {
                Err(ConstructionError::WindowExhausted(self.window))
            }
            other => Ok(other),
        }
    }

    /// `L_D(e^{jR}) = sup D(e^j x, e^j y) / D(x, y)` over base pairs.
    pub fn lipschitz_d(&self, j: usize) -> f64 {
        let mut best = 0.0f64;
        for a in 0..self.n_base {
            for b in a + 1..self.n_base {
                let d0 = self.chain_at(self.idx(a, 0), self.idx(b, 0));
                if d0 > 0.0 {
                    best = best.max(self.chain_at(self.idx(a, j), self.idx(b, j)) / d0);
                }
            }
        }
        best
    }

    /// `d_k(e^{s} x_a, e^{s} x_b) = max_{0 <= j < k} D(e^{j+s} x_a, e^{j+s} x_b) / L^j`,
    /// with `L = L_D(e^{kR})^{1/k}`.
    fn dk(&self, k: usize, l: f64, a: usize, b: usize, shift: usize) -> f64 {
        (0..k)
            .map(|j| {
                self.chain_at(self.idx(a, j + shift), self.idx(b, j + shift)) / l.powi(j as i32)
            })
            .fold(0.0, f64::max)
    }

    /// `ln L_{d_k}(e^R)` over base pairs (`k <= self.k`).
    pub fn ln_lipschitz_dk(&self, k: usize) -> f64 {
        let k = k.clamp(1, self.k);
        let l = self.lipschitz_d(k).powf(1.0 / k as f64);
        let mut best = 0.0f64;
        for a in 0..self.n_base {
            for b in a + 1..self.n_base {
                let d0 = self.dk(k, l, a, b, 0);
                if d0 > 0.0 {
                    best = best.max(self.dk(k, l, a, b, 1) / d0);
                }
            }
        }
        best.ln()
    }

    /// Checks the construction's inequalities on `pairs` random vertex pairs
    /// and as many triples.
    pub fn check(&self, pairs: usize, seed: u64) -> SandwichReport {
        use rand::Rng;
        let nv = self.nv();
        let mut rng = stream_rng(seed, 5);
        let mut rep = SandwichReport {
            pairs,
            triples: pairs,
            frink_violations: 0,
            weak_triangle_violations: 0,
            n_lower_violations: 0,
            n_upper_violations: 0,
            growth_violations: 0,
        };
        let la = self.alpha.ln();
        let lae = (self.alpha * self.alpha_eps).ln();
        for _ in 0..pairs {
            let (u, v) = (rng.random_range(0..nv), rng.random_range(0..nv));
            let (r, dd) = (self.rho_at(u, v), self.chain_at(u, v));
            if dd > r * (1.0 + REL) || r > 4.0 * dd * (1.0 + REL) {
                rep.frink_violations += 1;
            }
            let w = rng.random_range(0..nv);
            if self.rho_at(u, w) > 2.0 * self.rho_at(u, v).max(self.rho_at(v, w)) * (1.0 + REL) {
                rep.weak_triangle_violations += 1;
            }
            if let Some(nn) = self.n_at(u, v) {
                if nn as usize <= self.window {
                    let ratio = (self.c / self.d[u * nv + v]).ln();
                    if (nn as f64) < (ratio / lae).max(0.0) - 1e-9 {
                        rep.n_lower_violations += 1;
                    }
                    if la > 0.0 && (nn as f64) > (ratio / la).max(0.0).ceil() + 1e-9 {
                        rep.n_upper_violations += 1;
                    }
                }
            }
            let (a, b) = (
                rng.random_range(0..self.n_base),
                rng.random_range(0..self.n_base),
            );
            let d0 = self.chain_at(self.idx(a, 0), self.idx(b, 0));
            for j in 1..=self.k {
                let dj = self.chain_at(self.idx(a, j), self.idx(b, j));
                if dj > 4.0 * self.alpha.powi(j as i32) * d0 * (1.0 + REL) {
                    rep.growth_violations += 1;
                }
            }
        }
        rep
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub k: usize,
    /// Manifold dimension `n`.
    pub n: usize,
    pub htop: f64,
    pub ln_l_dk: f64,
    pub ln_l_d: f64,
    /// `(n/2) ln L`.
    pub lower: f64,
    /// `n ln L`.
    pub upper: f64,
    pub slack: f64,
    /// `(n/2) ln L <= slack * htop`.
    pub lower_holds: bool,
    /// `htop <= slack * n ln L`.
    pub upper_holds: bool,
}

/// `(n/2) ln L_{d_k} <= h_top <= n ln L_{d_k}`, each side with a
/// multiplicative slack for the estimators.
pub fn verify_entropy_inequality(
    mc: &MetricConstruction,
    n: usize,
    k: usize,
    htop: f64,
    slack: f64,
) -> InequalityReport {
    let ln_l = mc.ln_lipschitz_dk(k).max(0.0);
    let nf = n as f64;
    InequalityReport {
        k,
        n,
        htop,
        ln_l_dk: ln_l,
        ln_l_d: mc.lipschitz_d(1).ln(),
        lower: 0.5 * nf * ln_l,
        upper: nf * ln_l,
        slack,
        lower_holds: 0.5 * nf * ln_l <= slack * htop + 1e-12,
        upper_holds: htop <= slack * nf * ln_l + 1e-12,
    }
}
