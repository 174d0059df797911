use std::f64::consts::TAU;

use num_integer::Integer;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{chordal, Flow, FlowError, FlowPoint, ReturnScanner};

/// Ellipsoid `E(a) = {sum a_j |z_j|^2 = 1}` in `C^{m+1}`, optionally divided
/// by the free cyclic action `z_0 -> e^{2 pi i/q0} z_0`,
/// `z_j -> e^{2 pi i q_j/q0} z_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensSpaceParams {
    pub q: Vec<u64>,
    pub a: Vec<f64>,
    /// `ã_0 = a_0 q_0`, `ã_j = a_j - a_0 q_j`.
    pub tilde: Vec<f64>,
}

impl LensSpaceParams {
    /// Lens space `L(q_0, q_1..q_m; a_0..a_m)`; needs `q_0 >= 2` and every
    /// `q_j` coprime to `q_0`.
    pub fn new(q: Vec<u64>, a: Vec<f64>) -> Result<Self, FlowError> {
        if q.first().copied().unwrap_or(0) < 2 {
            return Err(FlowError::InvalidParams("lens spaces need q0 >= 2".into()));
        }
        Self::build(q, a)
    }

    /// The ellipsoid itself (trivial group, `q_0 = 1`).
    pub fn ellipsoid(a: Vec<f64>) -> Result<Self, FlowError> {
        let mut q = vec![0; a.len()];
        if let Some(q0) = q.first_mut() {
            *q0 = 1;
        }
        Self::build(q, a)
    }

    fn build(q: Vec<u64>, a: Vec<f64>) -> Result<Self, FlowError> {
        if a.len() < 2 {
            return Err(FlowError::InvalidParams(
                "need at least two weights a0, a1".into(),
            ));
        }
        if q.len() != a.len() {
            return Err(FlowError::InvalidParams(format!(
                "q has {} entries, a has {}",
                q.len(),
                a.len()
            )));
        }
        if let Some(bad) = a.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(FlowError::InvalidParams(format!(
                "weight {bad} is not positive"
            )));
        }
        let q0 = q[0];
        if q0 > 1 {
            if let Some(j) = (1..q.len()).find(|&j| q[j].gcd(&q0) != 1) {
                return Err(FlowError::InvalidParams(format!(
                    "q{j} = {} is not coprime to q0 = {q0}; the action is not free",
                    q[j]
                )));
            }
        }
        let mut tilde = Vec::with_capacity(a.len());
        tilde.push(a[0] * q0 as f64);
        for j in 1..a.len() {
            tilde.push(a[j] - a[0] * q[j] as f64);
        }
        Ok(LensSpaceParams { q, a, tilde })
    }

    pub fn m(&self) -> usize {
        self.a.len() - 1
    }

    pub fn q0(&self) -> u64 {
        self.q[0]
    }

    /// Exponent of the generator acting on coordinate `j`.
    fn weight(&self, j: usize) -> u64 {
        if j == 0 {
            1
        } else {
            self.q[j]
        }
    }

    /// Phase `2 pi k w_j / q_0` of group element `k` on coordinate `j`.
    pub fn group_phase(&self, k: u64, j: usize) -> f64 {
        let q0 = self.q0();
        TAU * ((k * self.weight(j)) % q0) as f64 / q0 as f64
    }

    /// Shortest axis-orbit period `min_j 2 pi gcd(w_j, q_0) / (q_0 a_j)`.
    pub fn axis_period(&self) -> f64 {
        let q0 = self.q0();
        (0..self.a.len())
            .map(|j| TAU * self.weight(j).gcd(&q0).max(1) as f64 / (q0 as f64 * self.a[j]))
            .fold(f64::INFINITY, f64::min)
    }

    fn constraint(&self, x: &FlowPoint) -> f64 {
        self.a
            .iter()
            .enumerate()
            .map(|(j, aj)| aj * (x.coords[2 * j].powi(2) + x.coords[2 * j + 1].powi(2)))
            .sum()
    }

    fn check(&self, x: &FlowPoint) -> Result<(), FlowError> {
        if x.coords.len() != 2 * self.a.len() {
            return Err(FlowError::InvalidPoint(f64::INFINITY));
        }
        let dev = (self.constraint(x) - 1.0).abs();
        if !(dev <= 1e-9) {
            return Err(FlowError::InvalidPoint(dev));
        }
        Ok(())
    }

    fn normalize(&self, x: &mut FlowPoint) {
        let s = self.constraint(x).sqrt();
        if s > 0.0 {
            x.coords.iter_mut().for_each(|c| *c /= s);
        }
    }

    fn rotate(&self, x: &FlowPoint, t: f64) -> FlowPoint {
        let mut out = x.coords.clone();
        for (j, aj) in self.a.iter().enumerate() {
            let (s, c) = (aj * t).rem_euclid(TAU).sin_cos();
            let (re, im) = (x.coords[2 * j], x.coords[2 * j + 1]);
            out[2 * j] = c * re - s * im;
            out[2 * j + 1] = s * re + c * im;
        }
        let mut p = FlowPoint { coords: out };
        self.normalize(&mut p);
        p
    }

    fn w(&self, x: &FlowPoint) -> Vec<f64> {
        x.coords
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.a[i / 2].sqrt())
            .collect()
    }

    fn apply_group(&self, w: &[f64], k: u64) -> Vec<f64> {
        let mut out = w.to_vec();
        for j in 0..self.a.len() {
            let (s, c) = self.group_phase(k, j).sin_cos();
            out[2 * j] = c * w[2 * j] - s * w[2 * j + 1];
            out[2 * j + 1] = s * w[2 * j] + c * w[2 * j + 1];
        }
        out
    }

    fn point_from_w(&self, w: &[f64]) -> FlowPoint {
        let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        FlowPoint {
            coords: w
                .iter()
                .enumerate()
                .map(|(i, v)| v / n / self.a[i / 2].sqrt())
                .collect(),
        }
    }
}

/// Reeb flow `z_j -> e^{i a_j t} z_j`, with the constraint re-enforced.
pub fn reeb_evolve(
    params: &LensSpaceParams,
    x: &FlowPoint,
    t: f64,
) -> Result<FlowPoint, FlowError> {
    params.check(x)?;
    Ok(params.rotate(x, t))
}

/// Quotient chordal distance `min_k |w(x) - U_k w(y)|`, `w_j = sqrt(a_j) z_j`.
pub fn lens_distance(
    params: &LensSpaceParams,
    x: &FlowPoint,
    y: &FlowPoint,
) -> Result<f64, FlowError> {
    params.check(x)?;
    params.check(y)?;
    let wx = params.w(x);
    let wy = params.w(y);
    Ok((0..params.q0())
        .map(|k| chordal(&wx, &params.apply_group(&wy, k)))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone)]
pub struct LensFlow {
    pub params: LensSpaceParams,
    shortest_period: f64,
}

impl LensFlow {
    pub fn new(params: LensSpaceParams) -> Self {
        let shortest_period = params.axis_period();
        LensFlow {
            params,
            shortest_period,
        }
    }

    pub fn with_shortest_period(mut self, t0: f64) -> Result<Self, FlowError> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(FlowError::InvalidParams(format!(
                "shortest period {t0} must be positive"
            )));
        }
        self.shortest_period = t0;
        Ok(self)
    }

    /// Point on the `j`-th axis with `|z_j|^2 = 1/a_j`.
    pub fn axis_point(&self, j: usize) -> FlowPoint {
        let mut c = vec![0.0; 2 * self.params.a.len()];
        c[2 * j] = 1.0 / self.params.a[j].sqrt();
        FlowPoint::new(c)
    }

    /// Point from complex coordinates, rescaled onto the ellipsoid.
    pub fn point(&self, z: &[(f64, f64)]) -> FlowPoint {
        let mut p = FlowPoint::new(z.iter().flat_map(|(r, i)| [*r, *i]).collect());
        self.params.normalize(&mut p);
        p
    }
}

impl Flow for LensFlow {
    fn name(&self) -> String {
        if self.params.q0() == 1 {
            format!("E({:?})", self.params.a)
        } else {
            format!("L({:?};{:?})", self.params.q, self.params.a)
        }
    }

    fn dim(&self) -> usize {
        2 * self.params.m() + 1
    }

    fn coord_len(&self) -> usize {
        2 * self.params.a.len()
    }

    fn evolve(&self, p: &FlowPoint, t: f64) -> FlowPoint {
        self.params.rotate(p, t)
    }

    fn embed(&self, p: &FlowPoint) -> Vec<f64> {
        self.params.w(p)
    }

    fn embed_images(&self, p: &FlowPoint) -> Vec<Vec<f64>> {
        let w = self.params.w(p);
        (0..self.params.q0())
            .map(|k| self.params.apply_group(&w, k))
            .collect()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> FlowPoint {
        loop {
            let w: Vec<f64> = (0..self.coord_len())
                .map(|_| StandardNormal.sample(rng))
                .collect();
            if w.iter().map(|v| v * v).sum::<f64>() > 1e-24 {
                return self.params.point_from_w(&w);
            }
        }
    }

    fn perturb(&self, p: &FlowPoint, scale: f64, rng: &mut dyn RngCore) -> FlowPoint {
        let w: Vec<f64> = self
            .params
            .w(p)
            .into_iter()
            .map(|v| {
                let n: f64 = StandardNormal.sample(&mut *rng);
                v + scale * n
            })
            .collect();
        self.params.point_from_w(&w)
    }

    fn shortest_period(&self) -> f64 {
        self.shortest_period
    }

    fn velocity_bound(&self) -> f64 {
        self.params.a.iter().copied().fold(0.0, f64::max)
    }

    fn return_scanner<'a>(&'a self, times: &'a [f64]) -> Box<dyn ReturnScanner + 'a> {
        Box::new(LensScanner::new(&self.params, times))
    }
}

/// Return-distance scanner with a precomputed phase table:
/// `|w(e^{tR}x) - U_k w(x)|^2 = sum_j 2 a_j |z_j|^2 (1 - cos(a_j t - theta_jk))`.
struct LensScanner {
    a: Vec<f64>,
    q0: usize,
    table: Vec<f64>,
}

impl LensScanner {
    fn new(params: &LensSpaceParams, times: &[f64]) -> Self {
        let q0 = params.q0() as usize;
        let mut table = Vec::with_capacity(times.len() * q0 * params.a.len());
        for &t in times {
            for k in 0..q0 {
                for (j, aj) in params.a.iter().enumerate() {
                    let phase = (aj * t).rem_euclid(TAU) - params.group_phase(k as u64, j);
                    table.push(2.0 * (1.0 - phase.cos()));
                }
            }
        }
        LensScanner {
            a: params.a.clone(),
            q0,
            table,
        }
    }

    fn weights(&self, x: &FlowPoint) -> Vec<f64> {
        self.a
            .iter()
            .enumerate()
            .map(|(j, aj)| aj * (x.coords[2 * j].powi(2) + x.coords[2 * j + 1].powi(2)))
            .collect()
    }

    fn sq_distances<'s>(&'s self, w: &'s [f64]) -> impl Iterator<Item = f64> + 's {
        let width = self.a.len();
        self.table.chunks_exact(self.q0 * width).map(move |row| {
            row.chunks_exact(width)
                .map(|r| r.iter().zip(w).map(|(p, q)| p * q).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
    }
}

impl ReturnScanner for LensScanner {
    fn first_hit(&self, x: &FlowPoint, eps: f64) -> Option<usize> {
        let w = self.weights(x);
        let e2 = eps * eps;
        let hit = self.sq_distances(&w).position(|d2| d2 <= e2);
        hit
    }

    fn min_return(&self, x: &FlowPoint) -> f64 {
        let w = self.weights(x);
        let best = self.sq_distances(&w).fold(f64::INFINITY, f64::min);
        best.max(0.0).sqrt()
    }
}
