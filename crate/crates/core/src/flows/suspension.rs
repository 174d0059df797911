use std::f64::consts::{PI, TAU};

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{chordal, Flow, FlowError, FlowPoint};

/// Hyperbolic toral automorphism `A` with roof 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspensionParams {
    pub matrix: [[i64; 2]; 2],
}

impl SuspensionParams {
    pub fn new(matrix: [[i64; 2]; 2]) -> Result<Self, FlowError> {
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        if det != 1 {
            return Err(FlowError::InvalidParams(format!(
                "determinant {det}, expected 1"
            )));
        }
        let tr = matrix[0][0] + matrix[1][1];
        if tr.abs() <= 2 {
            return Err(FlowError::InvalidParams(format!(
                "|trace| = {} is not > 2",
                tr.abs()
            )));
        }
        Ok(SuspensionParams { matrix })
    }

    /// `[[2,1],[1,1]]`.
    pub fn cat() -> Self {
        SuspensionParams {
            matrix: [[2, 1], [1, 1]],
        }
    }

    pub fn trace(&self) -> i64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    /// Leading eigenvalue modulus `lambda_+`.
    pub fn lambda(&self) -> f64 {
        let t = self.trace().abs() as f64;
        (t + (t * t - 4.0).sqrt()) / 2.0
    }

    /// Unit eigenvector of the expanding eigenvalue.
    pub fn unstable_direction(&self) -> [f64; 2] {
        let [[a, b], [_, _]] = self.matrix;
        let ev = self.lambda() * (self.trace() as f64).signum();
        // (A - ev) v = 0 with v = (b, ev - a).
        let v = [b as f64, ev - a as f64];
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    }

    fn apply(&self, x: [f64; 2], inverse: bool) -> [f64; 2] {
        let [[a, b], [c, d]] = self.matrix;
        let m = if inverse {
            [[d, -b], [-c, a]]
        } else {
            [[a, b], [c, d]]
        };
        [
            (m[0][0] as f64 * x[0] + m[0][1] as f64 * x[1]).rem_euclid(1.0),
            (m[1][0] as f64 * x[0] + m[1][1] as f64 * x[1]).rem_euclid(1.0),
        ]
    }

    fn power(&self, mut x: [f64; 2], n: i64) -> [f64; 2] {
        for _ in 0..n.unsigned_abs() {
            x = self.apply(x, n < 0);
        }
        x
    }
}

/// Advance the roof coordinate by `t`, applying `A` at each roof crossing.
pub fn suspension_evolve(params: &SuspensionParams, p: &FlowPoint, t: f64) -> FlowPoint {
    let s = p.coords[2] + t;
    let n = s.floor();
    let x = params.power([p.coords[0], p.coords[1]], n as i64);
    let mut s = s - n;
    if s >= 1.0 {
        s = 0.0;
    }
    FlowPoint::new(vec![x[0], x[1], s])
}

/// Chordal distance of the embedding used by [`SuspensionFlow`].
pub fn suspension_distance(params: &SuspensionParams, p: &FlowPoint, q: &FlowPoint) -> f64 {
    chordal(&embed(params, p), &embed(params, q))
}

// Mapping torus embedded in R^10: the roof circle, plus two torus charts.
// Chart a reads x for s < 1/2 and Ax for s >= 1/2, weighted by |cos(pi s~)|;
// chart b reads x, weighted by |sin(pi s~)|, which vanishes at the gluing.
fn embed(params: &SuspensionParams, p: &FlowPoint) -> Vec<f64> {
    let r = 1.0 / TAU;
    let s = p.coords[2];
    let st = s - s.round();
    let wa = (PI * st).cos().abs();
    let wb = (PI * st).sin().abs();
    let x = [p.coords[0], p.coords[1]];
    let y = if s < 0.5 { x } else { params.apply(x, false) };
    let (s0, c0) = (TAU * s).sin_cos();
    let mut e = Vec::with_capacity(10);
    e.extend([r * c0, r * s0]);
    for (w, v) in [(wa, y), (wb, x)] {
        for vi in v {
            let (si, ci) = (TAU * vi).sin_cos();
            e.extend([w * r * ci, w * r * si]);
        }
    }
    e
}

#[derive(Debug, Clone)]
pub struct SuspensionFlow {
    pub params: SuspensionParams,
    velocity_bound: f64,
}

impl SuspensionFlow {
    pub fn new(params: SuspensionParams) -> Self {
        SuspensionFlow {
            params,
            velocity_bound: 1.25,
        }
    }

    pub fn cat() -> Self {
        Self::new(SuspensionParams::cat())
    }

    pub fn with_velocity_bound(mut self, v: f64) -> Self {
        self.velocity_bound = v;
        self
    }

    pub fn point(&self, x1: f64, x2: f64, s: f64) -> FlowPoint {
        suspension_evolve(
            &self.params,
            &FlowPoint::new(vec![x1.rem_euclid(1.0), x2.rem_euclid(1.0), 0.0]),
            s,
        )
    }
}

impl Flow for SuspensionFlow {
    fn name(&self) -> String {
        format!("suspension({:?})", self.params.matrix)
    }

    fn dim(&self) -> usize {
        3
    }

    fn coord_len(&self) -> usize {
        3
    }

    fn evolve(&self, p: &FlowPoint, t: f64) -> FlowPoint {
        suspension_evolve(&self.params, p, t)
    }

    fn embed(&self, p: &FlowPoint) -> Vec<f64> {
        embed(&self.params, p)
    }

    fn distance(&self, p: &FlowPoint, q: &FlowPoint) -> f64 {
        suspension_distance(&self.params, p, q)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> FlowPoint {
        let x1: f64 = rng.random();
        let x2: f64 = rng.random();
        let s: f64 = rng.random();
        FlowPoint::new(vec![x1, x2, s])
    }

    fn perturb(&self, p: &FlowPoint, scale: f64, rng: &mut dyn RngCore) -> FlowPoint {
        let mut d = [0.0f64; 3];
        for v in d.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut *rng);
            *v = scale * n;
        }
        let q = FlowPoint::new(vec![
            (p.coords[0] + d[0]).rem_euclid(1.0),
            (p.coords[1] + d[1]).rem_euclid(1.0),
            p.coords[2],
        ]);
        self.evolve(&q, d[2])
    }

    fn shortest_period(&self) -> f64 {
        1.0
    }

    fn velocity_bound(&self) -> f64 {
        self.velocity_bound
    }
}
