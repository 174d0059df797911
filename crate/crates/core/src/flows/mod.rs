//! Model flows behind one contract: Reeb flows on ellipsoids and lens
//! spaces, a hyperbolic toral suspension, circle rotations and products.

mod lens;
mod product;
mod rotation;
mod suspension;

pub use lens::{lens_distance, reeb_evolve, LensFlow, LensSpaceParams};
pub use product::ProductFlow;
pub use rotation::CircleRotation;
pub use suspension::{suspension_distance, suspension_evolve, SuspensionFlow, SuspensionParams};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("point violates the ellipsoid constraint by {0:e}")]
    InvalidPoint(f64),
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
}

/// A point in a flow's chart. Lens points store `m+1` complex numbers as
/// interleaved (re, im) pairs; suspension points store `(x1, x2, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub coords: Vec<f64>,
}

impl FlowPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        FlowPoint { coords }
    }
}

/// Continuous-time flow on a compact metric space.
///
/// The distance is the chordal distance of an embedding, minimized over a
/// finite set of images when the space is a quotient:
/// `distance(p, q) = min_i |embed_images(p)[i] - embed(q)|`.
pub trait Flow: Send + Sync {
    fn name(&self) -> String;
    /// Manifold dimension.
    fn dim(&self) -> usize;
    /// Number of stored chart coordinates.
    fn coord_len(&self) -> usize;
    fn evolve(&self, p: &FlowPoint, t: f64) -> FlowPoint;
    fn embed(&self, p: &FlowPoint) -> Vec<f64>;
    fn embed_images(&self, p: &FlowPoint) -> Vec<Vec<f64>> {
        vec![self.embed(p)]
    }
    fn distance(&self, p: &FlowPoint, q: &FlowPoint) -> f64 {
        let e = self.embed(q);
        self.embed_images(p)
            .iter()
            .map(|img| chordal(img, &e))
            .fold(f64::INFINITY, f64::min)
    }
    /// Draw from the sampling measure.
    fn sample(&self, rng: &mut dyn RngCore) -> FlowPoint;
    /// Random nearby point at roughly distance `scale`.
    fn perturb(&self, p: &FlowPoint, scale: f64, rng: &mut dyn RngCore) -> FlowPoint;
    /// Shortest period of a closed orbit (or a lower bound for it).
    fn shortest_period(&self) -> f64;
    /// Bound on `|d/dt distance(evolve(x, t), y)|`.
    fn velocity_bound(&self) -> f64;
    /// Scanner for first returns on a fixed time grid.
    fn return_scanner<'a>(&'a self, times: &'a [f64]) -> Box<dyn ReturnScanner + 'a> {
        Box::new(GenericScanner { flow: self, times })
    }
}

/// First time-grid index at which a point comes back within `eps` of itself.
pub trait ReturnScanner {
    fn first_hit(&self, x: &FlowPoint, eps: f64) -> Option<usize>;
    /// Smallest return distance over the grid.
    fn min_return(&self, x: &FlowPoint) -> f64;
}

struct GenericScanner<'a, F: ?Sized> {
    flow: &'a F,
    times: &'a [f64],
}

impl<F: Flow + ?Sized> ReturnScanner for GenericScanner<'_, F> {
    fn first_hit(&self, x: &FlowPoint, eps: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&t| self.flow.distance(&self.flow.evolve(x, t), x) <= eps)
    }

    fn min_return(&self, x: &FlowPoint) -> f64 {
        self.times
            .iter()
            .map(|&t| self.flow.distance(&self.flow.evolve(x, t), x))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn chordal(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Flow parameter file record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FlowSpec {
    Lens {
        q: Vec<u64>,
        a: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shortest_period: Option<f64>,
    },
    Ellipsoid {
        a: Vec<f64>,
    },
    Suspension {
        matrix: [[i64; 2]; 2],
    },
    Rotation {
        omega: f64,
    },
}

impl FlowSpec {
    pub fn build(&self) -> Result<Box<dyn Flow>, FlowError> {
        Ok(match self {
            FlowSpec::Lens {
                q,
                a,
                shortest_period,
            } => {
                let mut f = LensFlow::new(LensSpaceParams::new(q.clone(), a.clone())?);
                if let Some(t0) = shortest_period {
                    f = f.with_shortest_period(*t0)?;
                }
                Box::new(f)
            }
            FlowSpec::Ellipsoid { a } => {
                Box::new(LensFlow::new(LensSpaceParams::ellipsoid(a.clone())?))
            }
            FlowSpec::Suspension { matrix } => {
                Box::new(SuspensionFlow::new(SuspensionParams::new(*matrix)?))
            }
            FlowSpec::Rotation { omega } => Box::new(CircleRotation::new(*omega)?),
        })
    }
}
