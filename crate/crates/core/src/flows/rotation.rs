use std::f64::consts::TAU;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{Flow, FlowError, FlowPoint};

/// Rotation `theta -> theta + omega t` on the circle `R/Z`; an isometric flow.
#[derive(Debug, Clone)]
pub struct CircleRotation {
    pub omega: f64,
}

impl CircleRotation {
    pub fn new(omega: f64) -> Result<Self, FlowError> {
        if !(omega.is_finite() && omega != 0.0) {
            return Err(FlowError::InvalidParams(format!(
                "rotation speed {omega} must be nonzero"
            )));
        }
        Ok(CircleRotation { omega })
    }
}

impl Flow for CircleRotation {
    fn name(&self) -> String {
        format!("rotation({})", self.omega)
    }

    fn dim(&self) -> usize {
        1
    }

    fn coord_len(&self) -> usize {
        1
    }

    fn evolve(&self, p: &FlowPoint, t: f64) -> FlowPoint {
        FlowPoint::new(vec![(p.coords[0] + self.omega * t).rem_euclid(1.0)])
    }

    fn embed(&self, p: &FlowPoint) -> Vec<f64> {
        let (s, c) = (TAU * p.coords[0]).sin_cos();
        vec![c / TAU, s / TAU]
    }

    fn sample(&self, rng: &mut dyn RngCore) -> FlowPoint {
        FlowPoint::new(vec![rng.random::<f64>()])
    }

    fn perturb(&self, p: &FlowPoint, scale: f64, rng: &mut dyn RngCore) -> FlowPoint {
        let d: f64 = StandardNormal.sample(rng);
        FlowPoint::new(vec![(p.coords[0] + scale * d).rem_euclid(1.0)])
    }

    fn shortest_period(&self) -> f64 {
        1.0 / self.omega.abs()
    }

    fn velocity_bound(&self) -> f64 {
        self.omega.abs()
    }
}
