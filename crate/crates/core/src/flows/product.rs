use rand::RngCore;

use super::{Flow, FlowPoint};

/// Product flow on `X x Y`; the embedding is the concatenation, so the
/// distance is `sqrt(d_X^2 + d_Y^2)`.
pub struct ProductFlow<A, B> {
    pub first: A,
    pub second: B,
}

impl<A: Flow, B: Flow> ProductFlow<A, B> {
    pub fn new(first: A, second: B) -> Self {
        ProductFlow { first, second }
    }

    fn split(&self, p: &FlowPoint) -> (FlowPoint, FlowPoint) {
        let k = self.first.coord_len();
        (
            FlowPoint::new(p.coords[..k].to_vec()),
            FlowPoint::new(p.coords[k..].to_vec()),
        )
    }

    fn join(a: FlowPoint, b: FlowPoint) -> FlowPoint {
        let mut c = a.coords;
        c.extend(b.coords);
        FlowPoint::new(c)
    }
}

impl<A: Flow, B: Flow> Flow for ProductFlow<A, B> {
    fn name(&self) -> String {
        format!("{} x {}", self.first.name(), self.second.name())
    }

    fn dim(&self) -> usize {
        self.first.dim() + self.second.dim()
    }

    fn coord_len(&self) -> usize {
        self.first.coord_len() + self.second.coord_len()
    }

    fn evolve(&self, p: &FlowPoint, t: f64) -> FlowPoint {
        let (a, b) = self.split(p);
        Self::join(self.first.evolve(&a, t), self.second.evolve(&b, t))
    }

    fn embed(&self, p: &FlowPoint) -> Vec<f64> {
        let (a, b) = self.split(p);
        let mut e = self.first.embed(&a);
        e.extend(self.second.embed(&b));
        e
    }

    fn embed_images(&self, p: &FlowPoint) -> Vec<Vec<f64>> {
        let (a, b) = self.split(p);
        let ib = self.second.embed_images(&b);
        let mut out = Vec::new();
        for ea in self.first.embed_images(&a) {
            for eb in &ib {
                let mut e = ea.clone();
                e.extend(eb);
                out.push(e);
            }
        }
        out
    }

    fn sample(&self, rng: &mut dyn RngCore) -> FlowPoint {
        let a = self.first.sample(rng);
        let b = self.second.sample(rng);
        Self::join(a, b)
    }

    fn perturb(&self, p: &FlowPoint, scale: f64, rng: &mut dyn RngCore) -> FlowPoint {
        let (a, b) = self.split(p);
        let a = self.first.perturb(&a, scale, rng);
        let b = self.second.perturb(&b, scale, rng);
        Self::join(a, b)
    }

    /// Lower bound: the smaller factor period.
    fn shortest_period(&self) -> f64 {
        self.first
            .shortest_period()
            .min(self.second.shortest_period())
    }

    fn velocity_bound(&self) -> f64 {
        self.first
            .velocity_bound()
            .hypot(self.second.velocity_bound())
    }
}
