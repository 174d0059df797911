//! Irrationality exponents: continued fractions for single reals, record
//! minima of the torus line `t -> t a mod Z^n` for tuples.

mod cf;

pub use cf::{
    cf_expand, estimate_mu, ln_big, Approx, ContinuedFraction, HighPrecisionReal,
    LiouvilleTruncated, QuadraticSurd, RationalReal,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{fit_line, golden_section_min, map_chunks};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiophantineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(
        "precision exhausted: {certified} of {requested} quotients certified at {digits} digits"
    )]
    PrecisionExhausted {
        requested: usize,
        certified: usize,
        digits: u32,
    },
    #[error("need at least 3 convergents, got {0}")]
    TooFewConvergents(usize),
    #[error("only {0} record minima found; raise t_max")]
    NoRecords(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ContinuedFraction,
    RecordMinima,
}

/// One record approximation: a time (or denominator) and the distance reached.
/// Logs are kept so that huge denominators stay representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub distance: f64,
    pub ln_t: f64,
    pub ln_distance: f64,
}

impl Record {
    pub fn new(t: f64, distance: f64) -> Self {
        Record {
            t,
            distance,
            ln_t: t.ln(),
            ln_distance: distance.ln(),
        }
    }

    pub fn from_logs(ln_t: f64, ln_distance: f64) -> Self {
        Record {
            t: ln_t.exp(),
            distance: ln_distance.exp(),
            ln_t,
            ln_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrationalityEstimate {
    pub exponent: f64,
    pub evidence: Vec<Record>,
    pub method: EstimateMethod,
    /// Index range of the evidence (or convergents) used for the exponent.
    pub window: (usize, usize),
    pub fit_residual: Option<f64>,
    /// Rational input or a line that closes up on the lattice.
    pub lattice_periodic: bool,
}

/// Euclidean distance from `t a` to the nearest point of `Z^n`.
pub fn torus_line_distance(a: &[f64], t: f64) -> f64 {
    a.iter()
        .map(|ai| {
            let v = t * ai;
            let d = v - v.round();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Scan resolution for [`estimate_nu`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuGrid {
    /// Coarse samples per unit of normalized time (at least 10, so no
    /// lattice approach is stepped over).
    pub coarse_per_unit: f64,
    /// Samples per unit time used to seed the refinement in a coarse cell.
    pub fine_per_unit: f64,
    pub workers: usize,
}

impl Default for NuGrid {
    fn default() -> Self {
        NuGrid {
            coarse_per_unit: 10.0,
            fine_per_unit: 1000.0,
            workers: 1,
        }
    }
}

const PERIODIC_TOL: f64 = 1e-9;
const CHUNKS: usize = 64;

/// Local minima of the torus-line distance on `[lo, hi)`, refined.
fn local_minima(a: &[f64], lo: f64, hi: f64, h: f64, fine: f64) -> Vec<(f64, f64)> {
    let n = ((hi - lo) / h).ceil() as usize;
    let f = |t: f64| torus_line_distance(a, t);
    let mut out = Vec::new();
    let mut prev = f(lo - h);
    let mut cur = f(lo);
    for i in 0..n {
        let t = lo + i as f64 * h;
        let next = f(t + h);
        if cur < prev && cur <= next {
            let k = ((2.0 * h * fine).ceil() as usize).max(4);
            let step = 2.0 * h / k as f64;
            let (mut bt, mut bv) = (t, cur);
            for j in 0..=k {
                let s = t - h + j as f64 * step;
                let v = f(s);
                if v < bv {
                    bt = s;
                    bv = v;
                }
            }
            let (rt, rv) = golden_section_min(f, bt - step, bt + step, 1e-13 * bt.max(1.0));
            if rv < bv {
                out.push((rt, rv));
            } else {
                out.push((bt, bv));
            }
        }
        prev = cur;
        cur = next;
    }
    out
}

/// Simultaneous irrationality exponent from record minima of the line flow.
///
/// Time is measured in units of the fastest coordinate, `tau = t max|a_i|`,
/// and the scan covers `tau in [1, t_max]`; this makes the estimate depend on
/// the direction of `a` only. Records are the local minima of `d(t a; Z^n)`
/// that beat every earlier one. The exponent is `1 - slope` of the
/// least-squares fit of `ln d` against `ln t` over the latest 60% of records.
pub fn estimate_nu(
    a: &[f64],
    t_max: f64,
    grid: NuGrid,
) -> Result<IrrationalityEstimate, DiophantineError> {
    if a.is_empty() || a.iter().all(|x| *x == 0.0) || a.iter().any(|x| !x.is_finite()) {
        return Err(DiophantineError::InvalidInput(
            "a must be a finite nonzero tuple".into(),
        ));
    }
    if !(t_max >= 10.0) {
        return Err(DiophantineError::InvalidInput(format!(
            "t_max = {t_max} must be >= 10"
        )));
    }
    let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dir: Vec<f64> = a.iter().map(|x| x / amax).collect();
    let h = (1.0 / grid.coarse_per_unit).min(0.1);
    let span = (t_max - 1.0) / CHUNKS as f64;
    let parts = map_chunks(CHUNKS, grid.workers, |c| {
        let lo = 1.0 + c as f64 * span;
        local_minima(&dir, lo, lo + span, h, grid.fine_per_unit)
    });
    let mut evidence: Vec<Record> = Vec::new();
    let mut periodic = false;
    for (tau, d) in parts.into_iter().flatten() {
        if tau > t_max {
            continue;
        }
        let t = tau / amax;
        if d <= PERIODIC_TOL * t.max(1.0) {
            periodic = true;
            evidence.push(Record {
                t,
                distance: d,
                ln_t: t.ln(),
                ln_distance: d.max(1e-300).ln(),
            });
            break;
        }
        if evidence.last().is_none_or(|r| d < r.distance) {
            evidence.push(Record::new(t, d));
        }
    }
    if periodic {
        return Ok(IrrationalityEstimate {
            exponent: 1.0,
            window: (0, evidence.len()),
            evidence,
            method: EstimateMethod::RecordMinima,
            fit_residual: None,
            lattice_periodic: true,
        });
    }
    let n = evidence.len();
    let keep = ((0.6 * n as f64).ceil() as usize).min(n);
    if keep < 2 {
        return Err(DiophantineError::NoRecords(n));
    }
    let start = n - keep;
    let xs: Vec<f64> = evidence[start..].iter().map(|r| r.ln_t).collect();
    let ys: Vec<f64> = evidence[start..].iter().map(|r| r.ln_distance).collect();
    let fit = fit_line(&xs, &ys).map_err(|_| DiophantineError::NoRecords(n))?;
    Ok(IrrationalityEstimate {
        exponent: (1.0 - fit.slope).max(1.0),
        evidence,
        method: EstimateMethod::RecordMinima,
        window: (start, n),
        fit_residual: Some(fit.residual),
        lattice_periodic: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub holds: bool,
    /// First sample with `d(t a; Z^n) <= C t^{1-nu}`.
    pub witness: Option<f64>,
    /// Smallest `d / (C t^{1-nu})` over the samples.
    pub min_ratio: f64,
}

/// Checks `d(t a; Z^n) > C t^{1 - nu}` on every sample time.
pub fn check_lower_bound(a: &[f64], nu: f64, c: f64, samples: &[f64]) -> LowerBoundReport {
    let mut witness = None;
    let mut min_ratio = f64::INFINITY;
    for &t in samples {
        let bound = c * t.powf(1.0 - nu);
        let r = torus_line_distance(a, t) / bound;
        min_ratio = min_ratio.min(r);
        if witness.is_none() && r <= 1.0 {
            witness = Some(t);
        }
    }
    LowerBoundReport {
        holds: witness.is_none(),
        witness,
        min_ratio,
    }
}

/// Dense grid on `[1, t_max]` plus the record times of the line, the natural
/// sample set for [`check_lower_bound`].
pub fn lower_bound_samples(a: &[f64], t_max: f64, per_unit: f64) -> Vec<f64> {
    let n = ((t_max - 1.0) * per_unit).ceil() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|i| 1.0 + i as f64 / per_unit).collect();
    if let Ok(est) = estimate_nu(a, t_max.max(10.0), NuGrid::default()) {
        ts.extend(
            est.evidence
                .iter()
                .filter(|r| r.distance > 0.0)
                .map(|r| r.t),
        );
    }
    ts.sort_by(|x, y| x.total_cmp(y));
    ts
}
