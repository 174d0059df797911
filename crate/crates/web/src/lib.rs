//! Three browser-callable operations over the core library. Each returns a
//! JSON string; failures come back as `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use reeblab::contact_geometry::{contact_volume, contact_volume_closed_form};
use reeblab::diophantine::{
    cf_expand, estimate_mu, HighPrecisionReal, QuadraticSurd, RationalReal,
};
use reeblab::eta::{eta_full_from_stream, eta_zeta_progression, ProgressionSmallTime};
use reeblab::flows::LensSpaceParams;
use reeblab::spectral_model::{synthesize_stream, StreamSpec};

/// Largest sample count the page will run on the main thread.
pub const MAX_SAMPLES: usize = 2_000_000;

fn reply(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

pub fn mu_value(p: i64, q: i64, depth: usize) -> Result<Value, String> {
    let x: Box<dyn HighPrecisionReal> = if q == 0 {
        if p < 2 {
            return Err("sqrt needs an integer d >= 2".into());
        }
        Box::new(QuadraticSurd::sqrt(p as u64))
    } else {
        Box::new(RationalReal::new(p, q))
    };
    let cf = cf_expand(x.as_ref(), depth).map_err(|e| e.to_string())?;
    let est = estimate_mu(&cf).map_err(|e| e.to_string())?;
    let quotients: Vec<String> = cf.partial_quotients.iter().map(|a| a.to_string()).collect();
    Ok(json!({
        "exponent": est.exponent,
        "quotients": quotients,
        "rational": est.lattice_periodic,
        "evidence": est.evidence.iter().map(|r| [r.ln_t, r.ln_distance]).collect::<Vec<_>>(),
    }))
}

pub fn volume_value(a: &[f64], q: &[u64], samples: usize, seed: u64) -> Result<Value, String> {
    if samples > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples"));
    }
    let params = if q.is_empty() {
        LensSpaceParams::ellipsoid(a.to_vec())
    } else {
        LensSpaceParams::new(q.to_vec(), a.to_vec())
    }
    .map_err(|e| e.to_string())?;
    let mc = contact_volume(&params, samples, seed).map_err(|e| e.to_string())?;
    let closed = contact_volume_closed_form(&params);
    Ok(
        json!({ "monte_carlo": mc.value, "ci": mc.ci, "closed_form": closed.value, "q0": mc.q0, "warning": mc.warning }),
    )
}

pub fn eta_value(a: f64, cutoff: f64) -> Result<Value, String> {
    let oracle = eta_zeta_progression(a, cutoff).map_err(|e| e.to_string())?;
    let stream = synthesize_stream(&StreamSpec::Progression { a, spacing: 1.0 }, cutoff)
        .map_err(|e| e.to_string())?;
    let heat = eta_full_from_stream(&stream, Some(&ProgressionSmallTime { a, spacing: 1.0 }));
    let erfc_only = eta_full_from_stream(&stream, None);
    Ok(json!({
        "zeta": oracle.result.value,
        "heat": heat.value,
        "large_time_only": erfc_only.value,
        "eigenvalues": stream.total(),
    }))
}

/// Irrationality exponent of `sqrt(p)` (`q = 0`) or of `p / q`.
#[wasm_bindgen]
pub fn mu(p: i64, q: i64, depth: usize) -> String {
    reply(mu_value(p, q, depth))
}

/// Contact volume of the ellipsoid with weights `a`, or of its lens quotient
/// when `q` is nonempty.
#[wasm_bindgen]
pub fn volume(a: Vec<f64>, q: Vec<u64>, samples: usize, seed: u64) -> String {
    reply(volume_value(&a, &q, samples, seed))
}

/// Eta invariant of the progression `{n + a}` three ways.
#[wasm_bindgen]
pub fn eta(a: f64, cutoff: f64) -> String {
    reply(eta_value(a, cutoff))
}
