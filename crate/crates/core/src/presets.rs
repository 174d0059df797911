//! `(eps, T)` schedules as functions of the semiclassical parameter `h`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresetError {
    #[error("unknown preset `{0}` (expected cor13, cor14 or thm11)")]
    Unknown(String),
    #[error("invalid preset parameter: {0}")]
    Invalid(String),
}

fn default_eps_exponent() -> f64 {
    0.49
}

fn default_lambda_factor() -> f64 {
    1.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// Anosov case: `T = c |ln h| / lambda` with `lambda = factor (2/n) h_top`
    /// (`factor > 1`) and `c < n/4`; `eps = h^{eps_exponent}`.
    Cor13 {
        htop: f64,
        n: u32,
        c: f64,
        #[serde(default = "default_lambda_factor")]
        lambda_factor: f64,
        #[serde(default = "default_eps_exponent")]
        eps_exponent: f64,
    },
    /// Lens case: `T = h^{-1/(2 nu - 1)}`, `eps = h^{eps_exponent}`.
    Cor14 {
        nu: f64,
        #[serde(default = "default_eps_exponent")]
        eps_exponent: f64,
    },
    /// General statement: `eps = h^delta`, `delta in [0, 1/2)`, fixed `T`.
    Thm11 { delta: f64, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub h: f64,
    pub eps: f64,
    pub t: f64,
}

/// `eps = h^delta`.
pub fn eps_from_h(h: f64, delta: f64) -> f64 {
    h.powf(delta)
}

impl Preset {
    /// Builds a preset from its name and a JSON object of parameters.
    pub fn from_name(name: &str, params: &serde_json::Value) -> Result<Self, PresetError> {
        if !matches!(name, "cor13" | "cor14" | "thm11") {
            return Err(PresetError::Unknown(name.to_string()));
        }
        let mut obj = params.as_object().cloned().unwrap_or_default();
        obj.insert("name".into(), serde_json::Value::String(name.into()));
        let p: Preset = serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| PresetError::Invalid(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PresetError> {
        match *self {
            Preset::Cor13 {
                htop,
                n,
                c,
                lambda_factor,
                eps_exponent,
            } => {
                if !(htop > 0.0) {
                    return Err(PresetError::Invalid(format!(
                        "htop = {htop} must be positive"
                    )));
                }
                if n < 3 || n % 2 == 0 {
                    return Err(PresetError::Invalid(format!(
                        "n = {n} must be odd and >= 3"
                    )));
                }
                if !(c > 0.0 && c < n as f64 / 4.0) {
                    return Err(PresetError::Invalid(format!(
                        "c = {c} must lie in (0, n/4 = {})",
                        n as f64 / 4.0
                    )));
                }
                if !(lambda_factor > 1.0) {
                    return Err(PresetError::Invalid("lambda_factor must exceed 1".into()));
                }
                check_eps_exponent(eps_exponent)
            }
            Preset::Cor14 { nu, eps_exponent } => {
                if !(nu >= 1.0) {
                    return Err(PresetError::Invalid(format!("nu = {nu} must be >= 1")));
                }
                check_eps_exponent(eps_exponent)
            }
            Preset::Thm11 { delta, t } => {
                if !(t > 0.0) {
                    return Err(PresetError::Invalid(format!("T = {t} must be positive")));
                }
                check_eps_exponent(delta)
            }
        }
    }

    /// Rate `lambda` of the Anosov preset, `None` otherwise.
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Preset::Cor13 {
                htop,
                n,
                lambda_factor,
                ..
            } => Some(lambda_factor * 2.0 / n as f64 * htop),
            _ => None,
        }
    }

    pub fn time(&self, h: f64) -> f64 {
        match *self {
            Preset::Cor13 { c, .. } => c * h.ln().abs() / self.lambda().unwrap(),
            Preset::Cor14 { nu, .. } => h.powf(-1.0 / (2.0 * nu - 1.0)),
            Preset::Thm11 { t, .. } => t,
        }
    }

    pub fn eps(&self, h: f64) -> f64 {
        match *self {
            Preset::Cor13 { eps_exponent, .. } | Preset::Cor14 { eps_exponent, .. } => {
                eps_from_h(h, eps_exponent)
            }
            Preset::Thm11 { delta, .. } => eps_from_h(h, delta),
        }
    }

    pub fn schedule(&self, hs: &[f64]) -> Vec<ScheduleRow> {
        hs.iter()
            .map(|&h| ScheduleRow {
                h,
                eps: self.eps(h),
                t: self.time(h),
            })
            .collect()
    }
}

fn check_eps_exponent(d: f64) -> Result<(), PresetError> {
    if !(0.0..0.5).contains(&d) {
        return Err(PresetError::Invalid(format!(
            "eps exponent {d} must lie in [0, 1/2)"
        )));
    }
    Ok(())
}

/// Log-spaced grid of `count` values from `h_max` down to `h_min`.
pub fn h_grid(h_max: f64, h_min: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![h_max];
    }
    let (a, b) = (h_max.log10(), h_min.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}
