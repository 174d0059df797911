//! Run records: config snapshot, seed, content hashes and payload.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub subcommand: String,
    /// Fully resolved config, defaults included.
    pub config: Value,
    pub seed: u64,
    pub workers: usize,
    /// SHA-256 of the canonical `{subcommand, config, seed}` JSON.
    pub input_hash: String,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// SHA-256 of the payload JSON and CSV text.
    pub payload_hash: String,
    pub wall_time_s: f64,
    pub version: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Map keys serialize sorted, so the text is canonical.
pub fn input_hash(subcommand: &str, config: &Value, seed: u64) -> String {
    let v = json!({ "subcommand": subcommand, "config": config, "seed": seed });
    sha256_hex(v.to_string().as_bytes())
}

pub fn payload_hash(payload: &Value, csv: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(payload.to_string().as_bytes());
    h.update([0u8]);
    if let Some(c) = csv {
        h.update(c.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Short form written on every CSV row.
pub fn short(hash: &str) -> &str {
    &hash[..16]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_key_order_independent() {
        let a: Value = serde_json::from_str(r#"{"x": 1, "y": [1, 2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"y": [1, 2], "x": 1}"#).unwrap();
        assert_eq!(input_hash("recur", &a, 3), input_hash("recur", &b, 3));
        assert_ne!(input_hash("recur", &a, 3), input_hash("recur", &a, 4));
        assert_eq!(short(&input_hash("eta", &a, 0)).len(), 16);
    }
}
