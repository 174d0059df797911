//! Experiment runner: parses configs, executes a subcommand, and writes the
//! outputs together with a replayable run record.

pub mod commands;
pub mod record;
pub mod schema;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;
use thiserror::Error;

pub use commands::{execute, Context, Output, SUBCOMMANDS};
pub use record::RunRecord;
pub use schema::SchemaError;

pub const BUDGET_ENV: &str = "REEBLAB_BUDGET";
pub const DEFAULT_BUDGET: u128 = reeblab::recurrence::DEFAULT_BUDGET;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Run(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Op budget from `REEBLAB_BUDGET`, or the default.
pub fn budget_from_env() -> Result<u128, CliError> {
    match std::env::var(BUDGET_ENV) {
        Ok(s) => s.trim().parse().map_err(|_| {
            CliError::Run(format!("{BUDGET_ENV} = `{s}` is not a nonnegative integer"))
        }),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })
}

/// Runs a subcommand and assembles its record.
pub fn run(sub: &str, raw: &Value, ctx: Context) -> Result<(RunRecord, Output), CliError> {
    let start = Instant::now();
    let out = execute(sub, raw, ctx)?;
    let input_hash = record::input_hash(sub, &out.config, ctx.seed);
    let csv = out.csv.as_ref().map(|(header, rows)| {
        let tag = record::short(&input_hash);
        let mut s = format!("{header},config_hash\n");
        for r in rows {
            s.push_str(r);
            s.push(',');
            s.push_str(tag);
            s.push('\n');
        }
        s
    });
    let payload_hash = record::payload_hash(&out.payload, csv.as_deref());
    let rec = RunRecord {
        subcommand: sub.to_string(),
        config: out.config.clone(),
        seed: ctx.seed,
        workers: ctx.workers,
        input_hash,
        payload: out.payload.clone(),
        csv,
        payload_hash,
        wall_time_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok((rec, out))
}

/// Reruns a record's config and seed with one worker; returns the new record
/// and whether its payload hash matches.
pub fn replay(rec: &RunRecord, budget: u128) -> Result<(RunRecord, bool), CliError> {
    let ctx = Context {
        seed: rec.seed,
        workers: 1,
        budget,
    };
    let (again, _) = run(&rec.subcommand, &rec.config, ctx)?;
    let same = again.payload_hash == rec.payload_hash && again.input_hash == rec.input_hash;
    Ok((again, same))
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })
}

/// Writes `<sub>.json`, `<sub>.csv`, optional `<sub>.dat`, and
/// `run_record.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    rec: &RunRecord,
    out: &Output,
    plot_data: bool,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.into(),
        source,
    })?;
    let sub = &rec.subcommand;
    let mut written = Vec::new();
    let p = dir.join(format!("{sub}.json"));
    write(
        p.clone(),
        &serde_json::to_string_pretty(&rec.payload).unwrap(),
    )?;
    written.push(p);
    if let Some(csv) = &rec.csv {
        let p = dir.join(format!("{sub}.csv"));
        write(p.clone(), csv)?;
        written.push(p);
    }
    if plot_data {
        if let Some(pts) = &out.plot {
            let text: String = pts.iter().map(|(x, y)| format!("{x} {y}\n")).collect();
            let p = dir.join(format!("{sub}.dat"));
            write(p.clone(), &text)?;
            written.push(p);
        }
    }
    let p = dir.join("run_record.json");
    write(p.clone(), &serde_json::to_string_pretty(rec).unwrap())?;
    written.push(p);
    Ok(written)
}
