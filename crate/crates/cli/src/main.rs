use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use reeblab_cli::{
    budget_from_env, read_json, replay, run, write_outputs, CliError, Context, RunRecord,
};

#[derive(Parser)]
#[command(
    name = "reeblab",
    version,
    about = "Recurrence, entropy, Diophantine and eta experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field: `--set key=<json>` (bare strings allowed).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 is the bit-exact reference.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = "reeblab-out")]
    out: PathBuf,
    /// Also write a two-column `<sub>.dat` for gnuplot.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Irrationality exponents: mu from continued fractions, nu from torus-line records.
    Dioph {
        #[command(flatten)]
        common: Common,
        /// `sqrt:<d>`, `golden`, `rational:<p>/<q>`, `liouville:<terms>`.
        #[arg(long)]
        target: Option<String>,
        /// Comma-separated direction for nu.
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long = "t_max", visible_alias = "t-max", allow_hyphen_values = true)]
        t_max: Option<f64>,
    },
    /// Monte Carlo recurrence-set volumes and scaling fits.
    Recur {
        #[command(flatten)]
        common: Common,
        /// Flow JSON file (or inline JSON object).
        #[arg(long)]
        flow: Option<String>,
        #[arg(long = "T", allow_hyphen_values = true)]
        t: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        dt: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<f64>>,
        /// Also estimate the lifted (unit-sphere-bundle) recurrence volume.
        #[arg(long)]
        lifted: bool,
        /// Also estimate the extended-radius volume.
        #[arg(long)]
        extended: bool,
    },
    /// Topological entropy, the instability metric construction and its inequalities.
    Entropy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        flow: Option<String>,
    },
    /// Mollifier convolution bounds.
    Taub {
        #[command(flatten)]
        common: Common,
        /// Stream JSON file (or inline object) with `spec`, `cutoff`, `h`, `u0`, `vol`.
        #[arg(long)]
        stream: Option<String>,
    },
    /// Eta invariants of synthetic eigenvalue streams.
    Eta {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        cutoff: Option<f64>,
    },
    /// Contact volumes of ellipsoids and lens spaces.
    Geom {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<u64>>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// (eps, T) schedules over an h-grid: cor13, cor14 or thm11.
    Preset {
        #[command(flatten)]
        common: Common,
        name: String,
        /// Preset parameters as a JSON object.
        #[arg(long)]
        params: Option<String>,
    },
    /// Re-run a run record with one worker and compare payload hashes.
    Replay {
        record: PathBuf,
        /// Where to write the replayed outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_value(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

fn json_arg(s: &str) -> Result<Value, CliError> {
    if s.trim_start().starts_with('{') {
        serde_json::from_str(s).map_err(|e| CliError::Run(format!("inline JSON: {e}")))
    } else {
        read_json(Path::new(s))
    }
}

fn base_config(common: &Common) -> Result<Map<String, Value>, CliError> {
    let mut m = match &common.config {
        Some(p) => match read_json(p)? {
            Value::Object(m) => m,
            _ => {
                return Err(CliError::Run(format!(
                    "{}: config must be a JSON object",
                    p.display()
                )))
            }
        },
        None => Map::new(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Run(format!("--set `{kv}`: expected KEY=VALUE")))?;
        m.insert(k.to_string(), parse_value(v));
    }
    Ok(m)
}

fn put<T: serde::Serialize>(m: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        m.insert(key.to_string(), serde_json::to_value(v).unwrap());
    }
}

fn finish(common: &Common, sub: &str, cfg: Map<String, Value>) -> Result<ExitCode, CliError> {
    let ctx = Context {
        seed: common.seed,
        workers: common.workers.max(1),
        budget: budget_from_env()?,
    };
    let (rec, out) = run(sub, &Value::Object(cfg), ctx)?;
    let files = write_outputs(&common.out, &rec, &out, common.plot_data)?;
    // A closed stdout (e.g. piped into `head`) is not an error of the run.
    let _ = writeln!(
        std::io::stdout(),
        "{}",
        serde_json::to_string_pretty(&rec.payload).unwrap()
    );
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    eprintln!(
        "input {} payload {} ({:.3} s)",
        rec.input_hash, rec.payload_hash, rec.wall_time_s
    );
    match out.failed_check {
        Some(report) => {
            eprintln!("property check failed: {report}");
            Ok(ExitCode::from(2))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, CliError> {
    match cmd {
        Cmd::Dioph {
            common,
            target,
            a,
            depth,
            t_max,
        } => {
            let mut m = base_config(&common)?;
            put(&mut m, "target", target);
            put(&mut m, "a", a);
            put(&mut m, "depth", depth);
            put(&mut m, "t_max", t_max);
            finish(&common, "dioph", m)
        }
        Cmd::Recur {
            common,
            flow,
            t,
            eps,
            samples,
            dt,
            horizons,
            lifted,
            extended,
        } => {
            let mut m = base_config(&common)?;
            if let Some(f) = flow {
                m.insert("flow".into(), json_arg(&f)?);
            }
            put(&mut m, "T", t);
            put(&mut m, "eps", eps);
            put(&mut m, "samples", samples);
            put(&mut m, "dt", dt);
            put(&mut m, "horizons", horizons);
            put(&mut m, "lifted", lifted.then_some(true));
            put(&mut m, "extended", extended.then_some(true));
            finish(&common, "recur", m)
        }
        Cmd::Entropy { common, flow } => {
            let mut m = base_config(&common)?;
            if let Some(f) = flow {
                m.insert("flow".into(), json_arg(&f)?);
            }
            finish(&common, "entropy", m)
        }
        Cmd::Taub { common, stream } => {
            let mut m = base_config(&common)?;
            if let Some(st) = stream {
                m.insert("stream".into(), json_arg(&st)?);
            }
            finish(&common, "taub", m)
        }
        Cmd::Eta { common, cutoff } => {
            let mut m = base_config(&common)?;
            put(&mut m, "cutoff", cutoff);
            finish(&common, "eta", m)
        }
        Cmd::Geom {
            common,
            a,
            q,
            samples,
        } => {
            let mut m = base_config(&common)?;
            put(&mut m, "a", a);
            put(&mut m, "q", q);
            put(&mut m, "samples", samples);
            finish(&common, "geom", m)
        }
        Cmd::Preset {
            common,
            name,
            params,
        } => {
            let mut m = base_config(&common)?;
            m.insert("preset".into(), Value::String(name));
            if let Some(p) = params {
                m.insert("params".into(), json_arg(&p)?);
            }
            finish(&common, "preset", m)
        }
        Cmd::Replay { record, out } => {
            let rec: RunRecord =
                serde_json::from_value(read_json(&record)?).map_err(|source| CliError::Json {
                    path: record.clone(),
                    source,
                })?;
            let (again, same) = replay(&rec, budget_from_env()?)?;
            if let Some(dir) = out {
                let out = reeblab_cli::Output {
                    config: again.config.clone(),
                    payload: again.payload.clone(),
                    csv: None,
                    plot: None,
                    failed_check: None,
                };
                write_outputs(&dir, &again, &out, false)?;
            }
            println!(
                "recorded {}\nreplayed {}",
                rec.payload_hash, again.payload_hash
            );
            if same {
                println!("identical");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("MISMATCH");
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1 like any other error; 2 is reserved for failed
    // property checks.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
