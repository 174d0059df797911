use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

use reeblab_cli::{replay, run, Context, RunRecord, DEFAULT_BUDGET, SUBCOMMANDS};

fn reeblab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reeblab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("REEBLAB_BUDGET")
        .output()
        .unwrap()
}

fn ctx(seed: u64) -> Context {
    Context {
        seed,
        workers: 1,
        budget: DEFAULT_BUDGET,
    }
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_configs() -> Vec<(&'static str, Value)> {
    vec![
        ("dioph", json!({ "target": "sqrt:2" })),
        (
            "recur",
            json!({ "flow": { "kind": "lens", "q": [2, 1], "a": [1.0, 1.618] }, "T": 8.0, "eps": 0.05, "samples": 2000 }),
        ),
        (
            "entropy",
            json!({
                "cloud": { "kind": "lattice", "nx": 24, "ns": 2 },
                "T_schedule": [1.0, 2.0, 3.0],
                "construction": { "clusters": 6 },
                "check_pairs": 200,
            }),
        ),
        ("taub", json!({ "T": [5.0], "x_count": 20 })),
        (
            "eta",
            json!({ "stream": { "kind": "progression", "a": 0.25 }, "cutoff": 100.0, "small_time": "progression" }),
        ),
        ("geom", json!({ "a": [1.0, 1.0], "samples": 2000 })),
        (
            "preset",
            json!({ "preset": "cor14", "params": { "nu": 2.0 } }),
        ),
    ]
}

#[test]
fn configs_cover_every_subcommand() {
    let names: Vec<_> = small_configs().iter().map(|(s, _)| *s).collect();
    assert_eq!(names, SUBCOMMANDS);
}

#[test]
fn every_subcommand_replays_exactly() {
    for (sub, cfg) in small_configs() {
        let (rec, _) = run(sub, &cfg, ctx(3)).unwrap_or_else(|e| panic!("{sub}: {e}"));
        let (again, same) = replay(&rec, DEFAULT_BUDGET).unwrap();
        assert!(
            same,
            "{sub}: {} vs {}",
            rec.payload_hash, again.payload_hash
        );
    }
}

#[test]
fn seed_changes_monte_carlo_payload() {
    let cfg = json!({ "a": [1.0, 2.0, 3.0], "samples": 2000 });
    let (a, _) = run("geom", &cfg, ctx(1)).unwrap();
    let (b, _) = run("geom", &cfg, ctx(2)).unwrap();
    assert_ne!(a.payload_hash, b.payload_hash);
    assert_ne!(a.input_hash, b.input_hash);
}

#[test]
fn csv_rows_carry_config_hash() {
    let (rec, _) = run(
        "preset",
        &json!({ "preset": "thm11", "params": { "delta": 0.0, "t": 3.0 } }),
        ctx(0),
    )
    .unwrap();
    let csv = rec.csv.unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "h,eps,T,config_hash");
    let tag = &rec.input_hash[..16];
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 7);
    for r in rows {
        assert!(r.ends_with(tag), "{r}");
    }
}

#[test]
fn preset_schedules() {
    let (rec, _) =
        run("preset", &json!({ "preset": "cor14", "params": { "nu": 2.0 }, "h_max": 1e-4, "h_min": 1e-4, "count": 1 }), ctx(0))
            .unwrap();
    let t = rec.payload["schedule"][0]["t"].as_f64().unwrap();
    assert!((t - 10f64.powf(4.0 / 3.0)).abs() < 1e-9 * t);

    let (rec, _) = run(
        "preset",
        &json!({ "preset": "cor13", "params": { "htop": 0.9624, "n": 3, "c": 0.7 } }),
        ctx(0),
    )
    .unwrap();
    let lambda = rec.payload["lambda"].as_f64().unwrap();
    assert!((lambda - 1.1 * 2.0 / 3.0 * 0.9624).abs() < 1e-12);
    for row in rec.payload["schedule"].as_array().unwrap() {
        let h = row["h"].as_f64().unwrap();
        let t = row["t"].as_f64().unwrap();
        assert!((t - 0.7 * h.ln().abs() / lambda).abs() < 1e-12 * t);
    }

    let (rec, _) = run(
        "preset",
        &json!({ "preset": "thm11", "params": { "delta": 0.0, "t": 3.0 } }),
        ctx(0),
    )
    .unwrap();
    for row in rec.payload["schedule"].as_array().unwrap() {
        assert_eq!(row["eps"], 1.0);
        assert_eq!(row["t"], 3.0);
    }
}

#[test]
fn schema_errors_list_every_field() {
    let err = run(
        "recur",
        &json!({ "eps": -1.0, "samples": 5, "bogus": 1 }),
        ctx(0),
    )
    .unwrap_err()
    .to_string();
    for field in ["flow", "T", "eps", "samples", "bogus"] {
        assert!(
            err.contains(&format!("  {field}:")),
            "{field} missing from\n{err}"
        );
    }
    let err = run("preset", &json!({ "preset": "cor99" }), ctx(0))
        .unwrap_err()
        .to_string();
    assert!(err.contains("preset:"), "{err}");
    let err = run(
        "preset",
        &json!({ "preset": "cor14", "params": { "nu": 0.5 } }),
        ctx(0),
    )
    .unwrap_err()
    .to_string();
    assert!(err.contains("params:"), "{err}");
}

#[test]
fn binary_writes_outputs_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let flow = json!({ "kind": "lens", "q": [2, 1], "a": [1.0, 1.618] }).to_string();
    let out = reeblab(
        &[
            "recur",
            "--flow",
            &flow,
            "--T",
            "8",
            "--eps",
            "0.05",
            "--dt",
            "0.01",
            "--samples",
            "3000",
            "--seed",
            "5",
            "--plot-data",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["recur.json", "recur.csv", "recur.dat", "run_record.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let rec: RunRecord = serde_json::from_value(read(&dir.path().join("run_record.json"))).unwrap();
    assert_eq!(rec.seed, 5);
    assert_eq!(rec.config["dt"], 0.01);
    assert_eq!(read(&dir.path().join("recur.json")), rec.payload);
    let csv = std::fs::read_to_string(dir.path().join("recur.csv")).unwrap();
    assert!(csv.starts_with("T,eps,"));
    assert_eq!(csv.lines().count(), 2);

    let record = dir.path().join("run_record.json");
    let out = Command::new(env!("CARGO_BIN_EXE_reeblab"))
        .arg("replay")
        .arg(&record)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("identical"));
}

#[test]
fn tampered_record_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        reeblab(&["dioph", "--target", "golden"], dir.path())
            .status
            .code(),
        Some(0)
    );
    let path = dir.path().join("run_record.json");
    let mut rec = read(&path);
    rec["payload_hash"] = json!("0".repeat(64));
    std::fs::write(&path, rec.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_reeblab"))
        .arg("replay")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("MISMATCH"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        reeblab(
            &["dioph", "--target", "golden", "--set", "expect=[1.9,2.1]"],
            d
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        reeblab(&["dioph", "--target", "golden", "--set", "expect=[5,6]"], d)
            .status
            .code(),
        Some(2)
    );
    let bad = reeblab(&["recur", "--T", "-1", "--eps", "0", "--samples", "3"], d);
    assert_eq!(bad.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad.stderr);
    for field in ["flow", "T", "eps", "samples"] {
        assert!(
            err.contains(&format!("  {field}:")),
            "{field} missing from\n{err}"
        );
    }
    assert_eq!(reeblab(&["nonsense"], d).status.code(), Some(1));
    assert_eq!(reeblab(&["preset", "cor99"], d).status.code(), Some(1));
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eta.json");
    std::fs::write(
        &cfg,
        json!({ "stream": { "kind": "progression", "a": 0.1 }, "cutoff": 50.0 }).to_string(),
    )
    .unwrap();
    let out = reeblab(
        &[
            "eta",
            "--config",
            cfg.to_str().unwrap(),
            "--cutoff",
            "200",
            "--set",
            "small_time=progression",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rec = read(&dir.path().join("run_record.json"));
    assert_eq!(rec["config"]["cutoff"], 200.0);
    let v = rec["payload"]["result"]["value"].as_f64().unwrap();
    assert!((v - 0.8).abs() < 1e-9, "{v}");
}

#[test]
fn budget_env_limits_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_reeblab"))
        .args(["geom", "--a", "1,1", "--samples", "5000", "--out"])
        .arg(dir.path())
        .env("REEBLAB_BUDGET", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));

    let out = Command::new(env!("CARGO_BIN_EXE_reeblab"))
        .args(["geom", "--a", "1,1", "--out"])
        .arg(dir.path())
        .env("REEBLAB_BUDGET", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn entropy_reports_inequality_and_sandwich() {
    let (_, cfg) = small_configs()
        .into_iter()
        .find(|(s, _)| *s == "entropy")
        .unwrap();
    let (rec, _) = run("entropy", &cfg, ctx(0)).unwrap();
    let p = &rec.payload;
    assert!(p["htop"].as_f64().unwrap() >= 0.0);
    assert!(p["alpha"].as_f64().unwrap() >= 1.0);
    let s = &p["sandwich_report"];
    assert_eq!(s["frink_violations"], 0);
    assert_eq!(s["weak_triangle_violations"], 0);
    assert!(p["inequality_report"]["ln_l_dk"].is_number());
}

#[test]
fn taub_smooths_a_stream() {
    let h: f64 = 1e-4;
    let (u0, vol) = (0.02, 19.7);
    let rate = h.powf(-1.5) * u0 * vol;
    let stream = json!({
        "spec": { "kind": "density", "profile": { "knots": [-1.0, 1.0], "rates": [rate] } },
        "cutoff": 1.0,
        "h": h,
        "u0": u0,
        "vol": vol,
        "lambdas": [-0.5, 0.0, 0.5],
    });
    let (rec, out) = run(
        "taub",
        &json!({ "T": [5.0], "x_count": 20, "stream": stream }),
        ctx(0),
    )
    .unwrap();
    assert!(out.failed_check.is_none(), "{:?}", out.failed_check);
    let csv = rec.csv.unwrap();
    assert!(csv.starts_with("T,lambda,smoothed,bound,slack,config_hash\n"));
    for line in csv.lines().skip(1) {
        let cols: Vec<f64> = line
            .split(',')
            .take(5)
            .map(|c| c.parse().unwrap())
            .collect();
        assert!((cols[2] - rate).abs() < 0.01 * rate, "{line}");
    }

    let mut tight = stream.clone();
    tight["u0"] = json!(u0 / 2.0);
    let (_, out) = run(
        "taub",
        &json!({ "T": [5.0], "x_count": 20, "stream": tight }),
        ctx(0),
    )
    .unwrap();
    assert!(out.failed_check.is_some());

    let mut bad = stream;
    bad["h"] = json!(2.0);
    let err = run("taub", &json!({ "stream": bad }), ctx(0))
        .unwrap_err()
        .to_string();
    assert!(err.contains("stream:"), "{err}");
}
