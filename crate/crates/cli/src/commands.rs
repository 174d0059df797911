//! Config parsing and execution for each subcommand.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use reeblab::contact_geometry::{
    contact_volume_closed_form, contact_volume_with_workers, ellipsoid_quadrature_oracle,
    leading_term_metric_contact,
};
use reeblab::diophantine::{
    cf_expand, estimate_mu, estimate_nu, HighPrecisionReal, IrrationalityEstimate,
    LiouvilleTruncated, NuGrid, QuadraticSurd, RationalReal,
};
use reeblab::entropy::{
    build_metric_construction, estimate_htop, lattice_cloud, random_cloud, time_grid,
    verify_entropy_inequality, ConstructionConfig, HtopConfig,
};
use reeblab::eta::{
    eta_full_from_stream, eta_zeta_progression, FiniteStreamSmallTime, ProgressionSmallTime,
    SmallTimeProvider,
};
use reeblab::flows::{FlowSpec, LensSpaceParams};
use reeblab::presets::{h_grid, Preset, PresetError};
use reeblab::recurrence::{
    estimate_lifted_volume, estimate_series, scaling_fit, RecurrenceConfig, ScalingMode,
    SeriesPoint,
};
use reeblab::spectral_model::{synthesize_stream, StreamSpec};
use reeblab::tauberian::{
    make_kernel, mollifier_bound_check, smoothed_counting, HScaling, KernelSpec, Mollifier,
};

use crate::schema::{Fields, SchemaError};
use crate::CliError;

pub const SUBCOMMANDS: [&str; 7] = ["dioph", "recur", "entropy", "taub", "eta", "geom", "preset"];

/// Seed, worker count and op budget shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub seed: u64,
    pub workers: usize,
    pub budget: u128,
}

/// Result of a subcommand before it is written to disk.
#[derive(Debug, Clone)]
pub struct Output {
    pub config: Value,
    pub payload: Value,
    /// Header and rows; the config hash column is appended by the caller.
    pub csv: Option<(String, Vec<String>)>,
    /// Two-column `x y` dump.
    pub plot: Option<Vec<(f64, f64)>>,
    /// `Some(report)` when a property check failed.
    pub failed_check: Option<String>,
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

fn fnum(x: f64) -> String {
    format!("{x}")
}

pub fn execute(sub: &str, raw: &Value, ctx: Context) -> Result<Output, CliError> {
    match sub {
        "dioph" => dioph(DiophConfig::parse(raw)?, ctx),
        "recur" => recur(RecurConfig::parse(raw)?, ctx),
        "entropy" => entropy(EntropyConfig::parse(raw)?, ctx),
        "taub" => taub(TaubConfig::parse(raw)?),
        "eta" => eta(EtaConfig::parse(raw)?),
        "geom" => geom(GeomConfig::parse(raw)?, ctx),
        "preset" => preset(PresetConfig::parse(raw)?),
        other => Err(CliError::Run(format!("unknown subcommand `{other}`"))),
    }
}

// ---------------------------------------------------------------- dioph

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiophConfig {
    /// `sqrt:<d>`, `golden`, `rational:<p>/<q>` or `liouville:<terms>`.
    pub target: Option<String>,
    pub depth: usize,
    /// Direction for the simultaneous exponent.
    pub a: Option<Vec<f64>>,
    pub t_max: f64,
    pub expect: Option<[f64; 2]>,
}

fn parse_target(s: &str) -> Result<Box<dyn HighPrecisionReal>, String> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "golden" => Ok(Box::new(QuadraticSurd::golden_ratio())),
        "sqrt" => arg
            .parse::<u64>()
            .map(|d| Box::new(QuadraticSurd::sqrt(d)) as _)
            .map_err(|e| e.to_string()),
        "rational" => {
            let (p, q) = arg.split_once('/').ok_or("expected rational:<p>/<q>")?;
            let p = p.trim().parse::<i64>().map_err(|e| e.to_string())?;
            let q = q.trim().parse::<i64>().map_err(|e| e.to_string())?;
            if q == 0 {
                return Err("zero denominator".into());
            }
            Ok(Box::new(RationalReal::new(p, q)))
        }
        "liouville" => match arg.parse::<u32>() {
            Ok(k) if (1..=6).contains(&k) => Ok(Box::new(LiouvilleTruncated { terms: k })),
            _ => Err("liouville terms must be in 1..=6".into()),
        },
        _ => Err(format!("unknown target `{s}`")),
    }
}

impl DiophConfig {
    pub fn parse(v: &Value) -> Result<Self, SchemaError> {
        let mut f = Fields::new(v)?;
        let target: Option<Option<String>> = f.maybe("target");
        let depth = f.opt("depth", 30usize);
        let a: Option<Option<Vec<f64>>> = f.maybe("a");
        let t_max = f.opt("t_max", 1e4);
        let expect: Option<Option<[f64; 2]>> = f.maybe("expect");
        if let (Some(t), Some(a)) = (&target, &a) {
            f.check(
                t.is_some() != a.is_some(),
                "target",
                "give exactly one of `target` (mu) or `a` (nu)",
            );
            if let Some(t) = t {
                if let Err(e) = parse_target(t) {
                    f.check(false, "target", e);
                }
            }
        }
        if let Some(d) = depth {
            f.check(d >= 3, "depth", "must be at least 3");
        }
        if let Some(t) = t_max {
            f.check(t >= 10.0, "t_max", "must be at least 10");
        }
        f.finish()?;
        Ok(DiophConfig {
            target: target.unwrap(),
            depth: depth.unwrap(),
            a: a.unwrap(),
            t_max: t_max.unwrap(),
            expect: expect.unwrap(),
        })
    }
}

fn dioph(cfg: DiophConfig, ctx: Context) -> Result<Output, CliError> {
    let (kind, est): (&str, IrrationalityEstimate) = match (&cfg.target, &cfg.a) {
        (Some(t), _) => {
            let x = parse_target(t).map_err(CliError::Run)?;
            let cf = cf_expand(x.as_ref(), cfg.depth).map_err(run_err)?;
            ("mu", estimate_mu(&cf).map_err(run_err)?)
        }
        (None, Some(a)) => {
            let grid = NuGrid {
                workers: ctx.workers,
                ..NuGrid::default()
            };
            ("nu", estimate_nu(a, cfg.t_max, grid).map_err(run_err)?)
        }
        (None, None) => unreachable!("checked by the schema"),
    };
    let rows = est
        .evidence
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{i},{},{}", fnum(r.ln_t), fnum(r.ln_distance)))
        .collect();
    let plot = est
        .evidence
        .iter()
        .map(|r| (r.ln_t, r.ln_distance))
        .collect();
    let failed_check = cfg.expect.and_then(|[lo, hi]| {
        (!(est.exponent >= lo && est.exponent <= hi))
            .then(|| format!("exponent {} outside [{lo}, {hi}]", est.exponent))
    });
    Ok(Output {
        config: serde_json::to_value(&cfg).unwrap(),
        payload: json!({
            "kind": kind,
            "exponent": est.exponent,
            "method": est.method,
            "window": est.window,
            "fit_residual": est.fit_residual,
            "lattice_periodic": est.lattice_periodic,
            "records": est.evidence.len(),
        }),
        csv: Some(("index,ln_t,ln_distance".into(), rows)),
        plot: Some(plot),
        failed_check,
    })
}

// ---------------------------------------------------------------- recur

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurConfig {
    pub flow: FlowSpec,
    #[serde(rename = "T")]
    pub t: f64,
    pub eps: f64,
    pub samples: usize,
    pub dt: Option<f64>,
    /// Defaults to `[T]`.
    pub horizons: Vec<f64>,
    pub extended: bool,
    pub lifted: bool,
    pub fit: Option<ScalingMode>,
    /// Fails the run (exit 2) when the fitted slope leaves this range.
    pub expect_slope: Option<[f64; 2]>,
}

impl RecurConfig {
    pub fn parse(v: &Value) -> Result<Self, SchemaError> {
        let mut f = Fields::new(v)?;
        let flow: Option<FlowSpec> = f.req("flow");
        let t: Option<f64> = f.req("T");
        let eps: Option<f64> = f.req("eps");
        let samples = f.opt("samples", 100_000usize);
        let dt: Option<Option<f64>> = f.maybe("dt");
        let horizons: Option<Option<Vec<f64>>> = f.maybe("horizons");
        let extended = f.opt("extended", false);
        let lifted = f.opt("lifted", false);
        let fit: Option<Option<ScalingMode>> = f.maybe("fit");
        let expect_slope: Option<Option<[f64; 2]>> = f.maybe("expect_slope");
        if let Some(t) = t {
            f.check(t > 0.0 && t.is_finite(), "T", "must be positive");
        }
        if let Some(e) = eps {
            f.check(e > 0.0 && e.is_finite(), "eps", "must be positive");
        }
        if let Some(n) = samples {
            f.check(n >= 100, "samples", "must be at least 100");
        }
        if let Some(Some(hs)) = &horizons {
            f.check(
                !hs.is_empty() && hs.iter().all(|h| *h > 0.0),
                "horizons",
                "must be a nonempty list of positive times",
            );
        }
        if let Some(fl) = &flow {
            if let Err(e) = fl.build() {
                f.check(false, "flow", e.to_string());
            }
        }
        f.finish()?;
        let t = t.unwrap();
        Ok(RecurConfig {
            flow: flow.unwrap(),
            t,
            eps: eps.unwrap(),
            samples: samples.unwrap(),
            dt: dt.unwrap(),
            horizons: horizons.unwrap().unwrap_or_else(|| vec![t]),
            extended: extended.unwrap(),
            lifted: lifted.unwrap(),
            fit: fit.unwrap(),
            expect_slope: expect_slope.unwrap(),
        })
    }
}

fn recur(cfg: RecurConfig, ctx: Context) -> Result<Output, CliError> {
    let flow = cfg.flow.build().map_err(run_err)?;
    let base = RecurrenceConfig {
        t: cfg.t,
        eps: cfg.eps,
        dt: cfg.dt,
        n_samples: cfg.samples,
        seed: ctx.seed,
        t0: None,
        workers: ctx.workers,
        budget: ctx.budget,
    };
    let estimates = if cfg.lifted {
        cfg.horizons
            .iter()
            .map(|&t| {
                estimate_lifted_volume(flow.as_ref(), &RecurrenceConfig { t, ..base.clone() })
            })
            .collect::<Result<Vec<_>, _>>()
    } else {
        estimate_series(flow.as_ref(), &base, &cfg.horizons, cfg.extended)
    }
    .map_err(run_err)?;
    let rows = estimates
        .iter()
        .map(|e| {
            format!(
                "{},{},{},{},{},{},{},{}",
                fnum(e.t),
                fnum(cfg.eps),
                fnum(e.fraction),
                fnum(e.ci_low),
                fnum(e.ci_high),
                e.hits,
                e.n_samples,
                fnum(e.volume())
            )
        })
        .collect();
    let series: Vec<SeriesPoint> = estimates
        .iter()
        .map(|e| {
            let (lo, hi) = e.volume_ci();
            SeriesPoint {
                t: e.t,
                value: e.volume(),
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect();
    let (fit, fit_error) = match cfg.fit {
        Some(mode) => match scaling_fit(&series, mode) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, None),
    };
    let failed_check = cfg.expect_slope.and_then(|[lo, hi]| match &fit {
        Some(f) if f.slope >= lo && f.slope <= hi => None,
        Some(f) => Some(format!("fitted slope {} outside [{lo}, {hi}]", f.slope)),
        None => Some(format!(
            "no fit to check: {}",
            fit_error.clone().unwrap_or_else(|| "set `fit`".into())
        )),
    });
    Ok(Output {
        config: serde_json::to_value(&cfg).unwrap(),
        payload: json!({ "estimates": estimates, "fit": fit, "fit_error": fit_error }),
        csv: Some((
            "T,eps,fraction,ci_low,ci_high,hits,n_samples,volume".into(),
            rows,
        )),
        plot: Some(estimates.iter().map(|e| (e.t, e.volume())).collect()),
        failed_check,
    })
}

// ---------------------------------------------------------------- entropy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CloudSpec {
    /// Jittered `nx * nx * ns` lattice on the suspension chart.
    Lattice {
        nx: usize,
        ns: usize,
    },
    Random {
        n: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub flow: FlowSpec,
    pub cloud: CloudSpec,
    pub eps_schedule: Vec<f64>,
    #[serde(rename = "T_schedule")]
    pub t_schedule: Vec<f64>,
    pub dt: f64,
    pub greedy_restarts: usize,
    pub max_points: usize,
    /// Its seed is replaced by the run seed.
    pub construction: ConstructionConfig,
    pub k: usize,
    pub slack: f64,
    pub check_pairs: usize,
}

impl EntropyConfig {
    pub fn parse(v: &Value) -> Result<Self, SchemaError> {
        let mut f = Fields::new(v)?;
        let flow = f.opt(
            "flow",
            FlowSpec::Suspension {
                matrix: [[2, 1], [1, 1]],
            },
        );
        let cloud = f.opt("cloud", CloudSpec::Lattice { nx: 400, ns: 10 });
        let eps_schedule = f.opt("eps_schedule", vec![0.05]);
        let t_schedule = f.opt(
            "T_schedule",
            (2..=16).map(|i| i as f64 * 0.5).collect::<Vec<f64>>(),
        );
        let dt = f.opt("dt", 0.25);
        let greedy_restarts = f.opt("greedy_restarts", 1usize);
        let max_points = f.opt("max_points", 200_000usize);
        let construction = f.opt("construction", ConstructionConfig::default());
        let k = f.opt("k", 4usize);
        let slack = f.opt("slack", 1.25);
        let check_pairs = f.opt("check_pairs", 10_000usize);
        if let Some(e) = &eps_schedule {
            f.check(
                !e.is_empty() && e.iter().all(|x| *x > 0.0),
                "eps_schedule",
                "must be nonempty and positive",
            );
        }
        if let Some(t) = &t_schedule {
            f.check(
                t.len() >= 2 && t.windows(2).all(|w| w[0] < w[1]) && t[0] >= 0.0,
                "T_schedule",
                "needs at least two increasing nonnegative times",
            );
        }
        if let Some(d) = dt {
            f.check(d > 0.0, "dt", "must be positive");
        }
        if let (Some(fl), Some(c)) = (&flow, &cloud) {
            match fl.build() {
                Err(e) => f.check(false, "flow", e.to_string()),
                Ok(_) => f.check(
                    !matches!(c, CloudSpec::Lattice { .. })
                        || matches!(fl, FlowSpec::Suspension { .. }),
                    "cloud",
                    "lattice clouds need a suspension flow",
                ),
            }
        }
        if let Some(k) = k {
            f.check(k >= 1, "k", "must be at least 1");
        }
        f.finish()?;
        let mut construction = construction.unwrap();
        construction.k = construction.k.max(k.unwrap());
        Ok(EntropyConfig {
            flow: flow.unwrap(),
            cloud: cloud.unwrap(),
            eps_schedule: eps_schedule.unwrap(),
            t_schedule: t_schedule.unwrap(),
            dt: dt.unwrap(),
            greedy_restarts: greedy_restarts.unwrap(),
            max_points: max_points.unwrap(),
            construction,
            k: k.unwrap(),
            slack: slack.unwrap(),
            check_pairs: check_pairs.unwrap(),
        })
    }
}

fn entropy(mut cfg: EntropyConfig, ctx: Context) -> Result<Output, CliError> {
    cfg.construction.seed = ctx.seed;
    let flow = cfg.flow.build().map_err(run_err)?;
    let cloud = match cfg.cloud {
        CloudSpec::Lattice { nx, ns } => lattice_cloud(nx, ns, ctx.seed),
        CloudSpec::Random { n } => random_cloud(flow.as_ref(), n, ctx.seed),
    };
    let steps = time_grid(*cfg.t_schedule.last().unwrap(), cfg.dt).len() as u128;
    let ops = cloud.len() as u128
        * steps
        * (cfg.greedy_restarts.max(1) * cfg.t_schedule.len() * cfg.eps_schedule.len()) as u128;
    if ops > ctx.budget {
        return Err(CliError::Run(format!(
            "{ops} trajectory evaluations exceed the budget of {}",
            ctx.budget
        )));
    }
    let h = estimate_htop(
        flow.as_ref(),
        &cloud,
        &HtopConfig {
            eps_schedule: cfg.eps_schedule.clone(),
            t_schedule: cfg.t_schedule.clone(),
            dt: cfg.dt,
            greedy_restarts: cfg.greedy_restarts,
            seed: ctx.seed,
            max_points: cfg.max_points,
            workers: ctx.workers,
        },
    );
    let mc = build_metric_construction(flow.as_ref(), &cfg.construction).map_err(run_err)?;
    let sandwich = mc.check(cfg.check_pairs, ctx.seed);
    let htop = if h.htop.is_finite() {
        h.htop.max(0.0)
    } else {
        0.0
    };
    let report = verify_entropy_inequality(&mc, flow.dim(), cfg.k, htop, cfg.slack);
    let l_dk: Vec<Value> = (1..=cfg.construction.k)
        .map(|k| json!({ "k": k, "ln_L": mc.ln_lipschitz_dk(k) }))
        .collect();
    let mut rows = Vec::new();
    for p in &h.per_eps {
        for (t, c) in p.t.iter().zip(&p.counts) {
            rows.push(format!("{},{},{}", fnum(p.eps), fnum(*t), c));
        }
    }
    let plot = h.per_eps.last().map(|p| {
        p.t.iter()
            .zip(&p.counts)
            .map(|(t, c)| (*t, (*c as f64).ln()))
            .collect()
    });
    let violations = sandwich.frink_violations
        + sandwich.weak_triangle_violations
        + sandwich.n_lower_violations
        + sandwich.n_upper_violations
        + sandwich.growth_violations;
    let mut failures = Vec::new();
    if !h.htop.is_finite() {
        failures.push("no entropy slope could be fitted".to_string());
    }
    if !report.lower_holds {
        failures.push(format!(
            "(n/2) ln L = {} exceeds {} * htop",
            report.lower, cfg.slack
        ));
    }
    if !report.upper_holds {
        failures.push(format!(
            "htop = {} exceeds {} * n ln L = {}",
            report.htop,
            cfg.slack,
            cfg.slack * report.upper
        ));
    }
    if violations > 0 {
        failures.push(format!("{violations} construction invariant violations"));
    }
    Ok(Output {
        config: serde_json::to_value(&cfg).unwrap(),
        payload: json!({
            "per_eps_slopes": h.per_eps,
            "htop": h.htop,
            "warnings": h.warnings,
            "alpha": mc.alpha,
            "alpha_eps": mc.alpha_eps,
            "window_exhausted_pairs": mc.exhausted,
            "L_dk": l_dk,
            "inequality_report": report,
            "sandwich_report": sandwich,
        }),
        csv: Some(("eps,T,count".into(), rows)),
        plot,
        failed_check: (!failures.is_empty()).then(|| failures.join("; ")),
    })
}

// ---------------------------------------------------------------- taub

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaubConfig {
    pub kernel: KernelSpec,
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    /// Points of the `x` grid on `[-2, 2]` (cell midpoints, so 0 is avoided
    /// for even counts).
    pub x_count: usize,
    pub tol: f64,
    /// Smoothed counting of a synthetic stream against its Weyl density.
    pub stream: Option<TaubStream>,
}

/// A `D / sqrt(h)` stream smoothed at each `lambda` and compared with the
/// density `h^{-m-1/2} u0 vol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaubStream {
    pub spec: StreamSpec,
    pub cutoff: f64,
    pub h: f64,
    #[serde(default = "one_u32")]
    pub m: u32,
    pub u0: f64,
    pub vol: f64,
    #[serde(default = "zero_list")]
    pub lambdas: Vec<f64>,
    /// Relative excess of the smoothed value over the density that fails the run.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn one_u32() -> u32 {
    1
}

fn zero_list() -> Vec<f64> {
    vec![0.0]
}

fn default_rel_tol() -> f64 {
    0.1
}

impl TaubConfig {
    pub fn parse(v: &Value) -> Result<Self, SchemaError> {
        let mut f = Fields::new(v)?;
        let kernel = f.opt("kernel", KernelSpec::Bspline { order: 4 });
        let t = f.opt("T", vec![5.0, 10.0, 50.0]);
        let x_count = f.opt("x_count", 1000usize);
        let tol = f.opt("tol", 1e-8);
        let stream: Option<Option<TaubStream>> = f.maybe("stream");
        if let Some(Some(st)) = &stream {
            if let Err(e) = HScaling::new(st.h, st.m) {
                f.check(false, "stream", e.to_string());
            }
            f.check(
                st.cutoff > 0.0 && st.u0 > 0.0 && st.vol > 0.0,
                "stream",
                "cutoff, u0 and vol must be positive",
            );
            f.check(
                !st.lambdas.is_empty() && st.rel_tol >= 0.0,
                "stream",
                "needs lambdas and rel_tol >= 0",
            );
        }
        if let Some(k) = kernel {
            if let Err(e) = make_kernel(k) {
                f.check(false, "kernel", e.to_string());
            }
        }
        if let Some(t) = &t {
            f.check(
                !t.is_empty() && t.iter().all(|x| *x > 0.0),
                "T",
                "must be a nonempty list of positive values",
            );
        }
        if let Some(n) = x_count {
            f.check(
                n >= 2 && n % 2 == 0,
                "x_count",
                "must be even and at least 2",
            );
        }
        f.finish()?;
        Ok(TaubConfig {
            kernel: kernel.unwrap(),
            t: t.unwrap(),
            x_count: x_count.unwrap(),
            tol: tol.unwrap(),
            stream: stream.unwrap(),
        })
    }
}

fn taub(cfg: TaubConfig) -> Result<Output, CliError> {
    let kernel = make_kernel(cfg.kernel).map_err(run_err)?;
    let n = cfg.x_count;
    let xs: Vec<f64> = (0..n)
        .map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / n as f64)
        .collect();
    let phi = Mollifier::new(kernel, 1.0).map_err(run_err)?;
    let oddness = xs
        .iter()
        .map(|&x| (phi.eval(x) + phi.eval(-x)).abs())
        .fold(0.0, f64::max);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut failed = Vec::new();
    let mut plot = Vec::new();
    for &t in &cfg.t {
        let r = mollifier_bound_check(&kernel, t, &xs, cfg.tol).map_err(run_err)?;
        for row in &r.rows {
            rows.push(format!(
                "{},{},{},{},{}",
                fnum(t),
                fnum(row.x),
                fnum(row.lhs),
                fnum(row.rhs),
                fnum(row.slack)
            ));
            if t == cfg.t[0] {
                plot.push((row.x, row.slack));
            }
        }
        if !r.holds {
            failed.push(format!("T = {t}: min slack {}", r.min_slack));
        }
        summary.push(json!({ "T": t, "holds": r.holds, "min_slack": r.min_slack }));
    }
    let mut payload = json!({ "oddness": oddness, "bounds": summary });
    let mut csv = ("T,x,lhs,rhs,slack".to_string(), rows);
    if let Some(st) = &cfg.stream {
        let stream = synthesize_stream(&st.spec, st.cutoff).map_err(run_err)?;
        let sc = HScaling::new(st.h, st.m).map_err(run_err)?;
        let bound = sc.rescaled_density(st.u0, st.vol);
        let mut srows = Vec::new();
        let mut worst = f64::INFINITY;
        plot.clear();
        for &t in &cfg.t {
            for &lambda in &st.lambdas {
                let v = smoothed_counting(&stream, &kernel, t, st.h, &|_| 1.0, lambda);
                let slack = bound * (1.0 + st.rel_tol) - v;
                worst = worst.min(slack);
                srows.push(format!(
                    "{},{},{},{},{}",
                    fnum(t),
                    fnum(lambda),
                    fnum(v),
                    fnum(bound),
                    fnum(slack)
                ));
                if t == cfg.t[0] {
                    plot.push((lambda, v));
                }
            }
        }
        if worst < 0.0 {
            failed.push(format!(
                "smoothed count exceeds the density bound by {}",
                -worst
            ));
        }
        payload["stream"] = json!({ "label": stream.label, "density": bound, "min_slack": worst });
        csv = ("T,lambda,smoothed,bound,slack".to_string(), srows);
    }
    Ok(Output {
        config: serde_json::to_value(&cfg).unwrap(),
        payload,
        csv: Some(csv),
        plot: Some(plot),
        failed_check: (!failed.is_empty()).then(|| failed.join("; ")),
    })
}

// ---------------------------------------------------------------- eta

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallTime {
    None,
    Finite,
    Progression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaConfig {
    pub stream: StreamSpec,
    pub cutoff: f64,
    pub small_time: SmallTime,
    /// `[value, tol]`: fails the run (exit 2) when `|eta - value| > tol`.
    pub expect: Option<[f64; 2]>,
}

impl EtaConfig {
    pub fn parse(v: &Value) -> Result<Self, SchemaError> {
        let mut f = Fields::new(v)?;
        let stream: Option<StreamSpec> = f.req("stream");
        let cutoff = f.opt("cutoff", 1e4f64);
        let small_time = f.opt("small_time", SmallTime::None);
        let expect: Option<Option<[f64; 2]>> = f.maybe("expect");
        if let Some(c) = cutoff {
            f.check(c > 0.0 && c.is_finite(), "cutoff", "must be positive");
        }
        if let (Some(s), Some(st)) = (&stream, small_time) {
            f.check(
                st != SmallTime::Progression || matches!(s, StreamSpec::Progression { .. }),
                "small_time",
                "`progression` needs a progression stream",
            );
        }
        f.finish()?;
        Ok(EtaConfig {
            stream: stream.unwrap(),
            cutoff: cutoff.unwrap(),
            small_time: small_time.unwrap(),
            expect: expect.unwrap(),
        })
    }
}

fn eta(cfg: EtaConfig) -> Result<Output, CliError> {
    let stream = synthesize_stream(&cfg.stream, cfg.cutoff).map_err(run_err)?;
    let prog = match cfg.stream {
        StreamSpec::Progression { a, spacing } => Some(ProgressionSmallTime { a, spacing }),
        _ => None,
    };
    let provider: Option<&dyn SmallTimeProvider> = match cfg.small_time {
        SmallTime::None => None,
        SmallTime::Finite => Some(&FiniteStreamSmallTime),
        SmallTime::Progression => prog.as_ref().map(|p| p as &dyn SmallTimeProvider),
    };
    let r = eta_full_from_stream(&stream, provider);
    let oracle = match prog {
        Some(p) => {
            let frac = p.a - p.a.floor();
            if frac > 0.0 {
                Some(
                    eta_zeta_progression(frac, cfg.cutoff)
                        .map_err(run_err)?
                        .result
                        .value,
                )
            } else {
                Some(0.0)
            }
        }
        None => None,
    };
    let failed_check = cfg.expect.and_then(|[v, tol]| {
        ((r.value - v).abs() > tol)
            .then(|| format!("eta = {} differs from {v} by more than {tol}", r.value))
    });
    Ok(Output {
        config: serde_json::to_value(&cfg).unwrap(),
        payload: json!({
            "stream": stream.label,
            "eigenvalues": stream.total(),
            "result": r,
            "reduced": r.reduced(),
            "zeta_oracle": oracle,
        }),
        csv: None,
        plot: None,
        failed_check,
    })
}

// ---------------------------------------------------------------- geom

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeomConfig {
    pub a: Vec<f64>,
    /// Lens weights; omitted for the ellipsoid.
    pub q: Option<Vec<u64>>,
    pub samples: usize,
}

impl GeomConfig {
    pub fn parse(v: &Value) -> Result<Self, SchemaError> {
        let mut f = Fields::new(v)?;
        let a: Option<Vec<f64>> = f.req("a");
        let q: Option<Option<Vec<u64>>> = f.maybe("q");
        let samples = f.opt("samples", 100_000usize);
        if let (Some(a), Some(q)) = (&a, &q) {
            let p = match q {
                Some(q) => LensSpaceParams::new(q.clone(), a.clone()),
                None => LensSpaceParams::ellipsoid(a.clone()),
            };
            if let Err(e) = p {
                f.check(false, "a", e.to_string());
            }
        }
        if let Some(n) = samples {
            f.check(n >= 2, "samples", "must be at least 2");
        }
        f.finish()?;
        Ok(GeomConfig {
            a: a.unwrap(),
            q: q.unwrap(),
            samples: samples.unwrap(),
        })
    }
}

fn geom(cfg: GeomConfig, ctx: Context) -> Result<Output, CliError> {
    let params = match &cfg.q {
        Some(q) => LensSpaceParams::new(q.clone(), cfg.a.clone()),
        None => LensSpaceParams::ellipsoid(cfg.a.clone()),
    }
    .map_err(run_err)?;
    if cfg.samples as u128 > ctx.budget {
        return Err(CliError::Run(format!(
            "{} samples exceed the budget of {}",
            cfg.samples, ctx.budget
        )));
    }
    let mc = contact_volume_with_workers(&params, cfg.samples, ctx.seed, ctx.workers)
        .map_err(run_err)?;
    let closed = contact_volume_closed_form(&params);
    let oracle = if cfg.a.len() == 2 {
        Some(ellipsoid_quadrature_oracle(cfg.a[0], cfg.a[1]).map_err(run_err)? / params.q0() as f64)
    } else {
        None
    };
    let m = cfg.a.len() - 1;
    Ok(Output {
        config: serde_json::to_value(&cfg).unwrap(),
        payload: json!({
            "monte_carlo": mc,
            "closed_form": closed.value,
            "quadrature_oracle": oracle,
            "q0": params.q0(),
            "metric_contact_leading_term": leading_term_metric_contact(m, mc.value),
        }),
        csv: None,
        plot: None,
        failed_check: None,
    })
}

// ---------------------------------------------------------------- preset

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresetConfig {
    pub preset: String,
    pub params: Value,
    pub h_max: f64,
    pub h_min: f64,
    pub count: usize,
}

impl PresetConfig {
    pub fn parse(v: &Value) -> Result<Self, SchemaError> {
        let mut f = Fields::new(v)?;
        let preset: Option<String> = f.req("preset");
        let params = f.opt("params", json!({}));
        let h_max = f.opt("h_max", 1e-2);
        let h_min = f.opt("h_min", 1e-8);
        let count = f.opt("count", 7usize);
        if let (Some(p), Some(v)) = (&preset, &params) {
            match Preset::from_name(p, v) {
                Err(e @ PresetError::Unknown(_)) => f.check(false, "preset", e.to_string()),
                Err(e) => f.check(false, "params", e.to_string()),
                Ok(_) => {}
            }
        }
        if let (Some(a), Some(b)) = (h_max, h_min) {
            f.check(
                a > 0.0 && a <= 1.0 && b > 0.0 && b <= a,
                "h_max",
                "need 0 < h_min <= h_max <= 1",
            );
        }
        if let Some(c) = count {
            f.check(c >= 1, "count", "must be at least 1");
        }
        f.finish()?;
        Ok(PresetConfig {
            preset: preset.unwrap(),
            params: params.unwrap(),
            h_max: h_max.unwrap(),
            h_min: h_min.unwrap(),
            count: count.unwrap(),
        })
    }
}

fn preset(cfg: PresetConfig) -> Result<Output, CliError> {
    let p = Preset::from_name(&cfg.preset, &cfg.params).map_err(run_err)?;
    let rows = p.schedule(&h_grid(cfg.h_max, cfg.h_min, cfg.count));
    let csv = rows
        .iter()
        .map(|r| format!("{},{},{}", fnum(r.h), fnum(r.eps), fnum(r.t)))
        .collect();
    Ok(Output {
        config: serde_json::to_value(&cfg).unwrap(),
        payload: json!({ "preset": p, "lambda": p.lambda(), "schedule": rows }),
        csv: Some(("h,eps,T".into(), csv)),
        plot: Some(rows.iter().map(|r| (r.h, r.t)).collect()),
        failed_check: None,
    })
}
