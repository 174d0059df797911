//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any failure.

use std::cell::Cell;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use serde_json::json;

use reeblab::contact_geometry::{
    contact_volume, ellipsoid_quadrature_oracle, leading_term_general, leading_term_metric_contact,
    metric_contact_trace,
};
use reeblab::diophantine::{
    cf_expand, estimate_mu, estimate_nu, LiouvilleTruncated, NuGrid, QuadraticSurd, RationalReal,
};
use reeblab::entropy::{
    build_metric_construction, estimate_htop, lattice_cloud, verify_entropy_inequality,
    ConstructionConfig, HtopConfig,
};
use reeblab::eta::{
    eta_full_from_stream, eta_function_progression, eta_zeta_progression, remainder_experiment,
    PlantedFamily, ProgressionSmallTime, RateTarget,
};
use reeblab::flows::{LensFlow, LensSpaceParams, SuspensionFlow};
use reeblab::presets::{h_grid, Preset};
use reeblab::recurrence::{
    estimate_lifted_volume, estimate_series, scaling_fit, RecurrenceConfig, ScalingMode,
    SeriesPoint,
};
use reeblab::spectral_model::{
    eval_v_threshold, synthesize_stream, u0_at_zero, u0_density, DensityProfile, EigenvalueStream,
    Gaussian, ModelParams, StreamSpec, TestFunction,
};
use reeblab::tauberian::{
    local_weyl_check, mollifier_bound_check, HScaling, Mollifier, SmoothingKernel,
};
use reeblab_cli::{replay, run, Context, DEFAULT_BUDGET};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit,
        format!("took {:.1} s, limit {limit} s", elapsed.as_secs_f64()),
    )
}

fn phi() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

const N: usize = 3;

fn mu_exponents() -> Check {
    let start = Instant::now();
    let cf = cf_expand(&QuadraticSurd::sqrt(2), 30).map_err(|e| e.to_string())?;
    let q: Vec<String> = cf.partial_quotients.iter().map(|a| a.to_string()).collect();
    ensure(
        q[0] == "1" && q[1..].iter().all(|a| a == "2"),
        "sqrt 2 quotients differ from [1; 2, 2, ...]",
    )?;
    let root2 = estimate_mu(&cf).map_err(|e| e.to_string())?.exponent;
    let rational = estimate_mu(&cf_expand(&RationalReal::new(355, 113), 10).unwrap())
        .unwrap()
        .exponent;
    let liouville = estimate_mu(&cf_expand(&LiouvilleTruncated { terms: 5 }, 30).unwrap())
        .unwrap()
        .exponent;
    ensure(
        (1.8..=2.2).contains(&root2),
        format!("mu(sqrt 2) = {root2}"),
    )?;
    ensure(rational == 1.0, format!("mu(355/113) = {rational}"))?;
    ensure(liouville > 4.0, format!("mu(Liouville) = {liouville}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!(
        "mu(sqrt 2) = {root2:.3}, rational = {rational}, Liouville = {liouville:.2}"
    ))
}

fn nu_exponents() -> Check {
    let start = Instant::now();
    let nu = |a: &[f64]| {
        estimate_nu(a, 1e4, NuGrid::default())
            .map(|e| e.exponent)
            .map_err(|e| e.to_string())
    };
    let golden = nu(&[1.0, phi()])?;
    let schmidt = nu(&[1.0, 2f64.sqrt(), 3f64.sqrt()])?;
    ensure(
        (1.8..=2.2).contains(&golden),
        format!("nu(1, phi) = {golden}"),
    )?;
    ensure(
        (1.3..=1.8).contains(&schmidt),
        format!("nu(1, sqrt 2, sqrt 3) = {schmidt}"),
    )?;
    let mut worst = 0.0f64;
    for c in [0.5, 3.7] {
        worst = worst.max((nu(&[c, c * phi()])? - golden).abs());
        worst = worst.max((nu(&[c, c * 2f64.sqrt(), c * 3f64.sqrt()])? - schmidt).abs());
    }
    ensure(worst <= 0.05, format!("scale changes nu by {worst}"))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "nu(1, phi) = {golden:.3}, nu(1, sqrt 2, sqrt 3) = {schmidt:.3}, scale drift {worst:.3}"
    ))
}

fn elliptic_recurrence() -> Check {
    let start = Instant::now();
    let flow = LensFlow::new(LensSpaceParams::new(vec![2, 1], vec![1.0, phi()]).unwrap());
    let cfg = RecurrenceConfig::new(64.0, 1e-2, 200_000, 7);
    let series =
        estimate_series(&flow, &cfg, &[8.0, 16.0, 32.0, 64.0], false).map_err(|e| e.to_string())?;
    let pts: Vec<SeriesPoint> = series.iter().map(SeriesPoint::from).collect();
    let fit = scaling_fit(&pts, ScalingMode::Elliptic).map_err(|e| e.to_string())?;
    ensure(
        (fit.slope - 2.0).abs() <= 0.6,
        format!("slope {}", fit.slope),
    )?;
    within(start.elapsed(), 600.0)?;
    Ok(format!("log-log slope {:.3}", fit.slope))
}

fn cat_htop() -> f64 {
    let cloud = lattice_cloud(400, 10, 1);
    let cfg = HtopConfig {
        eps_schedule: vec![0.05],
        t_schedule: (2..=16).map(|i| i as f64 * 0.5).collect(),
        dt: 0.25,
        greedy_restarts: 1,
        seed: 3,
        max_points: 200_000,
        workers: 1,
    };
    estimate_htop(&SuspensionFlow::cat(), &cloud, &cfg).htop
}

fn anosov_entropy(htop: &Cell<Option<f64>>) -> Check {
    let start = Instant::now();
    let h = cat_htop();
    htop.set(Some(h));
    let oracle = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    ensure((0.77..=1.15).contains(&h), format!("htop = {h}"))?;
    within(start.elapsed(), 600.0)?;
    Ok(format!("htop = {h:.4} (matrix eigenvalue {oracle:.4})"))
}

fn measured_htop(htop: &Cell<Option<f64>>) -> f64 {
    match htop.get() {
        Some(h) => h,
        None => {
            let h = cat_htop();
            htop.set(Some(h));
            h
        }
    }
}

fn anosov_recurrence(htop: &Cell<Option<f64>>) -> Check {
    let h = measured_htop(htop);
    let lambda = 1.1 * (2.0 / N as f64) * h;
    let flow = SuspensionFlow::cat();
    let mut pts = Vec::new();
    for t in 2..=8 {
        let e = estimate_lifted_volume(&flow, &RecurrenceConfig::new(t as f64, 0.05, 400_000, 11))
            .map_err(|e| e.to_string())?;
        let (lo, hi) = e.volume_ci();
        pts.push(SeriesPoint {
            t: t as f64,
            value: e.volume(),
            ci_low: lo,
            ci_high: hi,
        });
    }
    let fit = scaling_fit(&pts, ScalingMode::Anosov).map_err(|e| e.to_string())?;
    let cap = 2.0 * lambda + 0.15;
    ensure(fit.slope <= cap, format!("rate {} above {cap}", fit.slope))?;
    Ok(format!("lifted growth rate {:.3} <= {cap:.3}", fit.slope))
}

fn entropy_inequality(htop: &Cell<Option<f64>>) -> Check {
    let h = measured_htop(htop);
    let mc = build_metric_construction(&SuspensionFlow::cat(), &ConstructionConfig::default())
        .map_err(|e| e.to_string())?;
    let r = verify_entropy_inequality(&mc, N, 4, h, 1.25);
    ensure(
        r.lower_holds,
        format!("(n/2) ln L = {} > 1.25 htop", r.lower),
    )?;
    ensure(r.upper_holds, format!("htop > 1.25 n ln L = {}", r.upper))?;
    let s = mc.check(10_000, 1);
    ensure(s.pairs >= 10_000, format!("only {} pairs", s.pairs))?;
    ensure(
        s.frink_violations == 0 && s.weak_triangle_violations == 0,
        format!(
            "{} sandwich and {} weak-triangle violations",
            s.frink_violations, s.weak_triangle_violations
        ),
    )?;
    Ok(format!(
        "ln L(d_4) = {:.3}; (n/2) ln L = {:.3} <= 1.25 htop = {:.3}; htop = {h:.3} <= 1.25 n ln L = {:.3}; 0 violations on {} pairs",
        r.ln_l_dk,
        r.lower,
        1.25 * h,
        1.25 * r.upper,
        s.pairs
    ))
}

fn tauberian() -> Check {
    let kernels = [
        SmoothingKernel::bspline(2).unwrap(),
        SmoothingKernel::bspline(4).unwrap(),
    ];
    let grid: Vec<f64> = (0..1000)
        .map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / 1000.0)
        .collect();
    let mut odd = 0.0f64;
    for k in &kernels {
        let m = Mollifier::new(*k, 1.0).map_err(|e| e.to_string())?;
        ensure(m.eval(0.0) == 0.0, "phi(0) != 0")?;
        odd = grid
            .iter()
            .map(|&x| (m.eval(x) + m.eval(-x)).abs())
            .fold(odd, f64::max);
    }
    ensure(odd <= 1e-12, format!("oddness defect {odd}"))?;
    let mut min_slack = f64::INFINITY;
    for k in &kernels {
        for t in [5.0, 10.0, 50.0] {
            let r = mollifier_bound_check(k, t, &grid, 1e-8).map_err(|e| e.to_string())?;
            ensure(
                r.holds,
                format!("{:?} T = {t}: min slack {}", k.spec, r.min_slack),
            )?;
            min_slack = min_slack.min(r.min_slack);
        }
    }
    let p = ModelParams::new(vec![1.0]).unwrap();
    let (u0, vol) = (u0_at_zero(&p), 2.0 * PI * PI);
    let kernel = SmoothingKernel::weyl(3, 0.1).unwrap();
    let mut worst = 0.0f64;
    for (h, t) in [(1e-3, 5.0), (1e-4, 10.0), (1e-5, 3.0)] {
        let sc = HScaling::new(h, 1).unwrap();
        let rho = sc.rescaled_density(u0, vol);
        let s = synthesize_stream(
            &StreamSpec::Density {
                profile: DensityProfile::uniform(-1.0, 1.0, rho),
                count: None,
            },
            1.0,
        )
        .map_err(|e| e.to_string())?;
        let r = local_weyl_check(&s, Some(&kernel), t, sc, u0, vol, 0.0);
        worst = worst.max((r.count as f64 - r.bound).abs());
    }
    ensure(worst <= 1.0, format!("Weyl count off by {worst}"))?;
    Ok(format!(
        "oddness {odd:.1e}, min slack {min_slack:.2e}, Weyl count within {worst:.2}"
    ))
}

fn eta() -> Check {
    let quarter = eta_zeta_progression(0.25, 100.0)
        .map_err(|e| e.to_string())?
        .result
        .value;
    ensure(quarter == 0.5, format!("eta(1/4) = {quarter}"))?;
    let mut worst = 0.0f64;
    for a in [0.1, 0.25, 0.6] {
        let s = synthesize_stream(&StreamSpec::Progression { a, spacing: 1.0 }, 1e4).unwrap();
        let p = ProgressionSmallTime { a, spacing: 1.0 };
        let v = eta_full_from_stream(&s, Some(&p)).value;
        worst = worst.max((v - (1.0 - 2.0 * a)).abs());
        let neg = eta_full_from_stream(&s.negated(), None).value;
        let pos = eta_full_from_stream(&s, None).value;
        ensure(
            neg == -pos,
            format!("a = {a}: eta(-D) = {neg}, eta(D) = {pos}"),
        )?;
        let exact = eta_function_progression(a, 1.0, 0.0).map_err(|e| e.to_string())?;
        for c in [0.3, 0.5, 2.0, 3.7] {
            let zc = eta_function_progression(a, c, 0.0).map_err(|e| e.to_string())?;
            ensure(
                zc == exact,
                format!("a = {a}, c = {c}: zeta route {zc} vs {exact}"),
            )?;
            // Rescaling the eigenvalues themselves rounds, so the heat route
            // is compared to rounding level.
            let sv = eta_full_from_stream(&s.scaled(c), Some(&p.scaled(c))).value;
            ensure(
                (sv - v).abs() <= 1e-12,
                format!("a = {a}, c = {c}: {sv} vs {v}"),
            )?;
        }
    }
    ensure(worst <= 1e-3, format!("progression eta off by {worst}"))?;
    let zero = EigenvalueStream::new(vec![0.0, 0.0, 0.0], 1.0, "zero").unwrap();
    let z = eta_full_from_stream(&zero, None);
    ensure(z.value == 0.0 && z.zero_modes == 3, "zero modes contribute")?;
    Ok(format!(
        "eta(1/4) = {quarter}, progression error {worst:.1e}"
    ))
}

struct Shifted(Gaussian);

impl TestFunction for Shifted {
    fn derivative(&self, order: u32, s: f64) -> f64 {
        self.0.derivative(order + 1, s)
    }
}

fn distributions() -> Check {
    let v = eval_v_threshold(0, 0, 0, 0.5, &Gaussian::standard()).map_err(|e| e.to_string())?;
    let oracle = (2.0 * PI).sqrt() * (-0.5f64).exp();
    ensure((v - oracle).abs() <= 1e-6, format!("{v} vs {oracle}"))?;
    let mut ibp = 0.0f64;
    for (a, b, c, lambda, center) in [
        (1, 0, 0, 0.5, 0.0),
        (2, 1, 1, 1.3, -0.7),
        (3, -1, 2, 0.8, 1.4),
        (1, 2, 1, 1.9, 0.3),
    ] {
        let g = Gaussian {
            center,
            sigma: 0.8,
            scale: 1.0,
        };
        let lhs = eval_v_threshold(a, b, c, lambda, &g).map_err(|e| e.to_string())?;
        let rhs = -eval_v_threshold(a - 1, b, c, lambda, &Shifted(g)).map_err(|e| e.to_string())?;
        ibp = ibp.max((lhs - rhs).abs());
    }
    ensure(ibp <= 1e-8, format!("integration by parts defect {ibp}"))?;
    let sets: [Vec<f64>; 5] = [
        vec![1.0],
        vec![1.0, 2.0],
        vec![0.5],
        vec![1.0, 1.0, 1.0],
        vec![0.3, 1.7, 2.2, 4.0],
    ];
    for mu in sets {
        let p = ModelParams::new(mu.clone()).unwrap();
        let n = (2 * mu.len() + 1) as f64;
        let expect = mu.iter().product::<f64>() / (4.0 * PI).powf(n / 2.0);
        let got = u0_density(&p, 0.0).map_err(|e| e.to_string())?;
        ensure(
            got == expect,
            format!("u0(0) for {mu:?}: {got} vs {expect}"),
        )?;
    }
    Ok(format!(
        "v = {v:.8}, integration by parts defect {ibp:.1e}, u0(0) exact on 5 sets"
    ))
}

fn geometry() -> Check {
    let oracle = ellipsoid_quadrature_oracle(1.0, 1.0).map_err(|e| e.to_string())?;
    let ball = LensSpaceParams::ellipsoid(vec![1.0, 1.0]).unwrap();
    let mc = contact_volume(&ball, 100_000, 1).map_err(|e| e.to_string())?;
    let rel = ((mc.value - oracle) / oracle).abs();
    ensure(
        rel < 0.01,
        format!("MC {} vs quadrature {oracle}", mc.value),
    )?;
    let lens = LensSpaceParams::new(vec![5, 2, 3], vec![1.0, 2f64.sqrt(), 3f64.sqrt()]).unwrap();
    let ell = LensSpaceParams::ellipsoid(vec![1.0, 2f64.sqrt(), 3f64.sqrt()]).unwrap();
    let rl = contact_volume(&lens, 20_000, 9).map_err(|e| e.to_string())?;
    let re = contact_volume(&ell, 20_000, 9).map_err(|e| e.to_string())?;
    ensure(
        rl.value == re.value / 5.0,
        format!("lens {} vs ellipsoid {} / 5", rl.value, re.value),
    )?;
    let vol = mc.value;
    let term = leading_term_metric_contact(1, vol);
    let formula = -0.5 * (2.0 * PI).powi(-2) * vol;
    ensure(term == formula, format!("leading term {term} vs {formula}"))?;
    let general = leading_term_general(&ball, &|_| metric_contact_trace(1), 100_000, 1)
        .map_err(|e| e.to_string())?;
    ensure(
        (general.value - term).abs() <= 1e-12 * term.abs(),
        format!("general {} vs {term}", general.value),
    )?;
    Ok(format!(
        "E(1,1) MC off by {:.2}%, q0 ratio exact, leading term {term:.6}",
        100.0 * rel
    ))
}

fn planted(recipe: Preset) -> PlantedFamily {
    PlantedFamily {
        m: 1,
        u0: 0.022_448_4,
        vol: 2.0 * PI * PI,
        recipe: Some(recipe),
        bulk: 50,
    }
}

fn remainders() -> Check {
    let hs = h_grid(1e-3, 1e-9, 13);
    let mut report = Vec::new();
    for nu in [1.5, 2.0, 3.0] {
        let fam = planted(Preset::from_name("cor14", &json!({ "nu": nu })).unwrap());
        let want = 1.0 / (2.0 * nu - 1.0);
        let r = remainder_experiment(
            &|h| fam.stream(h),
            &hs,
            1,
            0.0,
            RateTarget::Power { exponent: want },
        )
        .map_err(|e| e.to_string())?;
        let slope = r.power_fit.ok_or("no power fit")?.slope;
        ensure(
            (slope - want).abs() <= 0.05,
            format!("nu = {nu}: exponent {slope} vs {want}"),
        )?;
        report.push(format!("{slope:.3}"));
    }
    let hs = h_grid(1e-2, 1e-8, 13);
    for c in [0.4, 0.7] {
        let fam = planted(
            Preset::from_name("cor13", &json!({ "htop": 0.9624, "n": 3, "c": c })).unwrap(),
        );
        let r = remainder_experiment(&|h| fam.stream(h), &hs, 1, 0.0, RateTarget::ReciprocalLog)
            .map_err(|e| e.to_string())?;
        let (log_res, pow_res) = (
            r.reclog_residual.ok_or("no log fit")?,
            r.power_fit.ok_or("no power fit")?.residual,
        );
        ensure(
            r.prefers_reclog == Some(true) && log_res < pow_res,
            format!("c = {c}: log {log_res} vs power {pow_res}"),
        )?;
    }
    Ok(format!(
        "planted exponents {} for nu = 1.5, 2, 3; log families prefer 1/|ln h|",
        report.join(", ")
    ))
}

fn replays() -> Check {
    let configs = [
        ("dioph", json!({ "target": "sqrt:2" })),
        (
            "dioph",
            json!({ "a": [1.0, 1.618_033_988_749_895], "t_max": 1e3 }),
        ),
        (
            "recur",
            json!({ "flow": { "kind": "lens", "q": [2, 1], "a": [1.0, 1.618_033_988_749_895] }, "T": 32.0, "eps": 1e-2, "samples": 20_000 }),
        ),
        (
            "recur",
            json!({ "flow": { "kind": "suspension", "matrix": [[2, 1], [1, 1]] }, "T": 4.0, "eps": 0.05, "samples": 5_000, "lifted": true }),
        ),
        (
            "entropy",
            json!({ "cloud": { "kind": "lattice", "nx": 30, "ns": 3 }, "T_schedule": [1.0, 2.0, 3.0], "construction": { "clusters": 8 }, "check_pairs": 500 }),
        ),
        ("taub", json!({ "x_count": 200 })),
        (
            "eta",
            json!({ "stream": { "kind": "progression", "a": 0.3 }, "cutoff": 1e3, "small_time": "progression" }),
        ),
        ("geom", json!({ "a": [1.0, 2.0, 0.5], "samples": 20_000 })),
        (
            "preset",
            json!({ "preset": "cor13", "params": { "htop": 0.9624, "n": 3, "c": 0.7 } }),
        ),
    ];
    let mut covered = std::collections::BTreeSet::new();
    for (sub, cfg) in &configs {
        let (rec, _) = run(
            sub,
            cfg,
            Context {
                seed: 7,
                workers: 1,
                budget: DEFAULT_BUDGET,
            },
        )
        .map_err(|e| format!("{sub}: {e}"))?;
        let (again, same) = replay(&rec, DEFAULT_BUDGET).map_err(|e| format!("{sub}: {e}"))?;
        ensure(
            same,
            format!(
                "{sub}: {} replayed as {}",
                rec.payload_hash, again.payload_hash
            ),
        )?;
        covered.insert(*sub);
    }
    ensure(
        covered.len() == reeblab_cli::SUBCOMMANDS.len(),
        "a subcommand was not exercised",
    )?;
    Ok(format!(
        "{} runs over {} subcommands replay to identical hashes",
        configs.len(),
        covered.len()
    ))
}

fn main() -> ExitCode {
    let htop = Cell::new(None);
    let criteria: Vec<Criterion> = vec![
        ("diophantine mu", Box::new(mu_exponents)),
        ("diophantine nu", Box::new(nu_exponents)),
        ("elliptic recurrence scaling", Box::new(elliptic_recurrence)),
        ("anosov entropy", Box::new(|| anosov_entropy(&htop))),
        (
            "anosov recurrence bound",
            Box::new(|| anosov_recurrence(&htop)),
        ),
        ("entropy inequality", Box::new(|| entropy_inequality(&htop))),
        ("tauberian", Box::new(tauberian)),
        ("eta", Box::new(eta)),
        ("distributions", Box::new(distributions)),
        ("geometry", Box::new(geometry)),
        ("remainder experiments", Box::new(remainders)),
        ("reproducibility", Box::new(replays)),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.1} s): {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
