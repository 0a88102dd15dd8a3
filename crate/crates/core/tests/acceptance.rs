//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use plap_lab::config::{Experiment, RunConfig};
use plap_lab::functionals::{energy, grad_i, Problem};
use plap_lab::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};
use plap_lab::solver::Sign;
use plap_lab::spectrum::principal_eigen;
use plap_lab::verify::{
    blowup_asymptote, dead_core_experiment, inequality_suite, monotonicity_sweep, positivity_delta_sweep,
    positivity_q_sweep, q0_trend, q_limit_lambda_star, solution_check, threshold_check, uniqueness_multistart,
    IdentityTolerances, InequalityOptions, SweepResult, Verdict, VerifyOptions,
};
use plap_lab::{Field, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

fn config(name: &str) -> RunConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "configs", name].iter().collect();
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn setup(name: &str) -> (RunConfig, Problem, VerifyOptions) {
    let cfg = config(name);
    let prob = cfg.problem().unwrap();
    let opts = cfg.verify_options();
    (cfg, prob, opts)
}

/// `(ok, detail)` requiring every listed property to be a strict pass and nothing else to fail.
fn require(r: &SweepResult, props: &[&str]) -> (bool, String) {
    let mut ok = r.passed();
    let mut parts = Vec::new();
    for p in props {
        let v = r.verdict_of(p);
        ok &= v == Some(Verdict::Pass);
        parts.push(format!("{p}={v:?}"));
    }
    for v in r.verdicts.iter().filter(|v| !matches!(v.verdict, Verdict::Pass | Verdict::OutOfRegime)) {
        parts.push(format!("{}={:?} ({})", v.property, v.verdict, v.detail));
    }
    (ok, format!("{}: {}", r.name, parts.join(", ")))
}

fn merge(parts: Vec<(bool, String)>) -> (bool, String) {
    let ok = parts.iter().all(|p| p.0);
    (ok, parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; "))
}

fn gradient_consistency() -> Outcome {
    let g = build_grid(1, &[1.0], &[201], BoundaryCondition::Dirichlet)?;
    let w = Arc::new(build_weight(&g, &WeightSpec::TwoBump1d { a_plus: 2.0, a_minus: 1.0, delta: 0.4 })?);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for p in [2.0, 2.5, 3.0] {
        for q in [1.3, 1.5, 1.9] {
            for lambda in [-1.0, 0.0, 0.5] {
                let prob = Problem::with_eps(p, q, lambda, 0.0, w.clone())?;
                for _ in 0..50 {
                    let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.2..2.0)).collect();
                    let u = Field::admissible(g.clone(), vals.clone())?;
                    let an = grad_i(&prob, &u)?;
                    let scale = an.sup_norm().max(f64::MIN_POSITIVE);
                    for i in (0..g.len()).filter(|&i| g.is_free(i)) {
                        let mut up = vals.clone();
                        let mut dn = vals.clone();
                        up[i] += h;
                        dn[i] -= h;
                        let fp = energy(&prob, &Field::admissible(g.clone(), up)?)?.i_lambda;
                        let fm = energy(&prob, &Field::admissible(g.clone(), dn)?)?.i_lambda;
                        let fd = (fp - fm) / (2.0 * h);
                        worst = worst.max((fd - an.values()[i]).abs() / scale);
                    }
                }
            }
        }
    }
    Ok((worst <= 1e-6, format!("max relative deviation {worst:.2e} over 1350 fields (tol 1e-6)")))
}

fn eigen_oracle() -> Outcome {
    let m = 200;
    let g = build_grid(1, &[1.0], &[m + 1], BoundaryCondition::Dirichlet)?;
    let w = build_weight(&g, &WeightSpec::TwoBump1d { a_plus: 1.0, a_minus: 1.0, delta: 0.4 })?;
    let rep = principal_eigen(&Problem::new(2.0, 1.5, 0.0, w)?)?;
    let h = 1.0 / m as f64;
    let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    let rel = (rep.value - exact).abs() / exact;
    let mut ok = rel <= 1e-8;
    let mut detail = format!("dirichlet rel err {rel:.2e} (tol 1e-8)");
    let gn = build_grid(1, &[1.0], &[m + 1], BoundaryCondition::Neumann)?;
    for p in [2.0, 2.5, 3.0, 4.0] {
        let w = build_weight(&gn, &WeightSpec::TwoBump1d { a_plus: 1.0, a_minus: 1.0, delta: 0.4 })?;
        let rep = principal_eigen(&Problem::new(p, 1.5, 0.0, w)?)?;
        let var = (rep.minimizer.max() - rep.minimizer.min()) / rep.minimizer.max();
        ok &= rep.value <= 1e-8 && var <= 1e-6;
        detail += &format!("; neumann p={p}: lambda1 {:.1e}, variation {var:.1e}", rep.value);
    }
    Ok((ok, detail))
}

const SHIPPED: [&str; 12] = [
    "ground_state.json",
    "second_solution.json",
    "connected_identities.json",
    "uniqueness.json",
    "monotonicity.json",
    "blowup.json",
    "deadcore.json",
    "deadcore_check.json",
    "q_limit.json",
    "positivity_q.json",
    "positivity_delta.json",
    "disk2d.json",
];

fn threshold_ordering() -> Outcome {
    let mut parts = Vec::new();
    for name in SHIPPED {
        let (_, prob, opts) = setup(name);
        let r = threshold_check(&prob, &opts, 1e-6, 2e-6)?;
        let (ok, d) = require(&r, &["ordering"]);
        parts.push((ok, format!("{name} {d}")));
    }
    Ok(merge(parts))
}

fn identities() -> Result<SweepResult> {
    let (_, prob, mut opts) = setup("second_solution.json");
    opts.solve.residual_tol = 1e-8;
    solution_check(&prob, &opts, &IdentityTolerances::default())
}

fn sign_regime(r: &SweepResult) -> Outcome {
    Ok(require(
        r,
        &["m_plus_positive_below_lambda1", "m_plus_negative_above_lambda_star", "m_minus_bound"],
    ))
}

fn solution_identities(r: &SweepResult) -> Outcome {
    Ok(require(r, &["plus_identities", "minus_identities"]))
}

fn two_solutions(r: &SweepResult) -> Outcome {
    Ok(require(r, &["two_solutions"]))
}

fn uniqueness() -> Outcome {
    let (_, prob, mut opts) = setup("uniqueness.json");
    opts.n_starts = 8;
    opts.dist_tol = 1e-4;
    opts.convexity_tol = 1e-10;
    let r = uniqueness_multistart(&prob, &opts)?;
    Ok(require(&r, &["uniqueness", "hidden_convexity"]))
}

fn monotonicity() -> Outcome {
    let (cfg, prob, mut opts) = setup("monotonicity.json");
    let Some(Experiment::Monotonicity { lambdas }) = cfg.experiment else { unreachable!() };
    opts.mono_tol = 1e-6;
    opts.decay_ratio = 0.1;
    let r = monotonicity_sweep(&prob, &lambdas, &opts)?;
    Ok(require(&r, &["monotone_in_lambda", "decay"]))
}

fn blowup() -> Outcome {
    let (_, prob, mut opts) = setup("blowup.json");
    opts.asym_tol = 5e-2;
    let r = blowup_asymptote(&prob, &[-0.4, -0.2, -0.1, -0.05], Sign::Plus, &opts)?;
    Ok(require(&r, &["asymptote", "m_to_zero"]))
}

fn dead_core() -> Outcome {
    let (cfg, prob, opts) = setup("deadcore.json");
    let Some(Experiment::SweepN(dc)) = cfg.experiment else { unreachable!() };
    let out = dead_core_experiment(&prob, &dc, &opts)?;
    let r = &out.result;
    let mut props: Vec<String> = vec!["n0_independent_of_lambda".into()];
    for l in &dc.lambdas {
        for k in ["coverage", "comparison", "bumps"] {
            props.push(format!("{k}[lambda={l}]"));
        }
    }
    let refs: Vec<&str> = props.iter().map(String::as_str).collect();
    let (ok, d) = require(r, &refs);
    Ok((ok, d))
}

fn limits() -> Outcome {
    let mut parts = Vec::new();
    let (cfg, prob, mut opts) = setup("q_limit.json");
    let Some(Experiment::QLimit { qs }) = cfg.experiment else { unreachable!() };
    opts.limit_tol = 5e-2;
    parts.push(require(&q_limit_lambda_star(&prob, &qs, &opts)?, &["limit"]));

    let (cfg, prob, opts) = setup("positivity_q.json");
    let Some(Experiment::SweepQ { qs, trend_lambdas }) = cfg.experiment else { unreachable!() };
    parts.push(require(&positivity_q_sweep(&prob, &qs, &opts)?, &["threshold_found"]));
    parts.push(require(&q0_trend(&prob, &trend_lambdas, &qs, &opts)?, &["q0_nonincreasing"]));

    let (cfg, prob, opts) = setup("positivity_delta.json");
    let Some(Experiment::SweepDelta { deltas }) = cfg.experiment else { unreachable!() };
    parts.push(require(&positivity_delta_sweep(&prob, &deltas, &opts)?, &["threshold_found"]));
    Ok(merge(parts))
}

fn inequalities() -> Outcome {
    let r = inequality_suite(&InequalityOptions::default())?;
    Ok(require(&r, &["power_mean", "picone"]))
}

fn run(n: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(_) => (false, "panicked".into()),
    };
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n:>2}: {tag} {title} [{:.1}s] {detail}", t.elapsed().as_secs_f64());
    ok
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut ok = true;
    ok &= run(1, "gradient consistency", gradient_consistency);
    ok &= run(2, "eigen oracle", eigen_oracle);
    ok &= run(3, "threshold ordering", threshold_ordering);
    let ids = identities();
    let shared = |f: fn(&SweepResult) -> Outcome| match &ids {
        Ok(r) => f(r),
        Err(e) => Ok((false, format!("error: {e}"))),
    };
    ok &= run(4, "sign regime", || shared(sign_regime));
    ok &= run(5, "solution identities", || shared(solution_identities));
    ok &= run(6, "uniqueness", uniqueness);
    ok &= run(7, "two solutions", || shared(two_solutions));
    ok &= run(8, "monotonicity and decay", monotonicity);
    ok &= run(9, "blow-up asymptote", blowup);
    ok &= run(10, "dead core", dead_core);
    ok &= run(11, "limits", limits);
    ok &= run(12, "inequality suites", inequalities);
    println!("acceptance: {} in {:.1}s", if ok { "all passed" } else { "FAILED" }, started.elapsed().as_secs_f64());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
