//! Command-line front end: one subcommand per experiment family, files into an output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::io::{write_fields_csv, write_json, write_table_csv};
use crate::solver::{check_second_regime, ground_state, second_solution, SolveReport};
use crate::spectrum::{lambda_star_at_p, thresholds};
use crate::deadcore::NSweep;
use crate::verify::{self, SweepResult};

#[derive(Debug, Parser)]
#[command(name = "plap-lab", version, about = "Ground states, thresholds and dead cores of the indefinite p-Laplacian problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: the config's `output`, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground state U+.
    Solve(Common),
    /// Second solution U- (needs int a phi1^q < 0 and lambda1 < lambda < lambda*).
    SolveSecond(Common),
    /// lambda1, lambda*, lambda_* and the principal eigenfunction.
    Eigen(Common),
    /// Dead-core sweep over n (`sweep_n` experiment).
    SweepN(Common),
    /// Sweep over lambda (`monotonicity` or `blowup` experiment).
    SweepLambda(Common),
    /// Sweep over q (`sweep_q` or `q_limit` experiment).
    SweepQ(Common),
    /// Sweep over delta (`sweep_delta` experiment).
    SweepDelta(Common),
    /// Barrier comparison at one n (`deadcore_check` experiment).
    DeadcoreCheck(Common),
    /// Any experiment, including `suite`.
    Verify(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c)
            | Command::SolveSecond(c)
            | Command::Eigen(c)
            | Command::SweepN(c)
            | Command::SweepLambda(c)
            | Command::SweepQ(c)
            | Command::SweepDelta(c)
            | Command::DeadcoreCheck(c)
            | Command::Verify(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::SolveSecond(_) => "solve-second",
            Command::Eigen(_) => "eigen",
            Command::SweepN(_) => "sweep-n",
            Command::SweepLambda(_) => "sweep-lambda",
            Command::SweepQ(_) => "sweep-q",
            Command::SweepDelta(_) => "sweep-delta",
            Command::DeadcoreCheck(_) => "deadcore-check",
            Command::Verify(_) => "verify",
        }
    }

    /// Drivers a sweep subcommand accepts; `None` for any.
    fn drivers(&self) -> Option<&'static [&'static str]> {
        match self {
            Command::SweepN(_) => Some(&["sweep_n"]),
            Command::SweepLambda(_) => Some(&["monotonicity", "blowup"]),
            Command::SweepQ(_) => Some(&["sweep_q", "q_limit"]),
            Command::SweepDelta(_) => Some(&["sweep_delta"]),
            Command::DeadcoreCheck(_) => Some(&["deadcore_check"]),
            _ => None,
        }
    }
}

/// Parses arguments, runs, and maps the outcome to an exit code:
/// 0 success, 1 property failure, 2 configuration or regime error.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_configuration() { 2 } else { 1 })
        }
    }
}

/// Runs one subcommand; `Ok(false)` means a property failed.
pub fn run(cmd: &Command) -> Result<bool> {
    let common = cmd.common();
    if let Some(n) = common.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    let out = match (&common.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => cfg.resolve(o),
        (None, None) => PathBuf::from("out"),
    };
    std::fs::create_dir_all(&out)?;
    let mut files = Vec::new();
    let ok = match cmd {
        Command::Solve(_) => solve(&cfg, &out, false, &mut files)?,
        Command::SolveSecond(_) => solve(&cfg, &out, true, &mut files)?,
        Command::Eigen(_) => eigen(&cfg, &out, &mut files)?,
        _ => {
            let exp = cfg
                .experiment
                .as_ref()
                .ok_or_else(|| Error::Config(format!("`{}` needs an experiment block", cmd.name())))?;
            if let Some(allowed) = cmd.drivers() {
                if !allowed.contains(&exp.driver()) {
                    return Err(Error::Config(format!(
                        "`{}` runs {allowed:?} experiments, the config has `{}`",
                        cmd.name(),
                        exp.driver()
                    )));
                }
            }
            experiment(&cfg, &out, &mut files, common.seed)?
        }
    };
    write_manifest(&cfg, &common.config, cmd.name(), &out, &files)?;
    Ok(ok)
}

fn write_manifest(cfg: &RunConfig, path: &Path, command: &str, out: &Path, files: &[String]) -> Result<()> {
    let manifest = json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_path": path,
        "config": cfg,
        "seeds": { "solver": cfg.solver.seed, "eigen": cfg.eigen.seed },
        "threads": rayon::current_num_threads(),
        "files": files,
    });
    write_json(&out.join("manifest.json"), &manifest)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    name: Option<&'a str>,
    lambda: f64,
    #[serde(flatten)]
    report: &'a SolveReport,
}

fn solve(cfg: &RunConfig, out: &Path, second: bool, files: &mut Vec<String>) -> Result<bool> {
    let prob = cfg.problem()?;
    let rep = if second {
        let th = thresholds(&prob, &cfg.eigen)?;
        check_second_regime(&prob, &th)?;
        second_solution(&prob, &cfg.solver)?
    } else {
        ground_state(&prob, &cfg.solver)?
    };
    let report = SolveOutput {
        name: cfg.name.as_deref(),
        lambda: prob.lambda(),
        report: &rep,
    };
    write_json(&out.join("report.json"), &report)?;
    write_fields_csv(
        &out.join("solution.csv"),
        &[("u", &rep.field), ("v", &rep.v_field), ("a", prob.weight().values())],
    )?;
    files.extend(["report.json".into(), "solution.csv".into()]);
    let sign_ok = if second {
        rep.i_value.is_some_and(|i| i > 0.0)
    } else {
        rep.i_value.is_some_and(|i| i < 0.0)
    };
    Ok(rep.converged && sign_ok)
}

fn eigen(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<bool> {
    let prob = cfg.problem()?;
    let th = thresholds(&prob, &cfg.eigen)?;
    let at_p = lambda_star_at_p(&prob, &cfg.eigen)?;
    let report = json!({
        "name": cfg.name,
        "thresholds": th,
        "lambda_star_at_p": at_p.value,
    });
    write_json(&out.join("report.json"), &report)?;
    write_fields_csv(&out.join("phi1.csv"), &[("phi1", &th.phi), ("a", prob.weight().values())])?;
    files.extend(["report.json".into(), "phi1.csv".into()]);
    Ok(th.converged && at_p.converged)
}

fn write_result(r: &SweepResult, out: &Path, stem: &str, files: &mut Vec<String>) -> Result<()> {
    r.write(out, stem)?;
    files.extend([format!("{stem}.json"), format!("{stem}.csv")]);
    Ok(())
}

/// Runs the config's experiment; results go to `out`.
fn experiment(cfg: &RunConfig, out: &Path, files: &mut Vec<String>, seed: Option<u64>) -> Result<bool> {
    let exp = cfg.experiment.as_ref().expect("checked by caller");
    if let Experiment::Suite { members } = exp {
        return suite(cfg, members, out, files, seed);
    }
    let opts = cfg.verify_options();
    let results: Vec<SweepResult> = match exp {
        Experiment::Inequalities(o) => vec![verify::inequality_suite(o)?],
        Experiment::SweepN(setup) => {
            let prob = cfg.problem()?;
            let outcome = verify::dead_core_experiment(&prob, setup, &opts)?;
            for sw in &outcome.sweeps {
                let stem = format!("sweep_n_lambda_{}", sw.lambda);
                let header: Vec<String> = NSweep::COLUMNS.iter().map(|s| s.to_string()).collect();
                write_table_csv(&out.join(format!("{stem}.csv")), &header, &sw.table())?;
                files.push(format!("{stem}.csv"));
            }
            for (lambda, n, barrier) in &outcome.barriers {
                let sw = outcome.sweeps.iter().find(|s| s.lambda == *lambda).expect("sweep per lambda");
                let row = sw.rows.iter().find(|r| r.n == *n).expect("confirming row");
                let stem = format!("barrier_lambda_{lambda}_n_{n}");
                write_fields_csv(&out.join(format!("{stem}.csv")), &[("u", &row.solution), ("barrier", barrier)])?;
                files.push(format!("{stem}.csv"));
            }
            vec![outcome.result]
        }
        Experiment::DeadcoreCheck {
            n,
            barrier_center,
            barrier_inner,
            barrier_outer,
            eps_dc,
        } => {
            let prob = cfg.problem()?;
            let (r, u, w) = verify::dead_core_check(
                &prob,
                *n,
                barrier_center.clone(),
                *barrier_inner,
                *barrier_outer,
                *eps_dc,
                &opts,
            )?;
            write_fields_csv(&out.join("solution.csv"), &[("u", &u), ("barrier", &w), ("a", prob.weight().values())])?;
            files.push("solution.csv".into());
            vec![r]
        }
        Experiment::Monotonicity { lambdas } => vec![verify::monotonicity_sweep(&cfg.problem()?, lambdas, &opts)?],
        Experiment::Blowup { lambdas, branch } => {
            vec![verify::blowup_asymptote(&cfg.problem()?, lambdas, *branch, &opts)?]
        }
        Experiment::SweepQ { qs, trend_lambdas } => {
            let prob = cfg.problem()?;
            let mut v = vec![verify::positivity_q_sweep(&prob, qs, &opts)?];
            if !trend_lambdas.is_empty() {
                v.push(verify::q0_trend(&prob, trend_lambdas, qs, &opts)?);
            }
            v
        }
        Experiment::QLimit { qs } => vec![verify::q_limit_lambda_star(&cfg.problem()?, qs, &opts)?],
        Experiment::SweepDelta { deltas } => vec![verify::positivity_delta_sweep(&cfg.problem()?, deltas, &opts)?],
        Experiment::Uniqueness => vec![verify::uniqueness_multistart(&cfg.problem()?, &opts)?],
        Experiment::Identities {
            order_tol,
            equal_tol,
            tolerances,
        } => {
            let prob = cfg.problem()?;
            vec![
                verify::threshold_check(&prob, &opts, *order_tol, *equal_tol)?,
                verify::solution_check(&prob, &opts, tolerances)?,
            ]
        }
        Experiment::Suite { .. } => unreachable!(),
    };
    for r in &results {
        write_result(r, out, &r.name, files)?;
    }
    let passed = results.iter().all(SweepResult::passed);
    let report = json!({
        "name": cfg.name,
        "driver": exp.driver(),
        "passed": passed,
        "results": results,
    });
    write_json(&out.join("report.json"), &report)?;
    files.push("report.json".into());
    Ok(passed)
}

fn suite(cfg: &RunConfig, members: &[PathBuf], out: &Path, files: &mut Vec<String>, seed: Option<u64>) -> Result<bool> {
    let mut entries = Vec::new();
    let mut all_ok = true;
    let mut config_error = None;
    for m in members {
        let path = cfg.resolve(m);
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("member").to_string();
        let dir = out.join(&stem);
        let outcome = (|| -> Result<(RunConfig, bool, Vec<String>)> {
            let mut mc = RunConfig::load(&path)?;
            if matches!(mc.experiment, None | Some(Experiment::Suite { .. })) {
                return Err(Error::Config(format!("suite member {} needs a non-suite experiment", path.display())));
            }
            if let Some(s) = seed {
                mc.set_seed(s);
            }
            std::fs::create_dir_all(&dir)?;
            let mut mf = Vec::new();
            let ok = experiment(&mc, &dir, &mut mf, seed)?;
            write_manifest(&mc, &path, "verify", &dir, &mf)?;
            Ok((mc, ok, mf))
        })();
        match outcome {
            Ok((mc, ok, mf)) => {
                all_ok &= ok;
                let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json"))?)?;
                let verdicts: Vec<serde_json::Value> = report["results"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .flat_map(|r| r["verdicts"].as_array().cloned().unwrap_or_default())
                    .collect();
                entries.push(json!({
                    "member": stem,
                    "config": path,
                    "driver": mc.experiment.as_ref().map(Experiment::driver),
                    "passed": ok,
                    "verdicts": verdicts,
                }));
                files.extend(mf.into_iter().map(|f| format!("{stem}/{f}")));
            }
            Err(e) => {
                all_ok = false;
                eprintln!("suite member {}: {e}", path.display());
                entries.push(json!({
                    "member": stem,
                    "config": path,
                    "passed": false,
                    "error": e.to_string(),
                }));
                if e.is_configuration() && config_error.is_none() {
                    config_error = Some(e);
                }
            }
        }
    }
    let summary = json!({
        "name": cfg.name,
        "passed": all_ok,
        "members": entries,
    });
    write_json(&out.join("suite_summary.json"), &summary)?;
    files.push("suite_summary.json".into());
    match config_error {
        Some(e) => Err(e),
        None => Ok(all_ok),
    }
}
