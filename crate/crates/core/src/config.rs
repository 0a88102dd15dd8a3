//! JSON run configurations.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Problem;
use crate::grid::{build_grid, build_weight_in, BoundaryCondition, WeightSpec};
use crate::solver::{Sign, SolveOptions};
use crate::spectrum::EigenOptions;
use crate::verify::{DeadCoreSetup, IdentityTolerances, InequalityOptions, VerifyOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    /// Gradient regularization; 0 is the plain problem.
    #[serde(default)]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    pub extent: Vec<f64>,
    pub nodes: Vec<usize>,
    pub bc: BoundaryCondition,
}

/// Property tolerances; solver and eigen settings come from their own blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceBlock {
    pub dist_tol: f64,
    pub n_starts: usize,
    pub convexity_tol: f64,
    pub mono_tol: f64,
    pub decay_ratio: f64,
    pub asym_tol: f64,
    pub limit_tol: f64,
    pub eps_pos: f64,
}

impl Default for ToleranceBlock {
    fn default() -> Self {
        let v = VerifyOptions::default();
        ToleranceBlock {
            dist_tol: v.dist_tol,
            n_starts: v.n_starts,
            convexity_tol: v.convexity_tol,
            mono_tol: v.mono_tol,
            decay_ratio: v.decay_ratio,
            asym_tol: v.asym_tol,
            limit_tol: v.limit_tol,
            eps_pos: v.eps_pos,
        }
    }
}

/// Which driver a run executes, with its schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "driver", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Dead-core sweep over `n` (one sweep per listed `lambda`).
    SweepN(DeadCoreSetup),
    /// Single `n` with barrier comparison and dead-core region.
    DeadcoreCheck {
        n: f64,
        barrier_center: Vec<f64>,
        barrier_inner: f64,
        barrier_outer: f64,
        #[serde(default = "default_eps_dc")]
        eps_dc: f64,
    },
    Monotonicity {
        lambdas: Vec<f64>,
    },
    Blowup {
        lambdas: Vec<f64>,
        #[serde(default = "default_branch")]
        branch: Sign,
    },
    /// Positivity over `qs`; `trend_lambdas` adds the `q0` trend check.
    SweepQ {
        qs: Vec<f64>,
        #[serde(default)]
        trend_lambdas: Vec<f64>,
    },
    QLimit {
        qs: Vec<f64>,
    },
    SweepDelta {
        deltas: Vec<f64>,
    },
    Uniqueness,
    /// Threshold ordering, sign regime, solution identities, two solutions.
    Identities {
        #[serde(default = "default_order_tol")]
        order_tol: f64,
        #[serde(default = "default_equal_tol")]
        equal_tol: f64,
        #[serde(default)]
        tolerances: IdentityTolerances,
    },
    Inequalities(InequalityOptions),
    /// Runs other configs, paths relative to this file.
    Suite {
        members: Vec<PathBuf>,
    },
}

fn default_eps_dc() -> f64 {
    1e-6
}

fn default_branch() -> Sign {
    Sign::Plus
}

fn default_order_tol() -> f64 {
    1e-6
}

fn default_equal_tol() -> f64 {
    2e-6
}

impl Experiment {
    pub fn driver(&self) -> &'static str {
        match self {
            Experiment::SweepN(_) => "sweep_n",
            Experiment::DeadcoreCheck { .. } => "deadcore_check",
            Experiment::Monotonicity { .. } => "monotonicity",
            Experiment::Blowup { .. } => "blowup",
            Experiment::SweepQ { .. } => "sweep_q",
            Experiment::QLimit { .. } => "q_limit",
            Experiment::SweepDelta { .. } => "sweep_delta",
            Experiment::Uniqueness => "uniqueness",
            Experiment::Identities { .. } => "identities",
            Experiment::Inequalities(_) => "inequalities",
            Experiment::Suite { .. } => "suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional label echoed into reports.
    #[serde(default)]
    pub name: Option<String>,
    /// Absent only for configs whose experiment needs no problem (`inequalities`, `suite`).
    #[serde(default)]
    pub problem: Option<ProblemBlock>,
    #[serde(default)]
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub tolerances: ToleranceBlock,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory relative paths resolve against; set by [`RunConfig::load`].
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let needs_problem = !matches!(
            self.experiment,
            Some(Experiment::Inequalities(_)) | Some(Experiment::Suite { .. })
        );
        if needs_problem {
            if self.problem.is_none() || self.grid.is_none() || self.weight.is_none() {
                return Err(Error::Config("problem, grid and weight blocks are required".into()));
            }
            let pb = self.problem.as_ref().unwrap();
            if !(pb.q > 1.0 && pb.q < pb.p) {
                return Err(Error::regime(
                    "subhomogeneous exponents 1 < q < p",
                    format!("p = {}, q = {}", pb.p, pb.q),
                ));
            }
        }
        let t = &self.tolerances;
        let positive = [
            ("dist_tol", t.dist_tol),
            ("mono_tol", t.mono_tol),
            ("decay_ratio", t.decay_ratio),
            ("asym_tol", t.asym_tol),
            ("limit_tol", t.limit_tol),
            ("eps_pos", t.eps_pos),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("tolerances.{k} must be positive, got {v}")));
            }
        }
        if let Some(Experiment::Suite { members }) = &self.experiment {
            if members.is_empty() {
                return Err(Error::Config("suite has no members".into()));
            }
        }
        Ok(())
    }

    /// Builds grid, weight and problem.
    pub fn problem(&self) -> Result<Problem> {
        let (Some(pb), Some(gb), Some(ws)) = (&self.problem, &self.grid, &self.weight) else {
            return Err(Error::Config("problem, grid and weight blocks are required".into()));
        };
        let grid = build_grid(gb.dim, &gb.extent, &gb.nodes, gb.bc)?;
        let weight = build_weight_in(&grid, ws, self.base_dir.as_deref())?;
        Problem::with_eps(pb.p, pb.q, pb.lambda, pb.eps, Arc::new(weight))
    }

    pub fn verify_options(&self) -> VerifyOptions {
        let t = &self.tolerances;
        VerifyOptions {
            solve: self.solver,
            eigen: self.eigen,
            dist_tol: t.dist_tol,
            n_starts: t.n_starts,
            convexity_tol: t.convexity_tol,
            mono_tol: t.mono_tol,
            decay_ratio: t.decay_ratio,
            asym_tol: t.asym_tol,
            limit_tol: t.limit_tol,
            eps_pos: t.eps_pos,
        }
    }

    /// Overrides every seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.solver.seed = seed;
        self.eigen.seed = seed;
        if let Some(Experiment::Inequalities(o)) = &mut self.experiment {
            o.seed = seed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "problem": {"p": 2, "q": 1.5, "lambda": -1},
        "grid": {"dim": 1, "extent": [1], "nodes": [51], "bc": "dirichlet"},
        "weight": {"kind": "two_bump1d", "a_plus": 1, "a_minus": 1, "delta": 0.4}
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert!(c.experiment.is_none());
        let p = c.problem().unwrap();
        assert_eq!(p.grid().len(), 51);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = BASE.replace("\"lambda\": -1", "\"lambda\": -1, \"lamda\": 2");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_q_at_least_p() {
        let bad = BASE.replace("\"q\": 1.5", "\"q\": 2.5");
        let e = RunConfig::from_json(&bad).unwrap_err();
        assert!(e.to_string().contains("1 < q < p"), "{e}");
    }

    #[test]
    fn experiment_tags() {
        let with = BASE.replacen('{', r#"{"experiment": {"driver": "monotonicity", "lambdas": [-2, -1]},"#, 1);
        let c = RunConfig::from_json(&with).unwrap();
        assert_eq!(c.experiment.unwrap().driver(), "monotonicity");
        let ineq = RunConfig::from_json(r#"{"experiment": {"driver": "inequalities", "tuples": 10}}"#).unwrap();
        assert!(ineq.problem.is_none());
    }
}
