//! Spectral thresholds: `lambda_1`, `lambda*` and `lambda_*`.
//!
//! All three minimize the Rayleigh quotient `D(u) / int |u|^p` over nonnegative
//! fields; they differ only in the extra constraint (none, `int a|u|^q >= 0`,
//! or `u = 0` on the minus set).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{self, capped_pow, curvature_floor, DescentOptions, Objective};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{
    add_power_gradient, add_weighted_gradient, p_mass_raw, weighted_mass_raw, Problem,
};
use crate::grid::Grid;
use crate::init::{initial_field, InitKind, Side};
use crate::linalg::{BandMatrix, Preconditioner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub energy_window_tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Largest accepted violation of `int a|u|^q >= 0` (normalized) for `lambda*`.
    pub feas_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            max_iters: 5000,
            grad_tol: 1e-10,
            energy_window_tol: 1e-13,
            n_starts: 4,
            seed: 42,
            feas_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub value: f64,
    #[serde(skip)]
    pub minimizer: Field,
    /// `max(0, -int a|u|^q)` of the normalized minimizer; 0 for unconstrained problems.
    pub feasibility_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of every start, in seed order.
    pub starts: Vec<f64>,
}

/// Augmented-Lagrangian outer loop: initial and largest penalty, number of multiplier updates.
const PENALTY_START: f64 = 1e1;
const PENALTY_MAX: f64 = 1e8;
const OUTER_ITERS: usize = 16;

/// Rayleigh quotient with an optional augmented-Lagrangian term for `int a|u|^q >= 0`.
struct Rayleigh<'a> {
    prob: &'a Problem,
    free: Vec<bool>,
    // (mu, multiplier)
    penalty: Option<(f64, f64)>,
}

struct Parts {
    mass: f64,
    quotient: f64,
    g_hat: f64,
}

impl Rayleigh<'_> {
    fn parts(&self, x: &[f64]) -> Parts {
        let p = self.prob.p();
        let mass = p_mass_raw(self.prob.grid(), x, p);
        let quotient = self.prob.kernel().energy(x) / mass;
        let g_hat = if self.penalty.is_some() {
            weighted_mass_raw(self.prob.weight(), x, self.prob.q()) / mass.powf(self.prob.q() / p)
        } else {
            0.0
        };
        Parts {
            mass,
            quotient,
            g_hat,
        }
    }

    fn kappa(&self, g_hat: f64) -> f64 {
        match self.penalty {
            Some((mu, nu)) => (nu - mu * g_hat).max(0.0),
            None => 0.0,
        }
    }

    /// Gradient of the normalized weighted mass `G / mass^{q/p}`.
    fn grad_g_hat(&self, x: &[f64], parts: &Parts) -> Vec<f64> {
        let (p, q) = (self.prob.p(), self.prob.q());
        let mut g = vec![0.0; x.len()];
        let mq = parts.mass.powf(q / p);
        add_weighted_gradient(self.prob.weight(), x, q, 1.0 / mq, &mut g);
        add_power_gradient(
            self.prob.grid(),
            x,
            p,
            -(q / p) * parts.g_hat / parts.mass,
            &mut g,
        );
        g
    }
}

impl Objective for Rayleigh<'_> {
    fn grid(&self) -> &Grid {
        self.prob.grid()
    }

    fn free(&self) -> &[bool] {
        &self.free
    }

    fn retract(&self, x: &mut [f64]) -> bool {
        for (v, &f) in x.iter_mut().zip(&self.free) {
            *v = if f { v.abs() } else { 0.0 };
        }
        let m = p_mass_raw(self.prob.grid(), x, self.prob.p());
        if !(m > 0.0 && m.is_finite()) {
            return false;
        }
        let s = m.powf(-1.0 / self.prob.p());
        x.iter_mut().for_each(|v| *v *= s);
        true
    }

    fn value(&self, x: &[f64]) -> f64 {
        let parts = self.parts(x);
        let mut v = parts.quotient;
        if let Some((mu, nu)) = self.penalty {
            let k = self.kappa(parts.g_hat);
            v += (k * k - nu * nu) / (2.0 * mu);
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let parts = self.parts(x);
        let mut g = vec![0.0; x.len()];
        self.prob.kernel().add_gradient(x, 1.0 / parts.mass, &mut g);
        add_power_gradient(
            self.prob.grid(),
            x,
            self.prob.p(),
            -parts.quotient / parts.mass,
            &mut g,
        );
        let k = self.kappa(parts.g_hat);
        if k > 0.0 {
            for (gi, hi) in g.iter_mut().zip(self.grad_g_hat(x, &parts)) {
                *gi -= k * hi;
            }
        }
        for (gi, &f) in g.iter_mut().zip(&self.free) {
            if !f {
                *gi = 0.0;
            }
        }
        g
    }

    fn preconditioner(&self, x: &[f64]) -> Preconditioner {
        let grid = self.prob.grid();
        let parts = self.parts(x);
        let mut band = BandMatrix::zeros(grid.len(), grid.bandwidth());
        self.prob.kernel().add_hessian(x, 1.0 / parts.mass, &mut band);
        let scale = descent::diag_scale(&band, &self.free);
        let k = self.kappa(parts.g_hat);
        let mut rank_one = None;
        if k > 0.0 {
            let q = self.prob.q();
            let floor = curvature_floor(x);
            let mq = parts.mass.powf(q / self.prob.p());
            let w = grid.quad_weights();
            for &i in self.prob.weight().minus_nodes() {
                let c = k * q * self.prob.weight().negative_part(i) * w[i] / mq;
                band.add_diag(i, (c * capped_pow(x[i], q - 2.0, floor)).min(1e300));
            }
            let mu = self.penalty.map(|p| p.0).unwrap_or(0.0);
            rank_one = Some((mu, self.grad_g_hat(x, &parts)));
        }
        descent::factorize(grid, &self.free, band, scale, rank_one)
    }
}

fn descent_options(opts: &EigenOptions) -> DescentOptions {
    DescentOptions {
        max_iters: opts.max_iters,
        grad_tol: opts.grad_tol,
        window_tol: opts.energy_window_tol,
        window: 25,
        step0: 1.0,
        backtrack: 0.5,
        armijo_c: 1e-4,
        step_tol: 1e-9,
    }
}

const EIGEN_CYCLE: [InitKind; 4] = [
    InitKind::EigenShape,
    InitKind::Noise,
    InitKind::PlusShape,
    InitKind::Constant,
];

struct Run {
    value: f64,
    x: Vec<f64>,
    gap: f64,
    iterations: usize,
    converged: bool,
}

fn run_start(prob: &Problem, free: &[bool], constrained: bool, k: usize, opts: &EigenOptions) -> Result<Run> {
    let kind = EIGEN_CYCLE[k % EIGEN_CYCLE.len()];
    let x0 = initial_field(prob.weight(), prob.q(), kind, opts.seed + k as u64, Side::Any, free)?;
    let dopts = descent_options(opts);
    let mut obj = Rayleigh {
        prob,
        free: free.to_vec(),
        penalty: None,
    };
    if !constrained {
        let out = descent::minimize(&obj, x0, &dopts);
        return Ok(Run {
            value: out.value,
            x: out.x,
            gap: 0.0,
            iterations: out.iterations,
            converged: out.converged,
        });
    }
    let mut x = x0;
    let mut nu = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut mu = PENALTY_START;
    for _ in 0..OUTER_ITERS {
        obj.penalty = Some((mu, nu));
        let out = descent::minimize(&obj, x, &dopts);
        iterations += out.iterations;
        x = out.x;
        let g_hat = obj.parts(&x).g_hat;
        let prev = gap;
        gap = (-g_hat).max(0.0);
        nu = (nu - mu * g_hat).max(0.0);
        converged = out.converged;
        if converged && gap <= opts.feas_tol {
            break;
        }
        // raise the penalty only when the multiplier update stops paying off
        if gap > 0.25 * prev {
            mu = (mu * 10.0).min(PENALTY_MAX);
        }
    }
    obj.penalty = None;
    let value = obj.parts(&x).quotient;
    Ok(Run {
        value,
        x,
        gap,
        iterations,
        converged: converged && gap <= opts.feas_tol,
    })
}

fn multistart(prob: &Problem, free: Vec<bool>, constrained: bool, opts: &EigenOptions) -> Result<EigenReport> {
    if !free.iter().any(|&f| f) {
        return Err(Error::Degenerate("no free node left after masking".into()));
    }
    let n = opts.n_starts.max(1);
    let runs: Vec<Result<Run>> = (0..n)
        .into_par_iter()
        .map(|k| run_start(prob, &free, constrained, k, opts))
        .collect();
    let runs: Vec<Run> = runs.into_iter().collect::<Result<_>>()?;
    // prefer converged (hence feasible) runs; fall back to all
    let score: Vec<f64> = runs
        .iter()
        .map(|r| if r.converged { r.value } else { f64::INFINITY })
        .collect();
    let best = descent::pick_best(&score)
        .or_else(|| descent::pick_best(&runs.iter().map(|r| r.value).collect::<Vec<_>>()))
        .ok_or(Error::NonFinite("Rayleigh quotient"))?;
    let starts = runs.iter().map(|r| r.value).collect();
    let r = &runs[best];
    Ok(EigenReport {
        value: r.value,
        minimizer: Field::new(prob.grid().clone(), r.x.clone())?,
        feasibility_gap: r.gap,
        iterations: r.iterations,
        converged: r.converged,
        starts,
    })
}

/// `lambda_1`: least Rayleigh quotient over the admissible space.
pub fn principal_eigen(prob: &Problem) -> Result<EigenReport> {
    principal_eigen_with(prob, &EigenOptions::default())
}

pub fn principal_eigen_with(prob: &Problem, opts: &EigenOptions) -> Result<EigenReport> {
    multistart(prob, prob.grid().dof_mask().to_vec(), false, opts)
}

/// `lambda*`: least Rayleigh quotient among fields with `int a|u|^q >= 0`.
pub fn lambda_star(prob: &Problem) -> Result<EigenReport> {
    lambda_star_with(prob, &EigenOptions::default())
}

pub fn lambda_star_with(prob: &Problem, opts: &EigenOptions) -> Result<EigenReport> {
    multistart(prob, prob.grid().dof_mask().to_vec(), true, opts)
}

/// `lambda*(p)`: the same threshold with the constraint `int a|u|^p >= 0`, the
/// limit of `lambda*(q)` as `q -> p`.
pub fn lambda_star_at_p(prob: &Problem, opts: &EigenOptions) -> Result<EigenReport> {
    let lim = prob.at_q_limit();
    multistart(&lim, lim.grid().dof_mask().to_vec(), true, opts)
}

/// `lambda_*`: least Rayleigh quotient among fields vanishing on the minus set.
pub fn lambda_lower_star(prob: &Problem) -> Result<EigenReport> {
    lambda_lower_star_with(prob, &EigenOptions::default())
}

pub fn lambda_lower_star_with(prob: &Problem, opts: &EigenOptions) -> Result<EigenReport> {
    let w = prob.weight();
    let free: Vec<bool> = (0..prob.grid().len())
        .map(|i| prob.grid().is_free(i) && !w.is_minus(i))
        .collect();
    multistart(prob, free, false, opts)
}

/// `int a phi^q` for a field `phi`, typically the principal eigenfunction.
pub fn weighted_eigen_mass(prob: &Problem, phi: &Field) -> f64 {
    weighted_mass_raw(prob.weight(), phi.values(), prob.q())
}

/// The three thresholds of one problem together with `int a phi1^q`.
#[derive(Debug, Clone, Serialize)]
pub struct Thresholds {
    pub lambda_1: f64,
    pub lambda_star: f64,
    pub lambda_lower_star: f64,
    /// `int a phi1^q` for the normalized principal eigenfunction.
    pub phi_weighted_mass: f64,
    pub lambda_star_gap: f64,
    pub converged: bool,
    #[serde(skip)]
    pub phi: Field,
}

pub fn thresholds(prob: &Problem, opts: &EigenOptions) -> Result<Thresholds> {
    let l1 = principal_eigen_with(prob, opts)?;
    let ls = lambda_star_with(prob, opts)?;
    let lu = lambda_lower_star_with(prob, opts)?;
    Ok(Thresholds {
        lambda_1: l1.value,
        lambda_star: ls.value,
        lambda_lower_star: lu.value,
        phi_weighted_mass: weighted_eigen_mass(prob, &l1.minimizer),
        lambda_star_gap: ls.feasibility_gap,
        converged: l1.converged && ls.converged && lu.converged,
        phi: l1.minimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_weight, BoundaryCondition, Weight, WeightSpec};
    use std::f64::consts::PI;

    fn two_bump(bc: BoundaryCondition, n: usize, a_minus: f64) -> Weight {
        let g = build_grid(1, &[1.0], &[n], bc).unwrap();
        build_weight(
            &g,
            &WeightSpec::TwoBump1d {
                a_plus: 1.0,
                a_minus,
                delta: 0.4,
            },
        )
        .unwrap()
    }

    #[test]
    fn dirichlet_tridiagonal_oracle() {
        let n = 41;
        let prob = Problem::new(2.0, 1.5, 0.0, two_bump(BoundaryCondition::Dirichlet, n, 5.0)).unwrap();
        let rep = principal_eigen(&prob).unwrap();
        let h = 1.0 / (n - 1) as f64;
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!(rep.converged);
        assert!((rep.value - exact).abs() <= 1e-9 * exact, "{} vs {exact}", rep.value);
        assert!((crate::functionals::p_mass(&rep.minimizer, 2.0) - 1.0).abs() < 1e-12);
        assert!(rep.minimizer.is_nonnegative());
    }

    #[test]
    fn neumann_eigenfunction_is_constant() {
        for p in [2.0, 3.0] {
            let prob = Problem::new(p, 1.5, 0.0, two_bump(BoundaryCondition::Neumann, 41, 5.0)).unwrap();
            let rep = principal_eigen(&prob).unwrap();
            assert!(rep.value <= 1e-8, "p = {p}: {}", rep.value);
            let (lo, hi) = (rep.minimizer.min(), rep.minimizer.max());
            assert!((hi - lo) / hi < 1e-6, "p = {p}: variation {}", (hi - lo) / hi);
        }
    }

    #[test]
    fn masked_problem_on_one_interior_node() {
        let g = build_grid(1, &[1.0], &[7], BoundaryCondition::Dirichlet).unwrap();
        let mut v = vec![-1.0; 7];
        v[3] = 1.0;
        let w = Weight::from_values(&g, v).unwrap();
        let prob = Problem::new(2.0, 1.5, 0.0, w).unwrap();
        let rep = lambda_lower_star(&prob).unwrap();
        // hat of height 1 at x = 0.5: D = 2 h (1/h)^2, mass = h
        let h = 1.0 / 6.0;
        assert!((rep.value - 2.0 / (h * h)).abs() < 1e-8 * rep.value);
    }

    #[test]
    fn fully_masked_problem_is_degenerate() {
        let g = build_grid(1, &[1.0], &[5], BoundaryCondition::Dirichlet).unwrap();
        let w = Weight::from_values(&g, vec![1.0, -1.0, -1.0, -1.0, 1.0]).unwrap();
        let prob = Problem::new(2.0, 1.5, 0.0, w).unwrap();
        assert!(matches!(lambda_lower_star(&prob), Err(Error::Degenerate(_))));
    }

    #[test]
    fn constrained_threshold_exceeds_lambda_1_for_strong_negative_part() {
        let prob = Problem::new(2.0, 1.5, 0.0, two_bump(BoundaryCondition::Dirichlet, 61, 5.0)).unwrap();
        let l1 = principal_eigen(&prob).unwrap();
        let phi_mass = weighted_eigen_mass(&prob, &l1.minimizer);
        assert!(phi_mass < 0.0);
        let ls = lambda_star(&prob).unwrap();
        let lu = lambda_lower_star(&prob).unwrap();
        assert!(ls.feasibility_gap <= 1e-8, "gap {}", ls.feasibility_gap);
        assert!(ls.value > l1.value + 1e-3, "{} vs {}", ls.value, l1.value);
        assert!(ls.value <= lu.value + 1e-6, "{} vs {}", ls.value, lu.value);
    }

    #[test]
    fn constrained_threshold_equals_lambda_1_for_weak_negative_part() {
        let prob = Problem::new(2.0, 1.5, 0.0, two_bump(BoundaryCondition::Dirichlet, 61, 0.1)).unwrap();
        let l1 = principal_eigen(&prob).unwrap();
        assert!(weighted_eigen_mass(&prob, &l1.minimizer) > 0.0);
        let ls = lambda_star(&prob).unwrap();
        assert!((ls.value - l1.value).abs() <= 2e-6, "{} vs {}", ls.value, l1.value);
    }
}
