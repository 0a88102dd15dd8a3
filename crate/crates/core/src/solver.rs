//! Constrained minimizers `V±` on the level sets `S± = {int a|u|^q = ±1}` and the
//! solutions `U±` obtained from them by rescaling.
//!
//! Minimizing `E` on `S±` is done through the degree-0 quotient
//! `R(u) = E(u) / (±int a|u|^q)^{p/q}`, which agrees with `E` on `S±` and is
//! invariant under the radial retraction. At a point of `S±`
//!
//! ```text
//! grad R = grad E - (p/q) E (±grad G),     G = int a|u|^q,
//! ```
//!
//! and with `U = t V`, `t = (±m)^{-1/(p-q)}`, one has
//! `grad I(U) = t^{p-1} / p * grad R(V)`, so stationarity of `R` is exactly the
//! discrete equation for `U`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{self, capped_pow, curvature_floor, DescentOptions, Objective, TraceRow};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{
    add_weighted_gradient, breakdown_raw, grad_e_raw, grad_i_raw, ray_max_from_values, scaled_sup,
    weighted_mass_raw, EnergyBreakdown, Problem,
};
use crate::grid::{components, Grid, Weight};
use crate::init::{initial_field, InitKind, Side};
use crate::linalg::{BandMatrix, Preconditioner};
use crate::spectrum::Thresholds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stationarity target for the constrained problem (pointwise scaled gradient).
    pub grad_tol: f64,
    /// Relative change of the objective over the last 25 iterations.
    pub energy_window_tol: f64,
    /// Residual the rescaled solution `U` must reach.
    pub residual_tol: f64,
    pub step: f64,
    pub backtrack: f64,
    pub armijo_c: f64,
    pub seed: u64,
    pub n_starts: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 20_000,
            grad_tol: 1e-9,
            energy_window_tol: 1e-12,
            residual_tol: 1e-8,
            step: 1.0,
            backtrack: 0.5,
            armijo_c: 1e-4,
            seed: 42,
            n_starts: 4,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("energy_window_tol", self.energy_window_tol),
            ("residual_tol", self.residual_tol),
            ("step", self.step),
            ("armijo_c", self.armijo_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config(format!(
                "solver.backtrack must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if self.armijo_c >= 1.0 {
            return Err(Error::Config("solver.armijo_c must be < 1".into()));
        }
        if self.n_starts == 0 || self.max_iters == 0 {
            return Err(Error::Config("solver.n_starts and solver.max_iters must be >= 1".into()));
        }
        Ok(())
    }

    fn descent(&self, grad_tol: f64) -> DescentOptions {
        DescentOptions {
            max_iters: self.max_iters,
            grad_tol,
            window_tol: self.energy_window_tol,
            window: 25,
            step0: self.step,
            backtrack: self.backtrack,
            armijo_c: self.armijo_c,
            step_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn side(self) -> Side {
        match self {
            Sign::Plus => Side::Plus,
            Sign::Minus => Side::Minus,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StartSummary {
    pub seed: u64,
    pub init: InitKind,
    pub m_value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Consistency identities evaluated on the returned solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Identities {
    /// `|E(U) - int a U^q| / max(1, |E(U)|)`: `U` tested in its own equation.
    pub weak_form_gap: f64,
    /// `|I(U) - (1/p - 1/q) int a U^q|`.
    pub energy_gap: f64,
    /// `|I(U-) - (1/q - 1/p)(-m-)^{-q/(p-q)}|` relative, second solution only.
    pub mountain_pass_gap: Option<f64>,
    /// `|max_t I(t U-) - I(U-)|` relative, second solution only.
    pub ray_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub sign: Sign,
    /// `V` for [`minimize_on_s`], `U` for [`ground_state`] and [`second_solution`].
    #[serde(skip)]
    pub field: Field,
    /// The constrained minimizer `V` on `S±`.
    #[serde(skip)]
    pub v_field: Field,
    /// `m+` or `m-`.
    pub m_value: f64,
    /// `I(U)`; equals `M` for the ground state.
    #[serde(rename = "M_value")]
    pub i_value: Option<f64>,
    /// Breakdown of the returned field.
    pub energies: EnergyBreakdown,
    /// `residual_norm` of the returned field.
    pub residual: f64,
    /// Discrete Lagrange multiplier of `V`, to compare with `±m`.
    pub multiplier: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Present when the run left the regime where the minimum is attained.
    pub out_of_regime: Option<String>,
    pub identities: Identities,
    pub starts: Vec<StartSummary>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Radial projection onto `S±`.
pub fn project_s(u: &Field, a: &Weight, q: f64, sign: Sign) -> Result<Field> {
    u.same_grid(a.values())?;
    let g = sign.value() * weighted_mass_raw(a, u.values(), q);
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::ProjectionUndefined(format!(
            "{}int a|u|^q = {g:e} must be positive",
            if sign == Sign::Plus { "" } else { "-" }
        )));
    }
    Ok(u.scaled(g.powf(-1.0 / q)))
}

struct Quotient<'a> {
    prob: &'a Problem,
    s: f64,
}

impl Quotient<'_> {
    fn sg(&self, x: &[f64]) -> f64 {
        self.s * weighted_mass_raw(self.prob.weight(), x, self.prob.q())
    }
}

impl Objective for Quotient<'_> {
    fn grid(&self) -> &Grid {
        self.prob.grid()
    }

    fn free(&self) -> &[bool] {
        self.prob.grid().dof_mask()
    }

    fn retract(&self, x: &mut [f64]) -> bool {
        for (v, &f) in x.iter_mut().zip(self.free()) {
            *v = if f { v.abs() } else { 0.0 };
        }
        let g = self.sg(x);
        if !(g > 0.0 && g.is_finite()) {
            return false;
        }
        let t = g.powf(-1.0 / self.prob.q());
        x.iter_mut().for_each(|v| *v *= t);
        true
    }

    fn value(&self, x: &[f64]) -> f64 {
        let b = breakdown_raw(self.prob, x);
        b.e_lambda / (self.s * b.weighted).powf(self.prob.p() / self.prob.q())
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (p, q) = (self.prob.p(), self.prob.q());
        let b = breakdown_raw(self.prob, x);
        let sg = self.s * b.weighted;
        let c = sg.powf(-p / q);
        let mut g: Vec<f64> = grad_e_raw(self.prob, x).into_iter().map(|v| v * c).collect();
        let kappa = -(p / q) * b.e_lambda * self.s * c / sg;
        add_weighted_gradient(self.prob.weight(), x, q, kappa, &mut g);
        for (gi, &f) in g.iter_mut().zip(self.free()) {
            if !f {
                *gi = 0.0;
            }
        }
        g
    }

    fn preconditioner(&self, x: &[f64]) -> Preconditioner {
        let (p, q, lambda) = (self.prob.p(), self.prob.q(), self.prob.lambda());
        let grid = self.prob.grid();
        let b = breakdown_raw(self.prob, x);
        let sg = self.s * b.weighted;
        let c = sg.powf(-p / q);
        let kappa = -(p / q) * b.e_lambda * self.s * c / sg;
        let mut band = BandMatrix::zeros(grid.len(), grid.bandwidth());
        self.prob.kernel().add_hessian(x, c, &mut band);
        let scale = descent::diag_scale(&band, self.free());
        let floor = curvature_floor(x);
        let w = grid.quad_weights();
        let a = self.prob.weight().values().values();
        for i in 0..grid.len() {
            let mut d = 0.0;
            if lambda < 0.0 {
                d += -lambda * p * c * w[i] * capped_pow(x[i], p - 2.0, floor);
            }
            let qa = kappa * q * a[i];
            if qa > 0.0 {
                d += qa * w[i] * capped_pow(x[i], q - 2.0, floor);
            }
            band.add_diag(i, d.min(1e300));
        }
        descent::factorize(grid, self.free(), band, scale, None)
    }

    fn halt(&self, value: f64) -> Option<String> {
        (self.s > 0.0 && value < 0.0).then(|| {
            format!(
                "E < 0 on S+ (value {value:e}): lambda exceeds lambda*, where m+ < 0 and the infimum over S+ is not attained"
            )
        })
    }
}

struct StartRun {
    x: Vec<f64>,
    m: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    halted: Option<String>,
    trace: Vec<TraceRow>,
}

fn rescale_factor(prob: &Problem, s: f64, m: f64) -> Option<f64> {
    (s * m > 0.0).then(|| (s * m).powf(-1.0 / (prob.p() - prob.q())))
}

fn solution_residual(prob: &Problem, x: &[f64], s: f64, m: f64) -> (f64, f64) {
    match rescale_factor(prob, s, m) {
        Some(t) => {
            let u: Vec<f64> = x.iter().map(|v| t * v).collect();
            let sup = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            (scaled_sup(prob.grid(), &grad_i_raw(prob, &u)), residual_scale(prob, sup))
        }
        None => (f64::INFINITY, 1.0),
    }
}

/// Magnitude of the terms of the equation at a solution of sup norm `sup`;
/// `residual_tol` is relative to it (absolute for solutions of size O(1) or smaller).
pub fn residual_scale(prob: &Problem, sup: f64) -> f64 {
    sup.powf(prob.p() - 1.0).max(1.0)
}

/// One start: minimize the quotient, then keep tightening the stationarity
/// target until the rescaled field meets `residual_tol`.
fn solve_start(prob: &Problem, sign: Sign, opts: &SolveOptions, init: InitKind, seed: u64) -> Result<StartRun> {
    let s = sign.value();
    let obj = Quotient { prob, s };
    let mut x = initial_field(prob.weight(), prob.q(), init, seed, sign.side(), prob.grid().dof_mask())?;
    let mut grad_tol = opts.grad_tol;
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut m = f64::NAN;
    for _round in 0..6 {
        let out = descent::minimize(&obj, x, &opts.descent(grad_tol));
        iterations += out.iterations;
        let offset = trace.len();
        trace.extend(out.trace.into_iter().map(|mut r| {
            r.iter += offset;
            r
        }));
        x = out.x;
        m = out.value;
        let (residual, scale) = solution_residual(prob, &x, s, m);
        let converged = out.halted.is_none() && residual <= opts.residual_tol * scale;
        if converged || out.halted.is_some() || !out.converged {
            return Ok(StartRun {
                x,
                m,
                residual,
                iterations,
                converged,
                halted: out.halted,
                trace,
            });
        }
        let ratio = (opts.residual_tol * scale / residual).min(1.0);
        grad_tol = (out.stationarity * ratio * 0.25).min(grad_tol * 0.25).max(1e-300);
    }
    let (residual, scale) = solution_residual(prob, &x, s, m);
    Ok(StartRun {
        x,
        m,
        residual,
        iterations,
        converged: residual <= opts.residual_tol * scale,
        halted: None,
        trace,
    })
}

const PLUS_STARTS: [InitKind; 4] = [
    InitKind::PlusShape,
    InitKind::Noise,
    InitKind::EigenShape,
    InitKind::Constant,
];

const MINUS_STARTS: [InitKind; 4] = [
    InitKind::EigenShape,
    InitKind::Noise,
    InitKind::Constant,
    InitKind::PlusShape,
];

/// Default `(init, seed)` list: shapes cycled, seeds `seed, seed + 1, ...`.
pub fn default_starts(sign: Sign, opts: &SolveOptions) -> Vec<(InitKind, u64)> {
    let cycle = match sign {
        Sign::Plus => PLUS_STARTS,
        Sign::Minus => MINUS_STARTS,
    };
    (0..opts.n_starts)
        .map(|k| (cycle[k % cycle.len()], opts.seed + k as u64))
        .collect()
}

/// Starts for multistart uniqueness checks: one bump on each plus component, then the default cycle.
pub fn diverse_starts(weight: &Weight, n: usize, seed: u64) -> Vec<(InitKind, u64)> {
    let mask: Vec<bool> = (0..weight.grid().len())
        .map(|i| weight.is_plus(i) && weight.grid().is_free(i))
        .collect();
    let ncomp = components(weight.grid(), &mask).len();
    let mut kinds: Vec<InitKind> = (0..ncomp).map(|index| InitKind::PlusComponent { index }).collect();
    kinds.extend(PLUS_STARTS);
    (0..n)
        .map(|k| (kinds[k % kinds.len()], seed + k as u64))
        .collect()
}

/// Least-squares multiplier `alpha` in `grad E(V) = (p/q) alpha grad G(V)`.
fn multiplier(prob: &Problem, x: &[f64]) -> f64 {
    let (p, q) = (prob.p(), prob.q());
    let ge = grad_e_raw(prob, x);
    let mut gg = vec![0.0; x.len()];
    add_weighted_gradient(prob.weight(), x, q, 1.0, &mut gg);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        if prob.grid().is_free(i) {
            num += ge[i] * gg[i];
            den += gg[i] * gg[i];
        }
    }
    (q / p) * num / den
}

fn run_starts(prob: &Problem, sign: Sign, opts: &SolveOptions, starts: &[(InitKind, u64)]) -> Result<Vec<StartRun>> {
    opts.validate()?;
    starts
        .par_iter()
        .map(|&(init, seed)| solve_start(prob, sign, opts, init, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn summarize(runs: &[StartRun], starts: &[(InitKind, u64)]) -> Vec<StartSummary> {
    runs.iter()
        .zip(starts)
        .map(|(r, &(init, seed))| StartSummary {
            seed,
            init,
            m_value: r.m,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect()
}

fn report_from(prob: &Problem, sign: Sign, run: &StartRun, starts: Vec<StartSummary>) -> Result<SolveReport> {
    let v = Field::new(prob.grid().clone(), run.x.clone())?;
    let energies = breakdown_raw(prob, &run.x);
    Ok(SolveReport {
        sign,
        field: v.clone(),
        v_field: v,
        m_value: run.m,
        i_value: None,
        energies,
        residual: scaled_sup(prob.grid(), &grad_i_raw(prob, &run.x)),
        multiplier: multiplier(prob, &run.x),
        iterations: run.iterations,
        converged: run.converged,
        out_of_regime: run.halted.clone(),
        identities: Identities::default(),
        starts,
        trace: run.trace.clone(),
    })
}

/// `V±` minimizing `E` on `S±`, best of the default multistart.
pub fn minimize_on_s(prob: &Problem, sign: Sign, opts: &SolveOptions) -> Result<SolveReport> {
    minimize_on_s_from(prob, sign, opts, &default_starts(sign, opts))
}

pub fn minimize_on_s_from(
    prob: &Problem,
    sign: Sign,
    opts: &SolveOptions,
    starts: &[(InitKind, u64)],
) -> Result<SolveReport> {
    let runs = run_starts(prob, sign, opts, starts)?;
    let summary = summarize(&runs, starts);
    // a halted start proves the regime is left; report it instead of the others
    if let Some(r) = runs.iter().find(|r| r.halted.is_some() && r.m < 0.0) {
        return report_from(prob, sign, r, summary);
    }
    let values: Vec<f64> = runs.iter().map(|r| r.m).collect();
    let best = descent::pick_best(&values).ok_or(Error::NonFinite("constrained minimum"))?;
    report_from(prob, sign, &runs[best], summary)
}

fn finish(prob: &Problem, mut rep: SolveReport) -> Result<SolveReport> {
    let s = rep.sign.value();
    let t = rescale_factor(prob, s, rep.m_value).ok_or_else(|| {
        Error::regime(
            match rep.sign {
                Sign::Plus => "ground state needs m+ > 0, i.e. lambda < lambda*",
                Sign::Minus => "second solution needs m- < 0, i.e. int a phi1^q < 0 and lambda1 < lambda < lambda*",
            },
            format!("m = {:e}", rep.m_value),
        )
    })?;
    let u = rep.v_field.scaled(t);
    let b = breakdown_raw(prob, u.values());
    rep.residual = scaled_sup(prob.grid(), &grad_i_raw(prob, u.values()));
    rep.i_value = Some(b.i_lambda);
    rep.energies = b;
    let (p, q) = (prob.p(), prob.q());
    rep.identities.weak_form_gap = (b.e_lambda - b.weighted).abs() / b.e_lambda.abs().max(1.0);
    rep.identities.energy_gap = (b.i_lambda - (1.0 / p - 1.0 / q) * b.weighted).abs();
    if rep.sign == Sign::Minus {
        let mp = (1.0 / q - 1.0 / p) * (-rep.m_value).powf(-q / (p - q));
        rep.identities.mountain_pass_gap = Some((b.i_lambda - mp).abs() / mp.abs().max(1e-300));
        rep.identities.ray_gap = ray_max_from_values(p, q, b.e_lambda, b.weighted)
            .ok()
            .map(|(_, v)| (v - b.i_lambda).abs() / b.i_lambda.abs().max(1e-300));
    }
    rep.field = u;
    Ok(rep)
}

/// Ground state `U+ = m+^{-1/(p-q)} V+`.
pub fn ground_state(prob: &Problem, opts: &SolveOptions) -> Result<SolveReport> {
    ground_state_from(prob, opts, &default_starts(Sign::Plus, opts))
}

pub fn ground_state_from(prob: &Problem, opts: &SolveOptions, starts: &[(InitKind, u64)]) -> Result<SolveReport> {
    let rep = minimize_on_s_from(prob, Sign::Plus, opts, starts)?;
    if let Some(reason) = &rep.out_of_regime {
        return Err(Error::regime("ground state needs lambda < lambda*", reason.clone()));
    }
    let rep = finish(prob, rep)?;
    Ok(rep)
}

/// Ground states from every start separately (for uniqueness checks).
pub fn ground_state_each(prob: &Problem, opts: &SolveOptions, starts: &[(InitKind, u64)]) -> Result<Vec<SolveReport>> {
    let runs = run_starts(prob, Sign::Plus, opts, starts)?;
    let summary = summarize(&runs, starts);
    runs.iter()
        .map(|r| {
            if let Some(reason) = &r.halted {
                return Err(Error::regime("ground state needs lambda < lambda*", reason.clone()));
            }
            finish(prob, report_from(prob, Sign::Plus, r, summary.clone())?)
        })
        .collect()
}

/// Second solution `U- = (-m-)^{-1/(p-q)} V-`.
pub fn second_solution(prob: &Problem, opts: &SolveOptions) -> Result<SolveReport> {
    let rep = minimize_on_s(prob, Sign::Minus, opts)?;
    finish(prob, rep)
}

/// Rejects ground-state runs outside `lambda < lambda*`.
pub fn check_ground_state_regime(prob: &Problem, th: &Thresholds) -> Result<()> {
    if prob.lambda() >= th.lambda_star {
        return Err(Error::regime(
            "ground state needs lambda < lambda*",
            format!("lambda = {}, lambda* = {}", prob.lambda(), th.lambda_star),
        ));
    }
    Ok(())
}

/// Rejects second-solution runs outside `int a phi1^q < 0, lambda1 < lambda < lambda*`.
pub fn check_second_regime(prob: &Problem, th: &Thresholds) -> Result<()> {
    if th.phi_weighted_mass >= 0.0 {
        return Err(Error::regime(
            "second solution needs int a phi1^q < 0",
            format!("int a phi1^q = {:e}", th.phi_weighted_mass),
        ));
    }
    if !(prob.lambda() > th.lambda_1 && prob.lambda() < th.lambda_star) {
        return Err(Error::regime(
            "second solution needs lambda1 < lambda < lambda*",
            format!(
                "lambda = {}, lambda1 = {}, lambda* = {}",
                prob.lambda(),
                th.lambda_1,
                th.lambda_star
            ),
        ));
    }
    Ok(())
}

/// Direct minimization of `I` over `A+ = {int a|u|^q > 0}`, independent of the `S+` route.
struct Direct<'a> {
    prob: &'a Problem,
}

impl Objective for Direct<'_> {
    fn grid(&self) -> &Grid {
        self.prob.grid()
    }

    fn free(&self) -> &[bool] {
        self.prob.grid().dof_mask()
    }

    fn retract(&self, x: &mut [f64]) -> bool {
        for (v, &f) in x.iter_mut().zip(self.free()) {
            *v = if f { v.abs() } else { 0.0 };
        }
        // leaving A+ is an infinite wall
        weighted_mass_raw(self.prob.weight(), x, self.prob.q()) > 0.0
    }

    fn value(&self, x: &[f64]) -> f64 {
        breakdown_raw(self.prob, x).i_lambda
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        grad_i_raw(self.prob, x)
    }

    fn preconditioner(&self, x: &[f64]) -> Preconditioner {
        let (p, q, lambda) = (self.prob.p(), self.prob.q(), self.prob.lambda());
        let grid = self.prob.grid();
        let mut band = BandMatrix::zeros(grid.len(), grid.bandwidth());
        self.prob.kernel().add_hessian(x, 1.0 / p, &mut band);
        let scale = descent::diag_scale(&band, self.free());
        let floor = curvature_floor(x);
        let w = grid.quad_weights();
        for i in 0..grid.len() {
            let mut d = 0.0;
            if lambda < 0.0 {
                d += -lambda * w[i] * capped_pow(x[i], p - 2.0, floor);
            }
            let am = self.prob.weight().negative_part(i);
            if am > 0.0 {
                d += am * w[i] * capped_pow(x[i], q - 2.0, floor);
            }
            band.add_diag(i, d.min(1e300));
        }
        descent::factorize(grid, self.free(), band, scale, None)
    }
}

/// `M` computed by minimizing `I` directly over `A+`; `grad_tol` targets `residual_tol`.
pub fn ground_state_direct(prob: &Problem, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    let obj = Direct { prob };
    let mut x = initial_field(
        prob.weight(),
        prob.q(),
        InitKind::PlusShape,
        opts.seed,
        Side::Plus,
        prob.grid().dof_mask(),
    )?;
    let b = breakdown_raw(prob, &x);
    if !(b.e_lambda > 0.0) {
        return Err(Error::regime(
            "direct route needs E > 0 on the start, i.e. lambda below lambda*",
            format!("E = {:e}", b.e_lambda),
        ));
    }
    let t = (b.weighted / b.e_lambda).powf(1.0 / (prob.p() - prob.q()));
    x.iter_mut().for_each(|v| *v *= t);
    let out = descent::minimize(&obj, x, &opts.descent(opts.residual_tol));
    let u = Field::new(prob.grid().clone(), out.x)?;
    let energies = breakdown_raw(prob, u.values());
    let v = project_s(&u, prob.weight(), prob.q(), Sign::Plus)?;
    Ok(SolveReport {
        sign: Sign::Plus,
        m_value: breakdown_raw(prob, v.values()).e_lambda,
        field: u,
        v_field: v,
        i_value: Some(energies.i_lambda),
        energies,
        residual: out.stationarity,
        multiplier: f64::NAN,
        iterations: out.iterations,
        converged: out.converged,
        out_of_regime: out.halted,
        identities: Identities::default(),
        starts: Vec::new(),
        trace: out.trace,
    })
}

/// Positivity flags of a nonnegative field relative to `eps_pos * max(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    pub trivial: bool,
    pub positive_on_plus: bool,
    pub positive_everywhere: bool,
    /// Share of free nodes at or below the threshold.
    pub dead_core_fraction: f64,
    pub min_on_plus: f64,
    pub max: f64,
}

/// Positivity of `u` on the free plus nodes and on all free nodes.
pub fn positivity_report(u: &Field, w: &Weight, eps_pos: f64) -> Result<PositivityReport> {
    u.same_grid(w.values())?;
    if !(eps_pos > 0.0) {
        return Err(Error::Domain(format!("eps_pos must be positive, got {eps_pos}")));
    }
    let grid = u.grid();
    let max = u.max();
    let vals = u.values();
    let free: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_free(i)).collect();
    let min_on_plus = w
        .plus_nodes()
        .iter()
        .filter(|&&i| grid.is_free(i))
        .map(|&i| vals[i])
        .fold(f64::INFINITY, f64::min);
    if !(max > 0.0) {
        return Ok(PositivityReport {
            trivial: true,
            positive_on_plus: false,
            positive_everywhere: false,
            dead_core_fraction: 1.0,
            min_on_plus,
            max,
        });
    }
    let thr = eps_pos * max;
    let dead = free.iter().filter(|&&i| vals[i] <= thr).count();
    Ok(PositivityReport {
        trivial: false,
        positive_on_plus: min_on_plus > thr,
        positive_everywhere: dead == 0,
        dead_core_fraction: dead as f64 / free.len().max(1) as f64,
        min_on_plus,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};

    fn prob(lambda: f64, a_minus: f64, n: usize) -> Problem {
        let g = build_grid(1, &[1.0], &[n], BoundaryCondition::Dirichlet).unwrap();
        let w = build_weight(
            &g,
            &WeightSpec::TwoBump1d {
                a_plus: 1.0,
                a_minus,
                delta: 0.4,
            },
        )
        .unwrap();
        Problem::new(2.0, 1.5, lambda, w).unwrap()
    }

    #[test]
    fn projection_examples() {
        let p = prob(0.0, 5.0, 11);
        let one = Field::from_fn(p.grid().clone(), |_| 1.0);
        let g = weighted_mass_raw(p.weight(), one.values(), 1.5);
        assert!(g < 0.0);
        let mut v = vec![0.0; 11];
        v[1] = 1.0;
        let u = Field::new(p.grid().clone(), v).unwrap();
        let g = weighted_mass_raw(p.weight(), u.values(), 1.5);
        let scaled = u.scaled(2.0 * g.powf(-1.0 / 1.5));
        let back = project_s(&scaled, p.weight(), 1.5, Sign::Plus).unwrap();
        assert!((weighted_mass_raw(p.weight(), back.values(), 1.5) - 1.0).abs() < 1e-14);
        let again = project_s(&back, p.weight(), 1.5, Sign::Plus).unwrap();
        assert!(crate::field::sup_distance(&back, &again) < 1e-15);
        let z = Field::zeros(p.grid().clone());
        assert!(matches!(
            project_s(&z, p.weight(), 1.5, Sign::Plus),
            Err(Error::ProjectionUndefined(_))
        ));
    }

    #[test]
    fn ground_state_identities() {
        let p = prob(-1.0, 5.0, 81);
        let rep = ground_state(&p, &SolveOptions::default()).unwrap();
        assert!(rep.converged, "residual {}", rep.residual);
        assert!(rep.m_value > 0.0);
        assert!(rep.residual <= 1e-8);
        assert!(rep.i_value.unwrap() < 0.0);
        assert!(rep.identities.weak_form_gap < 1e-6);
        assert!(rep.identities.energy_gap < 1e-6);
        assert!((rep.multiplier - rep.m_value).abs() < 1e-3 * rep.m_value);
        assert!(rep.field.is_nonnegative());
        let v = rep.v_field.values();
        assert!((weighted_mass_raw(p.weight(), v, 1.5) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn direct_route_agrees() {
        let p = prob(-1.0, 5.0, 81);
        let opts = SolveOptions::default();
        let a = ground_state(&p, &opts).unwrap();
        let b = ground_state_direct(&p, &opts).unwrap();
        assert!(b.converged);
        assert!((a.i_value.unwrap() - b.i_value.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn positivity_flags() {
        let p = prob(0.0, 5.0, 11);
        let one = Field::from_fn(p.grid().clone(), |_| 1.0);
        let r = positivity_report(&one, p.weight(), 1e-6).unwrap();
        assert!(r.positive_everywhere && r.positive_on_plus);
        assert_eq!(r.dead_core_fraction, 0.0);
        let mut v = vec![0.0; 11];
        for &i in p.weight().plus_nodes() {
            v[i] = 1.0;
        }
        let u = Field::admissible(p.grid().clone(), v).unwrap();
        let r = positivity_report(&u, p.weight(), 1e-6).unwrap();
        assert!(r.positive_on_plus && !r.positive_everywhere);
        let z = Field::zeros(p.grid().clone());
        assert!(positivity_report(&z, p.weight(), 1e-6).unwrap().trivial);
    }
}
