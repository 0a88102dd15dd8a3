//! Dead cores: explicit barriers, extraction of the region where a solution
//! vanishes, the sweep over `a_n = a+ - n a-`, and the splitting of a 1D
//! multi-bump solution into its bumps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{residual_norm, Problem};
use crate::grid::{components, scale_negative_part, Grid, Weight};
use crate::solver::{ground_state, SolveOptions};
use crate::spectrum::principal_eigen;

/// Which amplitude formula a barrier uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierRegime {
    /// Any `p`, `lambda <= 0`.
    General,
    /// `p = 2`, `lambda > 0`.
    P2PositiveLambda,
}

/// `w(x) = k (|x - x0|^2 - t^2)^beta` on `t <= |x - x0| <= R`, zero inside `B_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub center: Vec<f64>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub regime: BarrierRegime,
}

/// `beta = p / (p - q)`.
pub fn barrier_exponent(p: f64, q: f64) -> f64 {
    p / (p - q)
}

/// Amplitude `k` making the barrier a supersolution on the annulus for the weight `a+ - n a-`,
/// given `a_under = min a-` over the closed ball.
#[allow(clippy::too_many_arguments)]
pub fn barrier_amplitude(
    p: f64,
    q: f64,
    dim: usize,
    outer: f64,
    inner: f64,
    n: f64,
    a_under: f64,
    lambda: f64,
    regime: BarrierRegime,
) -> Result<f64> {
    if !(q > 1.0 && q < p) {
        return Err(Error::regime("subhomogeneous hypothesis 1 < q < p", format!("q = {q}, p = {p}")));
    }
    if !(a_under > 0.0) {
        return Err(Error::Domain(format!(
            "min of a- over the ball must be positive, got {a_under}"
        )));
    }
    if !(n > 0.0) {
        return Err(Error::Domain(format!("n must be positive, got {n}")));
    }
    if !(inner >= 0.0 && outer > inner) {
        return Err(Error::Domain(format!("need 0 <= t < R, got t = {inner}, R = {outer}")));
    }
    let beta = barrier_exponent(p, q);
    let big_n = dim as f64;
    let (r2, t2) = (outer * outer, inner * inner);
    match regime {
        BarrierRegime::General => {
            if lambda > 0.0 {
                return Err(Error::regime(
                    "comparison barrier for lambda > 0 needs p = 2",
                    format!("lambda = {lambda}, p = {p}"),
                ));
            }
            let den = (2.0 * beta).powf(p - 1.0)
                * outer.powf(p - 2.0)
                * (2.0 * (beta - 1.0) * (p - 1.0) * r2 + (p - 2.0 + big_n) * (r2 - t2));
            Ok((n * a_under / den).powf(1.0 / (p - q)))
        }
        BarrierRegime::P2PositiveLambda => {
            if p != 2.0 {
                return Err(Error::regime(
                    "comparison principle with lambda > 0 holds only for p = 2",
                    format!("p = {p}"),
                ));
            }
            let den = 2.0 * beta * ((beta - 1.0) * 2.0 * r2 + big_n * (r2 - t2)) + lambda * (r2 - t2).powi(2);
            Ok((n * a_under / den).powf(1.0 / (2.0 - q)))
        }
    }
}

fn dist2(grid: &Grid, i: usize, center: &[f64]) -> f64 {
    let x = grid.coords(i);
    center.iter().enumerate().map(|(d, c)| (x[d] - c).powi(2)).sum()
}

fn ball_nodes(grid: &Grid, center: &[f64], radius: f64) -> Vec<bool> {
    let r2 = radius * radius * (1.0 + 1e-12);
    (0..grid.len()).map(|i| dist2(grid, i, center) <= r2).collect()
}

impl BarrierSpec {
    /// Barrier for the problem's `(p, q, lambda)` and the weight `a+ - n a-` built from
    /// the problem's weight; the regime follows from `lambda`.
    pub fn for_problem(prob: &Problem, center: Vec<f64>, inner: f64, outer: f64, n: f64) -> Result<Self> {
        let grid = prob.grid();
        if center.len() != grid.dim() {
            return Err(Error::Config(format!(
                "barrier center has {} coordinates on a {}D grid",
                center.len(),
                grid.dim()
            )));
        }
        let w = prob.weight();
        let inside = ball_nodes(grid, &center, outer);
        let a_under = (0..grid.len())
            .filter(|&i| inside[i])
            .map(|i| w.negative_part(i))
            .fold(f64::INFINITY, f64::min);
        if !a_under.is_finite() {
            return Err(Error::Config("barrier ball contains no node".into()));
        }
        let regime = if prob.lambda() > 0.0 {
            BarrierRegime::P2PositiveLambda
        } else {
            BarrierRegime::General
        };
        let amplitude = barrier_amplitude(
            prob.p(),
            prob.q(),
            grid.dim(),
            outer,
            inner,
            n,
            a_under,
            prob.lambda(),
            regime,
        )?;
        Ok(BarrierSpec {
            center,
            inner_radius: inner,
            outer_radius: outer,
            beta: barrier_exponent(prob.p(), prob.q()),
            amplitude,
            regime,
        })
    }
}

/// A barrier sampled on the nodes of its ball.
#[derive(Debug, Clone)]
pub struct Barrier {
    /// Barrier values; 0 outside the ball.
    pub field: Field,
    /// Nodes with `|x - x0| <= R`.
    pub inside: Vec<bool>,
    /// Nodes of the ball with a neighbour outside it: the discrete sphere.
    pub ring: Vec<bool>,
    /// Nodes with `|x - x0| <= t`.
    pub core: Vec<bool>,
}

pub fn build_barrier(weight: &Weight, spec: &BarrierSpec) -> Result<Barrier> {
    let grid = weight.grid();
    if spec.center.len() != grid.dim() {
        return Err(Error::Config("barrier center dimension differs from the grid".into()));
    }
    if !(spec.amplitude > 0.0 && spec.beta > 1.0 && spec.inner_radius >= 0.0 && spec.outer_radius > spec.inner_radius)
    {
        return Err(Error::Domain(format!("invalid barrier {spec:?}")));
    }
    let inside = ball_nodes(grid, &spec.center, spec.outer_radius);
    if !inside.iter().any(|&b| b) {
        return Err(Error::Config("barrier ball contains no node".into()));
    }
    if let Some(i) = (0..grid.len()).find(|&i| inside[i] && !weight.is_minus(i)) {
        return Err(Error::Config(format!(
            "barrier ball leaves the negativity set of a (node {i} at {:?})",
            &grid.coords(i)[..grid.dim()]
        )));
    }
    let core = ball_nodes(grid, &spec.center, spec.inner_radius);
    let ring: Vec<bool> = (0..grid.len())
        .map(|i| inside[i] && (grid.neighbors(i).any(|j| !inside[j]) || grid.is_boundary(i)))
        .collect();
    let t2 = spec.inner_radius * spec.inner_radius;
    let values = (0..grid.len())
        .map(|i| {
            if inside[i] && !core[i] {
                spec.amplitude * (dist2(grid, i, &spec.center) - t2).max(0.0).powf(spec.beta)
            } else {
                0.0
            }
        })
        .collect();
    Ok(Barrier {
        field: Field::new(grid.clone(), values)?,
        inside,
        ring,
        core,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `w > u` on the ring.
    pub boundary_dominates: bool,
    /// `w >= u - margin` on the ball.
    pub interior_dominates: bool,
    /// `u <= margin` on `B_t`.
    pub dead_core_confirmed: bool,
    pub margin: f64,
    /// `max (u - w)` over the ball.
    pub max_excess: f64,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.boundary_dominates && self.interior_dominates && self.dead_core_confirmed
    }
}

/// Compares `u` with the barrier; `margin` defaults to `1e-8 max(w)`.
pub fn comparison_check(u: &Field, barrier: &Barrier, margin: Option<f64>) -> Result<ComparisonReport> {
    u.same_grid(&barrier.field)?;
    let margin = margin.unwrap_or(1e-8 * barrier.field.max());
    let (uv, wv) = (u.values(), barrier.field.values());
    let ball = || (0..uv.len()).filter(|&i| barrier.inside[i]);
    Ok(ComparisonReport {
        boundary_dominates: ball().filter(|&i| barrier.ring[i]).all(|i| wv[i] > uv[i]),
        interior_dominates: ball().all(|i| wv[i] >= uv[i] - margin),
        dead_core_confirmed: (0..uv.len()).filter(|&i| barrier.core[i]).all(|i| uv[i] <= margin),
        margin,
        max_excess: ball().map(|i| uv[i] - wv[i]).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeadCoreRegion {
    /// Free nodes with `u <= eps_dc max(u)`.
    pub nodes: Vec<usize>,
    pub components: Vec<Vec<usize>>,
    /// Share of the measure of the domain.
    pub fraction: f64,
    /// Share of the minus nodes.
    pub minus_fraction: f64,
    /// `u` vanishes identically.
    pub trivial: bool,
}

pub fn dead_core_region(u: &Field, weight: &Weight, eps_dc: f64) -> Result<DeadCoreRegion> {
    u.same_grid(weight.values())?;
    if !(eps_dc > 0.0) {
        return Err(Error::Domain(format!("eps_dc must be positive, got {eps_dc}")));
    }
    let grid = u.grid();
    let max = u.max();
    let trivial = !(max > 0.0);
    let level = if trivial { 0.0 } else { eps_dc * max };
    let mask: Vec<bool> = (0..grid.len())
        .map(|i| grid.is_free(i) && u.values()[i] <= level)
        .collect();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
    let w = grid.quad_weights();
    let free_measure: f64 = (0..grid.len()).filter(|&i| grid.is_free(i)).map(|i| w[i]).sum();
    let fraction = nodes.iter().map(|&i| w[i]).sum::<f64>() / free_measure;
    let minus = weight.minus_nodes();
    let minus_fraction = minus.iter().filter(|&&i| mask[i]).count() as f64 / minus.len() as f64;
    Ok(DeadCoreRegion {
        components: components(grid, &mask),
        nodes,
        fraction,
        minus_fraction,
        trivial,
    })
}

/// Nodes inside the closed box `[lower, upper]`.
pub fn box_nodes(grid: &Grid, lower: &[f64], upper: &[f64]) -> Result<Vec<usize>> {
    if lower.len() != grid.dim() || upper.len() != grid.dim() {
        return Err(Error::Config("box corners must match the grid dimension".into()));
    }
    let tol = 1e-12 * grid.extent().iter().cloned().fold(0.0, f64::max);
    Ok((0..grid.len())
        .filter(|&i| {
            let x = grid.coords(i);
            (0..grid.dim()).all(|d| x[d] >= lower[d] - tol && x[d] <= upper[d] + tol)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepNOptions {
    /// Relative dead-core level.
    pub eps_dc: f64,
    /// Run outside the hypotheses (`p != 2`, `lambda > 0`); results are labeled exploratory.
    pub exploratory: bool,
}

impl Default for SweepNOptions {
    fn default() -> Self {
        SweepNOptions {
            eps_dc: 1e-6,
            exploratory: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NRow {
    pub n: f64,
    pub m_plus: f64,
    #[serde(rename = "M")]
    pub m_total: f64,
    pub min_on_omega_prime: f64,
    pub coverage: f64,
    pub residual: f64,
    pub converged: bool,
    #[serde(skip)]
    pub solution: Field,
}

#[derive(Debug, Clone, Serialize)]
pub struct NSweep {
    pub lambda: f64,
    pub rows: Vec<NRow>,
    /// Least scheduled `n` at which the whole of `Omega'` is dead.
    pub n0: Option<f64>,
    pub coverage_nondecreasing: bool,
    pub exploratory: bool,
}

impl NSweep {
    pub const COLUMNS: [&'static str; 5] = ["n", "m_plus", "M", "min_on_omega_prime", "coverage"];

    pub fn table(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.n, r.m_plus, r.m_total, r.min_on_omega_prime, r.coverage])
            .collect()
    }
}

/// Gate for dead-core sweeps: `lambda <= 0`, or `p = 2` and `lambda <= lambda_1`.
pub fn check_dead_core_regime(prob: &Problem) -> Result<()> {
    let lambda = prob.lambda();
    if lambda <= 0.0 {
        return Ok(());
    }
    if prob.p() != 2.0 {
        return Err(Error::regime(
            "dead cores are established for lambda <= 0, or p = 2 and lambda <= lambda1; p != 2 with lambda > 0 is open",
            format!("p = {}, lambda = {lambda}", prob.p()),
        ));
    }
    let l1 = principal_eigen(prob)?.value;
    if lambda > l1 {
        return Err(Error::regime(
            "dead cores for p = 2 need lambda <= lambda1",
            format!("lambda = {lambda}, lambda1 = {l1}"),
        ));
    }
    Ok(())
}

/// Ground states for `a_n = a+ - n a-` over `schedule`, with the dead share of `omega_prime`.
pub fn sweep_n(
    base: &Problem,
    schedule: &[f64],
    omega_prime: &[usize],
    opts: &SolveOptions,
    sweep: &SweepNOptions,
) -> Result<NSweep> {
    let w = base.weight();
    if omega_prime.is_empty() {
        return Err(Error::Config("Omega' contains no node".into()));
    }
    let grid = base.grid();
    for &i in omega_prime {
        if !w.is_minus(i) || grid.neighbors(i).any(|j| !w.is_minus(j)) {
            return Err(Error::Config(format!(
                "Omega' must lie inside the negativity set of a, away from its boundary (node {i})"
            )));
        }
    }
    if schedule.is_empty() || schedule.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::Config("n schedule must be nonempty and positive".into()));
    }
    let exploratory = match check_dead_core_regime(base) {
        Ok(()) => false,
        Err(e) if sweep.exploratory && matches!(e, Error::Regime { .. }) => true,
        Err(e) => return Err(e),
    };
    let rows: Vec<Result<NRow>> = schedule
        .par_iter()
        .map(|&n| {
            let prob = base.with_weight(scale_negative_part(w, n)?)?;
            let rep = ground_state(&prob, opts)?;
            let u = rep.field;
            let level = sweep.eps_dc * u.max();
            let dead = omega_prime.iter().filter(|&&i| u.values()[i] <= level).count();
            Ok(NRow {
                n,
                m_plus: rep.m_value,
                m_total: rep.i_value.unwrap_or(f64::NAN),
                min_on_omega_prime: omega_prime.iter().map(|&i| u.values()[i]).fold(f64::INFINITY, f64::min),
                coverage: dead as f64 / omega_prime.len() as f64,
                residual: rep.residual,
                converged: rep.converged,
                solution: u,
            })
        })
        .collect();
    let rows: Vec<NRow> = rows.into_iter().collect::<Result<_>>()?;
    let n0 = rows.iter().find(|r| r.coverage >= 1.0).map(|r| r.n);
    let coverage_nondecreasing = rows.windows(2).all(|p| p[1].coverage >= p[0].coverage);
    Ok(NSweep {
        lambda: base.lambda(),
        rows,
        n0,
        coverage_nondecreasing,
        exploratory,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Bump {
    /// Nodes above the threshold.
    pub support: Vec<usize>,
    pub residual: f64,
    #[serde(skip)]
    pub field: Field,
}

/// Splits a nonnegative 1D field into its bumps: the components of `{u > eps_dc max(u)}`,
/// each owning the nodes up to the lowest point of the gaps around it.
/// The pieces add up to `u` exactly.
pub fn split_bumps(u: &Field, eps_dc: f64, prob: &Problem) -> Result<Vec<Bump>> {
    prob.check(u)?;
    let grid = u.grid();
    if grid.dim() != 1 {
        return Err(Error::Domain("split_bumps works on 1D grids".into()));
    }
    if !u.is_nonnegative() {
        return Err(Error::Domain("split_bumps needs a nonnegative field".into()));
    }
    if !(eps_dc > 0.0) {
        return Err(Error::Domain(format!("eps_dc must be positive, got {eps_dc}")));
    }
    let v = u.values();
    let level = eps_dc * u.max();
    let mask: Vec<bool> = v.iter().map(|&x| x > level).collect();
    let comps = components(grid, &mask);
    if comps.is_empty() || !(u.max() > 0.0) {
        return Err(Error::Degenerate("no bump above the threshold".into()));
    }
    // cut each gap at its lowest node; the cut node goes to the left piece
    let mut bounds = Vec::with_capacity(comps.len());
    let mut lo = 0;
    for k in 0..comps.len() {
        let hi = match comps.get(k + 1) {
            Some(next) => {
                let (a, b) = (*comps[k].last().unwrap(), next[0]);
                (a + 1..b).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap_or(a)
            }
            None => v.len() - 1,
        };
        bounds.push((lo, hi));
        lo = hi + 1;
    }
    comps
        .into_iter()
        .zip(bounds)
        .map(|(support, (lo, hi))| {
            let vals = (0..v.len()).map(|i| if (lo..=hi).contains(&i) { v[i] } else { 0.0 }).collect();
            let field = Field::new(grid.clone(), vals)?;
            Ok(Bump {
                support,
                residual: residual_norm(prob, &field)?,
                field,
            })
        })
        .collect()
}
