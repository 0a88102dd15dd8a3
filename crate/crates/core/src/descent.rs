//! Preconditioned descent on a retraction-defined feasible set.
//!
//! Every constrained minimization in the crate has the same shape: a smooth
//! objective, a map `retract` that sends a trial point back onto the feasible
//! set (nodewise absolute value followed by a radial normalization), and an
//! SPD matrix `P` that approximates the curvature. One iteration is
//!
//! ```text
//! d = P^{-1} g,   x <- retract(x - alpha d)
//! ```
//!
//! with `alpha` chosen by Armijo backtracking on the retracted value.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::linalg::{BandMatrix, Preconditioner};

#[derive(Debug, Clone, Copy)]
pub(crate) struct DescentOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub window_tol: f64,
    pub window: usize,
    pub step0: f64,
    pub backtrack: f64,
    pub armijo_c: f64,
    /// Extra requirement `max|d| <= step_tol * max|x|`; 0 disables it.
    pub step_tol: f64,
}

/// One row of an iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub value: f64,
    pub stationarity: f64,
    pub step: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the objective asked to stop (e.g. it left the regime where its minimum is finite).
    pub halted: Option<String>,
    pub trace: Vec<TraceRow>,
}

pub(crate) trait Objective {
    fn grid(&self) -> &Grid;

    /// Nodes the optimizer may move; all others stay at 0.
    fn free(&self) -> &[bool];

    /// Maps `x` onto the feasible set in place; `false` if that is impossible.
    fn retract(&self, x: &mut [f64]) -> bool;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient at a retracted point, zero on non-free nodes.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn preconditioner(&self, x: &[f64]) -> Preconditioner;

    fn halt(&self, _value: f64) -> Option<String> {
        None
    }
}

const STALL_ITERS: usize = 200;

pub(crate) fn minimize(obj: &impl Objective, mut x: Vec<f64>, opts: &DescentOptions) -> Outcome {
    let grid = obj.grid();
    let free = obj.free();
    let stat_of = |g: &[f64]| -> f64 {
        g.iter()
            .zip(grid.quad_weights())
            .zip(free)
            .filter(|(_, &f)| f)
            .fold(0.0, |m, ((gi, w), _)| m.max(gi.abs() / w))
    };
    if !obj.retract(&mut x) {
        return Outcome {
            value: f64::NAN,
            x,
            stationarity: f64::INFINITY,
            iterations: 0,
            converged: false,
            halted: Some("initial point is not feasible".into()),
            trace: Vec::new(),
        };
    }
    let mut f = obj.value(&x);
    let mut history: VecDeque<f64> = VecDeque::with_capacity(opts.window + 1);
    let mut trace = Vec::new();
    let mut stat = f64::INFINITY;
    let mut converged = false;
    let mut halted = None;
    let mut iterations = 0;
    let mut last_step = 0.0;
    // stationarity that stopped improving while the value is flat means roundoff has won
    let mut best_stat = f64::INFINITY;
    let mut since_best = 0;

    for it in 0..=opts.max_iters {
        iterations = it;
        let g = obj.gradient(&x);
        stat = stat_of(&g);
        let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        trace.push(TraceRow {
            iter: it,
            value: f,
            stationarity: stat,
            step: last_step,
            sup_norm: sup,
        });
        if !f.is_finite() || !stat.is_finite() {
            halted = Some("non-finite objective or gradient".into());
            break;
        }
        if let Some(reason) = obj.halt(f) {
            halted = Some(reason);
            break;
        }
        history.push_back(f);
        if history.len() > opts.window + 1 {
            history.pop_front();
        }
        let window_ok = history.len() == opts.window + 1
            && (f - history[0]).abs() <= opts.window_tol * f.abs().max(1.0);
        let mut d = obj.preconditioner(&x).solve(&g);
        for (di, &fr) in d.iter_mut().zip(free) {
            if !fr {
                *di = 0.0;
            }
        }
        let dsup = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let step_ok = opts.step_tol <= 0.0 || dsup <= opts.step_tol * sup;
        if stat < opts.grad_tol && window_ok && step_ok {
            converged = true;
            break;
        }
        if stat < 0.9 * best_stat {
            best_stat = stat;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if it == opts.max_iters || (window_ok && since_best >= STALL_ITERS) {
            break;
        }
        let mut slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) || !slope.is_finite() {
            // preconditioner failed to give a descent direction; fall back to the scaled gradient
            d = g
                .iter()
                .zip(grid.quad_weights())
                .map(|(gi, w)| gi / w)
                .collect();
            slope = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if !(slope > 0.0) {
                converged = stat < opts.grad_tol;
                break;
            }
        }

        let mut alpha = opts.step0;
        let mut accepted = None;
        let slack = 1e-14 * f.abs().max(f64::MIN_POSITIVE);
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - alpha * b).collect();
            if obj.retract(&mut y) {
                let fy = obj.value(&y);
                if fy.is_finite() && fy <= f - opts.armijo_c * alpha * slope + slack {
                    accepted = Some((y, fy));
                    break;
                }
            }
            alpha *= opts.backtrack;
        }
        match accepted {
            Some((y, fy)) => {
                x = y;
                f = fy;
                last_step = alpha;
            }
            None => {
                // no admissible decrease left at machine precision
                converged = stat < opts.grad_tol && step_ok;
                break;
            }
        }
    }
    Outcome {
        x,
        value: f,
        stationarity: stat,
        iterations,
        converged,
        halted,
        trace,
    }
}

/// Largest finite diagonal entry over free rows; callers take it from the
/// operator part before adding reaction curvatures, which can be astronomically
/// large on dead-core nodes.
pub(crate) fn diag_scale(band: &BandMatrix, free: &[bool]) -> f64 {
    let s = (0..band.n())
        .filter(|&i| free[i])
        .map(|i| band.diag(i))
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Pins non-free rows, adds a small mass-weighted shift relative to `scale` and
/// factorizes, escalating the shift until the matrix is numerically positive definite.
pub(crate) fn factorize(
    grid: &Grid,
    free: &[bool],
    mut band: BandMatrix,
    scale: f64,
    rank_one: Option<(f64, Vec<f64>)>,
) -> Preconditioner {
    let w = grid.quad_weights();
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    for i in 0..band.n() {
        if !free[i] {
            band.pin(i);
        }
    }
    let rank_one = rank_one.map(|(c, mut v)| {
        for (vi, &f) in v.iter_mut().zip(free) {
            if !f {
                *vi = 0.0;
            }
        }
        (c, v)
    });
    let mut shift = 1e-8;
    loop {
        let mut b = band.clone();
        for i in 0..b.n() {
            if free[i] {
                b.add_diag(i, shift * scale * w[i] / wmax);
            }
        }
        match b.cholesky() {
            Ok(chol) => return Preconditioner { chol, rank_one },
            Err(_) if shift < 1e4 => shift *= 100.0,
            Err(_) => {
                let mut id = BandMatrix::zeros(band.n(), 0);
                for i in 0..id.n() {
                    id.add_diag(i, scale * w[i] / wmax);
                }
                let chol = id.cholesky().expect("positive diagonal");
                return Preconditioner { chol, rank_one };
            }
        }
    }
}

/// `max(|u|, floor)^r` for a negative exponent `r`: a capped secant curvature.
#[inline]
pub(crate) fn capped_pow(u: f64, r: f64, floor: f64) -> f64 {
    u.abs().max(floor).powf(r)
}

/// Floor used by [`capped_pow`]. It must stay far below the values a dead
/// core actually takes: a floor above `|u|` underestimates the secant
/// curvature, the step overshoots through zero and the absolute value maps it
/// straight back.
pub(crate) fn curvature_floor(x: &[f64]) -> f64 {
    let s = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (1e-200 * s).max(1e-300)
}

/// Index of the least value; values within `1e-12` (relative) of each other
/// resolve to the earliest index.
pub(crate) fn pick_best(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                let tol = 1e-12 * values[b].abs().max(1.0);
                if v < values[b] - tol {
                    best = Some(i);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, BoundaryCondition};
    use std::sync::Arc;

    /// `sum W_i (x_i - c_i)^2` with no retraction.
    struct Quadratic {
        grid: Arc<Grid>,
        target: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn grid(&self) -> &Grid {
            &self.grid
        }
        fn free(&self) -> &[bool] {
            self.grid.dof_mask()
        }
        fn retract(&self, _x: &mut [f64]) -> bool {
            true
        }
        fn value(&self, x: &[f64]) -> f64 {
            x.iter()
                .zip(&self.target)
                .zip(self.grid.quad_weights())
                .map(|((a, b), w)| w * (a - b).powi(2))
                .sum()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            x.iter()
                .zip(&self.target)
                .zip(self.grid.quad_weights())
                .map(|((a, b), w)| 2.0 * w * (a - b))
                .collect()
        }
        fn preconditioner(&self, _x: &[f64]) -> Preconditioner {
            let mut b = BandMatrix::zeros(self.grid.len(), 1);
            for (i, w) in self.grid.quad_weights().iter().enumerate() {
                b.add_diag(i, 2.0 * w);
            }
            let scale = diag_scale(&b, self.free());
            factorize(&self.grid, self.free(), b, scale, None)
        }
    }

    #[test]
    fn newton_like_step_solves_a_quadratic() {
        let grid = build_grid(1, &[1.0], &[9], BoundaryCondition::Neumann).unwrap();
        let target: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let obj = Quadratic { grid, target: target.clone() };
        let opts = DescentOptions {
            max_iters: 100,
            grad_tol: 1e-10,
            window_tol: 1e-12,
            window: 5,
            step0: 1.0,
            backtrack: 0.5,
            armijo_c: 1e-4,
            step_tol: 0.0,
        };
        let out = minimize(&obj, vec![0.0; 9], &opts);
        assert!(out.converged);
        for (a, b) in out.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(out.trace.windows(2).all(|w| w[1].value <= w[0].value + 1e-14));
    }

    #[test]
    fn best_index_breaks_ties_by_position() {
        assert_eq!(pick_best(&[3.0, 1.0, 1.0 + 1e-15, 2.0]), Some(1));
        assert_eq!(pick_best(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(pick_best(&[]), None);
    }
}
