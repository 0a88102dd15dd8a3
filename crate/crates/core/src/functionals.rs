//! Discrete energies of the indefinite problem and everything derived from them.
//!
//! With trapezoid weights `W_i` and gradient samples `g_s` (one per edge in 1D,
//! four corner samples per cell in 2D) the discrete functionals are
//!
//! ```text
//! D(u)   = sum_s w_s ((|g_s|^2 + eps^2)^{p/2} - eps^p)
//! E(u)   = D(u) - lambda * sum_i W_i |u_i|^p
//! I(u)   = E(u) / p - (1/q) sum_i W_i a_i |u_i|^q
//! ```
//!
//! and every gradient below is the exact partial derivative of these sums, so
//! `grad_i` is the true gradient of the discrete `I`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Grid, Weight};
use crate::linalg::BandMatrix;

/// Default gradient regularization for `p < 2`.
pub const DEFAULT_EPS_SUBQUADRATIC: f64 = 1e-8;

/// One instance of the problem: exponents, spectral parameter, weight and regularization.
#[derive(Debug, Clone)]
pub struct Problem {
    p: f64,
    q: f64,
    lambda: f64,
    eps: f64,
    weight: Arc<Weight>,
}

impl Problem {
    /// Builds a problem with the default regularization (0 for `p >= 2`).
    pub fn new(p: f64, q: f64, lambda: f64, weight: Weight) -> Result<Self> {
        let eps = if p >= 2.0 { 0.0 } else { DEFAULT_EPS_SUBQUADRATIC };
        Self::with_eps(p, q, lambda, eps, Arc::new(weight))
    }

    pub fn with_eps(p: f64, q: f64, lambda: f64, eps: f64, weight: Arc<Weight>) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("p must be finite and > 1, got {p}")));
        }
        if !(q > 1.0 && q < p) {
            return Err(Error::regime(
                "subhomogeneous hypothesis 1 < q < p",
                format!("got q = {q}, p = {p}"),
            ));
        }
        if !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite, got {lambda}")));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("eps must be finite and >= 0, got {eps}")));
        }
        if eps == 0.0 && p < 2.0 {
            return Err(Error::Config(format!(
                "eps = 0 requires p >= 2 (got p = {p}); the gradient energy is not differentiable at zero slope"
            )));
        }
        Ok(Problem {
            p,
            q,
            lambda,
            eps,
            weight,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn weight_arc(&self) -> &Arc<Weight> {
        &self.weight
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.weight.grid()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::with_eps(self.p, self.q, lambda, self.eps, self.weight.clone())
    }

    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::with_eps(self.p, q, self.lambda, self.eps, self.weight.clone())
    }

    pub fn with_weight(&self, weight: Weight) -> Result<Self> {
        Self::with_eps(self.p, self.q, self.lambda, self.eps, Arc::new(weight))
    }

    /// The endpoint `q = p`, outside the problem class; only the spectral
    /// threshold with constraint `int a|u|^p >= 0` uses it.
    pub(crate) fn at_q_limit(&self) -> Self {
        Problem {
            q: self.p,
            ..self.clone()
        }
    }

    pub(crate) fn check(&self, u: &Field) -> Result<()> {
        let g = self.grid();
        if Arc::ptr_eq(u.grid(), g) || **u.grid() == **g {
            Ok(())
        } else {
            Err(Error::GridMismatch("field is not on the problem grid".into()))
        }
    }

    pub(crate) fn kernel(&self) -> Kernel<'_> {
        Kernel {
            grid: self.grid(),
            p: self.p,
            eps: self.eps,
        }
    }
}

/// The three integrals and the two energies built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub mass: f64,
    pub weighted: f64,
    pub e_lambda: f64,
    pub i_lambda: f64,
}

/// Gradient-energy machinery shared by the energies, the eigen solvers and the preconditioners.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel<'a> {
    pub grid: &'a Grid,
    pub p: f64,
    pub eps: f64,
}

impl Kernel<'_> {
    #[inline]
    fn sample(&self, s: &crate::grid::GradStencil, u: &[f64]) -> ([f64; 2], f64) {
        let mut g = [0.0; 2];
        let mut s2 = 0.0;
        for (c, d) in s.components().iter().enumerate() {
            g[c] = (u[d.to] - u[d.from]) * d.inv_h;
            s2 += g[c] * g[c];
        }
        (g, s2)
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let e2 = self.eps * self.eps;
        let shift = self.eps.powf(self.p);
        let half_p = 0.5 * self.p;
        self.grid
            .stencils()
            .iter()
            .map(|s| {
                let (_, s2) = self.sample(s, u);
                s.weight * ((s2 + e2).powf(half_p) - shift)
            })
            .sum()
    }

    /// Adds `scale * grad D(u)` into `out`.
    pub fn add_gradient(&self, u: &[f64], scale: f64, out: &mut [f64]) {
        let e2 = self.eps * self.eps;
        let expo = 0.5 * self.p - 1.0;
        for s in self.grid.stencils() {
            let (g, s2) = self.sample(s, u);
            // d/dg_c of (|g|^2+eps^2)^{p/2} = p (|g|^2+eps^2)^{p/2-1} g_c
            let f1 = self.p * (s2 + e2).powf(expo);
            for (c, d) in s.components().iter().enumerate() {
                let v = scale * s.weight * f1 * g[c] * d.inv_h;
                out[d.to] += v;
                out[d.from] -= v;
            }
        }
    }

    /// Adds `scale * hess D(u)` into `band`.
    pub fn add_hessian(&self, u: &[f64], scale: f64, band: &mut BandMatrix) {
        let e2 = self.eps * self.eps;
        let p = self.p;
        for s in self.grid.stencils() {
            let (g, s2) = self.sample(s, u);
            let base = s2 + e2;
            // hess_g = p base^{p/2-1} I + p (p-2) base^{p/2-2} g g^T
            let a = p * base.powf(0.5 * p - 1.0);
            let b = if base > 0.0 {
                p * (p - 2.0) * base.powf(0.5 * p - 2.0)
            } else {
                0.0
            };
            let comps = s.components();
            for (c, dc) in comps.iter().enumerate() {
                for (k, dk) in comps.iter().enumerate() {
                    let mut hck = b * g[c] * g[k];
                    if c == k {
                        hck += a;
                    }
                    let v = scale * s.weight * hck * dc.inv_h * dk.inv_h;
                    if v == 0.0 || !v.is_finite() {
                        continue;
                    }
                    // d g_c / d u = inv_h (e_to - e_from)
                    band.add(dc.to, dk.to, v * if dc.to == dk.to { 1.0 } else { 0.5 });
                    band.add(dc.from, dk.from, v * if dc.from == dk.from { 1.0 } else { 0.5 });
                    band.add(dc.to, dk.from, -v * if dc.to == dk.from { 1.0 } else { 0.5 });
                    band.add(dc.from, dk.to, -v * if dc.from == dk.to { 1.0 } else { 0.5 });
                }
            }
        }
    }
}

#[inline]
pub(crate) fn signed_pow(x: f64, r: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(r)
    }
}

pub(crate) fn p_mass_raw(grid: &Grid, u: &[f64], p: f64) -> f64 {
    u.iter()
        .zip(grid.quad_weights())
        .map(|(v, w)| w * v.abs().powf(p))
        .sum()
}

pub(crate) fn weighted_mass_raw(weight: &Weight, u: &[f64], q: f64) -> f64 {
    u.iter()
        .zip(weight.values().values())
        .zip(weight.grid().quad_weights())
        .map(|((v, a), w)| w * a * v.abs().powf(q))
        .sum()
}

/// Adds `scale * grad(sum W |u|^r)` into `out`.
pub(crate) fn add_power_gradient(grid: &Grid, u: &[f64], r: f64, scale: f64, out: &mut [f64]) {
    for ((o, v), w) in out.iter_mut().zip(u).zip(grid.quad_weights()) {
        *o += scale * w * r * signed_pow(*v, r - 1.0);
    }
}

/// Adds `scale * grad(sum W a |u|^q)` into `out`.
pub(crate) fn add_weighted_gradient(weight: &Weight, u: &[f64], q: f64, scale: f64, out: &mut [f64]) {
    let a = weight.values().values();
    for (i, (o, w)) in out.iter_mut().zip(weight.grid().quad_weights()).enumerate() {
        *o += scale * w * a[i] * q * signed_pow(u[i], q - 1.0);
    }
}

pub(crate) fn zero_constrained(grid: &Grid, v: &mut [f64]) {
    for (x, &free) in v.iter_mut().zip(grid.dof_mask()) {
        if !free {
            *x = 0.0;
        }
    }
}

/// Max over free nodes of `|g_i| / W_i`: a pointwise (strong-form) size of a discrete gradient.
pub(crate) fn scaled_sup(grid: &Grid, g: &[f64]) -> f64 {
    g.iter()
        .zip(grid.quad_weights())
        .zip(grid.dof_mask())
        .filter(|(_, &free)| free)
        .fold(0.0, |m, ((gi, w), _)| m.max(gi.abs() / w))
}

/// Gradient energy `int |grad u|^p` (regularized when `eps > 0`).
pub fn dirichlet_energy(prob: &Problem, u: &Field) -> Result<f64> {
    prob.check(u)?;
    Ok(prob.kernel().energy(u.values()))
}

/// Trapezoid `int |u|^p`.
pub fn p_mass(u: &Field, p: f64) -> f64 {
    p_mass_raw(u.grid(), u.values(), p)
}

/// Trapezoid `int a |u|^q`.
pub fn weighted_q_mass(u: &Field, a: &Weight, q: f64) -> Result<f64> {
    u.same_grid(a.values())?;
    Ok(weighted_mass_raw(a, u.values(), q))
}

pub(crate) fn breakdown_raw(prob: &Problem, u: &[f64]) -> EnergyBreakdown {
    let dirichlet = prob.kernel().energy(u);
    let mass = p_mass_raw(prob.grid(), u, prob.p);
    let weighted = weighted_mass_raw(prob.weight(), u, prob.q);
    let e_lambda = dirichlet - prob.lambda * mass;
    let i_lambda = e_lambda / prob.p - weighted / prob.q;
    EnergyBreakdown {
        dirichlet,
        mass,
        weighted,
        e_lambda,
        i_lambda,
    }
}

pub fn energy(prob: &Problem, u: &Field) -> Result<EnergyBreakdown> {
    prob.check(u)?;
    Ok(breakdown_raw(prob, u.values()))
}

pub(crate) fn grad_i_raw(prob: &Problem, u: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; u.len()];
    prob.kernel().add_gradient(u, 1.0 / prob.p, &mut g);
    add_power_gradient(prob.grid(), u, prob.p, -prob.lambda / prob.p, &mut g);
    add_weighted_gradient(prob.weight(), u, prob.q, -1.0 / prob.q, &mut g);
    zero_constrained(prob.grid(), &mut g);
    g
}

pub(crate) fn grad_e_raw(prob: &Problem, u: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; u.len()];
    prob.kernel().add_gradient(u, 1.0, &mut g);
    add_power_gradient(prob.grid(), u, prob.p, -prob.lambda, &mut g);
    zero_constrained(prob.grid(), &mut g);
    g
}

fn finite_field(grid: &Arc<Grid>, g: Vec<f64>, what: &'static str) -> Result<Field> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Field::new(grid.clone(), g)
}

/// Gradient of the discrete `I_lambda` with respect to the free nodal values.
pub fn grad_i(prob: &Problem, u: &Field) -> Result<Field> {
    prob.check(u)?;
    finite_field(prob.grid(), grad_i_raw(prob, u.values()), "grad_I")
}

/// Gradient of the discrete `E_lambda` with respect to the free nodal values.
pub fn grad_e(prob: &Problem, u: &Field) -> Result<Field> {
    prob.check(u)?;
    finite_field(prob.grid(), grad_e_raw(prob, u.values()), "grad_E")
}

/// Pointwise size of the weak residual: `max_i |grad_I(u)_i| / W_i` over free nodes.
pub fn residual_norm(prob: &Problem, u: &Field) -> Result<f64> {
    prob.check(u)?;
    Ok(scaled_sup(prob.grid(), &grad_i_raw(prob, u.values())))
}

/// `(t0, max_t I(t u))` from the values `E(u) < 0` and `int a|u|^q < 0`.
pub fn ray_max_from_values(p: f64, q: f64, e: f64, weighted: f64) -> Result<(f64, f64)> {
    if !(e < 0.0 && weighted < 0.0) {
        return Err(Error::regime(
            "ray maximum needs E(u) < 0 and int a|u|^q < 0",
            format!("E = {e:e}, int a|u|^q = {weighted:e}"),
        ));
    }
    let t0 = (weighted / e).powf(1.0 / (p - q));
    let value = (1.0 / q - 1.0 / p) * (-weighted).powf(p / (p - q)) / (-e).powf(q / (p - q));
    Ok((t0, value))
}

/// Unique maximizer of `t -> I(t u)` on a ray with `E(u) < 0`.
pub fn ray_max_point(prob: &Problem, u: &Field) -> Result<f64> {
    let b = energy(prob, u)?;
    ray_max_from_values(prob.p, prob.q, b.e_lambda, b.weighted).map(|r| r.0)
}

/// `max_{t>0} I(t u)`.
pub fn ray_max_value(prob: &Problem, u: &Field) -> Result<f64> {
    let b = energy(prob, u)?;
    ray_max_from_values(prob.p, prob.q, b.e_lambda, b.weighted).map(|r| r.1)
}

/// Minimum over gradient samples of `|grad u|^{p-q}|grad v|^q - |grad u|^{p-2} grad u . grad(v^q/u^{q-1})`.
pub fn picone_gap(u: &Field, v: &Field, p: f64, q: f64) -> Result<f64> {
    u.same_grid(v)?;
    if let Some(i) = u.values().iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("u must be positive, u[{i}] = {}", u.values()[i])));
    }
    if v.values().iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("v must be nonnegative".into()));
    }
    let ratio: Vec<f64> = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| b.powf(q) / a.powf(q - 1.0))
        .collect();
    let kernel = Kernel {
        grid: u.grid(),
        p,
        eps: 0.0,
    };
    let mut gap = f64::INFINITY;
    for s in u.grid().stencils() {
        let (gu, su) = kernel.sample(s, u.values());
        let (_, sv) = kernel.sample(s, v.values());
        let (gw, _) = kernel.sample(s, &ratio);
        let nu = su.sqrt();
        let dot: f64 = (0..s.ncomp).map(|c| gu[c] * gw[c]).sum();
        let lhs = if nu > 0.0 { nu.powf(p - 2.0) * dot } else { 0.0 };
        let rhs = nu.powf(p - q) * sv.sqrt().powf(q);
        gap = gap.min(rhs - lhs);
    }
    Ok(gap)
}

/// `(b+d)^{1-t}(c+e)^t - b^{1-t}c^t - d^{1-t}e^t`.
pub fn power_mean_gap(b: f64, c: f64, d: f64, e: f64, t: f64) -> Result<f64> {
    if !(b > 0.0 && c > 0.0 && d > 0.0 && e > 0.0) {
        return Err(Error::Domain("power mean inequality needs b, c, d, e > 0".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [0, 1], got {t}")));
    }
    let s = 1.0 - t;
    Ok((b + d).powf(s) * (c + e).powf(t) - b.powf(s) * c.powf(t) - d.powf(s) * e.powf(t))
}

/// `W = ((V1^q + V2^q) / 2)^{1/q}` nodewise.
pub fn hidden_convex_midpoint(v1: &Field, v2: &Field, q: f64) -> Result<Field> {
    v1.same_grid(v2)?;
    if !v1.is_nonnegative() || !v2.is_nonnegative() {
        return Err(Error::Domain("midpoint needs nonnegative fields".into()));
    }
    let values = v1
        .values()
        .iter()
        .zip(v2.values())
        .map(|(a, b)| (0.5 * (a.powf(q) + b.powf(q))).powf(1.0 / q))
        .collect();
    Field::new(v1.grid().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_bump(bc: BoundaryCondition, n: usize) -> Weight {
        let g = build_grid(1, &[1.0], &[n], bc).unwrap();
        build_weight(
            &g,
            &WeightSpec::TwoBump1d {
                a_plus: 1.0,
                a_minus: 5.0,
                delta: 0.4,
            },
        )
        .unwrap()
    }

    fn problem(bc: BoundaryCondition, p: f64, q: f64, lambda: f64) -> Problem {
        Problem::new(p, q, lambda, two_bump(bc, 11)).unwrap()
    }

    #[test]
    fn validation() {
        let w = two_bump(BoundaryCondition::Neumann, 11);
        assert!(matches!(
            Problem::new(2.0, 2.0, 0.0, w.clone()),
            Err(Error::Regime { .. })
        ));
        assert!(Problem::new(2.0, 2.5, 0.0, w.clone()).is_err());
        assert!(Problem::new(2.0, 1.0, 0.0, w.clone()).is_err());
        assert!(Problem::with_eps(1.5, 1.2, 0.0, 0.0, Arc::new(w.clone())).is_err());
        let sub = Problem::new(1.5, 1.2, 0.0, w).unwrap();
        assert_eq!(sub.eps(), DEFAULT_EPS_SUBQUADRATIC);
    }

    #[test]
    fn constant_field_has_no_gradient_energy() {
        let prob = problem(BoundaryCondition::Neumann, 2.7, 1.5, 0.3);
        let u = Field::from_fn(prob.grid().clone(), |_| 3.0);
        assert_eq!(dirichlet_energy(&prob, &u).unwrap(), 0.0);
    }

    #[test]
    fn linear_field_energy() {
        let prob = problem(BoundaryCondition::Neumann, 3.0, 1.5, 0.0);
        let u = Field::from_fn(prob.grid().clone(), |x| x[0]);
        assert!((dirichlet_energy(&prob, &u).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn regularized_energy_matches_direct_sum() {
        let w = two_bump(BoundaryCondition::Neumann, 41);
        let prob = Problem::with_eps(2.5, 1.5, 0.0, 1e-8, Arc::new(w)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..41).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = Field::new(prob.grid().clone(), vals.clone()).unwrap();
        let h = 1.0 / 40.0;
        let mut direct = 0.0;
        for i in 0..40 {
            let d = (vals[i + 1] - vals[i]) / h;
            direct += h * ((d * d + 1e-16f64).powf(1.25) - 1e-8f64.powf(2.5));
        }
        let got = dirichlet_energy(&prob, &u).unwrap();
        assert!((got - direct).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn masses() {
        let prob = problem(BoundaryCondition::Neumann, 2.0, 1.5, 0.0);
        let one = Field::from_fn(prob.grid().clone(), |_| 1.0);
        assert!((p_mass(&one, 2.0) - 1.0).abs() < 1e-15);
        for q in [1.1, 1.5, 1.9] {
            let m = weighted_q_mass(&one, prob.weight(), q).unwrap();
            assert!((m - prob.weight().integral()).abs() < 1e-15);
        }
        let mut v = vec![0.0; 11];
        for &i in prob.weight().minus_nodes() {
            v[i] = 0.7;
        }
        let minus_only = Field::new(prob.grid().clone(), v).unwrap();
        assert!(weighted_q_mass(&minus_only, prob.weight(), 1.5).unwrap() < 0.0);
    }

    #[test]
    fn energy_of_neumann_constant() {
        let (lambda, c, q, p) = (0.7, 1.3, 1.5, 2.5);
        let prob = problem(BoundaryCondition::Neumann, p, q, lambda);
        let u = Field::from_fn(prob.grid().clone(), |_| c);
        let b = energy(&prob, &u).unwrap();
        let e = -lambda * c.powf(p);
        assert!((b.e_lambda - e).abs() < 1e-14);
        let i = e / p - c.powf(q) * prob.weight().integral() / q;
        assert!((b.i_lambda - i).abs() < 1e-14);
        let b0 = energy(&prob.with_lambda(0.0).unwrap(), &u).unwrap();
        assert_eq!(b0.e_lambda, b0.dirichlet);
    }

    #[test]
    fn trivial_field_is_critical() {
        let prob = problem(BoundaryCondition::Dirichlet, 3.0, 2.0, -1.0);
        let z = Field::zeros(prob.grid().clone());
        assert!(grad_i(&prob, &z).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(residual_norm(&prob, &z).unwrap(), 0.0);
        let prob = problem(BoundaryCondition::Dirichlet, 3.0, 1.5, -1.0);
        assert_eq!(residual_norm(&prob, &z).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_stencil_for_grad_e() {
        let n = 11;
        let lambda = 0.8;
        let prob = problem(BoundaryCondition::Dirichlet, 2.0, 1.5, lambda);
        let h = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Field::admissible(
            prob.grid().clone(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let g = grad_e(&prob, &u).unwrap();
        let x = u.values();
        for i in 1..n - 1 {
            let expect = (-x[i - 1] + 2.0 * x[i] - x[i + 1]) * (2.0 / h) - 2.0 * lambda * h * x[i];
            assert!((g.values()[i] - expect).abs() < 1e-12, "node {i}");
        }
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(g.values()[n - 1], 0.0);
    }

    #[test]
    fn ray_formula_examples() {
        let (t0, v) = ray_max_from_values(2.0, 1.5, -1.0, -2.0).unwrap();
        assert!((t0 - 4.0).abs() < 1e-12);
        assert!((v - 8.0 / 3.0).abs() < 1e-12);
        // direct evaluation of i(t) = t^2/2 E - t^1.5/1.5 G at t = 4
        let direct = -(16.0 / 2.0) - 8.0 / 1.5 * -2.0;
        assert!((direct - v).abs() < 1e-12);
        for (p, q) in [(3.0, 1.2), (2.2, 2.1)] {
            assert!((ray_max_from_values(p, q, -1.0, -1.0).unwrap().0 - 1.0).abs() < 1e-15);
        }
        assert!(ray_max_from_values(2.0, 1.5, 0.5, -1.0).is_err());
        assert!(ray_max_from_values(2.0, 1.5, -0.5, 0.0).is_err());
    }

    #[test]
    fn power_mean_examples() {
        assert!(power_mean_gap(1.0, 1.0, 1.0, 1.0, 0.5).unwrap().abs() < 1e-15);
        let g = power_mean_gap(1.0, 4.0, 1.0, 1.0, 0.5).unwrap();
        assert!((g - (10f64.sqrt() - 3.0)).abs() < 1e-14);
        assert!(power_mean_gap(2.0, 3.0, 5.0, 7.0, 0.0).unwrap().abs() < 1e-14);
        assert!(power_mean_gap(0.0, 1.0, 1.0, 1.0, 0.5).is_err());
        assert!(power_mean_gap(1.0, 1.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn picone_equality_cases() {
        let g = build_grid(1, &[1.0], &[21], BoundaryCondition::Neumann).unwrap();
        let u = Field::from_fn(g.clone(), |x| 1.0 + x[0] * x[0]);
        assert!(picone_gap(&u, &u, 3.0, 2.0).unwrap().abs() < 1e-10);
        let z = Field::zeros(g.clone());
        assert_eq!(picone_gap(&u, &z, 3.0, 2.0).unwrap(), 0.0);
        let bad = Field::from_fn(g, |x| x[0]);
        assert!(picone_gap(&bad, &u, 3.0, 2.0).is_err());
    }

    #[test]
    fn picone_on_independent_nodal_samples() {
        // rough fields: gradients of order 1/h, so compare relative to the term sizes
        let g = build_grid(1, &[1.0], &[41], BoundaryCondition::Neumann).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let u = Field::new(g.clone(), (0..41).map(|_| rng.gen_range(0.5..1.5)).collect()).unwrap();
            let v = Field::new(g.clone(), (0..41).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
            let gap = picone_gap(&u, &v, 3.0, 2.0).unwrap();
            assert!(gap >= -1e-9 * 40f64.powi(3), "gap {gap}");
        }
    }

    #[test]
    fn midpoint_identities() {
        let g = build_grid(1, &[1.0], &[9], BoundaryCondition::Neumann).unwrap();
        let v = Field::from_fn(g.clone(), |x| 0.5 + x[0]);
        let w = hidden_convex_midpoint(&v, &v, 1.5).unwrap();
        for (a, b) in w.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let z = Field::zeros(g);
        let w = hidden_convex_midpoint(&z, &v, 1.5).unwrap();
        for (a, b) in w.values().iter().zip(v.values()) {
            assert!((a - 2f64.powf(-1.0 / 1.5) * b).abs() < 1e-15);
        }
    }
}
