//! Seeded starting fields for the constrained minimizations.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::weighted_mass_raw;
use crate::grid::{components, BoundaryCondition, Grid, Weight};

/// Shape of a starting field before noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// Indicator of the plus set.
    PlusShape,
    /// Exact indicator of one connected component of the plus set (index taken modulo the count);
    /// zero elsewhere, so a dead core between components can keep the other bumps empty.
    PlusComponent { index: usize },
    /// Uniform noise on every node.
    Noise,
    Constant,
    /// Principal-eigenfunction-like profile: a sine product (Dirichlet) or a constant (Neumann).
    EigenShape,
}

/// Which side of the weighted q-mass a start must lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Any,
    Plus,
    Minus,
}

fn eigen_profile(grid: &Grid, i: usize) -> f64 {
    if grid.bc() == BoundaryCondition::Neumann {
        return 1.0;
    }
    let x = grid.coords(i);
    (0..grid.dim())
        .map(|d| (PI * x[d] / grid.extent()[d]).sin())
        .product()
}

/// Builds a nonnegative start with value 0 outside `free`. For `Side::Plus`
/// (`Side::Minus`) the weighted q-mass is made positive (negative) by
/// repeatedly amplifying the plus (minus) nodes.
pub(crate) fn initial_field(
    weight: &Weight,
    q: f64,
    kind: InitKind,
    seed: u64,
    side: Side,
    free: &[bool],
) -> Result<Vec<f64>> {
    let grid = weight.grid();
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |amp: f64| amp * rng.gen_range(0.0..1.0);
    let mut x: Vec<f64> = match kind {
        InitKind::PlusShape => (0..n)
            .map(|i| {
                if weight.is_plus(i) {
                    1.0 + noise(0.1)
                } else {
                    noise(0.05)
                }
            })
            .collect(),
        InitKind::PlusComponent { index } => {
            let mask: Vec<bool> = (0..n).map(|i| weight.is_plus(i) && free[i]).collect();
            let comps = components(grid, &mask);
            let mut v = vec![0.0; n];
            if !comps.is_empty() {
                for &i in &comps[index % comps.len()] {
                    v[i] += 1.0;
                }
            }
            v
        }
        InitKind::Noise => (0..n).map(|_| noise(1.0)).collect(),
        InitKind::Constant => (0..n).map(|_| 1.0 + noise(0.01)).collect(),
        InitKind::EigenShape => {
            let mut v: Vec<f64> = (0..n).map(|i| eigen_profile(grid, i) + noise(0.05)).collect();
            if side == Side::Minus {
                for &i in weight.minus_nodes() {
                    v[i] += noise(0.2);
                }
            }
            v
        }
    };
    for (v, &f) in x.iter_mut().zip(free) {
        if !f {
            *v = 0.0;
        }
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Initialization("start vanishes on every free node".into()));
    }
    let (sign, boost): (f64, Vec<usize>) = match side {
        Side::Any => return Ok(x),
        Side::Plus => (1.0, weight.plus_nodes().to_vec()),
        Side::Minus => (-1.0, weight.minus_nodes().to_vec()),
    };
    let boost: Vec<usize> = boost.into_iter().filter(|&i| free[i]).collect();
    if boost.is_empty() {
        return Err(Error::Initialization(format!(
            "no free node where a has sign {}",
            if sign > 0.0 { "+" } else { "-" }
        )));
    }
    for _ in 0..80 {
        if sign * weighted_mass_raw(weight, &x, q) > 0.0 {
            return Ok(x);
        }
        for &i in &boost {
            x[i] = 2.0 * x[i] + 1e-3;
        }
    }
    Err(Error::Initialization(format!(
        "could not reach sign {} of int a|u|^q from the start (the {} support is too small on this grid)",
        if sign > 0.0 { "+" } else { "-" },
        if sign > 0.0 { "a+" } else { "a-" }
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_weight, WeightSpec};

    fn weight() -> Weight {
        let g = build_grid(1, &[1.0], &[41], BoundaryCondition::Dirichlet).unwrap();
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

    #[test]
    fn starts_land_on_the_requested_side() {
        let w = weight();
        let free = w.grid().dof_mask().to_vec();
        for kind in [InitKind::PlusShape, InitKind::Noise, InitKind::EigenShape, InitKind::Constant] {
            for (side, s) in [(Side::Plus, 1.0), (Side::Minus, -1.0)] {
                let x = initial_field(&w, 1.5, kind, 5, side, &free).unwrap();
                assert!(s * weighted_mass_raw(&w, &x, 1.5) > 0.0, "{kind:?}");
                assert!(x.iter().all(|&v| v >= 0.0));
                assert_eq!(x[0], 0.0);
                assert_eq!(x[40], 0.0);
            }
        }
    }

    #[test]
    fn component_start_covers_one_bump() {
        let w = weight();
        let free = w.grid().dof_mask().to_vec();
        let x = initial_field(&w, 1.5, InitKind::PlusComponent { index: 1 }, 1, Side::Plus, &free).unwrap();
        assert!(x[37] > 0.0 && x[3] == 0.0);
    }

    #[test]
    fn same_seed_same_start() {
        let w = weight();
        let free = w.grid().dof_mask().to_vec();
        let a = initial_field(&w, 1.5, InitKind::Noise, 9, Side::Any, &free).unwrap();
        let b = initial_field(&w, 1.5, InitKind::Noise, 9, Side::Any, &free).unwrap();
        assert_eq!(a, b);
    }
}
