use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Nodal values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    /// Like [`Field::new`] but zeroes every constrained (Dirichlet boundary) node.
    pub fn admissible(grid: Arc<Grid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() == grid.len() {
            for (v, &free) in values.iter_mut().zip(grid.dof_mask()) {
                if !free {
                    *v = 0.0;
                }
            }
        }
        Field::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Field {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    pub fn scaled(&self, t: f64) -> Field {
        self.map(|v| t * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Discrete L^r norm using the grid quadrature.
    pub fn lr_norm(&self, r: f64) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.quad_weights())
            .map(|(v, w)| w * v.abs().powf(r))
            .sum();
        s.powf(1.0 / r)
    }

    pub(crate) fn same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}

/// Max over free nodes of `|u_i - v_i|`.
pub fn sup_distance(u: &Field, v: &Field) -> f64 {
    u.values()
        .iter()
        .zip(v.values())
        .zip(u.grid().dof_mask())
        .filter(|(_, &free)| free)
        .fold(0.0, |m, ((a, b), _)| m.max((a - b).abs()))
}

/// Sup distance after normalizing both fields by their maximum.
pub fn shape_distance(u: &Field, v: &Field) -> f64 {
    let (mu, mv) = (u.max(), v.max());
    if !(mu > 0.0 && mv > 0.0) {
        return f64::INFINITY;
    }
    sup_distance(&u.scaled(1.0 / mu), &v.scaled(1.0 / mv))
}
