//! Uniform finite-difference domains and sign-changing weights.
//!
//! A [`Grid`] is an interval or an axis-aligned rectangle with a fixed
//! row-major node ordering (x fastest). Besides geometry it precomputes the
//! two discretization ingredients every functional needs: lumped trapezoid
//! quadrature weights for nodal integrals and the list of one-sided gradient
//! stencils used for the gradient energy.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// One forward difference `(u[to] - u[from]) * inv_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Diff {
    pub from: usize,
    pub to: usize,
    pub inv_h: f64,
}

/// A discrete gradient sample: `ncomp` forward differences and the area/length it represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GradStencil {
    pub weight: f64,
    pub ncomp: usize,
    pub comps: [Diff; 2],
}

impl GradStencil {
    #[inline]
    pub fn components(&self) -> &[Diff] {
        &self.comps[..self.ncomp]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    extent: Vec<f64>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    bc: BoundaryCondition,
    dof_mask: Vec<bool>,
    quad: Vec<f64>,
    stencils: Vec<GradStencil>,
}

/// Builds a 1D or 2D grid. `extent` and `nodes` carry one entry per axis.
pub fn build_grid(
    dim: usize,
    extent: &[f64],
    nodes: &[usize],
    bc: BoundaryCondition,
) -> Result<Arc<Grid>> {
    Grid::new(dim, extent, nodes, bc).map(Arc::new)
}

impl Grid {
    pub fn new(dim: usize, extent: &[f64], nodes: &[usize], bc: BoundaryCondition) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")));
        }
        if extent.len() != dim || nodes.len() != dim {
            return Err(Error::Config(format!(
                "expected {dim} extent and node entries, got {} and {}",
                extent.len(),
                nodes.len()
            )));
        }
        if let Some(&n) = nodes.iter().find(|&&n| n < 3) {
            return Err(Error::Config(format!("need at least 3 nodes per axis, got {n}")));
        }
        if let Some(&e) = extent.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("extent must be positive and finite, got {e}")));
        }
        let spacing: Vec<f64> = extent
            .iter()
            .zip(nodes)
            .map(|(&e, &n)| e / (n - 1) as f64)
            .collect();
        let total: usize = nodes.iter().product();

        let mut grid = Grid {
            dim,
            extent: extent.to_vec(),
            nodes: nodes.to_vec(),
            spacing,
            bc,
            dof_mask: vec![true; total],
            quad: vec![0.0; total],
            stencils: Vec::new(),
        };
        if bc == BoundaryCondition::Dirichlet {
            for i in 0..total {
                grid.dof_mask[i] = !grid.is_boundary(i);
            }
        }
        grid.quad = (0..total).map(|i| grid.trapezoid_weight(i)).collect();
        grid.stencils = grid.assemble_stencils();
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn dof_mask(&self) -> &[bool] {
        &self.dof_mask
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.dof_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_mask.is_empty()
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.dof_mask[i]
    }

    pub fn free_count(&self) -> usize {
        self.dof_mask.iter().filter(|&&f| f).count()
    }

    /// Product of the spacings, i.e. the area (length in 1D) of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        self.extent.iter().product()
    }

    /// Trapezoid quadrature weights including the cell volume, so that
    /// `sum_i quad[i] * f[i]` approximates the integral of `f`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad
    }

    pub(crate) fn stencils(&self) -> &[GradStencil] {
        &self.stencils
    }

    /// Axis indices of node `i`.
    pub fn axis_index(&self, i: usize) -> (usize, usize) {
        (i % self.nodes[0], i / self.nodes[0])
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes[0] + ix
    }

    /// Coordinates of node `i`; the second entry is 0 in 1D.
    pub fn coords(&self, i: usize) -> [f64; 2] {
        let (ix, iy) = self.axis_index(i);
        let x = ix as f64 * self.spacing[0];
        let y = if self.dim == 2 {
            iy as f64 * self.spacing[1]
        } else {
            0.0
        };
        [x, y]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        let (ix, iy) = self.axis_index(i);
        let on_x = ix == 0 || ix == self.nodes[0] - 1;
        if self.dim == 1 {
            on_x
        } else {
            on_x || iy == 0 || iy == self.nodes[1] - 1
        }
    }

    /// Axis-aligned neighbours of node `i` (2 in the interior of 1D, 4 in 2D).
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (ix, iy) = self.axis_index(i);
        let nx = self.nodes[0];
        let ny = if self.dim == 2 { self.nodes[1] } else { 1 };
        let cands = [
            (ix > 0).then(|| self.index(ix - 1, iy)),
            (ix + 1 < nx).then(|| self.index(ix + 1, iy)),
            (iy > 0).then(|| self.index(ix, iy.wrapping_sub(1))),
            (iy + 1 < ny).then(|| self.index(ix, iy + 1)),
        ];
        cands.into_iter().flatten()
    }

    /// Half bandwidth of matrices coupling nodes through one gradient stencil.
    pub(crate) fn bandwidth(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.nodes[0]
        }
    }

    fn trapezoid_weight(&self, i: usize) -> f64 {
        let (ix, iy) = self.axis_index(i);
        let end = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut w = end(ix, self.nodes[0]);
        if self.dim == 2 {
            w *= end(iy, self.nodes[1]);
        }
        w * self.cell_volume()
    }

    fn assemble_stencils(&self) -> Vec<GradStencil> {
        let blank = Diff {
            from: 0,
            to: 0,
            inv_h: 0.0,
        };
        if self.dim == 1 {
            let h = self.spacing[0];
            return (0..self.nodes[0] - 1)
                .map(|i| GradStencil {
                    weight: h,
                    ncomp: 1,
                    comps: [
                        Diff {
                            from: i,
                            to: i + 1,
                            inv_h: 1.0 / h,
                        },
                        blank,
                    ],
                })
                .collect();
        }
        // Each cell contributes the average of its four corner gradients; a
        // corner gradient uses the two cell edges meeting at that corner.
        let (nx, ny) = (self.nodes[0], self.nodes[1]);
        let (hx, hy) = (self.spacing[0], self.spacing[1]);
        let weight = 0.25 * hx * hy;
        let mut out = Vec::with_capacity(4 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let n00 = self.index(i, j);
                let n10 = self.index(i + 1, j);
                let n01 = self.index(i, j + 1);
                let n11 = self.index(i + 1, j + 1);
                let bottom = Diff { from: n00, to: n10, inv_h: 1.0 / hx };
                let top = Diff { from: n01, to: n11, inv_h: 1.0 / hx };
                let left = Diff { from: n00, to: n01, inv_h: 1.0 / hy };
                let right = Diff { from: n10, to: n11, inv_h: 1.0 / hy };
                for (gx, gy) in [(bottom, left), (bottom, right), (top, left), (top, right)] {
                    out.push(GradStencil {
                        weight,
                        ncomp: 2,
                        comps: [gx, gy],
                    });
                }
            }
        }
        out
    }
}

/// Nodal samples of an indefinite weight `a` together with its sign sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    values: Field,
    plus_nodes: Vec<usize>,
    minus_nodes: Vec<usize>,
}

/// Families of weights that can be requested from a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `a = a_plus` on `[b, b + delta/2]` and `[c - delta/2, c]`, `a = -a_minus` in between.
    TwoBump1d { a_plus: f64, a_minus: f64, delta: f64 },
    /// `a = a_plus` inside the closed ball, `-a_minus` outside. Works in 1D (interval) and 2D (disk).
    #[serde(alias = "ball_bump")]
    DiskBump2d {
        center: Vec<f64>,
        radius: f64,
        a_plus: f64,
        a_minus: f64,
    },
    /// One value per node in grid ordering, last CSV column.
    NodalFile { path: PathBuf },
}

pub fn build_weight(grid: &Arc<Grid>, spec: &WeightSpec) -> Result<Weight> {
    build_weight_in(grid, spec, None)
}

/// Like [`build_weight`], resolving relative nodal-file paths against `base`.
pub fn build_weight_in(grid: &Arc<Grid>, spec: &WeightSpec, base: Option<&Path>) -> Result<Weight> {
    match spec {
        WeightSpec::TwoBump1d {
            a_plus,
            a_minus,
            delta,
        } => {
            if grid.dim() != 1 {
                return Err(Error::Config("two_bump_1d requires a 1D grid".into()));
            }
            check_amplitudes(*a_plus, *a_minus)?;
            let length = grid.extent()[0];
            if !(*delta > 0.0 && *delta < length) {
                return Err(Error::Config(format!(
                    "two_bump_1d needs 0 < delta < domain length, got {delta}"
                )));
            }
            let n = grid.len();
            let k = (0.5 * delta / grid.spacing()[0]).round() as usize;
            let values = (0..n)
                .map(|i| {
                    if i <= k || i + k >= n - 1 {
                        *a_plus
                    } else {
                        -*a_minus
                    }
                })
                .collect();
            Weight::from_values(grid, values)
        }
        WeightSpec::DiskBump2d {
            center,
            radius,
            a_plus,
            a_minus,
        } => {
            if center.len() != grid.dim() {
                return Err(Error::Config(format!(
                    "ball center has {} coordinates on a {}D grid",
                    center.len(),
                    grid.dim()
                )));
            }
            check_amplitudes(*a_plus, *a_minus)?;
            if !(*radius > 0.0) {
                return Err(Error::Config(format!("radius must be positive, got {radius}")));
            }
            let values = (0..grid.len())
                .map(|i| {
                    let x = grid.coords(i);
                    let r2: f64 = center.iter().enumerate().map(|(d, c)| (x[d] - c).powi(2)).sum();
                    if r2.sqrt() <= radius * (1.0 + 1e-12) {
                        *a_plus
                    } else {
                        -*a_minus
                    }
                })
                .collect();
            Weight::from_values(grid, values)
        }
        WeightSpec::NodalFile { path } => {
            let resolved = match base {
                Some(b) if path.is_relative() => b.join(path),
                _ => path.clone(),
            };
            let values = crate::io::read_column_csv(&resolved)?;
            if values.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "nodal file {} has {} values, grid has {} nodes",
                    resolved.display(),
                    values.len(),
                    grid.len()
                )));
            }
            Weight::from_values(grid, values)
        }
    }
}

fn check_amplitudes(a_plus: f64, a_minus: f64) -> Result<()> {
    if !(a_plus > 0.0) {
        return Err(Error::SignChange(format!("a_plus must be positive, got {a_plus}")));
    }
    if !(a_minus > 0.0) {
        return Err(Error::SignChange(format!("a_minus must be positive, got {a_minus}")));
    }
    Ok(())
}

impl Weight {
    /// Wraps nodal values, rejecting weights that do not change sign.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight values"));
        }
        let plus_nodes: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
        let minus_nodes: Vec<usize> = (0..values.len()).filter(|&i| values[i] < 0.0).collect();
        if plus_nodes.is_empty() {
            return Err(Error::SignChange("a <= 0 everywhere".into()));
        }
        if minus_nodes.is_empty() {
            return Err(Error::SignChange("a >= 0 everywhere".into()));
        }
        Ok(Weight {
            values: Field::new(grid.clone(), values)?,
            plus_nodes,
            minus_nodes,
        })
    }

    pub fn values(&self) -> &Field {
        &self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.values.grid()
    }

    pub fn plus_nodes(&self) -> &[usize] {
        &self.plus_nodes
    }

    pub fn minus_nodes(&self) -> &[usize] {
        &self.minus_nodes
    }

    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.values.values()[i]
    }

    #[inline]
    pub fn positive_part(&self, i: usize) -> f64 {
        self.at(i).max(0.0)
    }

    #[inline]
    pub fn negative_part(&self, i: usize) -> f64 {
        (-self.at(i)).max(0.0)
    }

    pub fn is_plus(&self, i: usize) -> bool {
        self.at(i) > 0.0
    }

    pub fn is_minus(&self, i: usize) -> bool {
        self.at(i) < 0.0
    }

    /// Trapezoid integral of `a`.
    pub fn integral(&self) -> f64 {
        self.values
            .values()
            .iter()
            .zip(self.grid().quad_weights())
            .map(|(a, w)| a * w)
            .sum()
    }
}

/// Connected components (axis-neighbour adjacency) of `{i : mask[i]}`, ordered by smallest index.
pub fn components(grid: &Grid, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for start in 0..grid.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            let i = comp[k];
            k += 1;
            for j in grid.neighbors(i) {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `a+ - n a-`, nodewise.
pub fn scale_negative_part(w: &Weight, n: f64) -> Result<Weight> {
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!("scale n must be finite and >= 0, got {n}")));
    }
    let values = (0..w.grid().len())
        .map(|i| w.positive_part(i) - n * w.negative_part(i))
        .collect();
    Weight::from_values(w.grid(), values)
}
