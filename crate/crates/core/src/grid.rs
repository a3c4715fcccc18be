//! Tensor-product grids on axis-aligned boxes.
//!
//! Nodes are numbered row-major over the axes in the order `x_1 .. x_N`, so
//! the last axis varies fastest. Every axis carries `cells + 1` nodes; the
//! first and last node of each axis lie on the boundary and hold the
//! homogeneous Dirichlet value.
//!
//! The coordinates are split at `q`: axes `0..q` form the degenerating block
//! `X1`, axes `q..N` the retained block `X2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
    q: usize,
    #[serde(skip)]
    spacing: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(lower: &[f64], upper: &[f64], cells: &[usize], q: usize) -> Result<Self> {
        let n = cells.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::config(format!(
                "extent and cell lists disagree in length ({}, {}, {})",
                lower.len(),
                upper.len(),
                n
            )));
        }
        if n < 2 {
            return Err(Error::config(format!("dimension must be at least 2, got {n}")));
        }
        if q < 1 || q >= n {
            return Err(Error::config(format!("split index q={q} must satisfy 1 <= q < {n}")));
        }
        let mut spacing = Vec::with_capacity(n);
        for axis in 0..n {
            if cells[axis] < 2 {
                return Err(Error::config(format!(
                    "axis {axis} has {} cells, need at least 2",
                    cells[axis]
                )));
            }
            let len = upper[axis] - lower[axis];
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::config(format!(
                    "axis {axis} has degenerate extent [{}, {}]",
                    lower[axis], upper[axis]
                )));
            }
            spacing.push(len / cells[axis] as f64);
        }
        let mut strides = vec![1; n];
        for axis in (0..n - 1).rev() {
            strides[axis] = strides[axis + 1] * (cells[axis + 1] + 1);
        }
        Ok(Grid {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            cells: cells.to_vec(),
            q,
            spacing,
            strides,
        })
    }

    /// Grid on the unit box `(0,1)^N`.
    pub fn unit(cells: &[usize], q: usize) -> Result<Self> {
        let n = cells.len();
        Grid::new(&vec![0.0; n], &vec![1.0; n], cells, q)
    }

    /// Rebuilds the derived fields after deserialization.
    pub fn revalidate(self) -> Result<Self> {
        Grid::new(&self.lower, &self.upper, &self.cells, self.q)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Axes of the degenerating block.
    pub fn x1_axes(&self) -> std::ops::Range<usize> {
        0..self.q
    }

    /// Axes of the retained block.
    pub fn x2_axes(&self) -> std::ops::Range<usize> {
        self.q..self.dim()
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn interior_count(&self) -> usize {
        self.cells.iter().map(|c| c - 1).product()
    }

    /// Volume of one cell, the quadrature weight of a node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in 0..self.dim() {
            idx[axis] = linear / self.strides[axis];
            linear %= self.strides[axis];
        }
        idx
    }

    pub fn coord_axis(&self, axis: usize, i: usize) -> f64 {
        if i == self.cells[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing[axis]
        }
    }

    pub fn coord(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(a, &i)| self.coord_axis(a, i)).collect()
    }

    /// Nearest node index of a coordinate (round trip of [`Grid::coord`]).
    pub fn index_of(&self, x: &[f64]) -> Vec<usize> {
        x.iter()
            .enumerate()
            .map(|(a, &v)| {
                let t = ((v - self.lower[a]) / self.spacing[a]).round();
                (t.max(0.0) as usize).min(self.cells[a])
            })
            .collect()
    }

    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        idx.iter().zip(&self.cells).any(|(&i, &c)| i == 0 || i == c)
    }

    /// Linear indices of all interior nodes, in row-major order. This is the
    /// unknown numbering used by the assembled operators.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let lo = vec![1; self.dim()];
        let hi: Vec<usize> = self.cells.iter().map(|c| c - 1).collect();
        self.box_nodes(&lo, &hi)
    }

    /// Linear indices of the nodes of an inclusive index box, row-major.
    pub fn box_nodes(&self, lo: &[usize], hi: &[usize]) -> Vec<usize> {
        let n = self.dim();
        if (0..n).any(|a| lo[a] > hi[a]) {
            return Vec::new();
        }
        let count: usize = (0..n).map(|a| hi[a] - lo[a] + 1).product();
        let mut out = Vec::with_capacity(count);
        let mut idx = lo.to_vec();
        loop {
            out.push(self.linear(&idx));
            let mut axis = n;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if idx[axis] < hi[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = lo[axis];
            }
        }
    }

    /// Distance from the box of `mask` to the boundary of the domain.
    pub fn boundary_distance(&self, mask: &SubdomainMask) -> f64 {
        (0..self.dim())
            .map(|a| {
                let below = mask.lo[a] as f64 * self.spacing[a];
                let above = (self.cells[a] - mask.hi[a]) as f64 * self.spacing[a];
                below.min(above)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Interior subdomain `ω ⊂⊂ Ω` realized as an index box inset from every face.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubdomainMask {
    cells: Vec<usize>,
    margins: Vec<usize>,
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl SubdomainMask {
    pub fn margins(&self) -> &[usize] {
        &self.margins
    }

    /// Inclusive lower corner of the index box.
    pub fn lo(&self) -> &[usize] {
        &self.lo
    }

    /// Inclusive upper corner of the index box.
    pub fn hi(&self) -> &[usize] {
        &self.hi
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&i, (&l, &h))| l <= i && i <= h)
    }

    /// Index-wise inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &SubdomainMask) -> bool {
        self.cells == other.cells
            && (0..self.lo.len()).all(|a| other.lo[a] <= self.lo[a] && self.hi[a] <= other.hi[a])
    }

    pub fn node_count(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l + 1).product()
    }

    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        grid.box_nodes(&self.lo, &self.hi)
    }

    /// Quadrature measure of the box: node count times cell volume.
    pub fn measure(&self, grid: &Grid) -> f64 {
        self.node_count() as f64 * grid.cell_volume()
    }

    pub fn fits(&self, grid: &Grid) -> bool {
        self.cells == grid.cells
    }
}

/// Selects nodes with index in `[margin, cells - margin]` on every axis.
pub fn interior_subdomain(grid: &Grid, margins: &[usize]) -> Result<SubdomainMask> {
    if margins.len() != grid.dim() {
        return Err(Error::config(format!(
            "margin list has {} entries for a {}-dimensional grid",
            margins.len(),
            grid.dim()
        )));
    }
    let mut lo = Vec::with_capacity(grid.dim());
    let mut hi = Vec::with_capacity(grid.dim());
    for (axis, (&m, &c)) in margins.iter().zip(grid.cells()).enumerate() {
        if m < 1 {
            return Err(Error::config(format!("margin on axis {axis} must be at least one cell")));
        }
        if 2 * m > c {
            return Err(Error::config(format!(
                "margin {m} leaves an empty box on axis {axis} with {c} cells"
            )));
        }
        lo.push(m);
        hi.push(c - m);
    }
    Ok(SubdomainMask {
        cells: grid.cells().to_vec(),
        margins: margins.to_vec(),
        lo,
        hi,
    })
}

/// Same margin on every axis.
pub fn uniform_subdomain(grid: &Grid, margin: usize) -> Result<SubdomainMask> {
    interior_subdomain(grid, &vec![margin; grid.dim()])
}

/// Increasing exhaustion `ω_0 ⊆ ω_1 ⊆ ...` used by the Fréchet metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedFamily {
    masks: Vec<SubdomainMask>,
}

impl NestedFamily {
    pub fn from_masks(masks: Vec<SubdomainMask>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::config("nested family needs at least one mask"));
        }
        for (n, pair) in masks.windows(2).enumerate() {
            if !pair[0].is_subset_of(&pair[1]) {
                return Err(Error::validation(format!("mask {n} is not contained in mask {}", n + 1)));
            }
        }
        Ok(NestedFamily { masks })
    }

    pub fn masks(&self) -> &[SubdomainMask] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Margins of every member, for reports.
    pub fn margin_schedule(&self) -> Vec<Vec<usize>> {
        self.masks.iter().map(|m| m.margins.clone()).collect()
    }
}

/// Margins start at a quarter of the cells per axis and halve down to one
/// cell; once there, the largest mask repeats.
pub fn nested_family(grid: &Grid, n_max: usize) -> Result<NestedFamily> {
    if n_max < 1 {
        return Err(Error::config("nested family size must be at least 1"));
    }
    let mut margins: Vec<usize> = grid.cells().iter().map(|c| (c / 4).max(1)).collect();
    let mut masks = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        masks.push(interior_subdomain(grid, &margins)?);
        margins.iter_mut().for_each(|m| *m = (*m / 2).max(1));
    }
    NestedFamily::from_masks(masks)
}

/// Whole-cell translation `τ_h u(x) = u(x + h)`.
///
/// Every node of `mask` must read from inside the grid; otherwise an error is
/// returned. Nodes outside the mask whose shifted read escapes the grid are
/// set to NaN so that accidental use shows up in any later norm.
pub fn shift_field(field: &ScalarField, h_cells: &[isize], mask: &SubdomainMask) -> Result<ScalarField> {
    let grid = field.grid();
    if h_cells.len() != grid.dim() || !mask.fits(grid) {
        return Err(Error::validation("shift or mask does not match the field's grid"));
    }
    for axis in 0..grid.dim() {
        let lo = mask.lo[axis] as isize + h_cells[axis];
        let hi = mask.hi[axis] as isize + h_cells[axis];
        if lo < 0 || hi > grid.cells()[axis] as isize {
            return Err(Error::validation(format!(
                "shift {h_cells:?} moves the mask outside the grid on axis {axis}"
            )));
        }
    }
    let offset: isize = h_cells
        .iter()
        .enumerate()
        .map(|(a, &h)| h * grid.stride(a) as isize)
        .sum();
    let values = field.values();
    let mut out = vec![f64::NAN; values.len()];
    for (lin, slot) in out.iter_mut().enumerate() {
        let idx = grid.multi(lin);
        let inside = idx.iter().enumerate().all(|(a, &i)| {
            let j = i as isize + h_cells[a];
            j >= 0 && j <= grid.cells()[a] as isize
        });
        if inside {
            *slot = values[(lin as isize + offset) as usize];
        }
    }
    Ok(ScalarField::from_values(field.grid_arc().clone(), out))
}
