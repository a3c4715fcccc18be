//! Second-order finite differences on [`Grid`]s.
//!
//! Derivative fields are evaluated at interior nodes using the boundary nodes
//! as neighbours; their boundary entries are left at zero. The assembled
//! operator discretizes `-div(A_ε ∇u)` in flux form:
//!
//! * diagonal terms `-(a_ii u_{x_i})_{x_i}` with arithmetic face averages,
//! * mixed terms `-∂_i (a_ij ∂_j u)` as a composition of centered differences,
//!   which only touches the diagonal neighbours `p ± e_i ± e_j`.
//!
//! For symmetric `A` both parts yield a symmetric matrix.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::coefficients::ScaledCoefficientField;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// Square CSR matrix over the interior unknowns of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
    provenance: String,
}

impl SparseOperator {
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>, provenance: impl Into<String>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = SparseOperator {
            n,
            row_ptr,
            cols,
            vals,
            symmetric: false,
            provenance: provenance.into(),
        };
        op.symmetric = op.symmetry_defect() <= 1e-12;
        op
    }

    /// Diagonal matrix, mostly useful for tests and diagnostics.
    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let rows = diag
            .iter()
            .enumerate()
            .map(|(i, &d)| BTreeMap::from([(i, d)]))
            .collect();
        SparseOperator::from_rows(rows, "diagonal")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|col - row|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `self + s * other` on the union pattern.
    pub fn add_scaled(&self, other: &SparseOperator, s: f64) -> SparseOperator {
        assert_eq!(self.n, other.n);
        let rows = (0..self.n)
            .map(|i| {
                let mut row: BTreeMap<usize, f64> = self.row(i).collect();
                for (j, v) in other.row(i) {
                    *row.entry(j).or_insert(0.0) += s * v;
                }
                row
            })
            .collect();
        SparseOperator::from_rows(rows, format!("{} + {s}*({})", self.provenance, other.provenance))
    }
}

/// Node layout of a box lattice, independent of the X1/X2 split. Used both
/// for full grids and for the X2 slices of the limit problem.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    pub cells: Vec<usize>,
    pub spacing: Vec<f64>,
    pub strides: Vec<usize>,
    /// Interior unknown index per lattice node, `usize::MAX` on the boundary.
    pub unknown: Vec<usize>,
    /// Lattice node of each unknown.
    pub nodes: Vec<usize>,
}

impl Lattice {
    pub fn new(cells: &[usize], spacing: &[f64]) -> Self {
        let n = cells.len();
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * (cells[a + 1] + 1);
        }
        let total: usize = cells.iter().map(|c| c + 1).product();
        let mut unknown = vec![usize::MAX; total];
        let mut nodes = Vec::new();
        for lin in 0..total {
            let mut rem = lin;
            let interior = (0..n).all(|a| {
                let i = rem / strides[a];
                rem %= strides[a];
                i > 0 && i < cells[a]
            });
            if interior {
                unknown[lin] = nodes.len();
                nodes.push(lin);
            }
        }
        Lattice {
            cells: cells.to_vec(),
            spacing: spacing.to_vec(),
            strides,
            unknown,
            nodes,
        }
    }

    pub fn from_grid(grid: &Grid) -> Self {
        Lattice::new(grid.cells(), grid.spacing())
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }
}

/// Flux-form assembly over `lattice`; `coef(node, i, j)` returns the
/// (already scaled) coefficient at a lattice node.
pub(crate) fn assemble_flux(lattice: &Lattice, coef: impl Fn(usize, usize, usize) -> f64) -> Result<SparseOperator> {
    let n = lattice.dim();
    let mut rows = Vec::with_capacity(lattice.unknowns());
    for &p in &lattice.nodes {
        let mut row = BTreeMap::new();
        for i in 0..n {
            let s = lattice.strides[i];
            let h2 = lattice.spacing[i] * lattice.spacing[i];
            let centre = coef(p, i, i);
            let plus = 0.5 * (centre + coef(p + s, i, i));
            let minus = 0.5 * (centre + coef(p - s, i, i));
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(Error::validation(format!("non-finite coefficient a_{i}{i} near node {p}")));
            }
            *row.entry(lattice.unknown[p]).or_insert(0.0) += (plus + minus) / h2;
            for (nb, w) in [(p + s, plus), (p - s, minus)] {
                let k = lattice.unknown[nb];
                if k != usize::MAX {
                    *row.entry(k).or_insert(0.0) -= w / h2;
                }
            }
            for j in (0..n).filter(|&j| j != i) {
                let t = lattice.strides[j];
                let w = 0.25 / (lattice.spacing[i] * lattice.spacing[j]);
                let a_plus = coef(p + s, i, j);
                let a_minus = coef(p - s, i, j);
                if !(a_plus.is_finite() && a_minus.is_finite()) {
                    return Err(Error::validation(format!("non-finite coefficient a_{i}{j} near node {p}")));
                }
                let stencil = [
                    (p + s + t, -a_plus),
                    (p + s - t, a_plus),
                    (p - s + t, a_minus),
                    (p - s - t, -a_minus),
                ];
                for (nb, a) in stencil {
                    let k = lattice.unknown[nb];
                    if k != usize::MAX && a != 0.0 {
                        *row.entry(k).or_insert(0.0) += w * a;
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(SparseOperator::from_rows(rows, "flux form -div(A grad u), arithmetic face averages"))
}

/// Discrete `-div(A_ε ∇ ·)` on the interior unknowns of the grid.
pub fn assemble_operator(grid: &Grid, a: &ScaledCoefficientField) -> Result<SparseOperator> {
    if a.grid().as_ref() != grid {
        return Err(Error::validation("coefficient field sampled on a different grid"));
    }
    assemble_flux(&Lattice::from_grid(grid), |node, i, j| a.entry(node, i, j))
}

/// Non-divergence expansion `-Σ a_ij ∂²_ij u - Σ (∂_i a_ij) ∂_j u`, built from
/// the Hessian stencils and centered gradients. Used to cross-check the flux
/// form on smooth fields; it is not symmetric in general.
pub fn assemble_nondivergence(grid: &Grid, a: &ScaledCoefficientField) -> Result<SparseOperator> {
    if !a.base().has_derivatives() {
        return Err(Error::validation("non-divergence form needs coefficient derivatives"));
    }
    let lat = Lattice::from_grid(grid);
    let n = grid.dim();
    let mut rows = Vec::with_capacity(lat.unknowns());
    for &p in &lat.nodes {
        let mut row = BTreeMap::new();
        let add = |node: usize, v: f64, row: &mut BTreeMap<usize, f64>| {
            let k = lat.unknown[node];
            if k != usize::MAX {
                *row.entry(k).or_insert(0.0) += v;
            }
        };
        for i in 0..n {
            let s = lat.strides[i];
            let hi = lat.spacing[i];
            let aii = a.entry(p, i, i);
            add(p, 2.0 * aii / (hi * hi), &mut row);
            add(p + s, -aii / (hi * hi), &mut row);
            add(p - s, -aii / (hi * hi), &mut row);
            for j in (0..n).filter(|&j| j != i) {
                let t = lat.strides[j];
                let w = a.entry(p, i, j) / (4.0 * hi * lat.spacing[j]);
                add(p + s + t, -w, &mut row);
                add(p + s - t, w, &mut row);
                add(p - s + t, w, &mut row);
                add(p - s - t, -w, &mut row);
            }
        }
        // first-order part: b_j = Σ_i ∂_i a_ij
        for j in 0..n {
            let b: f64 = (0..n).map(|i| a.deriv(p, i, j).unwrap_or(0.0)).sum();
            let t = lat.strides[j];
            let w = b / (2.0 * lat.spacing[j]);
            add(p + t, -w, &mut row);
            add(p - t, w, &mut row);
        }
        rows.push(row);
    }
    Ok(SparseOperator::from_rows(rows, "non-divergence form -a_ij u_ij - (d_i a_ij) u_j"))
}

/// Applies an interior operator to a field with zero boundary data.
pub fn apply_to_field(op: &SparseOperator, u: &ScalarField) -> ScalarField {
    let y = op.apply(&u.interior_values());
    ScalarField::from_interior(u.grid_arc().clone(), &y)
}

/// Centered first derivative along `axis`.
pub fn partial(u: &ScalarField, axis: usize) -> ScalarField {
    let g = u.grid();
    let s = g.stride(axis);
    let inv = 0.5 / g.spacing()[axis];
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    for lin in g.interior_nodes() {
        out[lin] = (v[lin + s] - v[lin - s]) * inv;
    }
    ScalarField::from_values(u.grid_arc().clone(), out)
}

/// Second derivative `∂²_ij`: three-point rule for `i == j`, the four-point
/// cross stencil otherwise.
pub fn second_partial(u: &ScalarField, i: usize, j: usize) -> ScalarField {
    let g = u.grid();
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    let s = g.stride(i);
    if i == j {
        let inv = 1.0 / (g.spacing()[i] * g.spacing()[i]);
        for lin in g.interior_nodes() {
            out[lin] = (v[lin + s] - 2.0 * v[lin] + v[lin - s]) * inv;
        }
    } else {
        let t = g.stride(j);
        let inv = 0.25 / (g.spacing()[i] * g.spacing()[j]);
        for lin in g.interior_nodes() {
            out[lin] = (v[lin + s + t] - v[lin + s - t] - v[lin - s + t] + v[lin - s - t]) * inv;
        }
    }
    ScalarField::from_values(u.grid_arc().clone(), out)
}

pub fn grad_x1(u: &ScalarField) -> Vec<ScalarField> {
    u.grid().x1_axes().map(|a| partial(u, a)).collect()
}

pub fn grad_x2(u: &ScalarField) -> Vec<ScalarField> {
    u.grid().x2_axes().map(|a| partial(u, a)).collect()
}

fn hess_block(u: &ScalarField, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Vec<Vec<ScalarField>> {
    rows.map(|i| cols.clone().map(|j| second_partial(u, i, j)).collect()).collect()
}

/// `q x q` block of second derivatives in the X1 directions.
pub fn hess_x1(u: &ScalarField) -> Vec<Vec<ScalarField>> {
    hess_block(u, u.grid().x1_axes(), u.grid().x1_axes())
}

/// `(N-q) x (N-q)` block in the X2 directions.
pub fn hess_x2(u: &ScalarField) -> Vec<Vec<ScalarField>> {
    hess_block(u, u.grid().x2_axes(), u.grid().x2_axes())
}

/// `q x (N-q)` cross block.
pub fn hess_x1x2(u: &ScalarField) -> Vec<Vec<ScalarField>> {
    hess_block(u, u.grid().x1_axes(), u.grid().x2_axes())
}
