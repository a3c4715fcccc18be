//! Matrix-valued diffusion coefficients `A(x)` and their anisotropic scaling.
//!
//! A [`CoefficientField`] stores the `N x N` matrix at every grid node
//! (row-major per node) together with the declared ellipticity constant and,
//! optionally, the derivatives `∂_i a_ij` needed by the non-divergence form of
//! the operator. [`ScaledCoefficientField`] applies
//!
//! ```text
//! a_ij^ε = ε² a_ij   i, j < q
//!          a_ij      i, j ≥ q
//!          ε a_ij    otherwise
//! ```
//!
//! with `q` the split index of the grid.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Closed-form coefficient families selectable by name in a study config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CoefficientFamily {
    Identity,
    /// Constant matrix, given row by row.
    Constant { entries: Vec<Vec<f64>> },
    /// Variable C¹ family:
    /// `a_ii = 1 + x_{i+1}²/2 + sin²(π x_i)/4` (axis index cyclic) and
    /// `a_ij = sin(π x_i) sin(π x_j) / (4 (N-1))` off the diagonal.
    /// Diagonal entries are at least 1 and each row's off-diagonal mass is at
    /// most 1/4, so `λ = 3/4`.
    Smooth,
}

impl CoefficientFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CoefficientFamily::Identity => "identity",
            CoefficientFamily::Constant { .. } => "constant",
            CoefficientFamily::Smooth => "smooth",
        }
    }

    pub fn sample(&self, grid: Arc<Grid>) -> Result<CoefficientField> {
        let n = grid.dim();
        match self {
            CoefficientFamily::Identity => {
                let m = DMatrix::<f64>::identity(n, n);
                CoefficientField::constant(grid, m.as_slice(), 1.0)
            }
            CoefficientFamily::Constant { entries } => {
                if entries.len() != n || entries.iter().any(|row| row.len() != n) {
                    return Err(Error::config(format!("constant coefficient must be {n}x{n}")));
                }
                let flat: Vec<f64> = entries.iter().flatten().copied().collect();
                let lambda = min_sym_eigenvalue(&flat, n);
                if !(lambda > 0.0) {
                    return Err(Error::config(format!(
                        "constant coefficient is not uniformly elliptic (λ = {lambda})"
                    )));
                }
                CoefficientField::constant(grid, &flat, lambda)
            }
            CoefficientFamily::Smooth => {
                let c = 0.25 / (n as f64 - 1.0);
                let nodes = grid.node_count();
                let mut entries = vec![0.0; nodes * n * n];
                let mut derivs = vec![0.0; nodes * n * n];
                for lin in 0..nodes {
                    let x = grid.coord(&grid.multi(lin));
                    let a = &mut entries[lin * n * n..(lin + 1) * n * n];
                    let d = &mut derivs[lin * n * n..(lin + 1) * n * n];
                    for i in 0..n {
                        let s = (PI * x[i]).sin();
                        let next = x[(i + 1) % n];
                        a[i * n + i] = 1.0 + 0.5 * next * next + 0.25 * s * s;
                        d[i * n + i] = 0.25 * PI * (2.0 * PI * x[i]).sin();
                        for j in 0..n {
                            if j != i {
                                a[i * n + j] = c * s * (PI * x[j]).sin();
                                d[i * n + j] = c * PI * (PI * x[i]).cos() * (PI * x[j]).sin();
                            }
                        }
                    }
                }
                CoefficientField::from_table(grid, entries, 0.75, Some(derivs))
            }
        }
    }
}

/// Smallest eigenvalue of the symmetric part of a row-major `n x n` matrix.
pub fn min_sym_eigenvalue(a: &[f64], n: usize) -> f64 {
    let m = DMatrix::from_row_slice(n, n, a);
    let sym = (&m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: Arc<Grid>,
    entries: Vec<f64>,
    lambda: f64,
    derivs: Option<Vec<f64>>,
}

impl CoefficientField {
    /// Same matrix at every node; derivatives are identically zero.
    pub fn constant(grid: Arc<Grid>, matrix: &[f64], lambda: f64) -> Result<Self> {
        let n = grid.dim();
        if matrix.len() != n * n {
            return Err(Error::config(format!("expected {} matrix entries", n * n)));
        }
        let nodes = grid.node_count();
        let entries = matrix.iter().copied().cycle().take(nodes * n * n).collect();
        let derivs = Some(vec![0.0; nodes * n * n]);
        CoefficientField::from_table(grid, entries, lambda, derivs)
    }

    /// User-supplied table: `entries[node * N*N + i*N + j] = a_ij(node)` and,
    /// if present, `derivs` in the same layout holding `∂_i a_ij`.
    pub fn from_table(grid: Arc<Grid>, entries: Vec<f64>, lambda: f64, derivs: Option<Vec<f64>>) -> Result<Self> {
        let n = grid.dim();
        let want = grid.node_count() * n * n;
        if entries.len() != want || derivs.as_ref().is_some_and(|d| d.len() != want) {
            return Err(Error::config(format!("coefficient table must hold {want} entries")));
        }
        if !(lambda > 0.0) {
            return Err(Error::config(format!("declared ellipticity constant must be positive, got {lambda}")));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("coefficient table contains non-finite entries"));
        }
        Ok(CoefficientField { grid, entries, lambda, derivs })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn entry(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.grid.dim();
        self.entries[node * n * n + i * n + j]
    }

    pub fn matrix(&self, node: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.entries[node * n * n..(node + 1) * n * n]
    }

    /// `∂_i a_ij` at `node`, if derivatives were supplied.
    pub fn deriv(&self, node: usize, i: usize, j: usize) -> Option<f64> {
        let n = self.grid.dim();
        self.derivs.as_ref().map(|d| d[node * n * n + i * n + j])
    }

    pub fn has_derivatives(&self) -> bool {
        self.derivs.is_some()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.grid.dim();
        (0..self.grid.node_count()).all(|node| {
            (0..n).all(|i| {
                (0..i).all(|j| {
                    let (a, b) = (self.entry(node, i, j), self.entry(node, j, i));
                    (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0)
                })
            })
        })
    }
}

/// Minimum over nodes of the smallest eigenvalue of the symmetric part of
/// `A`, checked against the declared `λ`.
pub fn verify_ellipticity(a: &CoefficientField) -> Result<f64> {
    let n = a.grid.dim();
    let mut worst = (f64::INFINITY, 0usize);
    for node in 0..a.grid.node_count() {
        let m = if n == 2 {
            sym2_min_eigenvalue(a.matrix(node))
        } else {
            min_sym_eigenvalue(a.matrix(node), n)
        };
        if m < worst.0 {
            worst = (m, node);
        }
    }
    let slack = 1e-12 * a.lambda.abs().max(1.0);
    if worst.0 < a.lambda - slack {
        let at = a.grid.coord(&a.grid.multi(worst.1));
        return Err(Error::validation(format!(
            "ellipticity violated: observed {:.6e} < declared {:.6e} at node {} (x = {at:?})",
            worst.0, a.lambda, worst.1
        )));
    }
    Ok(worst.0)
}

fn sym2_min_eigenvalue(m: &[f64]) -> f64 {
    let (a, b, d) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    mean - rad
}

/// `A_ε` for a fixed `ε ∈ (0, 1]`.
#[derive(Debug, Clone)]
pub struct ScaledCoefficientField {
    base: Arc<CoefficientField>,
    eps: f64,
    factors: Vec<f64>,
}

pub fn scale_coefficients(a: Arc<CoefficientField>, eps: f64) -> Result<ScaledCoefficientField> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config(format!("ε must lie in (0, 1], got {eps}")));
    }
    let n = a.grid.dim();
    let q = a.grid.q();
    let mut factors = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = (i < q) as i32 + (j < q) as i32;
            factors[i * n + j] = eps.powi(k);
        }
    }
    Ok(ScaledCoefficientField { base: a, eps, factors })
}

impl ScaledCoefficientField {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base(&self) -> &Arc<CoefficientField> {
        &self.base
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.base.grid
    }

    /// Scale factor applied to `a_ij`.
    pub fn factor(&self, i: usize, j: usize) -> f64 {
        self.factors[i * self.base.grid.dim() + j]
    }

    pub fn entry(&self, node: usize, i: usize, j: usize) -> f64 {
        self.factor(i, j) * self.base.entry(node, i, j)
    }

    pub fn deriv(&self, node: usize, i: usize, j: usize) -> Option<f64> {
        self.base.deriv(node, i, j).map(|d| self.factor(i, j) * d)
    }

    pub fn matrix(&self, node: usize) -> Vec<f64> {
        let n = self.base.grid.dim();
        (0..n * n).map(|k| self.factors[k] * self.base.entries[node * n * n + k]).collect()
    }

    /// Quadratic form `A_ε(node) ζ·ζ`.
    pub fn quadratic_form(&self, node: usize, zeta: &[f64]) -> f64 {
        let n = zeta.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.entry(node, i, j) * zeta[i] * zeta[j];
            }
        }
        s
    }
}
