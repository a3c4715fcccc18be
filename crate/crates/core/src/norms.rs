//! Discrete pseudo-Sobolev norms, the Fréchet metric of the local space and
//! the translation modulus.
//!
//! Quadrature is the node rule: `‖u‖²_{L²(ω)} ≈ Σ_{p ∈ ω} u(p)² Π h_i`,
//! summed over interior nodes (or the nodes of a mask). With
//!
//! ```text
//! ‖u‖_{1,2}   = (‖u‖² + ‖∇_{X2} u‖²)^{1/2}
//! ‖u‖^ω_{2,2} = (‖u‖² + ‖∇_{X2} u‖² + ‖∇²_{X2} u‖²_{L²(ω)})^{1/2}
//! d(u, v)     = Σ_n 2^{-n} t_n / (1 + t_n),   t_n = ‖u - v‖^{ω_n}_{2,2}
//! ```
//!
//! The Hessian seminorms sum over ordered index pairs, so a mixed derivative
//! inside one block is counted twice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{partial, second_partial};
use crate::field::ScalarField;
use crate::grid::{shift_field, Grid, NestedFamily, SubdomainMask};

fn sum_sq(values: &[f64], nodes: &[usize]) -> f64 {
    nodes.iter().map(|&l| values[l] * values[l]).sum()
}

fn weighted_sq(field: &ScalarField, mask: Option<&SubdomainMask>) -> f64 {
    let g = field.grid();
    let nodes = match mask {
        Some(m) => m.nodes(g),
        None => g.interior_nodes(),
    };
    sum_sq(field.values(), &nodes) * g.cell_volume()
}

/// `‖u‖_{L²}` over the mask, or over all interior nodes.
pub fn l2_norm(u: &ScalarField, mask: Option<&SubdomainMask>) -> f64 {
    weighted_sq(u, mask).sqrt()
}

/// `‖∇_{X2} u‖_{L²(Ω)}`.
pub fn grad_x2_norm(u: &ScalarField) -> f64 {
    u.grid().x2_axes().map(|a| weighted_sq(&partial(u, a), None)).sum::<f64>().sqrt()
}

/// `‖∇_{X1} u‖_{L²(Ω)}`.
pub fn grad_x1_norm(u: &ScalarField) -> f64 {
    u.grid().x1_axes().map(|a| weighted_sq(&partial(u, a), None)).sum::<f64>().sqrt()
}

pub fn v12_norm(u: &ScalarField) -> f64 {
    (weighted_sq(u, None) + grad_x2_norm(u).powi(2)).sqrt()
}

fn block_seminorm(u: &ScalarField, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, mask: &SubdomainMask) -> f64 {
    let mut s = 0.0;
    for i in rows {
        for j in cols.clone() {
            s += weighted_sq(&second_partial(u, i, j), Some(mask));
        }
    }
    s.sqrt()
}

/// `‖∇²_{X2} u‖_{L²(ω)}`.
pub fn hess_x2_seminorm(u: &ScalarField, mask: &SubdomainMask) -> f64 {
    block_seminorm(u, u.grid().x2_axes(), u.grid().x2_axes(), mask)
}

/// `‖∇²_{X1} u‖_{L²(ω)}`.
pub fn hess_x1_seminorm(u: &ScalarField, mask: &SubdomainMask) -> f64 {
    block_seminorm(u, u.grid().x1_axes(), u.grid().x1_axes(), mask)
}

/// `‖∇²_{X1X2} u‖_{L²(ω)}`.
pub fn hess_x1x2_seminorm(u: &ScalarField, mask: &SubdomainMask) -> f64 {
    block_seminorm(u, u.grid().x1_axes(), u.grid().x2_axes(), mask)
}

pub fn v22_norm(u: &ScalarField, mask: &SubdomainMask) -> f64 {
    LocalNorms::new(u).v22(mask)
}

/// Global parts and X2-Hessian fields of one grid function, computed once so
/// that `‖·‖^ω_{2,2}` can be evaluated cheaply on many masks.
pub struct LocalNorms {
    grid_sq: f64,
    hess: Vec<ScalarField>,
}

impl LocalNorms {
    pub fn new(u: &ScalarField) -> Self {
        let g = u.grid();
        let grid_sq = weighted_sq(u, None) + grad_x2_norm(u).powi(2);
        let mut hess = Vec::new();
        for i in g.x2_axes() {
            for j in g.x2_axes() {
                hess.push(second_partial(u, i, j));
            }
        }
        LocalNorms { grid_sq, hess }
    }

    pub fn v12(&self) -> f64 {
        self.grid_sq.sqrt()
    }

    pub fn hess_x2(&self, mask: &SubdomainMask) -> f64 {
        self.hess.iter().map(|h| weighted_sq(h, Some(mask))).sum::<f64>().sqrt()
    }

    pub fn v22(&self, mask: &SubdomainMask) -> f64 {
        (self.grid_sq + self.hess_x2(mask).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub l2: f64,
    pub v12: f64,
    /// `(margins, ‖u‖^ω_{2,2})` per mask.
    pub v22_by_mask: Vec<(Vec<usize>, f64)>,
}

pub fn norm_bundle(u: &ScalarField, masks: &[SubdomainMask]) -> NormBundle {
    let local = LocalNorms::new(u);
    NormBundle {
        l2: l2_norm(u, None),
        v12: local.v12(),
        v22_by_mask: masks.iter().map(|m| (m.margins().to_vec(), local.v22(m))).collect(),
    }
}

/// Truncated series `Σ_{n < len} 2^{-n} t_n / (1 + t_n)`.
pub fn frechet_series(seminorms: &[f64]) -> f64 {
    seminorms
        .iter()
        .enumerate()
        .map(|(n, &t)| 0.5f64.powi(n as i32) * t / (1.0 + t))
        .sum()
}

/// Bound on the omitted tail after `n_max` terms: every term is at most `2^{-n}`.
pub fn frechet_tail_bound(n_max: usize) -> f64 {
    0.5f64.powi(n_max as i32 - 1)
}

/// `d(u, v)` relative to `family`.
pub fn frechet_distance(u: &ScalarField, v: &ScalarField, family: &NestedFamily) -> f64 {
    let local = LocalNorms::new(&u.sub(v));
    let t: Vec<f64> = family.masks().iter().map(|m| local.v22(m)).collect();
    frechet_series(&t)
}

/// Checks `|h| < dist(∂Ω, ω)` for a whole-cell shift.
pub fn shift_admissible(grid: &Grid, mask: &SubdomainMask, h_cells: &[isize]) -> bool {
    let len = h_cells
        .iter()
        .zip(grid.spacing())
        .map(|(&h, s)| (h as f64 * s).powi(2))
        .sum::<f64>()
        .sqrt();
    len < grid.boundary_distance(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusPoint {
    pub shift: Vec<isize>,
    /// Euclidean length of the shift.
    pub length: f64,
    pub sigma: f64,
}

/// `σ(h) = max_k ‖τ_h v_k - v_k‖_{L²(ω)}` for every requested shift.
pub fn translation_modulus(fields: &[ScalarField], mask: &SubdomainMask, shifts: &[Vec<isize>]) -> Result<Vec<ModulusPoint>> {
    let Some(first) = fields.first() else {
        return Err(Error::validation("translation modulus needs at least one field"));
    };
    let grid = first.grid();
    let mut out = Vec::with_capacity(shifts.len());
    for h in shifts {
        if h.len() != grid.dim() || !shift_admissible(grid, mask, h) {
            return Err(Error::validation(format!(
                "shift {h:?} is not admissible: |h| must stay below dist(∂Ω, ω) = {:.4e}",
                grid.boundary_distance(mask)
            )));
        }
        let mut sigma: f64 = 0.0;
        for v in fields {
            let shifted = shift_field(v, h, mask)?;
            sigma = sigma.max(l2_norm(&shifted.sub(v), Some(mask)));
        }
        let length = h
            .iter()
            .zip(grid.spacing())
            .map(|(&k, s)| (k as f64 * s).powi(2))
            .sum::<f64>()
            .sqrt();
        out.push(ModulusPoint { shift: h.clone(), length, sigma });
    }
    Ok(out)
}
