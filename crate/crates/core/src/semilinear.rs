//! The semilinear problem `-div(A_ε ∇u) = a(u) + f` with a nonincreasing
//! nonlinearity of linear growth, solved by damped Picard iteration
//!
//! ```text
//! u^{m+1} = (1 - θ) u^m + θ L^{-1}(a(u^m) + f)
//! ```
//!
//! stopped once `‖u^{m+1} - u^m‖ ≤ tol · max(1, ‖u^m‖)` (Euclidean norms of
//! the interior unknowns).

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, ScaledCoefficientField};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fd::{assemble_operator, SparseOperator};
use crate::field::ScalarField;
use crate::limit::{slice_error, Slicing};
use crate::solver::{PreparedSolver, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Nonlinearity {
    Zero,
    /// `a(u) = -κu`.
    Linear { kappa: f64 },
    /// `a(u) = -tanh(u)`.
    Tanh,
    /// `a(u) = -u / (1 + |u|)`.
    Rational,
}

impl Nonlinearity {
    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Linear { .. } => "linear",
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Rational => "rational",
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { kappa } => -kappa * u,
            Nonlinearity::Tanh => -u.tanh(),
            Nonlinearity::Rational => -u / (1.0 + u.abs()),
        }
    }

    /// `c` in `|a(x)| ≤ c(1 + |x|)`.
    pub fn growth_constant(&self) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { kappa } => kappa,
            Nonlinearity::Tanh | Nonlinearity::Rational => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::Linear { kappa } if !(kappa >= 0.0 && kappa.is_finite()) => {
                Err(Error::config(format!("κ must be finite and nonnegative, got {kappa}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

impl PicardSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::config("Picard tolerance and iteration budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    /// `‖u^{m+1} - u^m‖` per iteration.
    pub increments: Vec<f64>,
    /// `‖Lu - a(u) - f‖ / ‖f‖` at the returned iterate.
    pub residual: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn nonlinear_residual(op: &SparseOperator, a: Nonlinearity, u: &[f64], f: &[f64]) -> f64 {
    let r: Vec<f64> = op.apply(u).iter().zip(u.iter().zip(f)).map(|(lu, (&x, &b))| lu - a.eval(x) - b).collect();
    let nf = norm2(f);
    if nf == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nf
    }
}

/// Picard loop on interior vectors; shared by the full and slice problems.
fn picard_vec(
    op: &SparseOperator,
    a: Nonlinearity,
    f: &[f64],
    picard: &PicardSettings,
    solver: &SolverSettings,
) -> Result<(Vec<f64>, PicardReport)> {
    a.validate()?;
    picard.validate()?;
    let prepared = PreparedSolver::new(op, solver)?;
    if a == Nonlinearity::Zero {
        let (u, _) = prepared.solve(op, f, solver.tol)?;
        let residual = nonlinear_residual(op, a, &u, f);
        let increments = vec![norm2(&u)];
        return Ok((u, PicardReport { iterations: 1, increments, residual }));
    }
    let theta = picard.damping;
    let mut u = vec![0.0; f.len()];
    let mut increments = Vec::new();
    for m in 1..=picard.max_iter {
        let rhs: Vec<f64> = u.iter().zip(f).map(|(&x, &b)| a.eval(x) + b).collect();
        let (t, _) = prepared.solve(op, &rhs, solver.tol)?;
        let mut inc = 0.0;
        let scale = norm2(&u).max(1.0);
        for (x, y) in u.iter_mut().zip(&t) {
            let next = (1.0 - theta) * *x + theta * y;
            inc += (next - *x) * (next - *x);
            *x = next;
        }
        let inc = inc.sqrt();
        increments.push(inc);
        if !inc.is_finite() {
            break;
        }
        if inc <= picard.tol * scale {
            let residual = nonlinear_residual(op, a, &u, f);
            return Ok((u, PicardReport { iterations: m, increments, residual }));
        }
    }
    Err(Error::NoConvergence {
        iterations: increments.len(),
        increment: increments.last().copied().unwrap_or(f64::NAN),
    })
}

/// Solves the perturbed semilinear problem on the whole grid.
pub fn picard_solve(
    a_eps: &ScaledCoefficientField,
    nonlinearity: Nonlinearity,
    f: &ScalarField,
    picard: &PicardSettings,
    solver: &SolverSettings,
) -> Result<(ScalarField, PicardReport)> {
    let grid = a_eps.grid();
    if f.grid() != grid.as_ref() {
        return Err(Error::validation("forcing and coefficients live on different grids"));
    }
    let op = assemble_operator(grid, a_eps)?;
    let (u, report) = picard_vec(&op, nonlinearity, &f.interior_values(), picard, solver)?;
    Ok((ScalarField::from_interior(grid.clone(), &u), report))
}

/// Aggregate over the slices of the semilinear limit problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub slices: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

/// Limit problem with the same nonlinearity, one Picard loop per X1 node.
pub fn semilinear_limit(
    a: &CoefficientField,
    nonlinearity: Nonlinearity,
    f: &ScalarField,
    picard: &PicardSettings,
    solver: &SolverSettings,
    exec: Execution,
) -> Result<(ScalarField, SliceSummary)> {
    let grid = a.grid();
    if f.grid() != grid.as_ref() {
        return Err(Error::validation("forcing and coefficients live on different grids"));
    }
    let slicing = Slicing::new(grid);
    let solved = exec.map_range(slicing.count, |s| {
        let op = slicing.operator(a, s)?;
        picard_vec(&op, nonlinearity, &slicing.gather(f.values(), s), picard, solver)
    });
    let mut values = vec![0.0; grid.node_count()];
    let mut summary = SliceSummary { slices: slicing.count, max_iterations: 0, max_residual: 0.0 };
    for (s, r) in solved.into_iter().enumerate() {
        let (x, rep) = r.map_err(|e| slice_error(grid, &slicing, s, e))?;
        summary.max_iterations = summary.max_iterations.max(rep.iterations);
        summary.max_residual = summary.max_residual.max(rep.residual);
        slicing.scatter(&mut values, s, &x);
    }
    Ok((ScalarField::from_values(grid.clone(), values), summary))
}
