//! Linear solves for the assembled operators.
//!
//! The default path is a banded Cholesky factorization in the natural
//! (row-major) unknown ordering, which is deterministic and exact up to
//! rounding for every ε. The conjugate-gradient path with a diagonal
//! preconditioner is kept to expose how the conditioning degrades as ε → 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::SparseOperator;
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    #[default]
    Direct,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub method: SolverMethod,
    /// Bound on `‖L u - f‖₂ / ‖f‖₂`.
    pub tol: f64,
    /// CG iteration cap; `None` means `20 √n`.
    pub max_iter: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { method: SolverMethod::Direct, tol: 1e-10, max_iter: None }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (20.0 * (n as f64).sqrt()).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Cholesky factor `L` of a symmetric positive definite band matrix,
/// stored row by row over the band `[i - b, i]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    b: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(op: &SparseOperator) -> Result<Self> {
        if !op.is_symmetric() {
            return Err(Error::Solver {
                message: "Cholesky factorization needs a symmetric operator".into(),
                residual: f64::NAN,
            });
        }
        let n = op.dim();
        let b = op.bandwidth();
        let w = b + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in op.row(i) {
                if j <= i {
                    band[i * w + (j + b - i)] = v;
                }
            }
        }
        for i in 0..n {
            let first = i.saturating_sub(b);
            for j in first..=i {
                let start = first.max(j.saturating_sub(b));
                let ri = i * w + b - i;
                let rj = j * w + b - j;
                let mut sum = band[ri + j];
                for k in start..j {
                    sum -= band[ri + k] * band[rj + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Solver {
                            message: format!("operator is not positive definite (pivot {i} = {sum:.3e})"),
                            residual: f64::NAN,
                        });
                    }
                    band[ri + j] = sum.sqrt();
                } else {
                    band[ri + j] = sum / band[rj + j];
                }
            }
        }
        Ok(BandedCholesky { n, b, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let ri = i * w + b - i;
            let mut s = y[i];
            for k in i.saturating_sub(b)..i {
                s -= self.band[ri + k] * y[k];
            }
            y[i] = s / self.band[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + b - i;
            y[i] /= self.band[ri + i];
            let yi = y[i];
            for k in i.saturating_sub(b)..i {
                y[k] -= self.band[ri + k] * yi;
            }
        }
        y
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn relative_residual(op: &SparseOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let r: Vec<f64> = op.apply(x).iter().zip(rhs).map(|(a, b)| a - b).collect();
    let nb = norm2(rhs);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Diagonally preconditioned conjugate gradients from a zero start.
pub fn conjugate_gradient(op: &SparseOperator, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = op.dim();
    let nb = norm2(rhs);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = op.apply(&p);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = norm2(&r) / nb;
        if res <= tol {
            return Ok((x, SolveStats { iterations: it, residual: res }));
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::Solver {
        message: format!("conjugate gradients exhausted {max_iter} iterations"),
        residual: norm2(&r) / nb,
    })
}

/// Factorization reused across many right-hand sides (Picard loops, slices).
#[derive(Debug, Clone)]
pub enum PreparedSolver {
    Direct(BandedCholesky),
    Cg { tol: f64, max_iter: usize },
}

impl PreparedSolver {
    pub fn new(op: &SparseOperator, settings: &SolverSettings) -> Result<Self> {
        settings.validate()?;
        Ok(match settings.method {
            SolverMethod::Direct => PreparedSolver::Direct(BandedCholesky::factor(op)?),
            SolverMethod::Cg => PreparedSolver::Cg {
                tol: settings.tol,
                max_iter: settings.iteration_cap(op.dim()),
            },
        })
    }

    pub fn solve(&self, op: &SparseOperator, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        match self {
            PreparedSolver::Direct(chol) => {
                let mut x = chol.solve(rhs);
                let mut res = relative_residual(op, &x, rhs);
                // a couple of refinement sweeps absorb rounding on badly scaled ε
                let mut sweeps = 0;
                while res > tol && sweeps < 3 {
                    let r: Vec<f64> = rhs.iter().zip(op.apply(&x)).map(|(b, a)| b - a).collect();
                    let dx = chol.solve(&r);
                    x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
                    res = relative_residual(op, &x, rhs);
                    sweeps += 1;
                }
                if res > tol {
                    return Err(Error::Solver {
                        message: "direct solve missed the residual tolerance".into(),
                        residual: res,
                    });
                }
                Ok((x, SolveStats { iterations: sweeps, residual: res }))
            }
            PreparedSolver::Cg { tol: own, max_iter } => conjugate_gradient(op, rhs, tol.min(*own), *max_iter),
        }
    }
}

/// Solves `L u = f` on the interior unknowns; the result carries zero
/// boundary values.
pub fn solve_dirichlet(op: &SparseOperator, f: &ScalarField, settings: &SolverSettings) -> Result<(ScalarField, SolveStats)> {
    let rhs = f.interior_values();
    if rhs.len() != op.dim() {
        return Err(Error::validation("forcing does not match the operator size"));
    }
    let prepared = PreparedSolver::new(op, settings)?;
    let (x, stats) = prepared.solve(op, &rhs, settings.tol)?;
    Ok((ScalarField::from_interior(f.grid_arc().clone(), &x), stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub unknowns: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub condition: f64,
    /// Dense eigen-decomposition (true) or power/inverse iteration estimate.
    pub exact: bool,
    pub cg_iterations: Option<usize>,
}

/// Unknown count up to which eigenvalues are computed densely.
pub const DENSE_LIMIT: usize = 1500;

pub fn solver_diagnostics(op: &SparseOperator) -> Result<ConditioningReport> {
    let n = op.dim();
    let (lambda_min, lambda_max, exact) = if n <= DENSE_LIMIT {
        let eig = op.to_dense().symmetric_eigenvalues();
        (eig.min(), eig.max(), true)
    } else {
        let chol = BandedCholesky::factor(op)?;
        let (lmax, _) = power_iteration(n, |v| op.apply(v));
        let (inv, _) = power_iteration(n, |v| chol.solve(v));
        (1.0 / inv, lmax, false)
    };
    // iteration count of the preconditioned CG on a fixed right-hand side
    let rhs = vec![1.0; n];
    let cap = SolverSettings::default().iteration_cap(n) * 10;
    let cg_iterations = conjugate_gradient(op, &rhs, 1e-8, cap).ok().map(|(_, s)| s.iterations);
    Ok(ConditioningReport {
        unknowns: n,
        lambda_min,
        lambda_max,
        condition: lambda_max / lambda_min,
        exact,
        cg_iterations,
    })
}

fn power_iteration(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> (f64, usize) {
    // deterministic, non-symmetric start vector
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for it in 1..=500 {
        let w = apply(&v);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        v = w.into_iter().map(|x| x / nw).collect();
        if it > 5 && (next - lambda).abs() <= 1e-10 * next.abs() {
            return (next, it);
        }
        lambda = next;
    }
    (lambda, 500)
}
