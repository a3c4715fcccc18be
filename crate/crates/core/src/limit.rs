//! The limit problem: for every X1 node, a Dirichlet problem in X2 with the
//! `A22` block,
//!
//! ```text
//! -div_{X2}(A22 ∇_{X2} u_0(X1, ·)) = f(X1, ·),   u_0(X1, ·) = 0 on ∂Ω_{X1}.
//! ```
//!
//! Slices are solved at every X1 node, X1 boundary nodes included; no
//! condition is imposed on the X1 faces.

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fd::{assemble_flux, Lattice, SparseOperator};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::solver::{PreparedSolver, SolveStats, SolverSettings};

/// Decomposition of a grid into X2 slices. Because X2 holds the trailing
/// axes, each slice is a contiguous block of `block` global nodes.
#[derive(Debug, Clone)]
pub(crate) struct Slicing {
    pub lattice: Lattice,
    pub count: usize,
    pub block: usize,
}

impl Slicing {
    pub fn new(grid: &Grid) -> Self {
        let q = grid.q();
        let lattice = Lattice::new(&grid.cells()[q..], &grid.spacing()[q..]);
        let block: usize = grid.cells()[q..].iter().map(|c| c + 1).product();
        let count: usize = grid.cells()[..q].iter().map(|c| c + 1).product();
        Slicing { lattice, count, block }
    }

    pub fn offset(&self, slice: usize) -> usize {
        slice * self.block
    }

    /// Discrete `-div_{X2}(A22 ∇_{X2})` on one slice.
    pub fn operator(&self, a: &CoefficientField, slice: usize) -> Result<SparseOperator> {
        let q = a.grid().q();
        let off = self.offset(slice);
        assemble_flux(&self.lattice, |node, i, j| a.entry(off + node, q + i, q + j))
    }

    pub fn gather(&self, values: &[f64], slice: usize) -> Vec<f64> {
        let off = self.offset(slice);
        self.lattice.nodes.iter().map(|&n| values[off + n]).collect()
    }

    pub fn scatter(&self, values: &mut [f64], slice: usize, interior: &[f64]) {
        let off = self.offset(slice);
        for (&n, &v) in self.lattice.nodes.iter().zip(interior) {
            values[off + n] = v;
        }
    }

    /// X1 coordinates of a slice, for error messages.
    pub fn describe(&self, grid: &Grid, slice: usize) -> String {
        let idx = grid.multi(self.offset(slice));
        let x = grid.coord(&idx);
        format!("X1 = {:?}", &x[..grid.q()])
    }
}

/// Per-solve summary of the limit problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitStats {
    pub slices: usize,
    pub unknowns_per_slice: usize,
    pub max_residual: f64,
}

/// Solves the limit problem slice by slice. Slices are independent, so the
/// result does not depend on `exec`.
pub fn solve_limit(
    a: &CoefficientField,
    f: &ScalarField,
    settings: &SolverSettings,
    exec: Execution,
) -> Result<(ScalarField, LimitStats)> {
    let grid = a.grid();
    if f.grid() != grid.as_ref() {
        return Err(Error::validation("forcing and coefficients live on different grids"));
    }
    settings.validate()?;
    let slicing = Slicing::new(grid);
    let solved = exec.map_range(slicing.count, |s| solve_slice(&slicing, a, f.values(), settings, s));
    let mut values = vec![0.0; grid.node_count()];
    let mut max_residual: f64 = 0.0;
    for (s, r) in solved.into_iter().enumerate() {
        let (x, stats) = r.map_err(|e| slice_error(grid, &slicing, s, e))?;
        max_residual = max_residual.max(stats.residual);
        slicing.scatter(&mut values, s, &x);
    }
    let stats = LimitStats {
        slices: slicing.count,
        unknowns_per_slice: slicing.lattice.unknowns(),
        max_residual,
    };
    Ok((ScalarField::from_values(grid.clone(), values), stats))
}

fn solve_slice(
    slicing: &Slicing,
    a: &CoefficientField,
    f: &[f64],
    settings: &SolverSettings,
    s: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let op = slicing.operator(a, s)?;
    let rhs = slicing.gather(f, s);
    PreparedSolver::new(&op, settings)?.solve(&op, &rhs, settings.tol)
}

pub(crate) fn slice_error(grid: &Grid, slicing: &Slicing, s: usize, e: Error) -> Error {
    let at = slicing.describe(grid, s);
    match e {
        Error::Solver { message, residual } => Error::Solver {
            message: format!("slice {s} ({at}): {message}"),
            residual,
        },
        Error::NoConvergence { iterations, increment } => {
            log::warn!("slice {s} ({at}) did not converge");
            Error::NoConvergence { iterations, increment }
        }
        Error::Validation(m) => Error::Validation(format!("slice {s} ({at}): {m}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientFamily;
    use crate::solver::SolverMethod;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn identity(g: &Arc<Grid>) -> CoefficientField {
        CoefficientFamily::Identity.sample(g.clone()).unwrap()
    }

    #[test]
    fn unit_forcing_gives_parabola() {
        let g = Arc::new(Grid::unit(&[8, 16], 1).unwrap());
        let f = ScalarField::from_fn(g.clone(), |_| 1.0);
        let (u, stats) = solve_limit(&identity(&g), &f, &SolverSettings::default(), Execution::Parallel).unwrap();
        assert_eq!(stats.slices, 9);
        // the three-point scheme is exact on quadratics
        for lin in 0..g.node_count() {
            let x = g.coord(&g.multi(lin));
            assert!((u.values()[lin] - x[1] * (1.0 - x[1]) / 2.0).abs() < 1e-12);
        }
        assert!((u.at(&[0, 8]) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let g = Arc::new(Grid::unit(&[6, 6], 1).unwrap());
        let (u, _) = solve_limit(&identity(&g), &ScalarField::zeros(g.clone()), &SolverSettings::default(), Execution::Sequential).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn x1_independent_forcing_gives_identical_slices() {
        let c = 32;
        let g = Arc::new(Grid::unit(&[c, c], 1).unwrap());
        let f = ScalarField::from_fn(g.clone(), |x| (PI * x[1]).sin());
        let (u, _) = solve_limit(&identity(&g), &f, &SolverSettings::default(), Execution::Parallel).unwrap();
        let slicing = Slicing::new(&g);
        let first = slicing.gather(u.values(), 0);
        for s in 1..slicing.count {
            assert_eq!(slicing.gather(u.values(), s), first);
        }
        let h = 1.0 / c as f64;
        let err = (0..=c)
            .map(|j| (u.at(&[3, j]) - (PI * j as f64 * h).sin() / (PI * PI)).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.1 * h * h, "err {err}");
    }

    #[test]
    fn slice_order_does_not_matter() {
        let g = Arc::new(Grid::unit(&[12, 10, 8], 1).unwrap());
        let a = CoefficientFamily::Smooth.sample(g.clone()).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| 1.0 + x[0] * x[2] - x[1]);
        let s = SolverSettings::default();
        let (seq, _) = solve_limit(&a, &f, &s, Execution::Sequential).unwrap();
        let (par, _) = solve_limit(&a, &f, &s, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        let cg = SolverSettings { method: SolverMethod::Cg, ..s };
        let (it, _) = solve_limit(&a, &f, &cg, Execution::Parallel).unwrap();
        assert!(it.sub(&seq).max_abs() < 1e-8);
    }

    #[test]
    fn limit_does_not_vanish_on_x1_faces() {
        let g = Arc::new(Grid::unit(&[8, 8], 1).unwrap());
        let f = ScalarField::from_fn(g.clone(), |_| 1.0);
        let (u, _) = solve_limit(&identity(&g), &f, &SolverSettings::default(), Execution::Sequential).unwrap();
        assert!(u.at(&[0, 4]) > 0.1);
        for i in 0..=8 {
            assert_eq!(u.at(&[i, 0]), 0.0);
            assert_eq!(u.at(&[i, 8]), 0.0);
        }
    }

    #[test]
    fn slice_failure_names_the_slice() {
        let g = Arc::new(Grid::unit(&[4, 4], 1).unwrap());
        let a = CoefficientField::constant(g.clone(), &[1.0, 0.0, 0.0, -1.0], 1.0).unwrap();
        let f = ScalarField::from_fn(g.clone(), |_| 1.0);
        let err = solve_limit(&a, &f, &SolverSettings::default(), Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("slice"), "{err}");
    }
}
