use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Grid function over all nodes, boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        ScalarField { grid, values: vec![0.0; n] }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.node_count(), "field length does not match grid");
        ScalarField { grid, values }
    }

    pub fn try_from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::validation(format!(
                "expected {} node values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f` at every node, boundary included.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|lin| f(&grid.coord(&grid.multi(lin))))
            .collect();
        ScalarField { grid, values }
    }

    /// Samples `f` at interior nodes and sets the boundary to zero.
    pub fn from_fn_dirichlet(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|lin| {
                let idx = grid.multi(lin);
                if grid.is_boundary(&idx) {
                    0.0
                } else {
                    f(&grid.coord(&idx))
                }
            })
            .collect();
        ScalarField { grid, values }
    }

    /// Scatters interior unknowns (in [`Grid::interior_nodes`] order) into a
    /// field with zero boundary values.
    pub fn from_interior(grid: Arc<Grid>, interior: &[f64]) -> Self {
        let nodes = grid.interior_nodes();
        assert_eq!(nodes.len(), interior.len());
        let mut values = vec![0.0; grid.node_count()];
        for (&lin, &v) in nodes.iter().zip(interior) {
            values[lin] = v;
        }
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
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

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.linear(idx)]
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.grid.interior_nodes().iter().map(|&l| self.values[l]).collect()
    }

    pub fn boundary_max_abs(&self) -> f64 {
        (0..self.values.len())
            .filter(|&l| self.grid.is_boundary(&self.grid.multi(l)))
            .map(|l| self.values[l].abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same_grid(&self, other: &ScalarField) {
        assert!(
            Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid,
            "fields live on different grids"
        );
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.check_same_grid(other);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.check_same_grid(other);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}
