//! Right-hand sides and the manufactured solution used for error floors.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::ScaledCoefficientField;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ForcingFamily {
    /// `f = 1`.
    #[default]
    One,
    /// `f = Π_i sin(π (x_i - a_i) / L_i)` over all axes.
    Sine,
    /// The same product over the X2 axes only, so `f` does not depend on X1.
    SineX2,
    Zero,
    /// Independent uniform samples in `[-1, 1]`, seeded.
    Random,
}

/// `sin(π (x_i - a_i) / L_i)` and its frequency `π / L_i`.
fn bump(grid: &Grid, axis: usize, x: f64) -> (f64, f64) {
    let k = PI / (grid.upper()[axis] - grid.lower()[axis]);
    ((k * (x - grid.lower()[axis])).sin(), k)
}

impl ForcingFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ForcingFamily::One => "one",
            ForcingFamily::Sine => "sine",
            ForcingFamily::SineX2 => "sine_x2",
            ForcingFamily::Zero => "zero",
            ForcingFamily::Random => "random",
        }
    }

    /// Samples the forcing at every node; `seed` only matters for `Random`.
    pub fn sample(&self, grid: Arc<Grid>, seed: u64) -> ScalarField {
        match self {
            ForcingFamily::One => ScalarField::from_fn(grid, |_| 1.0),
            ForcingFamily::Zero => ScalarField::zeros(grid),
            ForcingFamily::Sine => {
                let g = grid.clone();
                ScalarField::from_fn(grid, move |x| (0..x.len()).map(|a| bump(&g, a, x[a]).0).product())
            }
            ForcingFamily::SineX2 => {
                let g = grid.clone();
                ScalarField::from_fn(grid, move |x| g.x2_axes().map(|a| bump(&g, a, x[a]).0).product())
            }
            ForcingFamily::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values = (0..grid.node_count()).map(|_| rng.random_range(-1.0..=1.0)).collect();
                ScalarField::from_values(grid, values)
            }
        }
    }
}

/// Manufactured pair `(u*, f)` with `u* = Π sin(π (x_i - a_i) / L_i)` and
/// `f = -Σ_ij (a^ε_ij ∂²_ij u* + ∂_i a^ε_ij ∂_j u*)` evaluated exactly at the
/// nodes. Needs coefficient derivatives.
pub fn manufactured(a: &ScaledCoefficientField) -> Result<(ScalarField, ScalarField)> {
    if !a.base().has_derivatives() {
        return Err(Error::validation("manufactured forcing needs coefficient derivatives"));
    }
    let grid = a.grid().clone();
    let n = grid.dim();
    let exact = ScalarField::from_fn(grid.clone(), |x| (0..n).map(|i| bump(&grid, i, x[i]).0).product());
    let mut f = vec![0.0; grid.node_count()];
    for (lin, out) in f.iter_mut().enumerate() {
        let x = grid.coord(&grid.multi(lin));
        let (s, k): (Vec<f64>, Vec<f64>) = (0..n).map(|i| bump(&grid, i, x[i])).unzip();
        let c: Vec<f64> = (0..n).map(|i| (k[i] * (x[i] - grid.lower()[i])).cos()).collect();
        let others = |skip: &[usize]| -> f64 { (0..n).filter(|m| !skip.contains(m)).map(|m| s[m]).product() };
        let first: Vec<f64> = (0..n).map(|j| k[j] * c[j] * others(&[j])).collect();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let second = if i == j {
                    -k[i] * k[i] * s[i] * others(&[i])
                } else {
                    k[i] * k[j] * c[i] * c[j] * others(&[i, j])
                };
                acc += a.entry(lin, i, j) * second + a.deriv(lin, i, j).unwrap_or(0.0) * first[j];
            }
        }
        *out = -acc;
    }
    Ok((exact, ScalarField::from_values(grid, f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{scale_coefficients, CoefficientFamily};
    use crate::fd::assemble_operator;
    use crate::solver::{solve_dirichlet, SolverSettings};

    #[test]
    fn identity_manufactured_forcing_is_scaled_sine() {
        let g = Arc::new(Grid::unit(&[8, 8], 1).unwrap());
        let a = Arc::new(CoefficientFamily::Identity.sample(g.clone()).unwrap());
        let eps = 0.3;
        let (u, f) = manufactured(&scale_coefficients(a, eps).unwrap()).unwrap();
        let k = (eps * eps + 1.0) * PI * PI;
        for (fu, uu) in f.values().iter().zip(u.values()) {
            assert!((fu - k * uu).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_manufactured_solution_converges() {
        let mut errs = Vec::new();
        for c in [16usize, 32] {
            let g = Arc::new(Grid::unit(&[c, c], 1).unwrap());
            let a = Arc::new(CoefficientFamily::Smooth.sample(g.clone()).unwrap());
            let s = scale_coefficients(a, 0.5).unwrap();
            let (u, f) = manufactured(&s).unwrap();
            let op = assemble_operator(&g, &s).unwrap();
            let (uh, _) = solve_dirichlet(&op, &f, &SolverSettings::default()).unwrap();
            errs.push(uh.sub(&u).max_abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn sine_x2_ignores_x1_and_random_is_seeded() {
        let g = Arc::new(Grid::new(&[0.0, -1.0], &[2.0, 1.0], &[6, 4], 1).unwrap());
        let f = ForcingFamily::SineX2.sample(g.clone(), 0);
        for i in 0..=6 {
            assert_eq!(f.at(&[i, 2]), f.at(&[0, 2]));
        }
        assert!((f.at(&[3, 2]) - 1.0).abs() < 1e-15);
        let r1 = ForcingFamily::Random.sample(g.clone(), 7);
        assert_eq!(r1, ForcingFamily::Random.sample(g.clone(), 7));
        assert_ne!(r1, ForcingFamily::Random.sample(g, 8));
    }
}
