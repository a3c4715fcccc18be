//! Constant-coefficient Fourier bounds on the periodic torus `(0, 2π)^N`.
//!
//! A grid function with `n_a` points per axis is represented by its unitary
//! DFT, so `Σ|u|² = Σ|û|²` exactly and both sides carry the quadrature weight
//! `Π 2π/n_a` for the L² norm. Frequencies are integers in
//! `[-n_a/2, n_a/2)`, the Nyquist index mapping to `+n_a/2`. Derivatives act
//! spectrally: `∂²_ij ↦ -ξ_i ξ_j`.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::coefficients::min_sym_eigenvalue;
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Slack allowed above 1 before a ratio counts as a violation.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    shape: Vec<usize>,
    q: usize,
    coeffs: Vec<Complex64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

fn signed(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn check_shape(shape: &[usize], q: usize) -> Result<()> {
    if shape.len() < 2 || q == 0 || q >= shape.len() {
        return Err(Error::config(format!("need N >= 2 and 1 <= q < N, got N = {}, q = {q}", shape.len())));
    }
    if shape.iter().any(|&n| n < 2) {
        return Err(Error::config("every lattice axis needs at least 2 points"));
    }
    Ok(())
}

/// In-place unitary N-D transform, one axis at a time.
fn transform(shape: &[usize], data: &mut [Complex64], inverse: bool) {
    let st = strides(shape);
    let total = data.len();
    let mut planner = FftPlanner::new();
    for (a, &n) in shape.iter().enumerate() {
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let scale = 1.0 / (n as f64).sqrt();
        let s = st[a];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in (0..total).filter(|&l| (l / s) % n == 0) {
            for (k, v) in line.iter_mut().enumerate() {
                *v = data[start + k * s];
            }
            fft.process(&mut line);
            for (k, v) in line.iter().enumerate() {
                data[start + k * s] = v * scale;
            }
        }
    }
}

impl SpectralField {
    pub fn zeros(shape: &[usize], q: usize) -> Result<Self> {
        check_shape(shape, q)?;
        let total = shape.iter().product();
        Ok(SpectralField {
            shape: shape.to_vec(),
            q,
            coeffs: vec![Complex64::new(0.0, 0.0); total],
        })
    }

    /// Forward transform of real samples on the uniform torus lattice
    /// (row-major, last axis fastest).
    pub fn from_physical(shape: &[usize], q: usize, values: &[f64]) -> Result<Self> {
        let mut f = SpectralField::zeros(shape, q)?;
        if values.len() != f.coeffs.len() {
            return Err(Error::validation(format!("expected {} samples, got {}", f.coeffs.len(), values.len())));
        }
        f.coeffs = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        transform(shape, &mut f.coeffs, false);
        Ok(f)
    }

    /// Inverse transform.
    pub fn to_physical(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        transform(&self.shape, &mut data, true);
        data
    }

    /// Real mode pair `c e^{iξ·x} + conj(c) e^{-iξ·x}`.
    pub fn single_mode(shape: &[usize], q: usize, xi: &[i64], c: Complex64) -> Result<Self> {
        let mut f = SpectralField::zeros(shape, q)?;
        let plus = f.index_of(xi)?;
        let neg: Vec<i64> = xi.iter().map(|k| -k).collect();
        let minus = f.index_of(&neg)?;
        f.coeffs[plus] += c;
        f.coeffs[minus] += c.conj();
        Ok(f)
    }

    /// Random real field with uniform samples in `[-1, 1]`, mean removed.
    pub fn random_forcing(shape: &[usize], q: usize, seed: u64) -> Result<Self> {
        check_shape(shape, q)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total: usize = shape.iter().product();
        let mut values: Vec<f64> = (0..total).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = values.iter().sum::<f64>() / total as f64;
        values.iter_mut().for_each(|v| *v -= mean);
        let mut f = SpectralField::from_physical(shape, q, &values)?;
        f.coeffs[0] = Complex64::new(0.0, 0.0);
        Ok(f)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Integer frequency of a storage index.
    pub fn frequency(&self, lin: usize) -> Vec<i64> {
        let st = strides(&self.shape);
        self.shape
            .iter()
            .zip(&st)
            .map(|(&n, &s)| signed((lin / s) % n, n))
            .collect()
    }

    /// Storage index of an integer frequency, reduced modulo the lattice.
    pub fn index_of(&self, xi: &[i64]) -> Result<usize> {
        if xi.len() != self.shape.len() {
            return Err(Error::validation("frequency has the wrong dimension"));
        }
        let st = strides(&self.shape);
        Ok(xi
            .iter()
            .zip(&self.shape)
            .zip(&st)
            .map(|((&k, &n), &s)| k.rem_euclid(n as i64) as usize * s)
            .sum())
    }

    pub fn coeff(&self, xi: &[i64]) -> Result<Complex64> {
        Ok(self.coeffs[self.index_of(xi)?])
    }

    /// `|ξ1|²` and `|ξ2|²` of a storage index.
    fn block_norms(&self, lin: usize) -> (f64, f64) {
        let xi = self.frequency(lin);
        let sq = |r: &[i64]| r.iter().map(|&k| (k * k) as f64).sum::<f64>();
        (sq(&xi[..self.q]), sq(&xi[self.q..]))
    }

    /// Real physical field ⇔ `û(-ξ) = conj û(ξ)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        (0..self.coeffs.len()).all(|lin| {
            let neg: Vec<i64> = self.frequency(lin).iter().map(|k| -k).collect();
            let other = self.coeffs[self.index_of(&neg).unwrap_or(lin)];
            (self.coeffs[lin] - other.conj()).norm() <= tol * scale
        })
    }

    fn quadrature(&self) -> f64 {
        self.shape.iter().map(|&n| 2.0 * PI / n as f64).product()
    }

    /// `‖u‖_{L²}` from the coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_norm(|_, _| 1.0)
    }

    /// `(Σ w(|ξ1|², |ξ2|²) |û|² · quadrature)^{1/2}`.
    fn weighted_norm(&self, w: impl Fn(f64, f64) -> f64) -> f64 {
        let s: f64 = (0..self.coeffs.len())
            .map(|lin| {
                let (a, b) = self.block_norms(lin);
                w(a, b) * self.coeffs[lin].norm_sqr()
            })
            .sum();
        (s * self.quadrature()).sqrt()
    }

    /// Physical-space L² norm, through the inverse transform.
    pub fn physical_l2_norm(&self) -> f64 {
        let s: f64 = self.to_physical().iter().map(|c| c.norm_sqr()).sum();
        (s * self.quadrature()).sqrt()
    }

    pub fn hess_x2_norm(&self) -> f64 {
        self.weighted_norm(|_, b| b * b)
    }

    pub fn hess_x1_norm(&self) -> f64 {
        self.weighted_norm(|a, _| a * a)
    }

    pub fn hess_x1x2_norm(&self) -> f64 {
        self.weighted_norm(|a, b| a * b)
    }

    /// Zeroes every mode for which `keep` is false. A predicate that is even
    /// in `ξ` preserves Hermitian symmetry.
    pub fn filter_modes(&self, keep: impl Fn(&[i64]) -> bool) -> SpectralField {
        self.map_modes(|xi, c| if keep(xi) { c } else { Complex64::new(0.0, 0.0) })
    }

    fn map_modes(&self, f: impl Fn(&[i64], Complex64) -> Complex64) -> SpectralField {
        let coeffs = (0..self.coeffs.len()).map(|lin| f(&self.frequency(lin), self.coeffs[lin])).collect();
        SpectralField {
            shape: self.shape.clone(),
            q: self.q,
            coeffs,
        }
    }
}

/// Symbol `Σ a^ε_ij ξ_i ξ_j` of `-div(A_ε ∇)` for a constant matrix.
pub fn symbol(a: &[f64], q: usize, eps: f64, xi: &[i64]) -> f64 {
    let n = xi.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = match (i < q, j < q) {
                (true, true) => eps * eps,
                (false, false) => 1.0,
                _ => eps,
            };
            s += w * a[i * n + j] * (xi[i] * xi[j]) as f64;
        }
    }
    s
}

fn identity(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    (0..n).for_each(|i| a[i * n + i] = 1.0);
    a
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::validation(format!("ε must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

fn check_matrix(a: &[f64], n: usize) -> Result<f64> {
    if a.len() != n * n {
        return Err(Error::config(format!("expected {} matrix entries", n * n)));
    }
    let lambda = min_sym_eigenvalue(a, n);
    if !(lambda > 0.0) {
        return Err(Error::validation(format!("coefficient matrix is not elliptic (λ = {lambda:.3e})")));
    }
    Ok(lambda)
}

fn check_mean(f: &SpectralField) -> Result<()> {
    let scale = f.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if f.coeffs[0].norm() > 1e-12 * scale.max(1e-300) {
        return Err(Error::validation("forcing must have zero mean on the torus"));
    }
    Ok(())
}

/// `û = f̂ / (Σ a^ε_ij ξ_i ξ_j)` off the zero mode, `û(0) = 0`.
pub fn torus_solve_constant(a: &[f64], f: &SpectralField, eps: f64) -> Result<SpectralField> {
    check_eps(eps)?;
    check_matrix(a, f.shape.len())?;
    check_mean(f)?;
    let q = f.q;
    Ok(f.map_modes(|xi, c| {
        if xi.iter().all(|&k| k == 0) {
            Complex64::new(0.0, 0.0)
        } else {
            c / symbol(a, q, eps, xi)
        }
    }))
}

/// Solves `-ε²Δ_{X1} u - Δ_{X2} u = f` on the torus.
pub fn torus_solve(f: &SpectralField, eps: f64) -> Result<SpectralField> {
    torus_solve_constant(&identity(f.shape.len()), f, eps)
}

/// Applies `-div(A_ε ∇)` spectrally.
pub fn apply_operator(a: &[f64], u: &SpectralField, eps: f64) -> SpectralField {
    let q = u.q;
    u.map_modes(|xi, c| c * symbol(a, q, eps, xi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub eps: f64,
    /// Ellipticity weight on every ratio (1 for the Laplacian case).
    pub lambda: f64,
    pub r_x2: f64,
    pub r_x1: f64,
    pub r_cross: f64,
}

impl BoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.r_x2.max(self.r_x1).max(self.r_cross)
    }

    pub fn passes(&self) -> bool {
        self.max_ratio() <= 1.0 + BOUND_SLACK
    }

    fn into_checked(self) -> Result<Self> {
        if self.passes() {
            return Ok(self);
        }
        let (name, r) = [("r_X2", self.r_x2), ("r_X1", self.r_x1), ("r_cross", self.r_cross)]
            .into_iter()
            .fold(("", f64::MIN), |m, x| if x.1 > m.1 { x } else { m });
        Err(Error::Verification(format!("{name} = {r:.12} exceeds 1 at ε = {}", self.eps)))
    }
}

/// Ratios for the constant matrix `a`, without judging them.
pub fn bound_report(a: &[f64], f: &SpectralField, eps: f64) -> Result<BoundReport> {
    let lambda = check_matrix(a, f.shape.len())?;
    let u = torus_solve_constant(a, f, eps)?;
    let nf = f.l2_norm();
    if nf == 0.0 {
        return Err(Error::validation("forcing is identically zero"));
    }
    Ok(BoundReport {
        eps,
        lambda,
        r_x2: lambda * u.hess_x2_norm() / nf,
        r_x1: lambda * eps * eps * u.hess_x1_norm() / nf,
        r_cross: lambda * 2f64.sqrt() * eps * u.hess_x1x2_norm() / nf,
    })
}

/// The three Laplacian-case bounds; a violation is an error.
pub fn check_laplacian_bounds(f: &SpectralField, eps: f64) -> Result<BoundReport> {
    bound_report(&identity(f.shape.len()), f, eps)?.into_checked()
}

/// The λ-weighted bounds for a constant elliptic matrix.
pub fn check_weighted_bounds(a: &[f64], f: &SpectralField, eps: f64) -> Result<BoundReport> {
    bound_report(a, f, eps)?.into_checked()
}

/// Largest per-mode ratios over every nonzero frequency of the lattice,
/// `[λ|ξ2|², λε²|ξ1|², √2λε|ξ1||ξ2|] / symbol`.
pub fn max_mode_ratios(shape: &[usize], q: usize, a: &[f64], eps: f64, exec: Execution) -> Result<[f64; 3]> {
    check_shape(shape, q)?;
    check_eps(eps)?;
    let lambda = check_matrix(a, shape.len())?;
    let probe = SpectralField::zeros(shape, q)?;
    let per_mode = exec.map_range(probe.len(), |lin| {
        let xi = probe.frequency(lin);
        if lin == 0 {
            return [0.0; 3];
        }
        let (x1, x2) = probe.block_norms(lin);
        let s = symbol(a, q, eps, &xi);
        [
            lambda * x2 / s,
            lambda * eps * eps * x1 / s,
            lambda * 2f64.sqrt() * eps * (x1 * x2).sqrt() / s,
        ]
    });
    Ok(per_mode.into_iter().fold([0.0; 3], |m, r| [m[0].max(r[0]), m[1].max(r[1]), m[2].max(r[2])]))
}
