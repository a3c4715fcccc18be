//! Numerical laboratory for anisotropic singularly perturbed elliptic problems
//!
//! ```text
//! -div(A_ε ∇u_ε) = f  in Ω,   u_ε = 0 on ∂Ω,
//! ```
//!
//! where the coordinates split as `x = (X1, X2)` and `A_ε` carries the weights
//! `ε²` on the `X1 x X1` block and `ε` on the mixed blocks. As `ε → 0` the
//! solution tends to the limit `u_0`, obtained by solving one `X2`-Dirichlet
//! problem per `X1` slice. The crate discretizes both problems on box grids,
//! evaluates the pseudo-Sobolev norms and the Fréchet metric of the local
//! space, checks the constant-coefficient Fourier bounds on the torus and runs
//! ε-sweeps that measure every convergence quantity.

pub mod coefficients;
pub mod config;
pub mod error;
pub mod exec;
pub mod fd;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod io;
pub mod limit;
pub mod semilinear;
pub mod norms;
pub mod solver;
pub mod spectral;
pub mod study;

pub use config::StudyConfig;
pub use error::{Error, Result};
pub use exec::Execution;
pub use field::ScalarField;
pub use grid::{Grid, NestedFamily, SubdomainMask};
pub use study::{run_sweep, SweepReport, SweepRun};
