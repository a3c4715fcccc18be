//! Study configuration.
//!
//! The file format is a sectioned key-value text (a TOML subset): one
//! `key = value` per line, `[section]` headers, `#` comments, values that are
//! numbers, quoted strings, booleans or bracketed lists. Unknown keys are
//! rejected.
//!
//! ```text
//! [grid]
//! lower = [0.0, 0.0]        # optional, defaults to zeros
//! upper = [1.0, 1.0]        # optional, defaults to ones
//! cells = [64, 64]
//! q = 1
//!
//! [coefficients]
//! family = "smooth"         # identity | constant | smooth
//! # entries = [[2.0, 0.5], [0.5, 1.0]]   (constant only)
//!
//! [forcing]
//! family = "sine"           # one | sine | sine_x2 | zero | random
//!
//! [study]
//! epsilons = [1.0, 0.5, 0.25]
//! margin = 8                # or a per-axis list
//! n_max = 20
//! seed = 0
//! execution = "parallel"    # parallel | sequential
//! shifts = [[4, 4], [2, 2], [1, 1]]     # optional, translation diagnostic
//!
//! [solver]
//! method = "direct"         # direct | cg
//! tol = 1e-10
//! # max_iter = 5000
//!
//! [nonlinearity]            # optional; turns the study semilinear
//! name = "tanh"             # zero | linear | tanh | rational
//! # kappa = 1.0             (linear only)
//! damping = 0.5
//! tol = 1e-10
//! max_iter = 500
//!
//! [output]
//! dir = "out"
//! save_fields = false
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientFamily;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forcing::ForcingFamily;
use crate::grid::{interior_subdomain, Grid, SubdomainMask};
use crate::semilinear::{Nonlinearity, PicardSettings};
use crate::solver::SolverSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    pub cells: Vec<usize>,
    pub q: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        let n = self.cells.len();
        let lower = self.lower.clone().unwrap_or_else(|| vec![0.0; n]);
        let upper = self.upper.clone().unwrap_or_else(|| vec![1.0; n]);
        Grid::new(&lower, &upper, &self.cells, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Margin {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl Margin {
    pub fn mask(&self, grid: &Grid) -> Result<SubdomainMask> {
        match self {
            Margin::Uniform(m) => interior_subdomain(grid, &vec![*m; grid.dim()]),
            Margin::PerAxis(ms) => interior_subdomain(grid, ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Inset of `ω`; defaults to an eighth of the cells per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<Margin>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<Vec<isize>>>,
}

fn default_n_max() -> usize {
    20
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            epsilons: Vec::new(),
            margin: None,
            n_max: default_n_max(),
            seed: 0,
            execution: Execution::default(),
            shifts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSpec {
    #[serde(flatten)]
    pub function: Nonlinearity,
    #[serde(flatten)]
    pub picard: PicardSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub save_fields: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir(), save_fields: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub grid: GridSpec,
    #[serde(default = "default_coefficients")]
    pub coefficients: CoefficientFamily,
    #[serde(default)]
    pub forcing: ForcingFamily,
    #[serde(default)]
    pub study: StudySpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<NonlinearSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_coefficients() -> CoefficientFamily {
    CoefficientFamily::Identity
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        StudyConfig::parse(&text)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.coefficients.sample(Arc::new(Grid::unit(&vec![2; grid.dim()], grid.q())?))?;
        let eps = &self.study.epsilons;
        if let Some(bad) = eps.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::config(format!("ε values must lie in (0, 1], got {bad}")));
        }
        if let Some(w) = eps.windows(2).find(|w| w[1] >= w[0]) {
            return Err(Error::config(format!(
                "ε values must be strictly decreasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if self.study.n_max < 1 {
            return Err(Error::config("n_max must be at least 1"));
        }
        self.mask(&grid)?;
        self.solver.validate()?;
        if let Some(nl) = &self.nonlinearity {
            nl.function.validate()?;
            nl.picard.validate()?;
        }
        Ok(())
    }

    /// The grid.
    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(self.grid.build()?))
    }

    /// `ω` used for the local columns and the translation diagnostic.
    pub fn mask(&self, grid: &Grid) -> Result<SubdomainMask> {
        match &self.study.margin {
            Some(m) => m.mask(grid),
            None => {
                let ms: Vec<usize> = grid.cells().iter().map(|c| (c / 8).max(1)).collect();
                interior_subdomain(grid, &ms)
            }
        }
    }
}
