//! ε-sweeps: solve the perturbed problem for each ε, compare with the limit
//! solution, fit rates and write reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coefficients::{scale_coefficients, CoefficientField};
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::fd::{assemble_operator, second_partial};
use crate::field::ScalarField;
use crate::forcing::manufactured;
use crate::grid::{nested_family, NestedFamily, SubdomainMask};
use crate::io::write_field;
use crate::limit::solve_limit;
use crate::norms::{
    frechet_distance, grad_x1_norm, hess_x1_seminorm, hess_x1x2_seminorm, hess_x2_seminorm, l2_norm,
    shift_admissible, translation_modulus, v12_norm, ModulusPoint,
};
use crate::semilinear::{picard_solve, semilinear_limit};
use crate::solver::solve_dirichlet;

pub const CSV_HEADER: &str =
    "epsilon,l2_diff,v12_diff,eps_grad_x1,hess_x2_diff_omega,eps2_hess_x1_omega,eps_hess_x1x2_omega,frechet_d,wall_ms";

/// Names of the norm columns, in CSV order.
pub const COLUMNS: [&str; 7] = [
    "l2_diff",
    "v12_diff",
    "eps_grad_x1",
    "hess_x2_diff_omega",
    "eps2_hess_x1_omega",
    "eps_hess_x1x2_omega",
    "frechet_d",
];

/// The convergence quantities of one `u_ε` against `u_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormColumns {
    pub l2_diff: f64,
    pub v12_diff: f64,
    pub eps_grad_x1: f64,
    pub hess_x2_diff_omega: f64,
    pub eps2_hess_x1_omega: f64,
    pub eps_hess_x1x2_omega: f64,
    pub frechet_d: f64,
}

impl NormColumns {
    pub fn compute(u_eps: &ScalarField, u0: &ScalarField, eps: f64, mask: &SubdomainMask, family: &NestedFamily) -> Self {
        let diff = u_eps.sub(u0);
        NormColumns {
            l2_diff: l2_norm(&diff, None),
            v12_diff: v12_norm(&diff),
            eps_grad_x1: eps * grad_x1_norm(u_eps),
            hess_x2_diff_omega: hess_x2_seminorm(&diff, mask),
            eps2_hess_x1_omega: eps * eps * hess_x1_seminorm(u_eps, mask),
            eps_hess_x1x2_omega: eps * hess_x1x2_seminorm(u_eps, mask),
            frechet_d: frechet_distance(u_eps, u0, family),
        }
    }

    /// The same quantities for a pure error field `e`, with unit ε weights
    /// and every term taken of `e` itself.
    pub fn of_error(e: &ScalarField, mask: &SubdomainMask, family: &NestedFamily) -> Self {
        let zero = ScalarField::zeros(e.grid_arc().clone());
        NormColumns {
            l2_diff: l2_norm(e, None),
            v12_diff: v12_norm(e),
            eps_grad_x1: grad_x1_norm(e),
            hess_x2_diff_omega: hess_x2_seminorm(e, mask),
            eps2_hess_x1_omega: hess_x1_seminorm(e, mask),
            eps_hess_x1x2_omega: hess_x1x2_seminorm(e, mask),
            frechet_d: frechet_distance(e, &zero, family),
        }
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.l2_diff,
            self.v12_diff,
            self.eps_grad_x1,
            self.hess_x2_diff_omega,
            self.eps2_hess_x1_omega,
            self.eps_hess_x1x2_omega,
            self.frechet_d,
        ]
    }

    fn scaled(&self, s: f64) -> Self {
        let v = self.values().map(|x| x * s);
        NormColumns {
            l2_diff: v[0],
            v12_diff: v[1],
            eps_grad_x1: v[2],
            hess_x2_diff_omega: v[3],
            eps2_hess_x1_omega: v[4],
            eps_hess_x1x2_omega: v[5],
            frechet_d: v[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    #[serde(flatten)]
    pub norms: NormColumns,
    pub wall_ms: f64,
    /// Refinement sweeps (direct), CG iterations, or Picard iterations.
    pub iterations: usize,
    /// Final linear or nonlinear relative residual.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: StudyConfig,
    pub complete: bool,
    pub error: Option<String>,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log value` against `log ε` per column.
    pub rates: BTreeMap<String, Option<f64>>,
    /// Per-column discretization floor.
    pub floor: Option<NormColumns>,
    /// Margins of `ω`.
    pub mask: Vec<usize>,
    /// Margins of the nested family behind `frechet_d`.
    pub family: Vec<Vec<usize>>,
    pub note: String,
}

pub const FLOOR_NOTE: &str = "u_eps - u_0 differences are resolved only while a column exceeds its floor: \
ten times the same quantity evaluated on the manufactured-solution error of this grid. \
Values below the floor reflect truncation error, not a failure to converge.";

impl SweepReport {
    /// `(column, ε)` for every entry below its floor.
    pub fn below_floor(&self) -> Vec<(&'static str, f64)> {
        let Some(floor) = &self.floor else { return Vec::new() };
        let fl = floor.values();
        let mut out = Vec::new();
        for row in &self.rows {
            for (k, v) in row.norms.values().iter().enumerate() {
                if *v < fl[k] {
                    out.push((COLUMNS[k], row.epsilon));
                }
            }
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = COLUMNS.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r.norms.values()[k]).collect())
    }
}

/// A finished sweep together with the fields behind it.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub report: SweepReport,
    pub limit: ScalarField,
    /// `u_ε` for every row, in row order.
    pub solutions: Vec<ScalarField>,
}

/// Least-squares slope of `log v` against `log ε`. Nonpositive values are
/// skipped with a warning; fewer than three usable pairs is an error.
pub fn estimate_rate(pairs: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(e, v)| {
            let ok = e > 0.0 && v > 0.0 && v.is_finite();
            if !ok {
                log::warn!("rate fit skips (ε = {e}, value = {v})");
            }
            ok
        })
        .map(|&(e, v)| (e.ln(), v.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::validation(format!(
            "rate fit needs at least 3 positive values, got {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::validation("rate fit needs distinct ε values"));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Ten times the columns of the manufactured-solution error at `ε = 1`.
pub fn discretization_floor(
    a: &Arc<CoefficientField>,
    config: &StudyConfig,
    mask: &SubdomainMask,
    family: &NestedFamily,
) -> Result<NormColumns> {
    let scaled = scale_coefficients(a.clone(), 1.0)?;
    let (exact, f) = manufactured(&scaled)?;
    let op = assemble_operator(a.grid(), &scaled)?;
    let (uh, _) = solve_dirichlet(&op, &f, &config.solver)?;
    Ok(NormColumns::of_error(&uh.sub(&exact), mask, family).scaled(10.0))
}

struct Setup {
    a: Arc<CoefficientField>,
    f: ScalarField,
    mask: SubdomainMask,
    family: NestedFamily,
}

fn setup(config: &StudyConfig) -> Result<Setup> {
    config.validate()?;
    let grid = config.build_grid()?;
    let a = Arc::new(config.coefficients.sample(grid.clone())?);
    let f = config.forcing.sample(grid.clone(), config.study.seed);
    let mask = config.mask(&grid)?;
    let family = nested_family(&grid, config.study.n_max)?;
    Ok(Setup { a, f, mask, family })
}

fn solve_limit_for(config: &StudyConfig, s: &Setup) -> Result<ScalarField> {
    let exec = config.study.execution;
    Ok(match &config.nonlinearity {
        Some(nl) => semilinear_limit(&s.a, nl.function, &s.f, &nl.picard, &config.solver, exec)?.0,
        None => solve_limit(&s.a, &s.f, &config.solver, exec)?.0,
    })
}

/// Solves the perturbed problem at one ε; returns `(u_ε, iterations, residual)`.
pub fn solve_perturbed(config: &StudyConfig, a: &Arc<CoefficientField>, f: &ScalarField, eps: f64) -> Result<(ScalarField, usize, f64)> {
    let scaled = scale_coefficients(a.clone(), eps)?;
    match &config.nonlinearity {
        Some(nl) => {
            let (u, rep) = picard_solve(&scaled, nl.function, f, &nl.picard, &config.solver)?;
            Ok((u, rep.iterations, rep.residual))
        }
        None => {
            let op = assemble_operator(a.grid(), &scaled)?;
            let (u, stats) = solve_dirichlet(&op, f, &config.solver)?;
            Ok((u, stats.iterations, stats.residual))
        }
    }
}

/// Runs the sweep. Setup and limit failures are errors; a failing ε row ends
/// the report there and marks it incomplete.
pub fn run_sweep(config: &StudyConfig) -> Result<SweepRun> {
    let s = setup(config)?;
    let limit = solve_limit_for(config, &s)?;
    let floor = match discretization_floor(&s.a, config, &s.mask, &s.family) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("no discretization floor: {e}");
            None
        }
    };
    let results = config.study.execution.map(&config.study.epsilons, |&eps| {
        let start = Instant::now();
        let (u, iterations, residual) = solve_perturbed(config, &s.a, &s.f, eps)?;
        let norms = NormColumns::compute(&u, &limit, eps, &s.mask, &s.family);
        let row = SweepRow {
            epsilon: eps,
            norms,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            iterations,
            residual,
        };
        Ok::<_, Error>((row, u))
    });
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    let mut error = None;
    for (r, eps) in results.into_iter().zip(&config.study.epsilons) {
        match r {
            Ok((row, u)) => {
                rows.push(row);
                solutions.push(u);
            }
            Err(e) => {
                error = Some(format!("ε = {eps}: {e}"));
                break;
            }
        }
    }
    let rates = COLUMNS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.norms.values()[k])).collect();
            (name.to_string(), estimate_rate(&pairs).ok())
        })
        .collect();
    let report = SweepReport {
        config: config.clone(),
        complete: error.is_none(),
        error,
        rows,
        rates,
        floor,
        mask: s.mask.margins().to_vec(),
        family: s.family.margin_schedule(),
        note: FLOOR_NOTE.to_string(),
    };
    Ok(SweepRun { report, limit, solutions })
}

/// Solves and writes only the limit problem.
pub fn run_limit(config: &StudyConfig) -> Result<ScalarField> {
    let s = setup(config)?;
    solve_limit_for(config, &s)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn render_csv(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        let mut cells = vec![fmt_f64(row.epsilon)];
        cells.extend(row.norms.values().iter().map(|&v| fmt_f64(v)));
        cells.push(format!("{:.3}", row.wall_ms));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn render_json(report: &SweepReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_report(json: &str) -> Result<SweepReport> {
    serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes `<stem>.csv` and its JSON twin `<stem>.json` into `dir`.
pub fn emit_report(report: &SweepReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    fs::write(&csv, render_csv(report))?;
    fs::write(&json, render_json(report)?)?;
    Ok(vec![csv, json])
}

/// File name used for the `k`-th solution of a sweep.
pub fn solution_file(k: usize) -> String {
    format!("u_eps_{k:03}.field")
}

pub const LIMIT_FILE: &str = "u_limit.field";

/// Writes `u_0` and every `u_ε` next to the report.
pub fn save_fields(run: &SweepRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = vec![dir.join(LIMIT_FILE)];
    write_field(&out[0], &run.limit)?;
    for (k, u) in run.solutions.iter().enumerate() {
        let p = dir.join(solution_file(k));
        write_field(&p, u)?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub mask: Vec<usize>,
    pub points: Vec<ModulusPoint>,
    /// `σ(h/2) / σ(h)` for consecutive shifts.
    pub halving_ratios: Vec<f64>,
    /// `(ε, ‖∇²_{X2} u_ε‖_{L²(ω)})`.
    pub hess_norms: Vec<(f64, f64)>,
    /// max / min of `hess_norms`.
    pub spread: f64,
}

/// Diagonal dyadic shifts `(s, ..., s)`, `s = 8, 4, 2, 1`, keeping the
/// admissible ones.
pub fn default_shifts(grid: &crate::grid::Grid, mask: &SubdomainMask) -> Vec<Vec<isize>> {
    [8isize, 4, 2, 1]
        .iter()
        .map(|&s| vec![s; grid.dim()])
        .filter(|h| shift_admissible(grid, mask, h))
        .collect()
}

/// Equicontinuity diagnostic on the family `{∇²_{X2} u_ε}` of a sweep.
pub fn translation_study(run: &SweepRun) -> Result<TranslationReport> {
    let Some(first) = run.solutions.first() else {
        return Err(Error::validation("translation diagnostic needs at least one solved ε"));
    };
    let grid = first.grid();
    let config = &run.report.config;
    let mask = config.mask(grid)?;
    let shifts = config.study.shifts.clone().unwrap_or_else(|| default_shifts(grid, &mask));
    let mut fields = Vec::new();
    for u in &run.solutions {
        for i in grid.x2_axes() {
            for j in grid.x2_axes() {
                fields.push(second_partial(u, i, j));
            }
        }
    }
    let points = translation_modulus(&fields, &mask, &shifts)?;
    let halving_ratios = points.windows(2).map(|w| w[1].sigma / w[0].sigma).collect();
    let hess_norms: Vec<(f64, f64)> = run
        .report
        .rows
        .iter()
        .zip(&run.solutions)
        .map(|(r, u)| (r.epsilon, hess_x2_seminorm(u, &mask)))
        .collect();
    let max = hess_norms.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let min = hess_norms.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    Ok(TranslationReport {
        mask: mask.margins().to_vec(),
        points,
        halving_ratios,
        hess_norms,
        spread: max / min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_field;

    fn config(extra: &str) -> StudyConfig {
        StudyConfig::parse(&format!("[grid]\ncells = [16, 16]\nq = 1\n{extra}")).unwrap()
    }

    #[test]
    fn exact_power_laws() {
        let e = [1.0, 0.5, 0.25, 0.125];
        let lin: Vec<(f64, f64)> = e.iter().map(|&x| (x, 3.0 * x)).collect();
        let quad: Vec<(f64, f64)> = e.iter().map(|&x| (x, 3.0 * x * x)).collect();
        assert!((estimate_rate(&lin).unwrap() - 1.0).abs() < 1e-12);
        assert!((estimate_rate(&quad).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_skips_nonpositive_and_needs_three() {
        let pairs = [(1.0, 2.0), (0.5, 0.0), (0.25, 0.5), (0.125, -1.0)];
        assert!(estimate_rate(&pairs).is_err());
        let pairs = [(1.0, 1.0), (0.5, 0.0), (0.25, 0.0625), (0.125, 0.015625)];
        assert!((estimate_rate(&pairs).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_gives_zero_columns() {
        let run = run_sweep(&config("[forcing]\nfamily = \"zero\"\n[study]\nepsilons = [1.0]\n")).unwrap();
        assert!(run.report.complete);
        assert_eq!(run.report.rows.len(), 1);
        assert!(run.report.rows[0].norms.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_sweep_v12_decreases() {
        let cfg = StudyConfig::parse(
            "[grid]\ncells = [64, 64]\nq = 1\n[study]\nepsilons = [1.0, 0.5, 0.25, 0.125]\n",
        )
        .unwrap();
        let run = run_sweep(&cfg).unwrap();
        let v12 = run.report.column("v12_diff").unwrap();
        assert!(v12.windows(2).all(|w| w[1] < w[0]), "{v12:?}");
        assert!(run.report.rates["v12_diff"].is_some());
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let run = run_sweep(&config("")).unwrap();
        assert_eq!(render_csv(&run.report), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_rows_follow_eps_and_json_round_trips() {
        let run = run_sweep(&config("[study]\nepsilons = [1.0, 0.5, 0.25, 0.125]\n")).unwrap();
        let csv = render_csv(&run.report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        let eps: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(eps, vec![1.0, 0.5, 0.25, 0.125]);
        let back = parse_report(&render_json(&run.report).unwrap()).unwrap();
        assert_eq!(back, run.report);
        assert_eq!(back.config, run.report.config);
    }

    #[test]
    fn reruns_are_byte_identical_apart_from_wall_time() {
        let cfg = config("[coefficients]\nfamily = \"smooth\"\n[forcing]\nfamily = \"random\"\n[study]\nepsilons = [1.0, 0.1]\nseed = 5\n");
        let strip = |s: String| s.lines().map(|l| l.rsplit_once(',').map_or(l, |p| p.0).to_string()).collect::<Vec<_>>();
        let a = strip(render_csv(&run_sweep(&cfg).unwrap().report));
        let b = strip(render_csv(&run_sweep(&cfg).unwrap().report));
        assert_eq!(a, b);
    }

    #[test]
    fn persisted_fields_reproduce_columns() {
        let cfg = config("[coefficients]\nfamily = \"smooth\"\n[forcing]\nfamily = \"sine\"\n[study]\nepsilons = [0.5, 0.25]\n");
        let run = run_sweep(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_fields(&run, dir.path()).unwrap();
        let u0 = read_field(&dir.path().join(LIMIT_FILE)).unwrap();
        let grid = u0.grid().clone();
        let mask = cfg.mask(&grid).unwrap();
        let family = nested_family(&grid, cfg.study.n_max).unwrap();
        for (k, row) in run.report.rows.iter().enumerate() {
            let u = read_field(&dir.path().join(solution_file(k))).unwrap();
            let again = NormColumns::compute(&u, &u0, row.epsilon, &mask, &family);
            for (x, y) in again.values().iter().zip(row.norms.values()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn floor_is_small_and_positive() {
        let cfg = config("[coefficients]\nfamily = \"smooth\"\n");
        let s = setup(&cfg).unwrap();
        let fl = discretization_floor(&s.a, &cfg, &s.mask, &s.family).unwrap();
        assert!(fl.values().iter().all(|&v| v > 0.0 && v < 1.0), "{fl:?}");
    }

    #[test]
    fn failing_row_marks_report_incomplete() {
        // the slices converge within the budget, the full 2-D solves do not
        let cfg = config("[study]\nepsilons = [1.0, 0.5]\n[solver]\nmethod = \"cg\"\nmax_iter = 16\n");
        let run = run_sweep(&cfg).unwrap();
        assert!(!run.report.complete);
        assert!(run.report.error.as_ref().unwrap().contains("ε = 1"));
        assert!(run.report.rows.is_empty());
        assert_eq!(render_csv(&run.report), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn translation_on_smooth_family() {
        let cfg = StudyConfig::parse(
            "[grid]\ncells = [32, 32]\nq = 1\n[forcing]\nfamily = \"sine\"\n[study]\nepsilons = [1.0, 0.5, 0.25]\nmargin = 6\n",
        )
        .unwrap();
        let run = run_sweep(&cfg).unwrap();
        let t = translation_study(&run).unwrap();
        assert_eq!(t.points.len(), 3);
        assert!(t.points.windows(2).all(|w| w[1].sigma < w[0].sigma));
        assert!(t.spread >= 1.0 && t.spread < 10.0);
    }
}
