use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anisolab::coefficients::{min_sym_eigenvalue, scale_coefficients};
use anisolab::fd::assemble_operator;
use anisolab::grid::{interior_subdomain, nested_family};
use anisolab::io::{read_field, write_field};
use anisolab::norms::{frechet_distance, norm_bundle};
use anisolab::solver::solver_diagnostics;
use anisolab::spectral::{bound_report, SpectralField};
use anisolab::study::{
    emit_report, render_csv, render_json, run_limit, run_sweep, save_fields, solve_perturbed, translation_study,
    NormColumns, SweepRun, COLUMNS, LIMIT_FILE,
};
use anisolab::StudyConfig;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anisolab", version, about = "Anisotropic singular perturbation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Study configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `[study] seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl Common {
    fn load(&self) -> Result<StudyConfig> {
        let mut cfg = StudyConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.study.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the perturbed problem for one ε.
    Solve {
        #[command(flatten)]
        common: Common,
        /// ε; defaults to the first value of the study list, or 1.
        #[arg(long)]
        eps: Option<f64>,
        /// Also report extremal eigenvalues and CG iterations.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Solve the limit problem slice by slice.
    Limit {
        #[command(flatten)]
        common: Common,
    },
    /// Run the ε-sweep and write the report.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run the ε-sweep of the semilinear problem (needs `[nonlinearity]`).
    Semilinear {
        #[command(flatten)]
        common: Common,
    },
    /// Translation-modulus diagnostic of the X2 Hessians along the sweep.
    Translation {
        #[command(flatten)]
        common: Common,
    },
    /// Check the Fourier bounds on the periodic lattice.
    FourierCheck(FourierArgs),
    /// Norms and metric distance between two stored fields.
    Metric(MetricArgs),
}

#[derive(Args)]
struct FourierArgs {
    /// Points per axis.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Dimension N.
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.1,0.01,0.001")]
    eps: Vec<f64>,
    /// Constant matrix, row-major and comma-separated; identity if omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    matrix: Option<Vec<f64>>,
    /// Number of random forcings, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    u: PathBuf,
    #[arg(long)]
    v: PathBuf,
    /// Takes `ω` and `n_max` from a study config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Uniform margin of `ω` in cells when no config is given.
    #[arg(long)]
    margin: Option<usize>,
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    /// Also evaluate the sweep columns of `u` against `v` at this ε.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn out_dir(cfg: &StudyConfig) -> Result<&Path> {
    let dir = cfg.output.dir.as_path();
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn solve(common: &Common, eps: Option<f64>, diagnostics: bool) -> Result<()> {
    let cfg = common.load()?;
    let eps = eps.or(cfg.study.epsilons.first().copied()).unwrap_or(1.0);
    let grid = cfg.build_grid()?;
    let a = Arc::new(cfg.coefficients.sample(grid.clone())?);
    let f = cfg.forcing.sample(grid.clone(), cfg.study.seed);
    let (u, iterations, residual) = solve_perturbed(&cfg, &a, &f, eps)?;
    let path = out_dir(&cfg)?.join("u_eps.field");
    write_field(&path, &u)?;
    let diag = if diagnostics {
        let op = assemble_operator(&grid, &scale_coefficients(a, eps)?)?;
        Some(solver_diagnostics(&op)?)
    } else {
        None
    };
    match common.format {
        Format::Csv => {
            let mut line = format!("epsilon,iterations,residual,max_abs\n{eps:e},{iterations},{residual:e},{:e}", u.max_abs());
            if let Some(d) = diag {
                line = format!(
                    "{line}\n# lambda_min {:e}, lambda_max {:e}, condition {:e}, cg_iterations {:?}",
                    d.lambda_min, d.lambda_max, d.condition, d.cg_iterations
                );
            }
            println!("{line}");
        }
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "epsilon": eps,
                "iterations": iterations,
                "residual": residual,
                "max_abs": u.max_abs(),
                "field": path,
                "diagnostics": diag,
            }))?
        ),
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn limit(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let u0 = run_limit(&cfg)?;
    let path = out_dir(&cfg)?.join(LIMIT_FILE);
    write_field(&path, &u0)?;
    match common.format {
        Format::Csv => println!("field,max_abs\n{},{:e}", path.display(), u0.max_abs()),
        Format::Json => println!("{}", serde_json::json!({ "field": path, "max_abs": u0.max_abs() })),
    }
    Ok(())
}

fn sweep(common: &Common, semilinear: bool) -> Result<bool> {
    let cfg = common.load()?;
    if semilinear && cfg.nonlinearity.is_none() {
        bail!("the semilinear study needs a [nonlinearity] section");
    }
    let run = run_sweep(&cfg)?;
    let dir = out_dir(&cfg)?;
    let stem = if semilinear { "semilinear" } else { "sweep" };
    let mut written = emit_report(&run.report, dir, stem)?;
    if cfg.output.save_fields {
        written.extend(save_fields(&run, dir)?);
    }
    warn_floor(&run);
    match common.format {
        Format::Csv => print!("{}", render_csv(&run.report)),
        Format::Json => println!("{}", render_json(&run.report)?),
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    if let Some(e) = &run.report.error {
        eprintln!("error: sweep incomplete: {e}");
    }
    Ok(run.report.complete)
}

fn warn_floor(run: &SweepRun) {
    for (column, eps) in run.report.below_floor() {
        log::warn!("{column} at ε = {eps} is below the discretization floor");
    }
}

fn translation(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let run = run_sweep(&cfg)?;
    if !run.report.complete {
        bail!("sweep incomplete: {}", run.report.error.clone().unwrap_or_default());
    }
    let t = translation_study(&run)?;
    let dir = out_dir(&cfg)?;
    let json = serde_json::to_string_pretty(&t)?;
    fs::write(dir.join("translation.json"), &json)?;
    match common.format {
        Format::Csv => {
            println!("shift,length,sigma");
            for p in &t.points {
                let shift: Vec<String> = p.shift.iter().map(|s| s.to_string()).collect();
                println!("{},{:e},{:e}", shift.join(" "), p.length, p.sigma);
            }
            println!("# halving ratios {:?}, Hessian norm spread {:e}", t.halving_ratios, t.spread);
        }
        Format::Json => println!("{json}"),
    }
    Ok(())
}

fn fourier(args: &FourierArgs) -> Result<bool> {
    let n = args.dims;
    let matrix = match &args.matrix {
        Some(m) => m.clone(),
        None => (0..n * n).map(|k| if k % (n + 1) == 0 { 1.0 } else { 0.0 }).collect(),
    };
    if matrix.len() != n * n {
        bail!("--matrix needs {} entries", n * n);
    }
    let shape = vec![args.size; n];
    let mut rows = Vec::new();
    for seed in args.seed..args.seed + args.samples {
        let f = SpectralField::random_forcing(&shape, args.q, seed)?;
        for &eps in &args.eps {
            rows.push((seed, bound_report(&matrix, &f, eps)?));
        }
    }
    let all_pass = rows.iter().all(|(_, r)| r.passes());
    match args.format {
        Format::Csv => {
            println!("seed,epsilon,lambda,r_x2,r_x1,r_cross,pass");
            for (seed, r) in &rows {
                println!("{seed},{:e},{:e},{:e},{:e},{:e},{}", r.eps, r.lambda, r.r_x2, r.r_x1, r.r_cross, r.passes());
            }
        }
        Format::Json => {
            let out: Vec<_> = rows
                .iter()
                .map(|(seed, r)| serde_json::json!({ "seed": seed, "report": r, "pass": r.passes() }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    if !all_pass {
        eprintln!("error: bound violated (λ = {:e})", min_sym_eigenvalue(&matrix, n));
    }
    Ok(all_pass)
}

fn metric(args: &MetricArgs) -> Result<()> {
    let u = read_field(&args.u).with_context(|| format!("reading {}", args.u.display()))?;
    let v = read_field(&args.v).with_context(|| format!("reading {}", args.v.display()))?;
    if u.grid() != v.grid() {
        bail!("the two fields live on different grids");
    }
    let grid = u.grid().clone();
    let (mask, n_max) = match &args.config {
        Some(p) => {
            let cfg = StudyConfig::load(p)?;
            (cfg.mask(&grid)?, cfg.study.n_max)
        }
        None => {
            let m = args.margin.unwrap_or_else(|| grid.cells().iter().map(|c| (c / 8).max(1)).min().unwrap_or(1));
            (interior_subdomain(&grid, &vec![m; grid.dim()])?, args.n_max)
        }
    };
    let family = nested_family(&grid, n_max)?;
    let bundle = norm_bundle(&u.sub(&v), &[mask.clone()]);
    let d = frechet_distance(&u, &v, &family);
    let columns = args.eps.map(|eps| NormColumns::compute(&u, &v, eps, &mask, &family));
    match args.format {
        Format::Csv => {
            println!("quantity,value");
            println!("l2_diff,{:e}", bundle.l2);
            println!("v12_diff,{:e}", bundle.v12);
            println!("v22_diff_omega,{:e}", bundle.v22_by_mask[0].1);
            println!("frechet_d,{d:e}");
            if let Some(c) = columns {
                let shown = ["l2_diff", "v12_diff", "frechet_d"];
                for (name, value) in COLUMNS.iter().zip(c.values()).filter(|(n, _)| !shown.contains(n)) {
                    println!("{name},{value:e}");
                }
            }
        }
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "norms": bundle,
                "frechet_d": d,
                "family": family.margin_schedule(),
                "columns": columns,
            }))?
        ),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Solve { common, eps, diagnostics } => solve(common, *eps, *diagnostics).map(|_| true),
        Command::Limit { common } => limit(common).map(|_| true),
        Command::Sweep { common } => sweep(common, false),
        Command::Semilinear { common } => sweep(common, true),
        Command::Translation { common } => translation(common).map(|_| true),
        Command::FourierCheck(args) => fourier(args),
        Command::Metric(args) => metric(args).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
