//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each and exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anisolab::coefficients::{scale_coefficients, CoefficientFamily};
use anisolab::exec::Execution;
use anisolab::fd::{apply_to_field, assemble_nondivergence, assemble_operator};
use anisolab::forcing::manufactured;
use anisolab::grid::{nested_family, Grid};
use anisolab::limit::solve_limit;
use anisolab::norms::{frechet_distance, frechet_series, grad_x1_norm, grad_x2_norm, l2_norm};
use anisolab::semilinear::{semilinear_limit, Nonlinearity, PicardSettings};
use anisolab::solver::{solve_dirichlet, SolverSettings};
use anisolab::spectral::{check_laplacian_bounds, check_weighted_bounds, SpectralField, BOUND_SLACK};
use anisolab::study::{estimate_rate, run_sweep, translation_study, SweepRun, COLUMNS};
use anisolab::{ScalarField, StudyConfig};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS_TORUS: [f64; 5] = [1.0, 0.5, 0.1, 0.01, 0.001];

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn unit(c: usize) -> Arc<Grid> {
    Arc::new(Grid::unit(&[c, c], 1).unwrap())
}

fn torus_bounds(a: Option<&[f64]>) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let f = SpectralField::random_forcing(&[64, 64], 1, seed).map_err(|e| e.to_string())?;
        ensure(f.is_hermitian(1e-12), || format!("forcing {seed} is not Hermitian"))?;
        for eps in EPS_TORUS {
            let r = match a {
                Some(a) => check_weighted_bounds(a, &f, eps),
                None => check_laplacian_bounds(&f, eps),
            }
            .map_err(|e| format!("seed {seed}: {e}"))?;
            worst = worst.max(r.max_ratio());
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("max ratio {worst:.6} <= 1 + {BOUND_SLACK:e}, {:.2} s", elapsed.as_secs_f64()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let summary = torus_bounds(None)?;
    let f = SpectralField::random_forcing(&[64, 64], 1, 99).unwrap().filter_modes(|xi| xi[0] == 0);
    for eps in EPS_TORUS {
        let r = check_laplacian_bounds(&f, eps).map_err(|e| e.to_string())?;
        ensure((r.r_x2 - 1.0).abs() <= 1e-12, || format!("tightness: r_X2 = {} at ε = {eps}", r.r_x2))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("{summary}; ξ1 = 0 forcing gives r_X2 = 1 ± 1e-12"))
}

fn criterion_2() -> Outcome {
    let a = [2.0, 0.5, 0.5, 1.0];
    let lambda = anisolab::coefficients::min_sym_eigenvalue(&a, 2);
    ensure((lambda - (1.5 - 0.5f64.sqrt())).abs() < 1e-14, || format!("λ = {lambda}"))?;
    torus_bounds(Some(&a))
}

fn manufactured_l2_error(c: usize, eps: f64) -> f64 {
    let g = unit(c);
    let a = Arc::new(CoefficientFamily::Identity.sample(g.clone()).unwrap());
    let s = scale_coefficients(a, eps).unwrap();
    let (exact, f) = manufactured(&s).unwrap();
    let op = assemble_operator(&g, &s).unwrap();
    let (u, _) = solve_dirichlet(&op, &f, &SolverSettings::default()).unwrap();
    l2_norm(&u.sub(&exact), None)
}

fn criterion_3() -> Outcome {
    let mut slopes = Vec::new();
    for eps in [1.0, 0.5, 0.1] {
        let pairs: Vec<(f64, f64)> = [16usize, 32, 64, 128]
            .iter()
            .map(|&c| (1.0 / c as f64, manufactured_l2_error(c, eps)))
            .collect();
        let slope = estimate_rate(&pairs).map_err(|e| e.to_string())?;
        ensure((slope - 2.0).abs() <= 0.2, || format!("ε = {eps}: slope {slope:.3}"))?;
        slopes.push(format!("ε={eps}: {slope:.3}"));
    }
    Ok(format!("L² error slopes {}", slopes.join(", ")))
}

fn criterion_4() -> Outcome {
    let settings = SolverSettings::default();
    let mut worst_ratio: f64 = 0.0;
    for c in [16usize, 32, 64, 128] {
        let g = unit(c);
        let a = CoefficientFamily::Identity.sample(g.clone()).unwrap();
        let f = ScalarField::from_fn(g.clone(), |_| 1.0);
        let (u, _) = solve_limit(&a, &f, &settings, Execution::Parallel).map_err(|e| e.to_string())?;
        let h = 1.0 / c as f64;
        let dev = (0..g.node_count())
            .map(|l| {
                let y = g.coord(&g.multi(l))[1];
                (u.values()[l] - y * (1.0 - y) / 2.0).abs()
            })
            .fold(0.0, f64::max);
        ensure(dev <= 0.5 * h * h + 1e-12, || format!("{c} cells: deviation {dev:e}"))?;
        worst_ratio = worst_ratio.max(dev / (h * h));
    }
    let want = 1.0 - 1.0 / 0.5f64.cosh();
    let mut errs = Vec::new();
    for c in [32usize, 64, 128] {
        let g = unit(c);
        let a = CoefficientFamily::Identity.sample(g.clone()).unwrap();
        let f = ScalarField::from_fn(g.clone(), |_| 1.0);
        let (u, _) = semilinear_limit(
            &a,
            Nonlinearity::Linear { kappa: 1.0 },
            &f,
            &PicardSettings::default(),
            &settings,
            Execution::Parallel,
        )
        .map_err(|e| e.to_string())?;
        let h = 1.0 / c as f64;
        let err = (0..=c).map(|i| (u.at(&[i, c / 2]) - want).abs()).fold(0.0, f64::max);
        ensure(err <= 0.01 * h * h, || format!("{c} cells: semilinear error {err:e}"))?;
        errs.push((h, err));
    }
    let order = estimate_rate(&errs).map_err(|e| e.to_string())?;
    ensure((order - 2.0).abs() <= 0.2, || format!("semilinear error order {order:.3}"))?;
    Ok(format!(
        "limit deviation <= {worst_ratio:.2e}·h²; semilinear value at y = 1/2 within 0.01·h², order {order:.3}"
    ))
}

fn sweep_config() -> StudyConfig {
    StudyConfig::parse(
        r#"
[grid]
cells = [128, 128]
q = 1

[coefficients]
family = "smooth"

[forcing]
family = "sine"

[study]
epsilons = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625]
margin = 16
n_max = 20
"#,
    )
    .unwrap()
}

const CONVERGENT_COLUMNS: [&str; 6] = [
    "v12_diff",
    "eps_grad_x1",
    "hess_x2_diff_omega",
    "eps2_hess_x1_omega",
    "eps_hess_x1x2_omega",
    "frechet_d",
];

fn criterion_5(run: &SweepRun, elapsed: Duration) -> Outcome {
    let report = &run.report;
    ensure(report.complete, || format!("sweep incomplete: {:?}", report.error))?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    let floor = report.floor.ok_or("no discretization floor")?.values();
    let mut notes = Vec::new();
    for name in CONVERGENT_COLUMNS {
        let k = COLUMNS.iter().position(|c| *c == name).unwrap();
        let v = report.column(name).unwrap();
        for (step, w) in v.windows(2).enumerate() {
            if w[0] < floor[k] {
                break;
            }
            ensure(w[1] <= 1.1 * w[0], || format!("{name} grows at step {step}: {:?}", v))?;
        }
        let last = *v.last().unwrap();
        ensure(last <= 0.2 * v[0], || format!("{name}: last {last:e} vs first {:e}", v[0]))?;
        notes.push(format!("{name} {:.1e}", last / v[0]));
    }
    Ok(format!("last/first: {}; {:.1} s", notes.join(", "), elapsed.as_secs_f64()))
}

fn criterion_6(run: &SweepRun) -> Outcome {
    let t = translation_study(run).map_err(|e| e.to_string())?;
    ensure(t.points.len() == 4, || format!("expected 4 dyadic shifts, got {}", t.points.len()))?;
    for (k, r) in t.halving_ratios.iter().enumerate() {
        ensure((0.35..=0.65).contains(r), || format!("σ ratio {k} = {r:.3}"))?;
    }
    ensure(t.spread <= 10.0, || format!("max/min Hessian norm {:.3}", t.spread))?;
    let ratios: Vec<String> = t.halving_ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok(format!("σ(h/2)/σ(h) = [{}], norm spread {:.3}", ratios.join(", "), t.spread))
}

fn criterion_7() -> Outcome {
    let g = unit(16);
    let fam = nested_family(&g, 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut random = || {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let v: Vec<f64> = (0..g.node_count()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        ScalarField::from_values(g.clone(), v)
    };
    let mut worst = f64::MIN;
    for k in 0..100 {
        let (u, v, w) = (random(), random(), random());
        ensure(frechet_distance(&u, &u, &fam) == 0.0, || format!("triple {k}: d(u,u) != 0"))?;
        let uv = frechet_distance(&u, &v, &fam);
        let vu = frechet_distance(&v, &u, &fam);
        let vw = frechet_distance(&v, &w, &fam);
        let uw = frechet_distance(&u, &w, &fam);
        ensure((uv - vu).abs() <= 1e-12, || format!("triple {k}: asymmetry {:e}", uv - vu))?;
        ensure(uw <= uv + vw + 1e-12, || format!("triple {k}: triangle violated"))?;
        worst = worst.max(uw - uv - vw);
    }
    let series = frechet_series(&[1.0; 20]);
    let want = 1.0 - 0.5f64.powi(20);
    ensure((series - want).abs() <= 1e-12, || format!("truncated series {series}"))?;
    Ok(format!("100 triples, max d(u,w) - d(u,v) - d(v,w) = {worst:.3e}; series = {series:.12}"))
}

fn criterion_8() -> Outcome {
    let settings = SolverSettings::default();
    let mut worst_sym: f64 = 0.0;
    let mut worst_coercive: f64 = 0.0;
    for eps in [1.0, 0.5, 0.1, 0.01] {
        let g = unit(48);
        let a = Arc::new(CoefficientFamily::Smooth.sample(g.clone()).unwrap());
        let s = scale_coefficients(a.clone(), eps).unwrap();
        let op = assemble_operator(&g, &s).map_err(|e| e.to_string())?;
        let defect = op.symmetry_defect();
        ensure(defect <= 1e-12, || format!("ε = {eps}: symmetry defect {defect:e}"))?;
        worst_sym = worst_sym.max(defect);
        let f = ScalarField::from_fn(g.clone(), |x| (PI * x[0]).sin() * (PI * x[1]).sin() + x[0]);
        let (u, _) = solve_dirichlet(&op, &f, &settings).map_err(|e| e.to_string())?;
        let energy: f64 = g.interior_nodes().iter().map(|&l| f.values()[l] * u.values()[l]).sum::<f64>() * g.cell_volume();
        let bound = a.lambda() * (eps * eps * grad_x1_norm(&u).powi(2) + grad_x2_norm(&u).powi(2));
        ensure(bound <= 1.05 * energy, || format!("ε = {eps}: λ(...) = {bound:e} > 1.05·<f,u> = {:e}", 1.05 * energy))?;
        worst_coercive = worst_coercive.max(bound / energy);
    }
    let mut pairs = Vec::new();
    for c in [16usize, 32, 64, 128] {
        let g = unit(c);
        let a = Arc::new(CoefficientFamily::Smooth.sample(g.clone()).unwrap());
        let s = scale_coefficients(a, 0.5).unwrap();
        let div = assemble_operator(&g, &s).map_err(|e| e.to_string())?;
        let nondiv = assemble_nondivergence(&g, &s).map_err(|e| e.to_string())?;
        let u = ScalarField::from_fn(g.clone(), |x| (PI * x[0]).sin() * (2.0 * PI * x[1]).sin() * (1.0 + x[0] * x[1]));
        let d = apply_to_field(&div, &u).sub(&apply_to_field(&nondiv, &u));
        pairs.push((1.0 / c as f64, l2_norm(&d, None)));
    }
    let order = estimate_rate(&pairs).map_err(|e| e.to_string())?;
    ensure((order - 2.0).abs() <= 0.2, || format!("div/non-div difference order {order:.3}, {pairs:?}"))?;
    Ok(format!(
        "symmetry defect {worst_sym:.1e}, coercivity ratio {worst_coercive:.3}, div/non-div order {order:.3}"
    ))
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(msg)
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {n} ({name}): PASS - {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {n} ({name}): FAIL - {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run(1, "Laplacian Fourier bounds", criterion_1);
    ok &= run(2, "λ-weighted Fourier bounds", criterion_2);
    ok &= run(3, "manufactured-solution order", criterion_3);
    ok &= run(4, "limit-problem exactness", criterion_4);
    let start = Instant::now();
    let sweep = catch_unwind(|| run_sweep(&sweep_config()));
    let elapsed = start.elapsed();
    match sweep {
        Ok(Ok(sweep)) => {
            ok &= run(5, "ε-convergence of the sweep columns", || criterion_5(&sweep, elapsed));
            ok &= run(6, "equicontinuity of the X2 Hessians", || criterion_6(&sweep));
        }
        other => {
            let why = match other {
                Ok(Err(e)) => e.to_string(),
                _ => "sweep panicked".into(),
            };
            ok &= run(5, "ε-convergence of the sweep columns", || Err(why.clone()));
            ok &= run(6, "equicontinuity of the X2 Hessians", || Err(why));
        }
    }
    ok &= run(7, "Fréchet metric", criterion_7);
    ok &= run(8, "operator properties", criterion_8);
    if ok {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
