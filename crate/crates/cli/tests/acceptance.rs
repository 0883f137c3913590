//! Acceptance suite. Each test prints one PASS/FAIL line to stderr
//! (uncaptured) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use dyntriv::densela::{det, fro_inner, fro_norm};
use dyntriv::manifolds::{origin, random_point, ManifoldSpec};
use dyntriv::matexp::{dexpm, expm, expm_grad, lie_injectivity_check};
use dyntriv::triv::supports;
use dyntriv::{
    build_problem, Engine, EngineConfig, Matrix, OptimizerKind, OptimizerState, Point,
    ProblemName, ProblemSpec, RebasePeriod, TrivKind, Trivialization,
};
use dyntriv_cli::{execute, run_cli_with, RunConfig};

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr();
    let _ = writeln!(err, "criterion {id} [{title}]: {verdict} ({detail})");
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Scaled Taylor series with repeated squaring; independent of the Padé kernel.
fn expm_taylor(a: &Matrix) -> Matrix {
    let n = a.rows();
    let norm = fro_norm(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let x = a.scale(0.5f64.powi(s));
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..30 {
        term = (&term * &x).scale(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn criterion_1_exponential_gradient() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst_fd: f64 = 0.0;
    let mut worst_adj: f64 = 0.0;
    for trial in 0..50 {
        let n = 1 + trial % 8;
        let scale = rng.random_range(0.1..3.0) / (n as f64).sqrt();
        let a = gaussian(n, n, &mut rng).scale(scale);
        let c = gaussian(n, n, &mut rng);
        // f(X) = tr(C X) has ambient gradient Cᵀ
        let g = c.transpose();
        let grad = expm_grad(&a, &g).unwrap();
        let f = |x: &Matrix| (&c * &expm(x).unwrap()).trace();
        let h = 1e-5;
        let mut fd = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut ap = a.clone();
                ap[(i, j)] += h;
                let mut am = a.clone();
                am[(i, j)] -= h;
                fd[(i, j)] = (f(&ap) - f(&am)) / (2.0 * h);
            }
        }
        worst_fd = worst_fd.max(fro_norm(&(&grad - &fd)) / fro_norm(&fd).max(1e-300));

        let e = gaussian(n, n, &mut rng);
        let lhs = fro_inner(&grad, &e).unwrap();
        let rhs = fro_inner(&g, &dexpm(&a, &e).unwrap()).unwrap();
        worst_adj = worst_adj.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    let elapsed = start.elapsed();
    let pass = worst_fd <= 1e-6 && worst_adj <= 1e-10 && elapsed < Duration::from_secs(10);
    report(
        1,
        "exponential gradient",
        pass,
        &format!("fd rel err {worst_fd:.2e} <= 1e-6, adjoint err {worst_adj:.2e} <= 1e-10, {elapsed:.2?} < 10s"),
    );
    assert!(pass);
}

fn retraction_manifolds() -> Vec<ManifoldSpec> {
    let mut out = Vec::new();
    for n in 2..=6 {
        out.push(ManifoldSpec::special_orthogonal(n).unwrap());
        if n / 2 >= 1 {
            out.push(ManifoldSpec::real_torus(n / 2).unwrap());
        }
        for k in [1, n / 2, n] {
            out.push(ManifoldSpec::stiefel(n, k).unwrap());
        }
        out.push(ManifoldSpec::sphere(n).unwrap());
        out.push(ManifoldSpec::hyperbolic(n).unwrap());
        out.push(ManifoldSpec::sym_pos_def(n).unwrap());
        out.push(ManifoldSpec::special_linear(n).unwrap());
        out.push(ManifoldSpec::general_linear_plus(n).unwrap());
    }
    out.dedup();
    out
}

#[test]
fn criterion_2_retraction_axioms() {
    let start = Instant::now();
    let mut worst_zero: f64 = 0.0;
    let mut worst_diff: f64 = 0.0;
    let mut pairs = 0;
    let mut failures = Vec::new();
    for spec in retraction_manifolds() {
        for kind in TrivKind::ALL {
            if !supports(kind, &spec) {
                continue;
            }
            pairs += 1;
            let t = Trivialization::new(kind, spec).unwrap();
            for seed in 0..20 {
                let base = random_point(&spec, seed).unwrap();
                let x0 = t.value_matrix(&base, &vec![0.0; spec.dim]).unwrap();
                let zero_err = fro_norm(&(&x0 - base.value()));
                let diff = t.is_retraction_check(&base, seed).unwrap();
                worst_zero = worst_zero.max(zero_err);
                worst_diff = worst_diff.max(diff);
                if zero_err > 1e-12 || diff > 1e-4 {
                    failures.push(format!("{kind} on {} seed {seed}", spec.label()));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(30);
    report(
        2,
        "retraction axioms",
        pass,
        &format!(
            "{pairs} pairs x 20 seeds, value at 0 err {worst_zero:.2e} <= 1e-12, differential err {worst_diff:.2e} <= 1e-4, {elapsed:.2?} < 30s{}",
            if failures.is_empty() { String::new() } else { format!(", failing: {failures:?}") }
        ),
    );
    assert!(pass);
}

fn k1_engine(kind: TrivKind, x0: Point, lr: f64) -> Engine {
    let t = Trivialization::new(kind, *x0.spec()).unwrap();
    Engine::new(
        t,
        x0,
        OptimizerState::new(OptimizerKind::Sgd, lr).unwrap(),
        EngineConfig {
            rebase: RebasePeriod::Every(1),
            ..EngineConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn criterion_3_limit_case_equivalence() {
    let start = Instant::now();
    let lr = 1e-2;

    // sphere Rayleigh quotient: x ← cos(|v|) x + sin(|v|) v/|v|, v = -lr (I - xxᵀ) ∇f
    let rayleigh = build_problem(&ProblemSpec {
        name: ProblemName::Rayleigh,
        n: 10,
        k: None,
        seed: 5,
    })
    .unwrap();
    let x0 = random_point(&rayleigh.manifold, 6).unwrap();
    let mut engine = k1_engine(TrivKind::RiemannianExp, x0.clone(), lr);
    let mut x = x0.value().clone();
    let mut worst_sphere: f64 = 0.0;
    for _ in 0..50 {
        let g = rayleigh.grad_at(&x);
        let xg = fro_inner(&x, &g).unwrap();
        let v = (&g - &x.scale(xg)).scale(-lr);
        let r = fro_norm(&v);
        x = &x.scale(r.cos()) + &v.scale(r.sin() / r);
        engine.step(&rayleigh).unwrap();
        worst_sphere = worst_sphere.max(fro_norm(&(engine.basis().value() - &x)));
    }

    // SO(4) Procrustes: X ← X exp(-lr (M - Mᵀ)), M = Xᵀ∇f
    let procrustes = build_problem(&ProblemSpec {
        name: ProblemName::Procrustes,
        n: 4,
        k: None,
        seed: 7,
    })
    .unwrap();
    let q0 = random_point(&procrustes.manifold, 8).unwrap();
    let mut engine = k1_engine(TrivKind::LieExp, q0.clone(), lr);
    let mut q = q0.value().clone();
    let mut worst_so: f64 = 0.0;
    for _ in 0..50 {
        let m = &q.transpose() * &procrustes.grad_at(&q);
        let omega = (&m - &m.transpose()).scale(-lr);
        q = &q * &expm_taylor(&omega);
        engine.step(&procrustes).unwrap();
        worst_so = worst_so.max(fro_norm(&(engine.basis().value() - &q)));
    }
    let elapsed = start.elapsed();
    let pass = worst_sphere <= 1e-12 && worst_so <= 1e-12 && elapsed < Duration::from_secs(5);
    report(
        3,
        "K=1 SGD equals Riemannian GD",
        pass,
        &format!("sphere {worst_sphere:.2e}, SO(4) {worst_so:.2e} <= 1e-12 over 50 steps, {elapsed:.2?} < 5s"),
    );
    assert!(pass);
}

/// Benchmark configurations used by criteria 4 and 5.
fn benchmark(name: ProblemName, n: usize, k: Option<usize>, triv: TrivKind, opt: OptimizerKind, lr: f64, rebase: RebasePeriod) -> RunConfig {
    RunConfig {
        problem: ProblemSpec { name, n, k, seed: 42 },
        trivialization: triv,
        rebase,
        optimizer: opt,
        lr,
        max_steps: 2000,
        grad_tol: None,
        loss_tol: None,
        carry_moments: false,
        trace_every: 1,
        injectivity_diagnostic: false,
        wall_clock: false,
        out: None,
    }
}

fn desk_scale_configs() -> Vec<RunConfig> {
    use OptimizerKind::*;
    use ProblemName::*;
    vec![
        benchmark(Procrustes, 16, None, TrivKind::LieExp, Adam, 1e-3, RebasePeriod::Every(100)),
        benchmark(Rayleigh, 50, None, TrivKind::RiemannianExp, Adam, 1e-2, RebasePeriod::Never),
        benchmark(Brockett, 20, Some(4), TrivKind::RiemannianExp, Adam, 1e-3, RebasePeriod::Every(100)),
        benchmark(SpdRecovery, 10, None, TrivKind::RiemannianExp, RmsProp, 1e-2, RebasePeriod::Every(100)),
    ]
}

#[test]
fn criterion_4_feasibility() {
    let mut configs = Vec::new();
    for base in desk_scale_configs() {
        for rebase in [RebasePeriod::Every(1), RebasePeriod::Every(100), RebasePeriod::Never] {
            configs.push(RunConfig { rebase, ..base.clone() });
        }
    }
    configs.push(benchmark(ProblemName::Procrustes, 16, None, TrivKind::Cayley, OptimizerKind::Adam, 1e-3, RebasePeriod::Every(100)));
    configs.push(benchmark(ProblemName::HyperbolicCentroid, 10, None, TrivKind::RiemannianExp, OptimizerKind::Adam, 1e-2, RebasePeriod::Every(100)));

    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for cfg in &configs {
        match execute(cfg) {
            Ok(out) => {
                assert_eq!(out.trace.len(), 2001);
                let m = out.trace.iter().map(|r| r.membership).fold(0.0, f64::max);
                worst = worst.max(m);
                if m > 1e-8 {
                    failures.push(format!("{} membership {m:.2e}", out.summary_line()));
                }
            }
            Err(f) => failures.push(format!("{:?}: {}", cfg.problem.name, f.error)),
        }
    }
    let pass = failures.is_empty();
    report(
        4,
        "feasibility",
        pass,
        &format!("{} runs x 2000 steps, worst membership {worst:.2e} <= 1e-8{}", configs.len(),
            if pass { String::new() } else { format!(", failing: {failures:?}") }),
    );
    assert!(pass);
}

#[test]
fn criterion_5_desk_scale_optima() {
    let mut lines = Vec::new();
    let mut pass = true;
    for base in desk_scale_configs() {
        let problem = build_problem(&base.problem).unwrap();
        let optimum = problem.optimum.unwrap();
        let tol = match base.problem.name {
            ProblemName::Procrustes => 1e-6,
            ProblemName::Rayleigh => 1e-6,
            ProblemName::Brockett => 1e-5,
            ProblemName::SpdRecovery => 1e-8,
            ProblemName::HyperbolicCentroid => unreachable!(),
        };
        let cfg = RunConfig {
            max_steps: 20_000,
            loss_tol: Some(optimum + tol),
            ..base
        };
        let start = Instant::now();
        let out = execute(&cfg).unwrap_or_else(|f| panic!("{:?}: {}", cfg.problem.name, f.error));
        let elapsed = start.elapsed();
        let gap = out.summary.final_loss - optimum;
        let ok = gap.abs() <= tol && elapsed < Duration::from_secs(60);
        pass &= ok;
        lines.push(format!(
            "{} gap {gap:.2e} (tol {tol:.0e}) in {} steps, {elapsed:.2?}",
            out.summary_line().split(" final_loss").next().unwrap(),
            out.summary.steps
        ));
    }
    report(5, "desk-scale optima", pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_6_formula_cross_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_so: f64 = 0.0;
    for n in 2..=8 {
        let spec = ManifoldSpec::special_orthogonal(n).unwrap();
        let lie = Trivialization::new(TrivKind::LieExp, spec).unwrap();
        let rie = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
        for seed in 0..5 {
            let base = random_point(&spec, seed).unwrap();
            let y: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
            let a = lie.value_matrix(&base, &y).unwrap();
            let b = rie.value_matrix(&base, &y).unwrap();
            worst_so = worst_so.max(fro_norm(&(&a - &b)));
        }
    }

    let mut worst_det: f64 = 0.0;
    for n in 2..=6 {
        let spec = ManifoldSpec::special_linear(n).unwrap();
        let t = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
        for seed in 0..5 {
            let base = random_point(&spec, seed).unwrap();
            let y: Vec<f64> = (0..spec.dim).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
            let x = t.value_matrix(&base, &y).unwrap();
            worst_det = worst_det.max((det(&x).unwrap() - 1.0).abs());
        }
    }

    let spec = ManifoldSpec::sphere(2).unwrap();
    let t = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
    let e1 = origin(&spec).unwrap();
    let v = Matrix::column_vector(&[0.0, std::f64::consts::FRAC_PI_2, 0.0]);
    let y = e1.ambient_to_coords(&v).unwrap();
    let x = t.value_matrix(&e1, &y).unwrap();
    let sphere_err = fro_norm(&(&x - &Matrix::column_vector(&[0.0, 1.0, 0.0])));

    let pass = worst_so <= 1e-12 && worst_det <= 1e-9 && sphere_err <= 1e-14;
    report(
        6,
        "formula cross-checks",
        pass,
        &format!("SO lie vs riemannian {worst_so:.2e} <= 1e-12, SL det err {worst_det:.2e} <= 1e-9, sphere e1->e2 {sphere_err:.2e} <= 1e-14"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_injectivity_diagnostic() {
    let skew = |t: f64| Matrix::from_rows(&[[0.0, -t], [t, 0.0]]);
    let pi = std::f64::consts::PI;
    let inside = lie_injectivity_check(&skew(pi - 0.1)).unwrap();
    let outside = lie_injectivity_check(&skew(pi + 0.1)).unwrap();
    let inside_neg = lie_injectivity_check(&skew(-(pi - 0.1))).unwrap();
    let outside_neg = lie_injectivity_check(&skew(-(pi + 0.1))).unwrap();
    let pass = inside && !outside && inside_neg && !outside_neg;
    report(
        7,
        "injectivity diagnostic",
        pass,
        &format!("theta=pi-0.1 -> {inside}, pi+0.1 -> {outside} (and {inside_neg}/{outside_neg} for -theta)"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 2] = [
        &["--problem", "procrustes", "--n", "8", "--triv", "lie_exp", "--k", "10", "--opt", "adam", "--lr", "1e-2", "--steps", "300", "--seed", "42"],
        &["--problem", "brockett", "--n", "8", "--cols", "3", "--triv", "riemannian_exp", "--k", "7", "--opt", "rmsprop", "--lr", "1e-2", "--steps", "300", "--seed", "9"],
    ];
    let mut pass = true;
    let mut sizes = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut files = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("run{i}_{rep}.csv"));
            let mut argv = vec!["dyntriv", "run"];
            argv.extend_from_slice(args);
            let p = path.to_str().unwrap().to_string();
            argv.push("--out");
            argv.push(&p);
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let code = run_cli_with(argv, &mut o, &mut e);
            assert_eq!(code, 0, "{}", String::from_utf8_lossy(&e));
            files.push(std::fs::read(&path).unwrap());
        }
        pass &= files[0] == files[1];
        sizes.push(files[0].len());
    }
    report(8, "reproducibility", pass, &format!("two configs run twice, CSV sizes {sizes:?} bytes, identical = {pass}"));
    assert!(pass);
}

