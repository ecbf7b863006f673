//! `ilradmm` command line: solve seeded generic instances, run the image
//! deblurring experiment, or execute the verification suite.

mod keyfile;

use clap::{Args, Parser, Subcommand};
use ilradmm::baselines::{BaselineAdmm, BaselineConfig, BaselineKind};
use ilradmm::diagnostics;
use ilradmm::experiments::{self, AlgorithmKind, ExperimentConfig, InputSource};
use ilradmm::instances::{self, DenseInstanceParams};
use ilradmm::operators::{ConstraintSystem, LinearOperator};
use ilradmm::penalties::{ConcaveOuter, InnerConvex, OuterKind};
use ilradmm::solver::{IlrAdmm, ProblemSpec, SmoothLoss, SolveOutcome, SolverConfig};
use ilradmm::verification;
use keyfile::{KeyFile, resolve, resolve_opt};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ilradmm",
    about = "Reweighted linearized ADMM for nonconvex composite problems, with deblurring experiments and run certification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a seeded generic instance described by a key=value config file
    /// (flags override file values) and print the run certification.
    Solve(SolveArgs),
    /// Degrade an image (periodic Gaussian blur + seeded noise), restore it,
    /// and emit the restored image and per-iteration CSV trace.
    Deblur(DeblurArgs),
    /// Run the full verification suite; exit code 0 iff all criteria pass.
    Verify,
}

#[derive(Args)]
struct SolveArgs {
    /// key=value config file; valid keys: a-kind, dim, rows, cols, seed,
    /// outer, q, epsilon, gamma, sigma, inner, delta, algo, inner-iters,
    /// alpha0, rho, alpha-max, r-margin, max-iter, tol, trace
    #[arg(long)]
    config: Option<PathBuf>,
    /// constraint operator family: dense-random | identity | difference-1d | difference-2d
    #[arg(long)]
    a_kind: Option<String>,
    /// x dimension (dense-random, identity, difference-1d)
    #[arg(long)]
    dim: Option<usize>,
    /// grid rows (difference-2d)
    #[arg(long)]
    rows: Option<usize>,
    /// grid cols (difference-2d)
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// outer penalty kind: power | log | etp | geman | laplace
    #[arg(long)]
    outer: Option<String>,
    /// power exponent q in (0, 1]
    #[arg(long)]
    q: Option<f64>,
    /// smoothing of the power kind (or scale of the log kind)
    #[arg(long)]
    epsilon: Option<f64>,
    /// shape parameter of the etp/geman/laplace kinds
    #[arg(long)]
    gamma: Option<f64>,
    /// penalty scale sigma
    #[arg(long)]
    sigma: Option<f64>,
    /// inner convex function: abs | square
    #[arg(long)]
    inner: Option<String>,
    /// strong-convexity constant of f + |Ax|^2/2, if known
    #[arg(long)]
    delta: Option<f64>,
    /// algorithm: ilr | direct | inloop
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    inner_iters: Option<usize>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    r_margin: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// primal-residual stopping tolerance (the step tolerance is tol / 100)
    #[arg(long)]
    tol: Option<f64>,
    /// write the per-iteration trace CSV here
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct DeblurArgs {
    /// key=value config file; valid keys mirror these flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// input PGM image (P5 or P2); mutually exclusive with --phantom
    #[arg(long, conflicts_with = "phantom")]
    input: Option<PathBuf>,
    /// generate a piecewise-constant phantom, e.g. 64x64
    #[arg(long)]
    phantom: Option<String>,
    #[arg(long)]
    kernel_size: Option<usize>,
    #[arg(long)]
    kernel_width: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sigma_reg: Option<f64>,
    /// algorithm: ilr | direct | inloop
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    inner_iters: Option<usize>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    r_margin: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// primal-residual stopping tolerance (the step tolerance is tol / 100)
    #[arg(long)]
    tol: Option<f64>,
    /// noise realizations seed..seed+N-1; per-seed traces and an averaged SNR
    /// file are written next to --trace
    #[arg(long)]
    repeats: Option<usize>,
    /// write the per-iteration trace CSV here
    #[arg(long)]
    trace: Option<PathBuf>,
    /// write the restored image (PGM, P5, maxval 255) here
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Deblur(args) => run_deblur(args),
        Command::Verify => return run_verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run_verify() -> ExitCode {
    let outcomes = verification::run_all();
    for outcome in &outcomes {
        println!("{outcome}");
    }
    if verification::all_passed(&outcomes) {
        println!("verify: all {} criteria passed", outcomes.len());
        ExitCode::SUCCESS
    } else {
        let failed = outcomes.iter().filter(|o| !o.passed).count();
        println!("verify: {failed} of {} criteria FAILED", outcomes.len());
        ExitCode::FAILURE
    }
}

const DEBLUR_KEYS: [&str; 19] = [
    "input",
    "phantom",
    "kernel-size",
    "kernel-width",
    "noise-std",
    "seed",
    "q",
    "epsilon",
    "sigma-reg",
    "algo",
    "inner-iters",
    "alpha0",
    "rho",
    "alpha-max",
    "r-margin",
    "max-iter",
    "tol",
    "repeats",
    "trace",
];

fn run_deblur(args: DeblurArgs) -> Result<(), String> {
    let file = match &args.config {
        Some(path) => KeyFile::load(path, &[&DEBLUR_KEYS[..], &["out"][..]].concat())?,
        None => KeyFile::empty(),
    };
    let mut cfg = ExperimentConfig::default();

    let input_flag = args.input.clone();
    let input_file = file.get_string("input").map(PathBuf::from);
    let phantom = resolve_opt(args.phantom.clone(), file.get_string("phantom"));
    cfg.input = match (resolve_opt(input_flag, input_file), phantom) {
        (Some(path), None) => InputSource::Pgm(path),
        (None, Some(spec)) => {
            let (w, h) = parse_dims(&spec)?;
            InputSource::Phantom {
                width: w,
                height: h,
            }
        }
        (None, None) => InputSource::Phantom {
            width: 64,
            height: 64,
        },
        (Some(_), Some(_)) => return Err("--input and --phantom are mutually exclusive".into()),
    };
    cfg.kernel_size = resolve(args.kernel_size, file.get("kernel-size")?, cfg.kernel_size);
    cfg.kernel_width = resolve(
        args.kernel_width,
        file.get("kernel-width")?,
        cfg.kernel_width,
    );
    cfg.noise_std = resolve(args.noise_std, file.get("noise-std")?, cfg.noise_std);
    cfg.seed = resolve(args.seed, file.get("seed")?, cfg.seed);
    cfg.q = resolve(args.q, file.get("q")?, cfg.q);
    cfg.epsilon = resolve(args.epsilon, file.get("epsilon")?, cfg.epsilon);
    cfg.sigma_reg = resolve(args.sigma_reg, file.get("sigma-reg")?, cfg.sigma_reg);
    let algo_name = resolve(args.algo.clone(), file.get_string("algo"), "ilr".into());
    cfg.algorithm = AlgorithmKind::parse(&algo_name).ok_or_else(|| {
        format!("unknown algorithm {algo_name:?}; expected ilr, direct or inloop")
    })?;
    cfg.inner_iters = resolve(args.inner_iters, file.get("inner-iters")?, cfg.inner_iters);
    cfg.alpha0 = resolve(args.alpha0, file.get("alpha0")?, cfg.alpha0);
    cfg.rho = resolve(args.rho, file.get("rho")?, cfg.rho);
    cfg.alpha_max = resolve(args.alpha_max, file.get("alpha-max")?, cfg.alpha_max);
    cfg.r_margin = resolve(args.r_margin, file.get("r-margin")?, cfg.r_margin);
    cfg.max_iter = resolve(args.max_iter, file.get("max-iter")?, cfg.max_iter);
    let tol = resolve(args.tol, file.get("tol")?, 1e-6);
    cfg.primal_tol = tol;
    cfg.step_tol = tol / 100.0;
    cfg.repeats = resolve(args.repeats, file.get("repeats")?, cfg.repeats);
    cfg.trace_path = resolve_opt(
        args.trace.clone(),
        file.get_string("trace").map(PathBuf::from),
    );
    cfg.out_path = resolve_opt(args.out.clone(), file.get_string("out").map(PathBuf::from));

    let report = experiments::run_deblur(&cfg).map_err(|e| e.to_string())?;
    println!("algorithm: {}", cfg.algorithm.name());
    for run in &report.runs {
        println!(
            "noise seed {}: degraded {:.3} dB -> restored {:.3} dB ({} iterations, {:.2}s, converged={})",
            run.noise_seed,
            run.snr_degraded,
            run.snr_restored,
            run.outcome.trace.len(),
            run.elapsed.as_secs_f64(),
            run.outcome.converged
        );
    }
    if report.runs.len() > 1 {
        println!(
            "average restored SNR over {} realizations: {:.3} dB",
            report.runs.len(),
            report.avg_final_snr
        );
    }
    if let Some(path) = &cfg.out_path {
        println!("restored image written to {}", path.display());
    }
    if let Some(path) = &cfg.trace_path {
        println!("trace written to {}", path.display());
    }

    // Certify the first run's trace.
    let setup = experiments::assemble_deblur(&cfg, cfg.seed).map_err(|e| e.to_string())?;
    let cert = diagnostics::certify_run(
        &setup.problem,
        &report.runs[0].outcome.trace,
        cfg.alpha_max,
        cfg.r_margin,
    )
    .map_err(|e| e.to_string())?;
    println!("--- run certification ---\n{cert}");
    Ok(())
}

const SOLVE_KEYS: [&str; 20] = [
    "a-kind",
    "dim",
    "rows",
    "cols",
    "seed",
    "outer",
    "q",
    "epsilon",
    "gamma",
    "sigma",
    "inner",
    "delta",
    "algo",
    "inner-iters",
    "alpha0",
    "rho",
    "alpha-max",
    "r-margin",
    "max-iter",
    "tol",
];

fn run_solve(args: SolveArgs) -> Result<(), String> {
    let file = match &args.config {
        Some(path) => KeyFile::load(path, &[&SOLVE_KEYS[..], &["trace"][..]].concat())?,
        None => KeyFile::empty(),
    };

    let a_kind = resolve(
        args.a_kind.clone(),
        file.get_string("a-kind"),
        "dense-random".into(),
    );
    let dim = resolve(args.dim, file.get("dim")?, 20usize);
    let rows = resolve(args.rows, file.get("rows")?, 8usize);
    let cols = resolve(args.cols, file.get("cols")?, 8usize);
    let seed = resolve(args.seed, file.get("seed")?, 0u64);
    let q = resolve(args.q, file.get("q")?, 0.5);
    let epsilon = resolve(args.epsilon, file.get("epsilon")?, 1e-7);
    let gamma = resolve(args.gamma, file.get("gamma")?, 1.0);
    let sigma = resolve(args.sigma, file.get("sigma")?, 0.5);
    let outer_name = resolve(args.outer.clone(), file.get_string("outer"), "power".into());
    let inner_name = resolve(args.inner.clone(), file.get_string("inner"), "abs".into());
    let delta = resolve_opt(args.delta, file.get("delta")?);

    let outer_kind = match outer_name.as_str() {
        "power" => OuterKind::Power { q, epsilon },
        "log" => OuterKind::Log {
            epsilon: if epsilon > 0.0 { epsilon } else { 0.1 },
        },
        "etp" => OuterKind::Etp { gamma },
        "geman" => OuterKind::Geman { gamma },
        "laplace" => OuterKind::Laplace { gamma },
        other => return Err(format!("unknown outer kind {other:?}")),
    };
    let outer = ConcaveOuter::new(outer_kind, sigma).map_err(|e| e.to_string())?;
    let inner = match inner_name.as_str() {
        "abs" => InnerConvex::Abs,
        "square" => InnerConvex::Square,
        other => return Err(format!("unknown inner kind {other:?}")),
    };

    const SOLVE_DIM_LIMIT: usize = 512;
    let mut problem = match a_kind.as_str() {
        "dense-random" => {
            let params = DenseInstanceParams {
                dim,
                seed,
                q,
                epsilon,
                sigma,
            };
            let mut p = instances::dense_random_instance(&params).map_err(|e| e.to_string())?;
            p.outer = outer.clone();
            p.inner = inner;
            p
        }
        "identity" | "difference-1d" | "difference-2d" => {
            let a = match a_kind.as_str() {
                "identity" => LinearOperator::identity(dim),
                "difference-1d" => LinearOperator::difference_1d(dim).map_err(|e| e.to_string())?,
                _ => LinearOperator::difference_2d(rows, cols).map_err(|e| e.to_string())?,
            };
            let n = a.in_dim();
            if n > SOLVE_DIM_LIMIT {
                return Err(format!(
                    "solve instances are desk scale (x dimension <= {SOLVE_DIM_LIMIT}), got {n}"
                ));
            }
            let m = a.out_dim();
            let mut rng = ilradmm::rng::SplitMix64::new(seed);
            let psi = instances::matrix_with_spectrum(n, 1.0, 2.0, &mut rng);
            let mut data = vec![0.0; n];
            rng.fill_standard_normal(&mut data);
            let loss = SmoothLoss::quadratic(LinearOperator::dense(psi), data)
                .map_err(|e| e.to_string())?;
            let constraints =
                ConstraintSystem::new(a, LinearOperator::scaled_identity(m, -1.0), vec![0.0; m])
                    .map_err(|e| e.to_string())?;
            ProblemSpec::new(loss, constraints, outer.clone(), inner).map_err(|e| e.to_string())?
        }
        other => return Err(format!("unknown a-kind {other:?}")),
    };
    if problem.x_dim() > SOLVE_DIM_LIMIT {
        return Err(format!(
            "solve instances are desk scale (x dimension <= {SOLVE_DIM_LIMIT})"
        ));
    }
    if let Some(d) = delta {
        problem = problem.with_strong_convexity(d);
    }

    let tol = resolve(args.tol, file.get("tol")?, 1e-6);
    let solver_config = SolverConfig {
        alpha0: resolve(args.alpha0, file.get("alpha0")?, 1.0),
        rho: resolve(args.rho, file.get("rho")?, 1.05),
        alpha_max: resolve(args.alpha_max, file.get("alpha-max")?, 1e3),
        r_margin: resolve(args.r_margin, file.get("r-margin")?, 1e-6),
        max_iter: resolve(args.max_iter, file.get("max-iter")?, 200),
        primal_tol: tol,
        step_tol: tol / 100.0,
        seed,
        init: None,
    };
    let algo_name = resolve(args.algo.clone(), file.get_string("algo"), "ilr".into());
    let inner_iters = resolve(args.inner_iters, file.get("inner-iters")?, 10usize);

    let start = std::time::Instant::now();
    let outcome: SolveOutcome = match AlgorithmKind::parse(&algo_name) {
        Some(AlgorithmKind::Ilr) => IlrAdmm::new(&problem, solver_config.clone())
            .and_then(|mut s| s.run())
            .map_err(|e| e.to_string())?,
        Some(kind) => {
            let baseline_kind = match kind {
                AlgorithmKind::Direct => BaselineKind::Direct,
                AlgorithmKind::InLoop => BaselineKind::InLoop,
                AlgorithmKind::Ilr => unreachable!(),
            };
            let cfg = BaselineConfig {
                solver: solver_config.clone(),
                inner_iters,
            };
            BaselineAdmm::new(baseline_kind, &problem, &cfg)
                .and_then(|mut s| s.run())
                .map_err(|e| e.to_string())?
        }
        None => {
            return Err(format!(
                "unknown algorithm {algo_name:?}; expected ilr, direct or inloop"
            ));
        }
    };
    let elapsed = start.elapsed();

    println!(
        "instance: a-kind={a_kind}, x dim {}, y dim {}, seed {seed}",
        problem.x_dim(),
        problem.y_dim()
    );
    println!("algorithm: {algo_name}");
    let last = outcome.trace.rows().last();
    println!(
        "finished in {} iterations ({:.3}s), converged={}",
        outcome.trace.len(),
        elapsed.as_secs_f64(),
        outcome.converged
    );
    if let Some(row) = last {
        println!(
            "final: lagrangian {:.6e}, primal residual {:.3e}, step {:.3e}, kkt {:.3e}",
            row.lagrangian,
            row.primal_residual,
            row.step_x.hypot(row.step_y),
            row.kkt
        );
    }
    if let Some(path) = resolve_opt(
        args.trace.clone(),
        file.get_string("trace").map(PathBuf::from),
    ) {
        experiments::emit_csv(&outcome.trace, &path).map_err(|e| e.to_string())?;
        println!("trace written to {}", path.display());
    }

    let cert = diagnostics::certify_run(
        &problem,
        &outcome.trace,
        solver_config.alpha_max,
        solver_config.r_margin,
    )
    .map_err(|e| e.to_string())?;
    println!("--- run certification ---\n{cert}");
    Ok(())
}

fn parse_dims(spec: &str) -> Result<(usize, usize), String> {
    let (w, h) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {spec:?}"))?;
    let w = w
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("bad width in {spec:?}: {e}"))?;
    let h = h
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("bad height in {spec:?}: {e}"))?;
    Ok((w, h))
}

#[cfg(test)]
mod tests {
    use super::parse_dims;

    #[test]
    fn dims_parse() {
        assert_eq!(parse_dims("64x64").unwrap(), (64, 64));
        assert_eq!(parse_dims("32X48").unwrap(), (32, 48));
        assert!(parse_dims("64").is_err());
        assert!(parse_dims("axb").is_err());
    }
}
