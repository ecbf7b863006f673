//! The end-to-end verification suite behind the `verify` subcommand and the
//! acceptance integration tests: nine criteria, each with pinned tolerances,
//! each producing one pass/fail line. A failed precondition or error never
//! panics; it fails the criterion with the error text.

use crate::baselines::{BaselineAdmm, BaselineConfig, BaselineKind};
use crate::diagnostics::{self, RangeInclusionStatus};
use crate::experiments::{
    self, AlgorithmKind, ComparisonEntry, DeblurOutcome, ExperimentConfig, InputSource,
};
use crate::instances::{self, DenseInstanceParams};
use crate::linalg;
use crate::operators::{Kernel2d, LinearOperator, reference_spectra};
use crate::penalties::{self, ConcaveOuter, InnerConvex};
use crate::rng::SplitMix64;
use crate::solver::{IlrAdmm, InitialPoint, ProblemSpec, SolveOutcome, SolverConfig};
use std::fmt;
use std::time::{Duration, Instant};

/// Agreement tolerance between closed-form proxes and the grid oracle.
pub const PROX_ORACLE_TOL: f64 = 1e-3;
/// Adjoint inner-product identity tolerance.
pub const ADJOINT_TOL: f64 = 1e-10;
/// Relative agreement between spectral routes (iterative, dense, closed form).
pub const SPECTRUM_REL_TOL: f64 = 1e-6;
/// Per-coordinate agreement of the three algorithms on a convex instance.
pub const CONVEX_COLLAPSE_TOL: f64 = 1e-8;
/// Required SNR improvement of the restored image over the degraded one (dB).
pub const DEBLUR_GAIN_DB: f64 = 2.0;
/// Final KKT residual bound for the converged dense run.
pub const KKT_TOL: f64 = 1e-5;
/// Final primal residual bound for the converged dense run.
pub const PRIMAL_TOL: f64 = 1e-6;
/// Final step-norm bound for the converged dense run.
pub const STEP_TOL: f64 = 1e-8;
/// x-step exactness: residual <= this times (1 + |x|), every iteration.
pub const X_EXACTNESS_TOL: f64 = 1e-8;

pub const CRITERIA: [&str; 9] = [
    "prox-oracle-agreement",
    "sufficient-descent",
    "dual-bounds",
    "criticality",
    "relative-error",
    "x-step-exactness",
    "convex-collapse",
    "deblur-gain",
    "operator-spectra",
];

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} ({:.2}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.details
        )
    }
}

type CheckResult = Result<(bool, String), String>;

fn run_criterion(name: &'static str, f: impl FnOnce() -> CheckResult) -> CriterionOutcome {
    let start = Instant::now();
    let (passed, details) = match f() {
        Ok((passed, details)) => (passed, details),
        Err(message) => (false, format!("error: {message}")),
    };
    CriterionOutcome {
        name,
        passed,
        details,
        elapsed: start.elapsed(),
    }
}

/// Runs the complete suite in criterion order. Shared artifacts (the dense
/// run, the convex triplet, the deblur runs) are computed once; their build
/// time is attributed to the first criterion consuming them.
pub fn run_all() -> Vec<CriterionOutcome> {
    let mut outcomes = Vec::with_capacity(CRITERIA.len());
    outcomes.push(run_criterion(
        "prox-oracle-agreement",
        prox_oracle_agreement,
    ));

    let t = Instant::now();
    let dense = dense_acceptance_run();
    let dense_build = t.elapsed();
    let mut o = run_criterion("sufficient-descent", || sufficient_descent(&dense));
    o.elapsed += dense_build;
    outcomes.push(o);
    outcomes.push(run_criterion("dual-bounds", || dual_bounds(&dense)));
    outcomes.push(run_criterion("criticality", || criticality(&dense)));
    outcomes.push(run_criterion("relative-error", || relative_error(&dense)));

    let t = Instant::now();
    let convex = convex_collapse_runs();
    let convex_build = t.elapsed();
    let t = Instant::now();
    let deblur = deblur_runs();
    let deblur_build = t.elapsed();
    outcomes.push(run_criterion("x-step-exactness", || {
        x_step_exactness(&dense, &convex, &deblur)
    }));
    let mut o = run_criterion("convex-collapse", || convex_collapse(&convex));
    o.elapsed += convex_build;
    outcomes.push(o);
    let mut o = run_criterion("deblur-gain", || deblur_gain(&deblur));
    o.elapsed += deblur_build;
    outcomes.push(o);
    outcomes.push(run_criterion("operator-spectra", operator_spectra));
    outcomes
}

pub fn all_passed(outcomes: &[CriterionOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

// ---------------------------------------------------------------------------
// criterion 1: closed-form proxes against the brute-force grid oracle
// ---------------------------------------------------------------------------

fn prox_oracle_agreement() -> CheckResult {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xACC0);
    let mut max_soft = 0.0f64;
    for _ in 0..1000 {
        let w = rng.uniform(0.0, 3.0);
        let r = rng.uniform(0.2, 5.0);
        let v = rng.uniform(-5.0, 5.0);
        let closed =
            penalties::prox_weighted_inner(InnerConvex::Abs, w, r, v).map_err(|e| e.to_string())?;
        let oracle = diagnostics::grid_prox_oracle(
            |t| (w / r) * t.abs() + 0.5 * (t - v) * (t - v),
            -8.0,
            8.0,
            1e-3,
        )
        .map_err(|e| e.to_string())?;
        max_soft = max_soft.max((closed - oracle).abs());
        if (closed - oracle).abs() > PROX_ORACLE_TOL {
            return Ok((
                false,
                format!(
                    "weighted prox off by {:.2e} at (w={w}, r={r}, v={v})",
                    (closed - oracle).abs()
                ),
            ));
        }
    }

    let qs = [0.3, 0.5, 0.7];
    let epsilons = [0.0, 1e-7];
    let mut max_comp = 0.0f64;
    for i in 0..1000 {
        let sigma = rng.uniform(0.05, 2.5);
        let q = qs[i % 3];
        let eps = epsilons[(i / 3) % 2];
        let alpha = rng.uniform(0.5, 10.0);
        let z = rng.uniform(-5.0, 5.0);
        let outer = ConcaveOuter::power(q, eps, sigma).map_err(|e| e.to_string())?;
        let got = penalties::scalar_prox_composite(&outer, InnerConvex::Abs, alpha, z)
            .map_err(|e| e.to_string())?;
        let lim = z.abs() + 2.0;
        let oracle = diagnostics::grid_prox_oracle(
            |t| outer.value(t.abs()).expect("t.abs() >= 0") + 0.5 * alpha * (t - z) * (t - z),
            -lim,
            lim,
            2.5e-4,
        )
        .map_err(|e| e.to_string())?;
        let arg_gap = (got - oracle).abs();
        // Two global minimizers of equal value are both valid answers; accept
        // the tie when the objective values coincide to near machine accuracy.
        if arg_gap > PROX_ORACLE_TOL {
            let phi = |t: f64| outer.value(t.abs()).expect("abs") + 0.5 * alpha * (t - z) * (t - z);
            let value_gap = (phi(got) - phi(oracle)).abs();
            if value_gap > 1e-9 * (1.0 + phi(oracle).abs()) {
                return Ok((
                    false,
                    format!(
                        "composite prox off by {arg_gap:.2e} (value gap {value_gap:.2e}) at (sigma={sigma:.3}, q={q}, eps={eps}, alpha={alpha:.3}, z={z:.3})"
                    ),
                ));
            }
        } else {
            max_comp = max_comp.max(arg_gap);
        }
    }
    let elapsed = start.elapsed();
    let within_time = elapsed < Duration::from_secs(30);
    Ok((
        within_time,
        format!(
            "1000+1000 tuples in {:.2}s; max deviation soft {max_soft:.2e}, composite {max_comp:.2e}",
            elapsed.as_secs_f64()
        ),
    ))
}

// ---------------------------------------------------------------------------
// criteria 2-5 share one seeded dense run
// ---------------------------------------------------------------------------

pub struct DenseRunArtifacts {
    pub problem: ProblemSpec,
    pub outcome: SolveOutcome,
    pub constants: diagnostics::DiagnosticsConstants,
    pub inclusion: RangeInclusionStatus,
    pub elapsed: Duration,
}

/// The seeded dense acceptance instance: 20 x 20 full-row-rank A with
/// singular values in [1, 2], B = -I, c = 0, quadratic loss, sqrt-type
/// penalty (q = 0.5, eps = 1e-7, sigma = 0.5), alpha fixed at 50 from
/// iteration 0, r = alpha + 1e-6, at most 2000 iterations. The run starts at
/// the loss minimizer so the gradient-multiplier identity holds from the
/// first step on.
pub fn dense_acceptance_run() -> Result<DenseRunArtifacts, String> {
    let params = DenseInstanceParams {
        dim: 20,
        seed: 2024,
        q: 0.5,
        epsilon: 1e-7,
        sigma: 0.5,
    };
    let problem = instances::dense_random_instance(&params).map_err(|e| e.to_string())?;
    let alpha = 50.0;
    let margin = 1e-6;
    let constants =
        diagnostics::constants_for(&problem, alpha, margin).map_err(|e| e.to_string())?;
    let inclusion = diagnostics::range_inclusion_status(&problem).map_err(|e| e.to_string())?;
    let x0 = instances::quadratic_loss_minimizer(&problem).map_err(|e| e.to_string())?;
    let y0 = problem
        .constraints
        .a
        .apply(&x0)
        .map_err(|e| e.to_string())?;
    let p0 = vec![0.0; problem.constraints.c.len()];
    let config = SolverConfig {
        alpha0: alpha,
        alpha_max: alpha,
        r_margin: margin,
        max_iter: 2000,
        primal_tol: PRIMAL_TOL,
        step_tol: STEP_TOL,
        init: Some(InitialPoint {
            x: x0,
            y: y0,
            p: p0,
        }),
        ..Default::default()
    };
    let start = Instant::now();
    let outcome = IlrAdmm::new(&problem, config)
        .and_then(|mut s| s.run())
        .map_err(|e| e.to_string())?;
    Ok(DenseRunArtifacts {
        problem,
        outcome,
        constants,
        inclusion,
        elapsed: start.elapsed(),
    })
}

fn sufficient_descent(dense: &Result<DenseRunArtifacts, String>) -> CheckResult {
    let art = dense.as_ref().map_err(Clone::clone)?;
    let report = diagnostics::check_descent(&art.outcome.trace, art.constants.nu);
    let cond = art.constants.condition_alpha_ok == Some(true);
    let within_time = art.elapsed < Duration::from_secs(60);
    let passed = report.passed() && cond && report.nu.is_some() && within_time;
    Ok((
        passed,
        format!(
            "{} pairs, {} monotonicity / {} quantified violations, nu={:.2e}, alpha condition ok={cond}, run {:.2}s",
            report.pairs_checked,
            report.monotonicity_violations.len(),
            report.quantified_violations.len(),
            report.nu.unwrap_or(f64::NAN),
            art.elapsed.as_secs_f64()
        ),
    ))
}

fn dual_bounds(dense: &Result<DenseRunArtifacts, String>) -> CheckResult {
    let art = dense.as_ref().map_err(Clone::clone)?;
    let report = diagnostics::check_dual_bound(&art.outcome.trace, &art.constants, art.inclusion);
    let passed = report.is_checked() && report.passed();
    Ok((
        passed,
        format!(
            "inclusion {:?}, {} rows, {} movement / {} norm violations",
            art.inclusion,
            report.rows_checked,
            report.movement_violations.len(),
            report.norm_violations.len()
        ),
    ))
}

fn criticality(dense: &Result<DenseRunArtifacts, String>) -> CheckResult {
    let art = dense.as_ref().map_err(Clone::clone)?;
    let trace = &art.outcome.trace;
    let last = trace.rows().last().ok_or("empty trace")?;
    let final_step = trace.final_step_norm().unwrap_or(f64::NAN);
    let total = trace.total_step_length();
    let passed = art.outcome.converged
        && last.primal_residual <= PRIMAL_TOL
        && last.kkt <= KKT_TOL
        && final_step <= STEP_TOL
        && total.is_finite();
    Ok((
        passed,
        format!(
            "converged={} in {} iters; primal {:.2e}, kkt {:.2e}, final step {:.2e}, total path length {:.3e}",
            art.outcome.converged,
            trace.len(),
            last.primal_residual,
            last.kkt,
            final_step,
            total
        ),
    ))
}

fn relative_error(dense: &Result<DenseRunArtifacts, String>) -> CheckResult {
    let art = dense.as_ref().map_err(Clone::clone)?;
    let trace = &art.outcome.trace;
    let tau_hat = trace.tau_hat();
    let all_finite = trace.rows().iter().all(|r| r.rel_err_ratio.is_finite());
    let passed = tau_hat.is_finite() && all_finite && !trace.is_empty();
    Ok((
        passed,
        format!(
            "tau_hat {tau_hat:.3e} over {} iterations, all ratios finite={all_finite}",
            trace.len()
        ),
    ))
}

// ---------------------------------------------------------------------------
// criterion 6: x-step exactness across every acceptance run
// ---------------------------------------------------------------------------

fn x_step_exactness(
    dense: &Result<DenseRunArtifacts, String>,
    convex: &Result<ConvexCollapseRuns, String>,
    deblur: &Result<DeblurArtifacts, String>,
) -> CheckResult {
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut scan = |name: &str, trace: &diagnostics::IterateTrace| -> Result<(), String> {
        for row in trace.rows() {
            checked += 1;
            let rel = row.x_residual / (1.0 + row.x_norm);
            worst = worst.max(rel);
            if row.x_residual > X_EXACTNESS_TOL * (1.0 + row.x_norm) {
                return Err(format!(
                    "{name} iteration {}: residual {:.2e} over bound",
                    row.iter, row.x_residual
                ));
            }
        }
        Ok(())
    };
    let art = dense.as_ref().map_err(Clone::clone)?;
    scan("dense", &art.outcome.trace).map_err(|m| m.to_string())?;
    let conv = convex.as_ref().map_err(Clone::clone)?;
    for (kind, trace) in &conv.traces {
        scan(kind, trace)?;
    }
    let deb = deblur.as_ref().map_err(Clone::clone)?;
    scan("deblur", &deb.main.outcome.trace)?;
    Ok((
        true,
        format!("{checked} iterations checked; worst residual ratio {worst:.2e}"),
    ))
}

// ---------------------------------------------------------------------------
// criterion 7: the three algorithms coincide on a convex instance
// ---------------------------------------------------------------------------

pub struct ConvexCollapseRuns {
    pub max_coordinate_gap: f64,
    pub iterations: usize,
    pub traces: Vec<(&'static str, diagnostics::IterateTrace)>,
}

/// With q = 1 the reweighting is inert (all weights equal sigma) and the
/// margin in r is shrunk to 1e-12, so the linearized, exact and inner-loop
/// y-steps solve the same strongly convex subproblem to within the margin.
fn convex_collapse_runs() -> Result<ConvexCollapseRuns, String> {
    let params = DenseInstanceParams {
        dim: 16,
        seed: 99,
        q: 1.0,
        epsilon: 1e-7,
        sigma: 0.3,
    };
    let problem = instances::dense_random_instance(&params).map_err(|e| e.to_string())?;
    let iterations = 50;
    let solver_config = SolverConfig {
        alpha0: 5.0,
        alpha_max: 5.0,
        r_margin: 1e-12,
        max_iter: iterations,
        primal_tol: 1e-300,
        step_tol: 1e-300,
        ..Default::default()
    };
    let baseline_config = BaselineConfig {
        solver: solver_config.clone(),
        inner_iters: 10,
    };

    let mut ilr = IlrAdmm::new(&problem, solver_config.clone()).map_err(|e| e.to_string())?;
    let mut direct = BaselineAdmm::new(BaselineKind::Direct, &problem, &baseline_config)
        .map_err(|e| e.to_string())?;
    let mut inloop = BaselineAdmm::new(BaselineKind::InLoop, &problem, &baseline_config)
        .map_err(|e| e.to_string())?;

    let mut s_ilr = ilr.initial_state().map_err(|e| e.to_string())?;
    let mut s_direct = direct.initial_state().map_err(|e| e.to_string())?;
    let mut s_inloop = inloop.initial_state().map_err(|e| e.to_string())?;
    let mut max_gap = 0.0f64;
    for _ in 0..iterations {
        ilr.step(&mut s_ilr).map_err(|e| e.to_string())?;
        direct.step(&mut s_direct).map_err(|e| e.to_string())?;
        inloop.step(&mut s_inloop).map_err(|e| e.to_string())?;
        for (a, b) in s_ilr.x.iter().zip(&s_direct.x) {
            max_gap = max_gap.max((a - b).abs());
        }
        for (a, b) in s_ilr.y.iter().zip(&s_direct.y) {
            max_gap = max_gap.max((a - b).abs());
        }
        for (a, b) in s_ilr.x.iter().zip(&s_inloop.x) {
            max_gap = max_gap.max((a - b).abs());
        }
        for (a, b) in s_ilr.y.iter().zip(&s_inloop.y) {
            max_gap = max_gap.max((a - b).abs());
        }
    }

    // Full runs for the exactness scan (criterion 6) over the same instance.
    let mut traces = Vec::new();
    let outcome = IlrAdmm::new(&problem, solver_config.clone())
        .and_then(|mut s| s.run())
        .map_err(|e| e.to_string())?;
    traces.push(("convex-ilr", outcome.trace));
    let outcome = BaselineAdmm::new(BaselineKind::Direct, &problem, &baseline_config)
        .and_then(|mut s| s.run())
        .map_err(|e| e.to_string())?;
    traces.push(("convex-direct", outcome.trace));
    let outcome = BaselineAdmm::new(BaselineKind::InLoop, &problem, &baseline_config)
        .and_then(|mut s| s.run())
        .map_err(|e| e.to_string())?;
    traces.push(("convex-inloop", outcome.trace));

    Ok(ConvexCollapseRuns {
        max_coordinate_gap: max_gap,
        iterations,
        traces,
    })
}

fn convex_collapse(runs: &Result<ConvexCollapseRuns, String>) -> CheckResult {
    let runs = runs.as_ref().map_err(Clone::clone)?;
    let passed = runs.max_coordinate_gap <= CONVEX_COLLAPSE_TOL;
    Ok((
        passed,
        format!(
            "max per-coordinate gap {:.2e} over {} lockstep iterations of all three algorithms",
            runs.max_coordinate_gap, runs.iterations
        ),
    ))
}

// ---------------------------------------------------------------------------
// criterion 8: desk-scale deblurring
// ---------------------------------------------------------------------------

pub struct DeblurArtifacts {
    pub main: DeblurOutcome,
    pub rerun_identical: bool,
    pub comparison: Vec<ComparisonEntry>,
}

pub fn acceptance_deblur_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.input = InputSource::Phantom {
        width: 64,
        height: 64,
    };
    cfg.seed = 7;
    // remaining fields are the protocol defaults: 9x9 kernel of width 2,
    // noise 0.01, q = 0.5, eps = 1e-7, sigma_reg = 1e-4, alpha ramp
    // 1 -> 1e3 at rho = 1.05, r = alpha + 1e-6, 200 iterations
    cfg
}

fn deblur_runs() -> Result<DeblurArtifacts, String> {
    let cfg = acceptance_deblur_config();
    let main = experiments::run_deblur_once(&cfg, AlgorithmKind::Ilr, cfg.seed)
        .map_err(|e| e.to_string())?;
    let rerun = experiments::run_deblur_once(&cfg, AlgorithmKind::Ilr, cfg.seed)
        .map_err(|e| e.to_string())?;
    let rerun_identical = experiments::trace_to_csv(&main.outcome.trace)
        == experiments::trace_to_csv(&rerun.outcome.trace)
        && main.restored == rerun.restored;

    let mut comparison = vec![ComparisonEntry {
        algorithm: AlgorithmKind::Ilr,
        final_snr: main.snr_restored,
        snr_degraded: main.snr_degraded,
        elapsed: main.elapsed,
        iterations: main.outcome.trace.len(),
    }];
    for algorithm in [AlgorithmKind::Direct, AlgorithmKind::InLoop] {
        let run =
            experiments::run_deblur_once(&cfg, algorithm, cfg.seed).map_err(|e| e.to_string())?;
        comparison.push(ComparisonEntry {
            algorithm,
            final_snr: run.snr_restored,
            snr_degraded: run.snr_degraded,
            elapsed: run.elapsed,
            iterations: run.outcome.trace.len(),
        });
    }
    Ok(DeblurArtifacts {
        main,
        rerun_identical,
        comparison,
    })
}

fn deblur_gain(deblur: &Result<DeblurArtifacts, String>) -> CheckResult {
    let art = deblur.as_ref().map_err(Clone::clone)?;
    let gain = art.main.snr_restored - art.main.snr_degraded;
    let within_time = art.main.elapsed < Duration::from_secs(60);
    let passed = gain >= DEBLUR_GAIN_DB && within_time && art.rerun_identical;
    let table: Vec<String> = art
        .comparison
        .iter()
        .map(|e| {
            format!(
                "{} {:.2}dB/{:.1}s",
                e.algorithm.name(),
                e.final_snr,
                e.elapsed.as_secs_f64()
            )
        })
        .collect();
    Ok((
        passed,
        format!(
            "degraded {:.2}dB -> restored {:.2}dB (gain {:.2} >= {DEBLUR_GAIN_DB}), run {:.1}s, rerun bitwise identical={}; comparison: {}",
            art.main.snr_degraded,
            art.main.snr_restored,
            gain,
            art.main.elapsed.as_secs_f64(),
            art.rerun_identical,
            table.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// criterion 9: adjoint identities and spectral agreement up to dimension 4096
// ---------------------------------------------------------------------------

fn operator_spectra() -> CheckResult {
    let mut rng = SplitMix64::new(0x09E5);
    let gauss = crate::image::gaussian_kernel(9, 2.0).map_err(|e| e.to_string())?;
    let kernel = Kernel2d::new(9, gauss.clone()).map_err(|e| e.to_string())?;
    let mut spectrum_rng = SplitMix64::new(77);
    let designed = instances::matrix_with_spectrum(48, 1.0, 2.0, &mut spectrum_rng);

    let ops: Vec<(&str, LinearOperator)> = vec![
        ("identity-4096", LinearOperator::identity(4096)),
        (
            "neg-identity-8064",
            LinearOperator::scaled_identity(8064, -1.0),
        ),
        (
            "difference-1d-4096",
            LinearOperator::difference_1d(4096).map_err(|e| e.to_string())?,
        ),
        (
            "difference-2d-64x64",
            LinearOperator::difference_2d(64, 64).map_err(|e| e.to_string())?,
        ),
        (
            "convolution-64x64",
            LinearOperator::convolution_2d(64, 64, kernel).map_err(|e| e.to_string())?,
        ),
        ("dense-48", LinearOperator::dense(designed)),
    ];

    // Adjoint identity on 100 seeded pairs per operator.
    let mut worst_adjoint = 0.0f64;
    for (name, op) in &ops {
        for _ in 0..100 {
            let mut x = vec![0.0; op.in_dim()];
            let mut p = vec![0.0; op.out_dim()];
            rng.fill_standard_normal(&mut x);
            rng.fill_standard_normal(&mut p);
            let lhs = linalg::dot(&op.apply(&x).map_err(|e| e.to_string())?, &p);
            let rhs = linalg::dot(&x, &op.adjoint_apply(&p).map_err(|e| e.to_string())?);
            let gap = (lhs - rhs).abs() / (1.0 + lhs.abs());
            worst_adjoint = worst_adjoint.max(gap);
            if gap > ADJOINT_TOL {
                return Ok((false, format!("{name}: adjoint gap {gap:.2e}")));
            }
        }
    }

    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let mut worst_spec = 0.0f64;
    let mut check = |name: &str, got: f64, reference: f64| -> Result<(), String> {
        let e = rel(got, reference);
        worst_spec = worst_spec.max(e);
        if e > SPECTRUM_REL_TOL {
            return Err(format!("{name}: {got} vs {reference} (rel {e:.2e})"));
        }
        Ok(())
    };

    // Iterative norms against closed forms. The 1-D difference gets its norm
    // check at 1024: its top Gram eigenvalues cluster within O(1/n^2), which
    // makes any Krylov method need thousands of iterations at 4096 (the
    // adjoint and dense-route checks still cover the 4096 instance).
    let tol = 1e-10;
    check(
        "identity norm",
        ops[0].1.operator_norm(tol).map_err(|e| e.to_string())?,
        1.0,
    )?;
    check(
        "sign-flip norm",
        ops[1].1.operator_norm(tol).map_err(|e| e.to_string())?,
        1.0,
    )?;
    let mid_diff = LinearOperator::difference_1d(1024).map_err(|e| e.to_string())?;
    let (_, n1024) = reference_spectra::difference_1d_extremes(1024);
    check(
        "difference-1d norm (1024)",
        mid_diff.operator_norm(tol).map_err(|e| e.to_string())?,
        n1024,
    )?;
    let (t2, n2) = reference_spectra::difference_2d_extremes(64, 64);
    check(
        "difference-2d norm (4096)",
        ops[3].1.operator_norm(tol).map_err(|e| e.to_string())?,
        n2,
    )?;
    let mut conv_sv = reference_spectra::convolution_2d_singular_values(64, 64, 9, &gauss);
    conv_sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    check(
        "convolution norm (4096)",
        ops[4].1.operator_norm(tol).map_err(|e| e.to_string())?,
        *conv_sv.last().unwrap(),
    )?;
    check(
        "dense norm",
        ops[5].1.operator_norm(tol).map_err(|e| e.to_string())?,
        2.0,
    )?;

    // Dense decompositions against closed forms, including the full
    // 4096-dimensional route on the 2-D difference operator.
    check(
        "difference-2d theta (dense route at 4096)",
        ops[3]
            .1
            .smallest_positive_singular_value()
            .map_err(|e| e.to_string())?,
        t2,
    )?;
    let small_diff = LinearOperator::difference_1d(512).map_err(|e| e.to_string())?;
    let (t512, _) = reference_spectra::difference_1d_extremes(512);
    check(
        "difference-1d theta (dense route)",
        small_diff
            .smallest_positive_singular_value()
            .map_err(|e| e.to_string())?,
        t512,
    )?;
    // A width-2 blur is numerically rank-deficient (smallest singular value
    // ~1e-8, under the Gram-route resolution floor), so the theta cross-check
    // uses a width-1 kernel whose spectrum stays resolvable.
    let gauss_narrow = crate::image::gaussian_kernel(9, 1.0).map_err(|e| e.to_string())?;
    let kernel_narrow = Kernel2d::new(9, gauss_narrow.clone()).map_err(|e| e.to_string())?;
    let conv_small =
        LinearOperator::convolution_2d(32, 32, kernel_narrow).map_err(|e| e.to_string())?;
    let mut conv_small_sv =
        reference_spectra::convolution_2d_singular_values(32, 32, 9, &gauss_narrow);
    conv_small_sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    check(
        "convolution theta (dense route)",
        conv_small
            .smallest_positive_singular_value()
            .map_err(|e| e.to_string())?,
        *conv_small_sv.first().unwrap(),
    )?;
    check(
        "dense theta",
        ops[5]
            .1
            .smallest_positive_singular_value()
            .map_err(|e| e.to_string())?,
        1.0,
    )?;

    Ok((
        true,
        format!(
            "6 operator kinds, 600 adjoint pairs (worst gap {worst_adjoint:.2e}); spectral routes agree (worst rel {worst_spec:.2e})"
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_names_are_stable() {
        assert_eq!(CRITERIA.len(), 9);
        let mut names: Vec<&str> = CRITERIA.to_vec();
        names.dedup();
        assert_eq!(names.len(), 9);
    }

    #[test]
    fn prox_oracle_criterion_passes_quickly() {
        let outcome = run_criterion("prox-oracle-agreement", prox_oracle_agreement);
        assert!(outcome.passed, "{outcome}");
        assert!(
            outcome.elapsed < Duration::from_secs(30),
            "{:?}",
            outcome.elapsed
        );
    }
}
