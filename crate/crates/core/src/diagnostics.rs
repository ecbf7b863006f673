//! Numerical certification of the solver's convergence machinery.
//!
//! Every run records an [`IterateTrace`]; the checks in this module replay the
//! augmented-Lagrangian descent inequality, the dual-movement and
//! dual-boundedness bounds, the relative-error ratio of the subgradient
//! members, and the criticality residual, each with explicit tolerances.
//! A brute-force grid oracle for scalar proximal subproblems lives here too,
//! kept deliberately independent of the closed-form prox implementations it
//! cross-checks.

use crate::linalg::{self, DenseMatrix};
use crate::operators::OperatorError;
use crate::penalties::{self, PenaltyError};
use crate::solver::{ProblemSpec, SolverState};
use std::fmt;
use thiserror::Error;

/// Relative slack for the plain monotonicity check.
pub const DESCENT_MONOTONE_TOL: f64 = 1e-10;
/// Absolute slack for the quantified descent bound.
pub const DESCENT_QUANTIFIED_TOL: f64 = 1e-8;
/// Relative slack for the dual-movement and dual-boundedness checks.
pub const DUAL_BOUND_TOL: f64 = 1e-8;
/// Largest stacked-matrix column count accepted by the rank test.
pub const RANK_TEST_LIMIT: usize = 1024;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("objective is not finite at t = {t}")]
    NonFiniteObjective { t: f64 },
    #[error("invalid search interval [{lo}, {hi}] with step {step}")]
    InvalidInterval { lo: f64, hi: f64, step: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// One row per executed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Penalty parameter used by the step that produced this row.
    pub alpha: f64,
    /// Proximal parameter used by the same step.
    pub r: f64,
    /// Augmented Lagrangian at the new point, evaluated at this row's alpha.
    pub lagrangian: f64,
    pub primal_residual: f64,
    pub step_x: f64,
    pub step_y: f64,
    pub dual_step: f64,
    pub kkt: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub snr: Option<f64>,
    // Internal columns, not serialized to CSV.
    pub x_residual: f64,
    pub x_norm: f64,
    pub p_norm: f64,
    pub grad_norm: f64,
    pub rel_err_ratio: f64,
    pub iterate_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    rows: Vec<TraceRow>,
    /// Lagrangian at the initial point, evaluated at the initial alpha.
    pub initial_lagrangian: f64,
    pub initial_alpha: f64,
    pub initial_dual_norm: f64,
    /// Whether `grad f(x0) = -A^T p0` held at the start. The descent and
    /// dual-movement inequalities for the very first step assume it; for an
    /// arbitrary start they are only guaranteed from the second step on.
    pub initial_gradient_consistent: bool,
}

impl IterateTrace {
    pub fn new(initial_lagrangian: f64, initial_alpha: f64, initial_dual_norm: f64) -> Self {
        Self {
            rows: Vec::new(),
            initial_lagrangian,
            initial_alpha,
            initial_dual_norm,
            initial_gradient_consistent: true,
        }
    }

    pub fn from_rows(rows: Vec<TraceRow>, initial_lagrangian: f64, initial_alpha: f64) -> Self {
        Self {
            rows,
            initial_lagrangian,
            initial_alpha,
            initial_dual_norm: 0.0,
            initial_gradient_consistent: true,
        }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sum of primal step norms over the run (the finite-length proxy).
    pub fn total_step_length(&self) -> f64 {
        self.rows.iter().map(|r| r.step_x.hypot(r.step_y)).sum()
    }

    pub fn final_step_norm(&self) -> Option<f64> {
        self.rows.last().map(|r| r.step_x.hypot(r.step_y))
    }

    /// Running maximum of the relative-error ratio.
    pub fn tau_hat(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.rel_err_ratio)
            .fold(0.0, f64::max)
    }

    pub fn max_iterate_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.iterate_norm).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            r.lagrangian.is_finite()
                && r.primal_residual.is_finite()
                && r.step_x.is_finite()
                && r.step_y.is_finite()
                && r.dual_step.is_finite()
                && r.kkt.is_finite()
        })
    }
}

/// Constants entering the certification checks.
#[derive(Debug, Clone)]
pub struct DiagnosticsConstants {
    /// Smallest strictly positive singular value of A; `None` above desk scale.
    pub theta: Option<f64>,
    /// Dual-movement constant L_f^2 / theta^2.
    pub eta: Option<f64>,
    /// Sufficient-descent constant min(delta/2 - eta/alpha, (r - alpha |B|^2)/2)
    /// at the saturated alpha; `None` when delta or eta is unavailable.
    pub nu: Option<f64>,
    pub norm_a: f64,
    pub norm_b: f64,
    /// Strong-convexity constant of f + |Ax|^2/2; user-supplied or estimated densely.
    pub delta: Option<f64>,
    pub lipschitz: f64,
    /// Whether alpha_max > max(1, 2 eta / delta); `None` if inputs are missing.
    pub condition_alpha_ok: Option<bool>,
    pub alpha_max: f64,
    pub r_margin: f64,
}

impl fmt::Display for DiagnosticsConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt(v: Option<f64>) -> String {
            v.map_or("unavailable".to_string(), |x| format!("{x:.6e}"))
        }
        writeln!(f, "theta={}", opt(self.theta))?;
        writeln!(f, "eta={}", opt(self.eta))?;
        writeln!(f, "nu={}", opt(self.nu))?;
        writeln!(f, "norm_a={:.6e}", self.norm_a)?;
        writeln!(f, "norm_b={:.6e}", self.norm_b)?;
        writeln!(f, "delta={}", opt(self.delta))?;
        writeln!(f, "lipschitz={:.6e}", self.lipschitz)?;
        match self.condition_alpha_ok {
            Some(ok) => writeln!(f, "alpha_condition_ok={ok}"),
            None => writeln!(f, "alpha_condition_ok=unchecked"),
        }
    }
}

/// Augmented Lagrangian
/// `f(x) + sum_i sigma g[h(y_i)] + <p, Ax + By - c> + (alpha/2) |Ax + By - c|^2`.
pub fn lagrangian_value(
    problem: &ProblemSpec,
    x: &[f64],
    y: &[f64],
    p: &[f64],
    alpha: f64,
) -> Result<f64, DiagnosticsError> {
    let resid = problem.constraints.residual(x, y)?;
    let mut penalty = 0.0;
    for &yi in y {
        penalty += problem.outer.value(problem.inner.value(yi))?;
    }
    let quad = linalg::dot(&resid, &resid);
    Ok(problem.loss.value(x) + penalty + linalg::dot(p, &resid) + 0.5 * alpha * quad)
}

/// Distance of the current point from the three criticality relations:
/// `-B^T p in W dh(y)`, `grad f(x) = -A^T p`, `Ax + By = c`.
/// Returns the max of the three residual norms.
pub fn kkt_residual(
    problem: &ProblemSpec,
    x: &[f64],
    y: &[f64],
    p: &[f64],
) -> Result<f64, DiagnosticsError> {
    let weights = penalties::compute_weights(&problem.outer, problem.inner, y)?;
    let bt_p = problem.constraints.b.adjoint_apply(p)?;
    let mut dist_sq = 0.0;
    for i in 0..y.len() {
        let target = -bt_p[i];
        let w = weights.values()[i];
        let d = match problem.inner {
            penalties::InnerConvex::Abs => {
                // Subdifferential at 0 is w [-1, 1]; elsewhere the singleton w sign(y).
                if y[i] == 0.0 {
                    (target.abs() - w).max(0.0)
                } else {
                    (target - w * y[i].signum()).abs()
                }
            }
            penalties::InnerConvex::Square => (target - 2.0 * w * y[i]).abs(),
        };
        dist_sq += d * d;
    }
    let mut grad_term = problem.loss.gradient(x);
    let at_p = problem.constraints.a.adjoint_apply(p)?;
    for (g, a) in grad_term.iter_mut().zip(&at_p) {
        *g += a;
    }
    let resid = problem.constraints.residual(x, y)?;
    Ok(dist_sq
        .sqrt()
        .max(linalg::norm2(&grad_term))
        .max(linalg::norm2(&resid)))
}

#[derive(Debug, Clone, Copy)]
pub struct RelativeErrorSample {
    pub ratio: f64,
    pub subgradient_norm: f64,
    pub step_norm: f64,
}

/// Ratio `|stacked subgradient members| / |z(k+1) - z(k)|` from consecutive
/// states. The members are the explicit elements of the partial
/// subdifferentials of the augmented Lagrangian at the new point: the
/// reweighted y-member, `A^T (p+ - p)` for x, and `(p+ - p)/alpha` for p.
/// Returns 0 at an exact fixed point.
pub fn relative_error_ratio(
    problem: &ProblemSpec,
    prev: &SolverState,
    next: &SolverState,
) -> Result<RelativeErrorSample, DiagnosticsError> {
    let alpha = prev.alpha;
    let r = prev.r;
    let dx = linalg::sub(&next.x, &prev.x);
    let dy = linalg::sub(&next.y, &prev.y);
    let step_norm = (linalg::dot(&dx, &dx) + linalg::dot(&dy, &dy)).sqrt();
    if step_norm == 0.0 {
        return Ok(RelativeErrorSample {
            ratio: 0.0,
            subgradient_norm: 0.0,
            step_norm: 0.0,
        });
    }

    let resid_prev = problem.constraints.residual(&prev.x, &prev.y)?;
    let resid_next = problem.constraints.residual(&next.x, &next.y)?;
    let b = &problem.constraints.b;
    // Bracket from the y-step optimality: r (y - y+) - B^T (alpha resid + p).
    let mut carrier = linalg::scaled(&resid_prev, alpha);
    linalg::axpy(1.0, &prev.p, &mut carrier);
    let bt_carrier = b.adjoint_apply(&carrier)?;
    let mut carrier_next = linalg::scaled(&resid_next, alpha);
    linalg::axpy(1.0, &next.p, &mut carrier_next);
    let bt_next = b.adjoint_apply(&carrier_next)?;
    let w_prev = prev.weights.values();
    let w_next = next.weights.values();
    let mut y_member_sq = 0.0;
    for i in 0..next.y.len() {
        let bracket = r * (prev.y[i] - next.y[i]) - bt_carrier[i];
        let m = (w_next[i] / w_prev[i]) * bracket + bt_next[i];
        y_member_sq += m * m;
    }

    let dp = linalg::sub(&next.p, &prev.p);
    let x_member = problem.constraints.a.adjoint_apply(&dp)?;
    let x_member_sq = linalg::dot(&x_member, &x_member);
    let p_member_sq = linalg::dot(&dp, &dp) / (alpha * alpha);

    let subgradient_norm = (y_member_sq + x_member_sq + p_member_sq).sqrt();
    Ok(RelativeErrorSample {
        ratio: subgradient_norm / step_norm,
        subgradient_norm,
        step_norm,
    })
}

/// Computes the certification constants for a problem and schedule. Above
/// desk scale, theta (and with it eta and nu) is reported unavailable instead
/// of failing the whole computation.
pub fn constants_for(
    problem: &ProblemSpec,
    alpha_max: f64,
    r_margin: f64,
) -> Result<DiagnosticsConstants, DiagnosticsError> {
    let a = &problem.constraints.a;
    let b = &problem.constraints.b;
    let norm_a = a.operator_norm(1e-10)?;
    let norm_b = b.operator_norm(1e-10)?;
    // The dense decomposition behind theta is cubic in the Gram side; the
    // automatic certification path only attempts it at rank-test scale.
    let theta = if a.in_dim().min(a.out_dim()) > RANK_TEST_LIMIT {
        None
    } else {
        match a.smallest_positive_singular_value() {
            Ok(t) => Some(t),
            Err(OperatorError::DeskScaleExceeded { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    };
    let lipschitz = problem.loss.lipschitz_gradient();
    let eta = theta.map(|t| lipschitz * lipschitz / (t * t));
    let delta = match problem.strong_convexity {
        Some(d) => Some(d),
        None => estimate_strong_convexity(problem)?,
    };
    let nu = match (delta, eta) {
        (Some(d), Some(e)) => Some((d / 2.0 - e / alpha_max).min(r_margin / 2.0)),
        _ => None,
    };
    let condition_alpha_ok = match (delta, eta) {
        (Some(d), Some(e)) => Some(alpha_max > 1.0f64.max(2.0 * e / d)),
        _ => None,
    };
    Ok(DiagnosticsConstants {
        theta,
        eta,
        nu,
        norm_a,
        norm_b,
        delta,
        lipschitz,
        condition_alpha_ok,
        alpha_max,
        r_margin,
    })
}

/// Smallest eigenvalue of `hess f + A^T A` by dense decomposition, for
/// quadratic losses at desk scale; `None` otherwise.
fn estimate_strong_convexity(problem: &ProblemSpec) -> Result<Option<f64>, DiagnosticsError> {
    let n = problem.x_dim();
    if n > RANK_TEST_LIMIT {
        return Ok(None);
    }
    let Some(mut hess) = problem.loss.quadratic_hessian()? else {
        return Ok(None);
    };
    let gram_a = problem.constraints.a.gram_matrix()?;
    if gram_a.rows() != n {
        // A is wider than tall; its input Gram is what the bound needs.
        let dense = problem.constraints.a.to_dense()?;
        hess.add_scaled(&dense.gram(), 1.0);
    } else {
        hess.add_scaled(&gram_a, 1.0);
    }
    let ev = hess.sym_eigenvalues()?;
    Ok(ev.first().copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeInclusionStatus {
    /// rank([A | B | c]) == rank(A) held in the dense rank test.
    Verified,
    /// The rank test ran and the inclusion failed.
    NotSatisfied,
    /// The stacked matrix exceeds the desk-scale rank-test limit.
    TooLarge,
}

/// Dense rank test for `Im(B) union {c} inside Im(A)`: compares rank(A)
/// against rank([A | B | c]) with the Gram-noise-aware cutoff.
pub fn range_inclusion_status(
    problem: &ProblemSpec,
) -> Result<RangeInclusionStatus, DiagnosticsError> {
    let a = &problem.constraints.a;
    let b = &problem.constraints.b;
    let rows = a.out_dim();
    let cols = problem.x_dim() + problem.y_dim() + 1;
    if cols > RANK_TEST_LIMIT || rows > 4 * RANK_TEST_LIMIT {
        return Ok(RangeInclusionStatus::TooLarge);
    }
    let a_dense = a.to_dense()?;
    let b_dense = b.to_dense()?;
    let mut stacked = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..problem.x_dim() {
            stacked.set(i, j, a_dense.get(i, j));
        }
        for j in 0..problem.y_dim() {
            stacked.set(i, problem.x_dim() + j, b_dense.get(i, j));
        }
        stacked.set(i, cols - 1, problem.constraints.c[i]);
    }
    let rank_a = dense_rank(&a_dense)?;
    let rank_stacked = dense_rank(&stacked)?;
    Ok(if rank_stacked == rank_a {
        RangeInclusionStatus::Verified
    } else {
        RangeInclusionStatus::NotSatisfied
    })
}

fn dense_rank(m: &DenseMatrix) -> Result<usize, DiagnosticsError> {
    let side = m.rows().min(m.cols());
    let gram = if m.cols() <= m.rows() {
        m.gram()
    } else {
        m.transpose().gram()
    };
    let ev = gram.sym_eigenvalues()?;
    let lam_max = ev.last().copied().unwrap_or(0.0).max(0.0);
    if lam_max == 0.0 {
        return Ok(0);
    }
    let cutoff_rel = 1e-10f64.max((32.0 * side as f64 * f64::EPSILON).sqrt());
    let lam_cut = cutoff_rel * cutoff_rel * lam_max;
    Ok(ev.iter().filter(|l| **l > lam_cut).count())
}

#[derive(Debug, Clone)]
pub struct DescentViolation {
    pub iter: usize,
    pub decrease: f64,
    pub required: f64,
}

/// Result of replaying the descent inequalities over the trace.
#[derive(Debug, Clone)]
pub struct DescentReport {
    pub pairs_checked: usize,
    pub pairs_skipped_alpha_change: usize,
    /// Set when the first step could not be checked because the starting
    /// point did not satisfy the gradient-multiplier identity.
    pub first_pair_skipped_inconsistent_start: bool,
    pub nu: Option<f64>,
    pub monotonicity_violations: Vec<DescentViolation>,
    pub quantified_violations: Vec<DescentViolation>,
}

impl DescentReport {
    pub fn passed(&self) -> bool {
        self.monotonicity_violations.is_empty() && self.quantified_violations.is_empty()
    }
}

impl fmt::Display for DescentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "descent.pairs_checked={}", self.pairs_checked)?;
        writeln!(
            f,
            "descent.pairs_skipped_alpha_change={}",
            self.pairs_skipped_alpha_change
        )?;
        writeln!(
            f,
            "descent.monotonicity_violations={}",
            self.monotonicity_violations.len()
        )?;
        writeln!(
            f,
            "descent.quantified_violations={}",
            self.quantified_violations.len()
        )?;
        writeln!(f, "descent.pass={}", self.passed())
    }
}

/// Checks, over every consecutive pair of rows sharing the same alpha, that
/// the Lagrangian did not increase beyond the tolerance, and (when `nu` is
/// known) that the decrease dominates `nu |dz|^2` up to the absolute slack.
/// Pairs straddling an alpha change are skipped: the Lyapunov argument only
/// applies at fixed alpha.
pub fn check_descent(trace: &IterateTrace, nu: Option<f64>) -> DescentReport {
    let mut report = DescentReport {
        pairs_checked: 0,
        pairs_skipped_alpha_change: 0,
        first_pair_skipped_inconsistent_start: false,
        nu,
        monotonicity_violations: Vec::new(),
        quantified_violations: Vec::new(),
    };
    let rows = trace.rows();
    let check_pair =
        |report: &mut DescentReport, iter: usize, l_prev: f64, l_next: f64, dz_sq: f64| {
            report.pairs_checked += 1;
            let decrease = l_prev - l_next;
            if l_next > l_prev + DESCENT_MONOTONE_TOL * (1.0 + l_prev.abs()) {
                report.monotonicity_violations.push(DescentViolation {
                    iter,
                    decrease,
                    required: 0.0,
                });
            }
            if let Some(nu) = nu {
                let required = nu * dz_sq - DESCENT_QUANTIFIED_TOL;
                if decrease < required {
                    report.quantified_violations.push(DescentViolation {
                        iter,
                        decrease,
                        required,
                    });
                }
            }
        };
    if let Some(first) = rows.first() {
        if first.alpha != trace.initial_alpha {
            report.pairs_skipped_alpha_change += 1;
        } else if !trace.initial_gradient_consistent {
            // The first-step inequality needs grad f(x0) = -A^T p0.
            report.first_pair_skipped_inconsistent_start = true;
        } else {
            check_pair(
                &mut report,
                first.iter,
                trace.initial_lagrangian,
                first.lagrangian,
                first.step_x * first.step_x + first.step_y * first.step_y,
            );
        }
    }
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.alpha == b.alpha {
            check_pair(
                &mut report,
                b.iter,
                a.lagrangian,
                b.lagrangian,
                b.step_x * b.step_x + b.step_y * b.step_y,
            );
        } else {
            report.pairs_skipped_alpha_change += 1;
        }
    }
    report
}

#[derive(Debug, Clone)]
pub struct DualBoundViolation {
    pub iter: usize,
    pub lhs: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub enum DualBoundStatus {
    Checked,
    Unchecked { reason: String },
}

#[derive(Debug, Clone)]
pub struct DualBoundReport {
    pub status: DualBoundStatus,
    pub rows_checked: usize,
    /// Rows where |p+ - p| exceeded sqrt(eta) |x+ - x| beyond tolerance.
    pub movement_violations: Vec<DualBoundViolation>,
    /// Rows where |p| exceeded |grad f(x)| / theta beyond tolerance.
    pub norm_violations: Vec<DualBoundViolation>,
}

impl DualBoundReport {
    pub fn passed(&self) -> bool {
        match self.status {
            DualBoundStatus::Checked => {
                self.movement_violations.is_empty() && self.norm_violations.is_empty()
            }
            // An unverified precondition is reported, never asserted false.
            DualBoundStatus::Unchecked { .. } => true,
        }
    }

    pub fn is_checked(&self) -> bool {
        matches!(self.status, DualBoundStatus::Checked)
    }
}

impl fmt::Display for DualBoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            DualBoundStatus::Checked => writeln!(f, "dual.status=checked")?,
            DualBoundStatus::Unchecked { reason } => {
                writeln!(f, "dual.status=unchecked ({reason})")?
            }
        }
        writeln!(f, "dual.rows_checked={}", self.rows_checked)?;
        writeln!(
            f,
            "dual.movement_violations={}",
            self.movement_violations.len()
        )?;
        writeln!(f, "dual.norm_violations={}", self.norm_violations.len())?;
        writeln!(f, "dual.pass={}", self.passed())
    }
}

/// Verifies the dual bounds over a trace. Requires the range-inclusion
/// precondition and a dual start certified inside Im(A) (only `p0 = 0` is
/// certified); otherwise the report is marked unchecked and asserts nothing.
pub fn check_dual_bound(
    trace: &IterateTrace,
    constants: &DiagnosticsConstants,
    inclusion: RangeInclusionStatus,
) -> DualBoundReport {
    let unchecked = |reason: &str| DualBoundReport {
        status: DualBoundStatus::Unchecked {
            reason: reason.to_string(),
        },
        rows_checked: 0,
        movement_violations: Vec::new(),
        norm_violations: Vec::new(),
    };
    match inclusion {
        RangeInclusionStatus::Verified => {}
        RangeInclusionStatus::NotSatisfied => return unchecked("range inclusion does not hold"),
        RangeInclusionStatus::TooLarge => return unchecked("rank test above desk scale"),
    }
    if trace.initial_dual_norm != 0.0 {
        return unchecked("dual start not certified inside Im(A)");
    }
    let (Some(eta), Some(theta)) = (constants.eta, constants.theta) else {
        return unchecked("eta/theta unavailable");
    };
    let sqrt_eta = eta.sqrt();
    let mut report = DualBoundReport {
        status: DualBoundStatus::Checked,
        rows_checked: 0,
        movement_violations: Vec::new(),
        norm_violations: Vec::new(),
    };
    for (idx, row) in trace.rows().iter().enumerate() {
        report.rows_checked += 1;
        // The movement bound for the first step also needs the identity at
        // the starting point.
        let movement_applies = idx > 0 || trace.initial_gradient_consistent;
        let bound = sqrt_eta * row.step_x * (1.0 + DUAL_BOUND_TOL);
        if movement_applies && row.dual_step > bound {
            report.movement_violations.push(DualBoundViolation {
                iter: row.iter,
                lhs: row.dual_step,
                bound,
            });
        }
        let nbound = row.grad_norm / theta * (1.0 + DUAL_BOUND_TOL);
        if row.p_norm > nbound {
            report.norm_violations.push(DualBoundViolation {
                iter: row.iter,
                lhs: row.p_norm,
                bound: nbound,
            });
        }
    }
    report
}

/// Everything the library can certify about a finished run, in one report.
#[derive(Debug, Clone)]
pub struct RunCertification {
    pub constants: DiagnosticsConstants,
    pub inclusion: RangeInclusionStatus,
    pub descent: DescentReport,
    pub dual: DualBoundReport,
    pub final_kkt: Option<f64>,
    pub final_primal_residual: Option<f64>,
    pub tau_hat: f64,
    pub total_step_length: f64,
    pub max_iterate_norm: f64,
    pub max_x_residual: f64,
}

impl RunCertification {
    pub fn passed(&self) -> bool {
        self.descent.passed() && self.dual.passed()
    }
}

impl fmt::Display for RunCertification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constants)?;
        write!(f, "{}", self.descent)?;
        write!(f, "{}", self.dual)?;
        if let Some(kkt) = self.final_kkt {
            writeln!(f, "kkt.final={kkt:.6e}")?;
        }
        if let Some(pr) = self.final_primal_residual {
            writeln!(f, "primal_residual.final={pr:.6e}")?;
        }
        writeln!(f, "tau_hat={:.6e}", self.tau_hat)?;
        writeln!(f, "step_length.total={:.6e}", self.total_step_length)?;
        writeln!(f, "iterate_norm.max={:.6e}", self.max_iterate_norm)?;
        writeln!(f, "x_residual.max={:.6e}", self.max_x_residual)?;
        writeln!(f, "certification.pass={}", self.passed())
    }
}

/// Runs every check the trace supports: constants, range inclusion, descent
/// (quantified when nu is available), dual bounds, and the scalar summaries.
pub fn certify_run(
    problem: &ProblemSpec,
    trace: &IterateTrace,
    alpha_max: f64,
    r_margin: f64,
) -> Result<RunCertification, DiagnosticsError> {
    let constants = constants_for(problem, alpha_max, r_margin)?;
    let inclusion = range_inclusion_status(problem)?;
    // A non-positive descent constant certifies nothing; only plain
    // monotonicity is checked then.
    let nu = constants.nu.filter(|v| *v > 0.0);
    let descent = check_descent(trace, nu);
    let dual = check_dual_bound(trace, &constants, inclusion);
    Ok(RunCertification {
        constants,
        inclusion,
        descent,
        dual,
        final_kkt: trace.rows().last().map(|r| r.kkt),
        final_primal_residual: trace.rows().last().map(|r| r.primal_residual),
        tau_hat: trace.tau_hat(),
        total_step_length: trace.total_step_length(),
        max_iterate_norm: trace.max_iterate_norm(),
        max_x_residual: trace
            .rows()
            .iter()
            .map(|r| r.x_residual)
            .fold(0.0, f64::max),
    })
}

/// Exhaustive scalar minimization: evaluate on a uniform grid over `[lo, hi]`,
/// then refine around the best grid point by golden-section search. Stays
/// independent of the closed-form prox routes on purpose.
pub fn grid_prox_oracle(
    objective: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<f64, DiagnosticsError> {
    if !(lo < hi) || !(step > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(DiagnosticsError::InvalidInterval { lo, hi, step });
    }
    let n = ((hi - lo) / step).ceil() as usize;
    let mut best_t = lo;
    let mut best_v = f64::INFINITY;
    for k in 0..=n {
        let t = (lo + k as f64 * step).min(hi);
        let v = objective(t);
        if !v.is_finite() {
            return Err(DiagnosticsError::NonFiniteObjective { t });
        }
        if v < best_v {
            best_v = v;
            best_t = t;
        }
    }
    // Golden-section refinement inside the bracketing cell.
    let mut a = (best_t - step).max(lo);
    let mut b = (best_t + step).min(hi);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    for _ in 0..120 {
        if !(fc.is_finite() && fd.is_finite()) {
            return Err(DiagnosticsError::NonFiniteObjective {
                t: if fc.is_finite() { d } else { c },
            });
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
        if (b - a).abs() < 1e-14 * (1.0 + best_t.abs()) {
            break;
        }
    }
    let refined = 0.5 * (a + b);
    let fr = objective(refined);
    Ok(if fr.is_finite() && fr <= best_v {
        refined
    } else {
        best_t
    })
}
