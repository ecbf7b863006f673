//! The reweighted linearized ADMM state machine.
//!
//! One iteration, in order:
//! 1. y-step: one weighted proximal step on the linearized subproblem,
//!    `y_i <- prox_{(w_i / r) h}( y_i - B_i^T (alpha (Ax + By - c) + p) / r )`,
//!    with weights `w_i = sigma g'[h(y_i)]` frozen at the current point;
//! 2. x-step: exact minimization of
//!    `f(x) + <p, Ax> + (alpha/2) |Ax + B y_new - c|^2`
//!    (a strongly convex quadratic solve when f is quadratic);
//! 3. dual step: `p <- p + alpha (A x_new + B y_new - c)`;
//! 4. weight refresh from the new y, then the alpha / r schedule advance.
//!
//! The same engine also drives the two comparison algorithms in
//! [`crate::baselines`], which only replace the y-step; everything else
//! (x-step, dual step, schedule, trace plumbing) is shared so traces are
//! comparable column for column.

use crate::diagnostics::{self, DiagnosticsError, IterateTrace, TraceRow};
use crate::linalg::{self, Cholesky, DenseMatrix};
use crate::operators::{ConstraintSystem, LinearOperator, OperatorError};
use crate::penalties::{self, ConcaveOuter, InnerConvex, PenaltyError, WeightVector};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Required accuracy of the x-step: the subproblem gradient norm must not
/// exceed `X_RESIDUAL_TOL * (1 + |x|)`.
pub const X_RESIDUAL_TOL: f64 = 1e-8;

/// x dimension up to which the quadratic x-step uses a cached dense Cholesky
/// factorization instead of conjugate gradients.
const DENSE_X_LIMIT: usize = 384;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("problem dimensions are incoherent: {0}")]
    IncoherentDimensions(String),
    #[error("linear x-step solve failed: residual {residual:.3e} after {iterations} iterations")]
    LinearSolveFailed { residual: f64, iterations: usize },
    #[error("iterate diverged (non-finite values) at iteration {iteration}")]
    Divergence {
        iteration: usize,
        trace: Box<IterateTrace>,
    },
    #[error("non-finite values produced by the {stage}")]
    NonFiniteIterate { stage: &'static str },
    #[error("unsupported problem structure: {0}")]
    UnsupportedStructure(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Smooth loss with gradient oracle and Lipschitz constant.
#[derive(Clone)]
pub enum SmoothLoss {
    /// f(x) = 0.5 |Psi x - b|^2; the quadratic structure is what the fast
    /// x-step exploits.
    Quadratic {
        operator: LinearOperator,
        data: Vec<f64>,
        lipschitz: f64,
    },
    /// Arbitrary smooth convex loss given by value/gradient oracles.
    Custom {
        dim: usize,
        value: ScalarFn,
        gradient: GradientFn,
        lipschitz: f64,
    },
}

impl fmt::Debug for SmoothLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic { operator, .. } => f
                .debug_struct("SmoothLoss::Quadratic")
                .field("kind", &operator.kind_name())
                .field("dim", &operator.in_dim())
                .finish(),
            Self::Custom { dim, lipschitz, .. } => f
                .debug_struct("SmoothLoss::Custom")
                .field("dim", dim)
                .field("lipschitz", lipschitz)
                .finish(),
        }
    }
}

impl SmoothLoss {
    /// Builds the least-squares loss 0.5 |Psi x - b|^2. The gradient Lipschitz
    /// constant |Psi|^2 is computed once here.
    pub fn quadratic(operator: LinearOperator, data: Vec<f64>) -> Result<Self, SolverError> {
        if data.len() != operator.out_dim() {
            return Err(SolverError::IncoherentDimensions(format!(
                "loss data has length {}, operator maps into dimension {}",
                data.len(),
                operator.out_dim()
            )));
        }
        let norm = operator.operator_norm(1e-10)?;
        Ok(Self::Quadratic {
            operator,
            data,
            lipschitz: norm * norm,
        })
    }

    pub fn custom(dim: usize, value: ScalarFn, gradient: GradientFn, lipschitz: f64) -> Self {
        Self::Custom {
            dim,
            value,
            gradient,
            lipschitz,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { operator, .. } => operator.in_dim(),
            Self::Custom { dim, .. } => *dim,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Quadratic { operator, data, .. } => {
                let r = operator.apply(x).expect("validated dims");
                let d = linalg::sub(&r, data);
                0.5 * linalg::dot(&d, &d)
            }
            Self::Custom { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Quadratic { operator, data, .. } => {
                let r = operator.apply(x).expect("validated dims");
                let d = linalg::sub(&r, data);
                operator.adjoint_apply(&d).expect("validated dims")
            }
            Self::Custom { gradient, .. } => gradient(x),
        }
    }

    pub fn lipschitz_gradient(&self) -> f64 {
        match self {
            Self::Quadratic { lipschitz, .. } | Self::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// Dense Hessian for the quadratic kind at desk scale, `None` otherwise.
    pub fn quadratic_hessian(&self) -> Result<Option<DenseMatrix>, OperatorError> {
        match self {
            Self::Quadratic { operator, .. } => {
                let dense = operator.to_dense()?;
                Ok(Some(dense.gram()))
            }
            Self::Custom { .. } => Ok(None),
        }
    }
}

/// A complete problem instance: loss, constraints and penalty pair.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub loss: SmoothLoss,
    pub constraints: ConstraintSystem,
    pub outer: ConcaveOuter,
    pub inner: InnerConvex,
    /// Strong-convexity constant of f + |Ax|^2/2 when the caller knows it.
    pub strong_convexity: Option<f64>,
}

impl ProblemSpec {
    pub fn new(
        loss: SmoothLoss,
        constraints: ConstraintSystem,
        outer: ConcaveOuter,
        inner: InnerConvex,
    ) -> Result<Self, SolverError> {
        if loss.dim() != constraints.a.in_dim() {
            return Err(SolverError::IncoherentDimensions(format!(
                "loss dimension {} vs A input dimension {}",
                loss.dim(),
                constraints.a.in_dim()
            )));
        }
        Ok(Self {
            loss,
            constraints,
            outer,
            inner,
            strong_convexity: None,
        })
    }

    pub fn with_strong_convexity(mut self, delta: f64) -> Self {
        self.strong_convexity = Some(delta);
        self
    }

    pub fn x_dim(&self) -> usize {
        self.constraints.a.in_dim()
    }

    pub fn y_dim(&self) -> usize {
        self.constraints.b.in_dim()
    }
}

#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub alpha0: f64,
    /// Multiplicative growth factor of the alpha schedule, >= 1.
    pub rho: f64,
    pub alpha_max: f64,
    /// r = alpha |B|^2 + r_margin at every iteration; must be positive so the
    /// proximal parameter strictly dominates alpha |B|^2.
    pub r_margin: f64,
    pub max_iter: usize,
    pub primal_tol: f64,
    pub step_tol: f64,
    pub seed: u64,
    pub init: Option<InitialPoint>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            rho: 1.05,
            alpha_max: 1e3,
            r_margin: 1e-6,
            max_iter: 200,
            primal_tol: 1e-6,
            step_tol: 1e-8,
            seed: 0,
            init: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.alpha0 > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "alpha0 must be > 0, got {}",
                self.alpha0
            )));
        }
        if !(self.rho >= 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "rho must be >= 1, got {}",
                self.rho
            )));
        }
        if !(self.alpha_max >= self.alpha0) {
            return Err(SolverError::InvalidConfig(format!(
                "alpha_max {} must be >= alpha0 {}",
                self.alpha_max, self.alpha0
            )));
        }
        if !(self.r_margin > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "r_margin must be > 0, got {}",
                self.r_margin
            )));
        }
        if !(self.primal_tol > 0.0) || !(self.step_tol > 0.0) {
            return Err(SolverError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `alpha' = min(rho alpha, alpha_max)`, `r' = alpha' |B|^2 + margin`.
pub fn alpha_schedule(alpha: f64, config: &SolverConfig, norm_b: f64) -> (f64, f64) {
    let next = (config.rho * alpha).min(config.alpha_max);
    (next, next * norm_b * norm_b + config.r_margin)
}

/// Current iterate (x, y, p) with live parameters. `weights` always holds the
/// reweighting computed at the current y.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: f64,
    pub r: f64,
    pub k: usize,
    pub weights: WeightVector,
}

impl SolverState {
    pub fn is_finite(&self) -> bool {
        linalg::all_finite(&self.x) && linalg::all_finite(&self.y) && linalg::all_finite(&self.p)
    }
}

/// Per-step measurements handed back by [`IlrAdmm::step`].
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub alpha_used: f64,
    pub r_used: f64,
    pub step_x: f64,
    pub step_y: f64,
    pub step_p: f64,
    pub x_residual: f64,
    pub primal_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: SolverState,
    pub trace: IterateTrace,
    pub converged: bool,
}

/// Which y-step the engine performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum YRule {
    /// One weighted proximal step on the linearized subproblem.
    Linearized,
    /// Exact entrywise minimization of the nonconvex subproblem
    /// (requires B to be a scaled identity).
    ExactScalar,
    /// Fixed-length inner loop of reweighted proximal steps.
    InnerLoop(usize),
}

pub(crate) struct Engine<'a> {
    pub problem: &'a ProblemSpec,
    pub config: SolverConfig,
    pub rule: YRule,
    pub norm_b: f64,
    xsub: XSubproblem,
}

impl<'a> Engine<'a> {
    pub fn new(
        problem: &'a ProblemSpec,
        config: SolverConfig,
        rule: YRule,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        if let Some(init) = &config.init {
            if init.x.len() != problem.x_dim()
                || init.y.len() != problem.y_dim()
                || init.p.len() != problem.constraints.c.len()
            {
                return Err(SolverError::IncoherentDimensions(
                    "initial point dimensions".into(),
                ));
            }
        }
        let norm_b = problem.constraints.b.operator_norm(1e-10)?;
        let xsub = XSubproblem::prepare(problem)?;
        Ok(Self {
            problem,
            config,
            rule,
            norm_b,
            xsub,
        })
    }

    pub fn initial_state(&self) -> Result<SolverState, SolverError> {
        let (x, y, p) = match &self.config.init {
            Some(init) => (init.x.clone(), init.y.clone(), init.p.clone()),
            None => (
                vec![0.0; self.problem.x_dim()],
                vec![0.0; self.problem.y_dim()],
                vec![0.0; self.problem.constraints.c.len()],
            ),
        };
        let weights = penalties::compute_weights(&self.problem.outer, self.problem.inner, &y)?;
        let alpha = self.config.alpha0;
        let r = alpha * self.norm_b * self.norm_b + self.config.r_margin;
        Ok(SolverState {
            x,
            y,
            p,
            alpha,
            r,
            k: 0,
            weights,
        })
    }

    /// One weighted proximal step of the linearized y-subproblem at (x, v).
    pub fn linearized_prox_step(
        &self,
        x: &[f64],
        v: &[f64],
        p: &[f64],
        alpha: f64,
        r: f64,
        weights: &WeightVector,
    ) -> Result<Vec<f64>, SolverError> {
        let resid = self.problem.constraints.residual(x, v)?;
        let mut carrier = linalg::scaled(&resid, alpha);
        linalg::axpy(1.0, p, &mut carrier);
        let t = self.problem.constraints.b.adjoint_apply(&carrier)?;
        let mut out = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            out.push(penalties::prox_weighted_inner(
                self.problem.inner,
                weights.values()[i],
                r,
                v[i] - t[i] / r,
            )?);
        }
        Ok(out)
    }

    /// Exact entrywise y-subproblem solve; B must be a scaled identity for the
    /// subproblem to separate.
    pub fn exact_scalar_step(
        &self,
        x: &[f64],
        p: &[f64],
        alpha: f64,
    ) -> Result<Vec<f64>, SolverError> {
        let LinearOperator::ScaledIdentity { scale, .. } = self.problem.constraints.b else {
            return Err(SolverError::UnsupportedStructure(
                "the exact nonconvex y-step requires B to be a scaled identity".into(),
            ));
        };
        if scale == 0.0 {
            return Err(SolverError::UnsupportedStructure(
                "B must be nonzero".into(),
            ));
        }
        let ax = self.problem.constraints.a.apply(x)?;
        let alpha_eff = alpha * scale * scale;
        let mut out = Vec::with_capacity(self.problem.y_dim());
        for i in 0..self.problem.y_dim() {
            let z = -((ax[i] - self.problem.constraints.c[i]) + p[i] / alpha) / scale;
            out.push(penalties::scalar_prox_composite(
                &self.problem.outer,
                self.problem.inner,
                alpha_eff,
                z,
            )?);
        }
        Ok(out)
    }

    /// Fixed-length inner loop: refresh weights at the current inner point,
    /// then take one linearized proximal step; `iters` times.
    pub fn inner_loop_step(
        &self,
        x: &[f64],
        y: &[f64],
        p: &[f64],
        alpha: f64,
        r: f64,
        iters: usize,
    ) -> Result<Vec<f64>, SolverError> {
        let mut v = y.to_vec();
        for _ in 0..iters {
            let weights = penalties::compute_weights(&self.problem.outer, self.problem.inner, &v)?;
            v = self.linearized_prox_step(x, &v, p, alpha, r, &weights)?;
        }
        Ok(v)
    }

    fn y_step(&self, state: &SolverState) -> Result<Vec<f64>, SolverError> {
        match self.rule {
            YRule::Linearized => self.linearized_prox_step(
                &state.x,
                &state.y,
                &state.p,
                state.alpha,
                state.r,
                &state.weights,
            ),
            YRule::ExactScalar => self.exact_scalar_step(&state.x, &state.p, state.alpha),
            YRule::InnerLoop(iters) => {
                self.inner_loop_step(&state.x, &state.y, &state.p, state.alpha, state.r, iters)
            }
        }
    }

    pub fn x_step(
        &mut self,
        y_new: &[f64],
        p: &[f64],
        alpha: f64,
        warm: &[f64],
    ) -> Result<(Vec<f64>, f64), SolverError> {
        self.xsub.solve(self.problem, y_new, p, alpha, warm)
    }

    pub fn dual_step(
        &self,
        x_new: &[f64],
        y_new: &[f64],
        p: &[f64],
        alpha: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let resid = self.problem.constraints.residual(x_new, y_new)?;
        let mut p_new = p.to_vec();
        linalg::axpy(alpha, &resid, &mut p_new);
        Ok((p_new, resid))
    }

    pub fn step(&mut self, state: &mut SolverState) -> Result<StepInfo, SolverError> {
        if !state.is_finite() {
            return Err(SolverError::NonFiniteIterate {
                stage: "input state",
            });
        }
        let (alpha, r) = (state.alpha, state.r);
        let y_new = self.y_step(state)?;
        if !linalg::all_finite(&y_new) {
            return Err(SolverError::NonFiniteIterate { stage: "y-step" });
        }
        let (x_new, x_residual) = self.x_step(&y_new, &state.p, alpha, &state.x)?;
        if !linalg::all_finite(&x_new) {
            return Err(SolverError::NonFiniteIterate { stage: "x-step" });
        }
        let (p_new, resid) = self.dual_step(&x_new, &y_new, &state.p, alpha)?;

        let info = StepInfo {
            alpha_used: alpha,
            r_used: r,
            step_x: linalg::norm2(&linalg::sub(&x_new, &state.x)),
            step_y: linalg::norm2(&linalg::sub(&y_new, &state.y)),
            step_p: linalg::norm2(&linalg::sub(&p_new, &state.p)),
            x_residual,
            primal_residual: linalg::norm2(&resid),
        };
        state.x = x_new;
        state.y = y_new;
        state.p = p_new;
        state.weights =
            penalties::compute_weights(&self.problem.outer, self.problem.inner, &state.y)?;
        let (alpha_next, r_next) = alpha_schedule(alpha, &self.config, self.norm_b);
        state.alpha = alpha_next;
        state.r = r_next;
        state.k += 1;
        Ok(info)
    }

    pub fn run(
        &mut self,
        mut observer: impl FnMut(&SolverState) -> Option<f64>,
    ) -> Result<SolveOutcome, SolverError> {
        let mut state = self.initial_state()?;
        let initial_lag =
            diagnostics::lagrangian_value(self.problem, &state.x, &state.y, &state.p, state.alpha)?;
        let mut trace = IterateTrace::new(initial_lag, state.alpha, linalg::norm2(&state.p));
        if state.is_finite() {
            let mut g0 = self.problem.loss.gradient(&state.x);
            let atp = self.problem.constraints.a.adjoint_apply(&state.p)?;
            linalg::axpy(1.0, &atp, &mut g0);
            trace.initial_gradient_consistent =
                linalg::norm2(&g0) <= X_RESIDUAL_TOL * (1.0 + linalg::norm2(&state.x));
        }
        let mut converged = false;
        if !state.is_finite() {
            return Err(SolverError::Divergence {
                iteration: 0,
                trace: Box::new(trace),
            });
        }
        for _ in 0..self.config.max_iter {
            let prev = state.clone();
            let info = match self.step(&mut state) {
                Ok(info) => info,
                Err(SolverError::NonFiniteIterate { .. }) => {
                    return Err(SolverError::Divergence {
                        iteration: state.k + 1,
                        trace: Box::new(trace),
                    });
                }
                Err(e) => return Err(e),
            };
            if !state.is_finite() {
                return Err(SolverError::Divergence {
                    iteration: state.k,
                    trace: Box::new(trace),
                });
            }
            let lagrangian = diagnostics::lagrangian_value(
                self.problem,
                &state.x,
                &state.y,
                &state.p,
                info.alpha_used,
            )?;
            let kkt = diagnostics::kkt_residual(self.problem, &state.x, &state.y, &state.p)?;
            let rel = diagnostics::relative_error_ratio(self.problem, &prev, &state)?;
            let snr = observer(&state);
            trace.push(TraceRow {
                iter: state.k,
                alpha: info.alpha_used,
                r: info.r_used,
                lagrangian,
                primal_residual: info.primal_residual,
                step_x: info.step_x,
                step_y: info.step_y,
                dual_step: info.step_p,
                kkt,
                weight_min: state.weights.min(),
                weight_max: state.weights.max(),
                snr,
                x_residual: info.x_residual,
                x_norm: linalg::norm2(&state.x),
                p_norm: linalg::norm2(&state.p),
                grad_norm: linalg::norm2(&self.problem.loss.gradient(&state.x)),
                rel_err_ratio: rel.ratio,
                iterate_norm: linalg::norm2(&state.x)
                    .max(linalg::norm2(&state.y))
                    .max(linalg::norm2(&state.p)),
            });
            if !lagrangian.is_finite() {
                return Err(SolverError::Divergence {
                    iteration: state.k,
                    trace: Box::new(trace),
                });
            }
            let step_z = info.step_x.hypot(info.step_y);
            if info.primal_residual <= self.config.primal_tol && step_z <= self.config.step_tol {
                converged = true;
                break;
            }
        }
        Ok(SolveOutcome {
            state,
            trace,
            converged,
        })
    }
}

/// Fourier-diagonal preconditioner for the blur-plus-gradient normal matrix
/// `Psi^T Psi + alpha T^T T`: the periodic blur symbol is exact, the
/// difference Gram is approximated by the periodic Laplacian symbol (they
/// differ only by a boundary term). Built when the problem has that structure
/// on a power-of-two grid.
struct FourierPreconditioner {
    rows: usize,
    cols: usize,
    blur_symbol: Vec<f64>,
    laplace_symbol: Vec<f64>,
}

impl FourierPreconditioner {
    fn try_build(problem: &ProblemSpec) -> Option<Self> {
        let SmoothLoss::Quadratic { operator, .. } = &problem.loss else {
            return None;
        };
        let LinearOperator::Convolution2d { rows, cols, kernel } = operator else {
            return None;
        };
        let LinearOperator::Difference2d { rows: ar, cols: ac } = problem.constraints.a else {
            return None;
        };
        let (r, c) = (*rows, *cols);
        if (ar, ac) != (r, c) || !r.is_power_of_two() || !c.is_power_of_two() {
            return None;
        }
        let s = kernel.size() as isize;
        let h = s / 2;
        let mut re = vec![0.0; r * c];
        let mut im = vec![0.0; r * c];
        for a in 0..s {
            for b in 0..s {
                let i = (a - h).rem_euclid(r as isize) as usize;
                let j = (b - h).rem_euclid(c as isize) as usize;
                re[i * c + j] += kernel.weights()[(a * s + b) as usize];
            }
        }
        linalg::fft2(&mut re, &mut im, r, c, false);
        let blur_symbol: Vec<f64> = re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect();
        let pi = std::f64::consts::PI;
        let mut laplace_symbol = Vec::with_capacity(r * c);
        for i in 0..r {
            let si = 4.0 * (pi * i as f64 / r as f64).sin().powi(2);
            for j in 0..c {
                let sj = 4.0 * (pi * j as f64 / c as f64).sin().powi(2);
                laplace_symbol.push(si + sj);
            }
        }
        Some(Self {
            rows: r,
            cols: c,
            blur_symbol,
            laplace_symbol,
        })
    }

    fn apply(&self, alpha: f64, v: &[f64]) -> Vec<f64> {
        let n = self.rows * self.cols;
        let mut re = v.to_vec();
        let mut im = vec![0.0; n];
        linalg::fft2(&mut re, &mut im, self.rows, self.cols, false);
        for k in 0..n {
            let sym = (self.blur_symbol[k] + alpha * self.laplace_symbol[k]).max(1e-30);
            re[k] /= sym;
            im[k] /= sym;
        }
        linalg::fft2(&mut re, &mut im, self.rows, self.cols, true);
        let scale = 1.0 / n as f64;
        for x in re.iter_mut() {
            *x *= scale;
        }
        re
    }
}

/// The x-subproblem backend. Dense quadratic problems get a cached Cholesky
/// factorization (re-used while alpha is unchanged, so the saturated tail of
/// a schedule pays for one factorization); larger quadratic problems use
/// warm-started conjugate gradients, preconditioned in Fourier space when the
/// blur-plus-gradient structure allows it; custom losses fall back to a
/// Barzilai-Borwein gradient method.
enum XSubproblem {
    Dense {
        hessian: DenseMatrix,
        gram_a: DenseMatrix,
        grad_const: Vec<f64>,
        factor: Option<(u64, Cholesky)>,
    },
    Cg {
        grad_const: Vec<f64>,
        precond: Option<FourierPreconditioner>,
    },
    Descent {
        norm_a: f64,
    },
}

impl XSubproblem {
    fn prepare(problem: &ProblemSpec) -> Result<Self, SolverError> {
        match &problem.loss {
            SmoothLoss::Quadratic { operator, data, .. } => {
                let grad_const = operator.adjoint_apply(data)?;
                if problem.x_dim() <= DENSE_X_LIMIT {
                    let hessian = operator.to_dense()?.gram();
                    let gram_a = problem.constraints.a.to_dense()?.gram();
                    Ok(Self::Dense {
                        hessian,
                        gram_a,
                        grad_const,
                        factor: None,
                    })
                } else {
                    Ok(Self::Cg {
                        grad_const,
                        precond: FourierPreconditioner::try_build(problem),
                    })
                }
            }
            SmoothLoss::Custom { .. } => {
                let norm_a = problem.constraints.a.operator_norm(1e-8)?;
                Ok(Self::Descent { norm_a })
            }
        }
    }

    /// Right-hand side of the quadratic normal equations:
    /// `Psi^T b - A^T p - alpha A^T (B y - c)`.
    fn quadratic_rhs(
        problem: &ProblemSpec,
        grad_const: &[f64],
        y_new: &[f64],
        p: &[f64],
        alpha: f64,
    ) -> Result<Vec<f64>, SolverError> {
        let mut shift = problem.constraints.b.apply(y_new)?;
        for (s, c) in shift.iter_mut().zip(&problem.constraints.c) {
            *s -= c;
        }
        let mut carrier = p.to_vec();
        linalg::axpy(alpha, &shift, &mut carrier);
        let at = problem.constraints.a.adjoint_apply(&carrier)?;
        let mut rhs = grad_const.to_vec();
        linalg::axpy(-1.0, &at, &mut rhs);
        Ok(rhs)
    }

    /// Subproblem gradient `grad f(x) + A^T p + alpha A^T (A x + B y - c)`.
    fn subproblem_gradient(
        problem: &ProblemSpec,
        x: &[f64],
        y_new: &[f64],
        p: &[f64],
        alpha: f64,
    ) -> Result<Vec<f64>, SolverError> {
        let resid = {
            let mut r = problem.constraints.a.apply(x)?;
            let by = problem.constraints.b.apply(y_new)?;
            for ((ri, bi), ci) in r.iter_mut().zip(&by).zip(&problem.constraints.c) {
                *ri += bi - ci;
            }
            r
        };
        let mut carrier = p.to_vec();
        linalg::axpy(alpha, &resid, &mut carrier);
        let at = problem.constraints.a.adjoint_apply(&carrier)?;
        let mut grad = problem.loss.gradient(x);
        linalg::axpy(1.0, &at, &mut grad);
        Ok(grad)
    }

    fn solve(
        &mut self,
        problem: &ProblemSpec,
        y_new: &[f64],
        p: &[f64],
        alpha: f64,
        warm: &[f64],
    ) -> Result<(Vec<f64>, f64), SolverError> {
        match self {
            Self::Dense {
                hessian,
                gram_a,
                grad_const,
                factor,
            } => {
                let rhs = Self::quadratic_rhs(problem, grad_const, y_new, p, alpha)?;
                let key = alpha.to_bits();
                if factor.as_ref().map(|(k, _)| *k) != Some(key) {
                    let mut system = hessian.clone();
                    system.add_scaled(gram_a, alpha);
                    *factor = Some((key, system.cholesky()?));
                }
                let chol = &factor.as_ref().expect("factor just set").1;
                let mut x = chol.solve(&rhs);
                // One round of iterative refinement keeps the residual near
                // machine precision even for ill-conditioned saturated systems.
                for _ in 0..2 {
                    let grad = Self::subproblem_gradient(problem, &x, y_new, p, alpha)?;
                    let res = linalg::norm2(&grad);
                    if res <= 0.1 * X_RESIDUAL_TOL * (1.0 + linalg::norm2(&x)) {
                        return Ok((x, res));
                    }
                    let correction = chol.solve(&grad);
                    linalg::axpy(-1.0, &correction, &mut x);
                }
                let grad = Self::subproblem_gradient(problem, &x, y_new, p, alpha)?;
                let res = linalg::norm2(&grad);
                if res > X_RESIDUAL_TOL * (1.0 + linalg::norm2(&x)) {
                    return Err(SolverError::LinearSolveFailed {
                        residual: res,
                        iterations: 3,
                    });
                }
                Ok((x, res))
            }
            Self::Cg {
                grad_const,
                precond,
            } => {
                let SmoothLoss::Quadratic { operator, .. } = &problem.loss else {
                    unreachable!("CG backend only built for quadratic losses");
                };
                let a = &problem.constraints.a;
                let matvec = |v: &[f64]| -> Result<Vec<f64>, SolverError> {
                    let mut out = operator.adjoint_apply(&operator.apply(v)?)?;
                    let ata = a.adjoint_apply(&a.apply(v)?)?;
                    linalg::axpy(alpha, &ata, &mut out);
                    Ok(out)
                };
                let precond = &*precond;
                let apply_precond = |r: &[f64]| -> Vec<f64> {
                    match precond {
                        Some(pc) => pc.apply(alpha, r),
                        None => r.to_vec(),
                    }
                };
                let rhs = Self::quadratic_rhs(problem, grad_const, y_new, p, alpha)?;
                let mut x = warm.to_vec();
                let mut r = rhs.clone();
                let ax = matvec(&x)?;
                linalg::axpy(-1.0, &ax, &mut r);
                let mut z = apply_precond(&r);
                let mut d = z.clone();
                let mut rz = linalg::dot(&r, &z);
                let cap = 20 * x.len() + 200;
                let mut iterations = 0;
                loop {
                    let target = 0.25 * X_RESIDUAL_TOL * (1.0 + linalg::norm2(&x));
                    if linalg::norm2(&r) <= target {
                        // The CG residual is the subproblem gradient; accept
                        // only if the exactly recomputed one agrees.
                        let grad = Self::subproblem_gradient(problem, &x, y_new, p, alpha)?;
                        let res = linalg::norm2(&grad);
                        if res <= X_RESIDUAL_TOL * (1.0 + linalg::norm2(&x)) {
                            return Ok((x, res));
                        }
                        r = rhs.clone();
                        let ax = matvec(&x)?;
                        linalg::axpy(-1.0, &ax, &mut r);
                        z = apply_precond(&r);
                        d = z.clone();
                        rz = linalg::dot(&r, &z);
                    }
                    if iterations >= cap {
                        return Err(SolverError::LinearSolveFailed {
                            residual: linalg::norm2(&r),
                            iterations,
                        });
                    }
                    iterations += 1;
                    let ad = matvec(&d)?;
                    let dad = linalg::dot(&d, &ad);
                    if dad <= 0.0 || !dad.is_finite() {
                        return Err(SolverError::LinearSolveFailed {
                            residual: linalg::norm2(&r),
                            iterations,
                        });
                    }
                    let step = rz / dad;
                    linalg::axpy(step, &d, &mut x);
                    linalg::axpy(-step, &ad, &mut r);
                    if iterations % 64 == 0 {
                        // Fight residual drift with an exact recomputation.
                        r = rhs.clone();
                        let ax = matvec(&x)?;
                        linalg::axpy(-1.0, &ax, &mut r);
                    }
                    z = apply_precond(&r);
                    let rz_new = linalg::dot(&r, &z);
                    let beta = rz_new / rz;
                    rz = rz_new;
                    for (di, zi) in d.iter_mut().zip(&z) {
                        *di = zi + beta * *di;
                    }
                }
            }
            Self::Descent { norm_a } => {
                // Barzilai-Borwein gradient iteration with a Lipschitz seed.
                let lip = problem.loss.lipschitz_gradient() + alpha * *norm_a * *norm_a;
                let mut x = warm.to_vec();
                let mut grad = Self::subproblem_gradient(problem, &x, y_new, p, alpha)?;
                let mut step = 1.0 / lip.max(1e-12);
                let cap = 200_000;
                for it in 0..cap {
                    let res = linalg::norm2(&grad);
                    if res <= X_RESIDUAL_TOL * (1.0 + linalg::norm2(&x)) {
                        return Ok((x, res));
                    }
                    let x_old = x.clone();
                    let g_old = grad.clone();
                    linalg::axpy(-step, &grad, &mut x);
                    grad = Self::subproblem_gradient(problem, &x, y_new, p, alpha)?;
                    let dx = linalg::sub(&x, &x_old);
                    let dg = linalg::sub(&grad, &g_old);
                    let dgdg = linalg::dot(&dg, &dg);
                    if dgdg > 0.0 {
                        step = (linalg::dot(&dx, &dg) / dgdg).clamp(1e-12 / lip, 1e6 / lip);
                    }
                    if it == cap - 1 {
                        return Err(SolverError::LinearSolveFailed {
                            residual: res,
                            iterations: cap,
                        });
                    }
                }
                unreachable!()
            }
        }
    }
}

/// The iteratively linearized reweighted ADMM solver.
pub struct IlrAdmm<'a> {
    engine: Engine<'a>,
}

impl<'a> IlrAdmm<'a> {
    pub fn new(problem: &'a ProblemSpec, config: SolverConfig) -> Result<Self, SolverError> {
        Ok(Self {
            engine: Engine::new(problem, config, YRule::Linearized)?,
        })
    }

    pub fn norm_b(&self) -> f64 {
        self.engine.norm_b
    }

    pub fn initial_state(&self) -> Result<SolverState, SolverError> {
        self.engine.initial_state()
    }

    /// The weighted proximal y-step at the current state.
    pub fn y_update(&self, state: &SolverState) -> Result<Vec<f64>, SolverError> {
        self.engine.linearized_prox_step(
            &state.x,
            &state.y,
            &state.p,
            state.alpha,
            state.r,
            &state.weights,
        )
    }

    /// Exact x-subproblem minimization given the already-updated y; also
    /// returns the achieved subproblem-gradient residual.
    pub fn x_update(
        &mut self,
        state: &SolverState,
        y_new: &[f64],
    ) -> Result<(Vec<f64>, f64), SolverError> {
        self.engine.x_step(y_new, &state.p, state.alpha, &state.x)
    }

    /// `p + alpha (A x_new + B y_new - c)`.
    pub fn p_update(
        &self,
        state: &SolverState,
        x_new: &[f64],
        y_new: &[f64],
    ) -> Result<Vec<f64>, SolverError> {
        Ok(self
            .engine
            .dual_step(x_new, y_new, &state.p, state.alpha)?
            .0)
    }

    /// One full iteration in place: y, x, dual, weight refresh, schedule.
    pub fn step(&mut self, state: &mut SolverState) -> Result<StepInfo, SolverError> {
        self.engine.step(state)
    }

    pub fn run(&mut self) -> Result<SolveOutcome, SolverError> {
        self.engine.run(|_| None)
    }

    /// Like [`run`](Self::run) but calls `observer` after every iteration; a
    /// returned value lands in the trace's SNR column.
    pub fn run_observed(
        &mut self,
        observer: impl FnMut(&SolverState) -> Option<f64>,
    ) -> Result<SolveOutcome, SolverError> {
        self.engine.run(observer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::LinearOperator;

    fn small_problem() -> ProblemSpec {
        // f(x) = 0.5 |x - 1|^2, A = I, B = -I, c = 0, sqrt penalty.
        let n = 2;
        let psi = LinearOperator::identity(n);
        let loss = SmoothLoss::quadratic(psi, vec![1.0; n]).unwrap();
        let constraints = ConstraintSystem::new(
            LinearOperator::identity(n),
            LinearOperator::scaled_identity(n, -1.0),
            vec![0.0; n],
        )
        .unwrap();
        let outer = ConcaveOuter::power(0.5, 1e-7, 0.1).unwrap();
        ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs).unwrap()
    }

    #[test]
    fn y_update_matches_hand_computation() {
        // One dimension: A = [1], B = [1], c = 0, h = abs, w = 1, r = 2,
        // x = 0, y = 1, p = 0, alpha = 1. Prox argument 0.5 equals the
        // threshold w / r = 0.5, so the update lands exactly at zero.
        let loss = SmoothLoss::quadratic(LinearOperator::identity(1), vec![0.0]).unwrap();
        let constraints = ConstraintSystem::new(
            LinearOperator::identity(1),
            LinearOperator::identity(1),
            vec![0.0],
        )
        .unwrap();
        let outer = ConcaveOuter::power(1.0, 0.0, 1.0).unwrap();
        let problem = ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs).unwrap();
        let config = SolverConfig {
            alpha0: 1.0,
            alpha_max: 1.0,
            r_margin: 1.0, // r = 1*1 + 1 = 2
            ..Default::default()
        };
        let solver = IlrAdmm::new(&problem, config).unwrap();
        let mut state = solver.initial_state().unwrap();
        state.x = vec![0.0];
        state.y = vec![1.0];
        state.p = vec![0.0];
        let y_new = solver.y_update(&state).unwrap();
        assert_eq!(y_new, vec![0.0]);
    }

    #[test]
    fn x_update_solves_normal_equation() {
        // f(x) = 0.5 |x - 1|^2, A = I, B = -I, c = 0, p = 0, alpha = 1,
        // y_new = 0: (1 + alpha) x = 1 so x = 0.5.
        let problem = small_problem();
        let config = SolverConfig {
            alpha0: 1.0,
            alpha_max: 1.0,
            ..Default::default()
        };
        let mut solver = IlrAdmm::new(&problem, config).unwrap();
        let state = solver.initial_state().unwrap();
        let (x, res) = solver.x_update(&state, &[0.0, 0.0]).unwrap();
        for v in &x {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(res <= X_RESIDUAL_TOL * (1.0 + linalg::norm2(&x)));
    }

    #[test]
    fn x_update_unconstrained_minimizer_at_feasibility() {
        // A = I, By_new = c: penalty term vanishes at x = b, p = 0.
        let n = 3;
        let b = vec![1.0; n];
        let loss = SmoothLoss::quadratic(LinearOperator::identity(n), b.clone()).unwrap();
        let constraints = ConstraintSystem::new(
            LinearOperator::identity(n),
            LinearOperator::scaled_identity(n, -1.0),
            vec![0.0; n],
        )
        .unwrap();
        let outer = ConcaveOuter::power(0.5, 1e-7, 1.0).unwrap();
        let problem = ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs).unwrap();
        let mut solver = IlrAdmm::new(&problem, SolverConfig::default()).unwrap();
        let state = solver.initial_state().unwrap();
        // y_new = b makes A x + B y - c event out exactly at x = b.
        let (x, _) = solver.x_update(&state, &b).unwrap();
        for v in &x {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn p_update_is_scaled_residual() {
        let problem = small_problem();
        let config = SolverConfig {
            alpha0: 1.0,
            alpha_max: 1.0,
            ..Default::default()
        };
        let solver = IlrAdmm::new(&problem, config).unwrap();
        let mut state = solver.initial_state().unwrap();
        state.p = vec![0.0, 0.0];
        // A x + B y - c = x - y = (1, -1)
        let p_new = solver.p_update(&state, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(p_new, vec![1.0, -1.0]);

        // Feasible point leaves p unchanged.
        let p_same = solver.p_update(&state, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(p_same, vec![0.0, 0.0]);
    }

    #[test]
    fn step_increments_k_and_never_decreases_alpha() {
        let problem = small_problem();
        let config = SolverConfig {
            alpha0: 1.0,
            rho: 1.05,
            alpha_max: 2.0,
            ..Default::default()
        };
        let mut solver = IlrAdmm::new(&problem, config).unwrap();
        let mut state = solver.initial_state().unwrap();
        let mut last_alpha = state.alpha;
        for k in 1..=30 {
            solver.step(&mut state).unwrap();
            assert_eq!(state.k, k);
            assert!(state.alpha >= last_alpha);
            assert!(state.alpha <= 2.0);
            last_alpha = state.alpha;
        }
        assert_eq!(state.alpha, 2.0);
    }

    #[test]
    fn schedule_examples() {
        let config = SolverConfig {
            rho: 1.05,
            alpha_max: 1000.0,
            r_margin: 1e-6,
            ..Default::default()
        };
        let (a, _) = alpha_schedule(1000.0, &config, 1.0);
        assert_eq!(a, 1000.0);
        let (a, _) = alpha_schedule(1.0, &config, 1.0);
        assert!((a - 1.05).abs() < 1e-15);
        let (_, r) = alpha_schedule(2.0 / 1.05, &config, 1.0);
        assert!((r - (2.0 + 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn run_respects_max_iter_and_traces_every_iteration() {
        let problem = small_problem();
        let config = SolverConfig {
            max_iter: 17,
            step_tol: 1e-300,
            primal_tol: 1e-300,
            ..Default::default()
        };
        let mut solver = IlrAdmm::new(&problem, config).unwrap();
        let outcome = solver.run().unwrap();
        assert_eq!(outcome.trace.len(), 17);
        assert!(!outcome.converged);
        assert!(outcome.trace.all_finite());
    }

    #[test]
    fn run_converges_on_benign_problem() {
        let problem = small_problem();
        let config = SolverConfig {
            alpha0: 10.0,
            alpha_max: 10.0,
            max_iter: 4000,
            primal_tol: 1e-8,
            step_tol: 1e-10,
            ..Default::default()
        };
        let mut solver = IlrAdmm::new(&problem, config).unwrap();
        let outcome = solver.run().unwrap();
        assert!(
            outcome.converged,
            "final primal residual: {:?}",
            outcome.trace.rows().last().map(|r| r.primal_residual)
        );
        assert!(outcome.trace.rows().last().unwrap().primal_residual <= 1e-8);
    }

    #[test]
    fn custom_loss_matches_quadratic_route() {
        // The same least-squares loss expressed through closures must give the
        // same x-step as the quadratic fast path.
        let n = 4;
        let target: Vec<f64> = (0..n).map(|i| i as f64 / 2.0).collect();
        let t2 = target.clone();
        let loss = SmoothLoss::custom(
            n,
            Arc::new(move |x: &[f64]| {
                0.5 * x
                    .iter()
                    .zip(&target)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }),
            Arc::new(move |x: &[f64]| x.iter().zip(&t2).map(|(a, b)| a - b).collect()),
            1.0,
        );
        let constraints = ConstraintSystem::new(
            LinearOperator::identity(n),
            LinearOperator::scaled_identity(n, -1.0),
            vec![0.0; n],
        )
        .unwrap();
        let outer = ConcaveOuter::power(0.5, 1e-7, 0.05).unwrap();
        let problem = ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs).unwrap();
        let config = SolverConfig {
            alpha0: 2.0,
            alpha_max: 2.0,
            ..Default::default()
        };
        let mut solver = IlrAdmm::new(&problem, config).unwrap();
        let state = solver.initial_state().unwrap();
        let y_new = vec![0.1; n];
        let (x_custom, res) = solver.x_update(&state, &y_new).unwrap();
        assert!(res <= X_RESIDUAL_TOL * (1.0 + linalg::norm2(&x_custom)));

        // closed form: (I + alpha I) x = target + alpha * y_new
        for i in 0..n {
            let expect =
                ((0..n).map(|j| j as f64 / 2.0).collect::<Vec<_>>()[i] + 2.0 * y_new[i]) / 3.0;
            assert!(
                (x_custom[i] - expect).abs() < 1e-7,
                "{} vs {}",
                x_custom[i],
                expect
            );
        }
    }

    #[test]
    fn gradient_checks_by_finite_differences() {
        let mut rng = crate::rng::SplitMix64::new(5);
        let m = crate::linalg::DenseMatrix::from_fn(6, 4, |_, _| rng.standard_normal());
        let op = LinearOperator::dense(m);
        let mut data = vec![0.0; 6];
        rng.fill_standard_normal(&mut data);
        let loss = SmoothLoss::quadratic(op, data).unwrap();
        let mut x = vec![0.0; 4];
        rng.fill_standard_normal(&mut x);
        let grad = loss.gradient(&x);
        let h = 1e-6;
        let mut fd = vec![0.0; 4];
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (loss.value(&xp) - loss.value(&xm)) / (2.0 * h);
        }
        let diff = linalg::sub(&grad, &fd);
        assert!(linalg::norm2(&diff) <= 1e-5 * (1.0 + linalg::norm2(&grad)));
    }

    #[test]
    fn quadratic_gradient_is_lipschitz() {
        let mut rng = crate::rng::SplitMix64::new(6);
        let m = crate::linalg::DenseMatrix::from_fn(5, 5, |_, _| rng.standard_normal());
        let op = LinearOperator::dense(m);
        let loss = SmoothLoss::quadratic(op, vec![0.0; 5]).unwrap();
        let lf = loss.lipschitz_gradient();
        for _ in 0..200 {
            let mut a = vec![0.0; 5];
            let mut b = vec![0.0; 5];
            rng.fill_standard_normal(&mut a);
            rng.fill_standard_normal(&mut b);
            let dg = linalg::sub(&loss.gradient(&a), &loss.gradient(&b));
            let dx = linalg::sub(&a, &b);
            assert!(linalg::norm2(&dg) <= lf * linalg::norm2(&dx) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut config = SolverConfig::default();
        config.alpha0 = 0.0;
        assert!(config.validate().is_err());
        let mut config = SolverConfig::default();
        config.rho = 0.9;
        assert!(config.validate().is_err());
        let mut config = SolverConfig::default();
        config.r_margin = 0.0;
        assert!(config.validate().is_err());
        let mut config = SolverConfig::default();
        config.alpha_max = 0.5;
        assert!(config.validate().is_err());
    }
}
