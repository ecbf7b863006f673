//! The two comparison algorithms.
//!
//! Both keep the x-step, dual step, schedule and trace of the main solver and
//! replace only the y-step:
//! - direct nonconvex ADMM solves the nonconvex y-subproblem exactly,
//!   entrywise, through the global scalar prox (so B must be a scaled
//!   identity for the subproblem to separate);
//! - in-loop ADMM approximates the same subproblem with a fixed-length inner
//!   loop of reweighted proximal steps, refreshing weights at every inner
//!   iterate.
//!
//! With one inner iteration the in-loop y-step coincides bit for bit with the
//! main solver's y-step: both call the same linearized proximal step with
//! weights frozen at the outer point.

use crate::solver::{
    Engine, ProblemSpec, SolveOutcome, SolverConfig, SolverError, SolverState, StepInfo, YRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Exact entrywise nonconvex y-subproblem.
    Direct,
    /// Inner proximal-reweighted loop for the y-subproblem.
    InLoop,
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub solver: SolverConfig,
    /// Inner iteration count for the in-loop variant; >= 1.
    pub inner_iters: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            inner_iters: 10,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        self.solver.validate()?;
        if self.inner_iters == 0 {
            return Err(SolverError::InvalidConfig(
                "inner_iters must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub struct BaselineAdmm<'a> {
    engine: Engine<'a>,
    kind: BaselineKind,
}

impl<'a> BaselineAdmm<'a> {
    pub fn new(
        kind: BaselineKind,
        problem: &'a ProblemSpec,
        config: &BaselineConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        let rule = match kind {
            BaselineKind::Direct => YRule::ExactScalar,
            BaselineKind::InLoop => YRule::InnerLoop(config.inner_iters),
        };
        Ok(Self {
            engine: Engine::new(problem, config.solver.clone(), rule)?,
            kind,
        })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn initial_state(&self) -> Result<SolverState, SolverError> {
        self.engine.initial_state()
    }

    /// Exact-prox y-step followed by the shared x/dual/schedule updates.
    pub fn step(&mut self, state: &mut SolverState) -> Result<StepInfo, SolverError> {
        self.engine.step(state)
    }

    /// The y-step alone, for update-level comparisons.
    pub fn y_update(&self, state: &SolverState) -> Result<Vec<f64>, SolverError> {
        match self.kind {
            BaselineKind::Direct => self
                .engine
                .exact_scalar_step(&state.x, &state.p, state.alpha),
            BaselineKind::InLoop => {
                let YRule::InnerLoop(iters) = self.engine.rule else {
                    unreachable!()
                };
                self.engine.inner_loop_step(
                    &state.x,
                    &state.y,
                    &state.p,
                    state.alpha,
                    state.r,
                    iters,
                )
            }
        }
    }

    pub fn run(&mut self) -> Result<SolveOutcome, SolverError> {
        self.engine.run(|_| None)
    }

    pub fn run_observed(
        &mut self,
        observer: impl FnMut(&SolverState) -> Option<f64>,
    ) -> Result<SolveOutcome, SolverError> {
        self.engine.run(observer)
    }
}

/// Convenience runner producing the same outcome/trace schema as the main
/// solver.
pub fn run_baseline(
    kind: BaselineKind,
    problem: &ProblemSpec,
    config: &BaselineConfig,
) -> Result<SolveOutcome, SolverError> {
    BaselineAdmm::new(kind, problem, config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::grid_prox_oracle;
    use crate::linalg::{self, DenseMatrix};
    use crate::operators::{ConstraintSystem, LinearOperator};
    use crate::penalties::{ConcaveOuter, InnerConvex, compute_weights};
    use crate::rng::SplitMix64;
    use crate::solver::{IlrAdmm, SmoothLoss, SolverConfig};

    fn seeded_problem(n: usize, sigma: f64, seed: u64) -> ProblemSpec {
        let mut rng = SplitMix64::new(seed);
        let psi = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 + rng.standard_normal() * 0.1
            } else {
                0.2 * rng.standard_normal()
            }
        });
        let mut data = vec![0.0; n];
        rng.fill_standard_normal(&mut data);
        let loss = SmoothLoss::quadratic(LinearOperator::dense(psi), data).unwrap();
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.5
            } else {
                0.1 * rng.standard_normal()
            }
        });
        let constraints = ConstraintSystem::new(
            LinearOperator::dense(a),
            LinearOperator::scaled_identity(n, -1.0),
            vec![0.0; n],
        )
        .unwrap();
        let outer = ConcaveOuter::power(0.5, 1e-7, sigma).unwrap();
        ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs).unwrap()
    }

    fn config(alpha: f64) -> BaselineConfig {
        BaselineConfig {
            solver: SolverConfig {
                alpha0: alpha,
                alpha_max: alpha,
                ..Default::default()
            },
            inner_iters: 10,
        }
    }

    /// True (un-linearized) y-subproblem objective at fixed (x, p, alpha):
    /// penalty + <p, By> + (alpha/2) |Ax + By - c|^2.
    fn y_subproblem_objective(
        problem: &ProblemSpec,
        x: &[f64],
        p: &[f64],
        alpha: f64,
        y: &[f64],
    ) -> f64 {
        let resid = problem.constraints.residual(x, y).unwrap();
        let by = problem.constraints.b.apply(y).unwrap();
        let mut v = 0.0;
        for &yi in y {
            v += problem.outer.value(problem.inner.value(yi)).unwrap();
        }
        v + linalg::dot(p, &by) + 0.5 * alpha * linalg::dot(&resid, &resid)
    }

    #[test]
    fn zero_scale_direct_step_returns_shifted_point() {
        // sigma = 0 removes the penalty: the exact y-step is the quadratic
        // minimizer A x - c + p / alpha (for B = -I).
        let n = 5;
        let mut problem = seeded_problem(n, 0.3, 11);
        problem.outer = ConcaveOuter::power(0.5, 1e-7, 0.0).unwrap();
        let cfg = config(2.0);
        let baseline = BaselineAdmm::new(BaselineKind::Direct, &problem, &cfg).unwrap();
        let mut state = baseline.initial_state().unwrap();
        let mut rng = SplitMix64::new(3);
        rng.fill_standard_normal(&mut state.x);
        rng.fill_standard_normal(&mut state.p);
        let y = baseline.y_update(&state).unwrap();
        let ax = problem.constraints.a.apply(&state.x).unwrap();
        for i in 0..n {
            let expect = ax[i] + state.p[i] / 2.0;
            assert!((y[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_step_zero_argument_gives_zero() {
        let n = 3;
        let problem = seeded_problem(n, 0.5, 7);
        let cfg = config(1.5);
        let baseline = BaselineAdmm::new(BaselineKind::Direct, &problem, &cfg).unwrap();
        let mut state = baseline.initial_state().unwrap();
        state.x = vec![0.0; n];
        state.p = vec![0.0; n];
        let y = baseline.y_update(&state).unwrap();
        assert_eq!(y, vec![0.0; n]);
    }

    #[test]
    fn direct_step_matches_grid_oracle_entrywise() {
        let n = 6;
        let problem = seeded_problem(n, 0.4, 23);
        let cfg = config(2.5);
        let baseline = BaselineAdmm::new(BaselineKind::Direct, &problem, &cfg).unwrap();
        let mut state = baseline.initial_state().unwrap();
        let mut rng = SplitMix64::new(40);
        rng.fill_standard_normal(&mut state.x);
        rng.fill_standard_normal(&mut state.p);
        let y = baseline.y_update(&state).unwrap();

        let alpha = state.alpha;
        let ax = problem.constraints.a.apply(&state.x).unwrap();
        for i in 0..n {
            let z = ax[i] + state.p[i] / alpha;
            let outer = problem.outer.clone();
            let oracle = grid_prox_oracle(
                |t| outer.value(t.abs()).unwrap() + 0.5 * alpha * (t - z) * (t - z),
                -z.abs() - 1.0,
                z.abs() + 1.0,
                1e-4,
            )
            .unwrap();
            assert!(
                (y[i] - oracle).abs() <= 1e-3,
                "coordinate {i}: {} vs {}",
                y[i],
                oracle
            );
        }
    }

    #[test]
    fn direct_requires_scaled_identity_b() {
        let n = 4;
        let mut problem = seeded_problem(n, 0.4, 5);
        problem.constraints = ConstraintSystem::new(
            problem.constraints.a.clone(),
            LinearOperator::dense(DenseMatrix::identity(n)),
            vec![0.0; n],
        )
        .unwrap();
        let cfg = config(1.0);
        let baseline = BaselineAdmm::new(BaselineKind::Direct, &problem, &cfg).unwrap();
        let state = baseline.initial_state().unwrap();
        assert!(matches!(
            baseline.y_update(&state),
            Err(SolverError::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn single_inner_iteration_reproduces_linearized_step_bitwise() {
        let n = 7;
        let problem = seeded_problem(n, 0.6, 29);
        let cfg = BaselineConfig {
            solver: SolverConfig {
                alpha0: 3.0,
                alpha_max: 3.0,
                ..Default::default()
            },
            inner_iters: 1,
        };
        let inloop = BaselineAdmm::new(BaselineKind::InLoop, &problem, &cfg).unwrap();
        let ilr = IlrAdmm::new(&problem, cfg.solver.clone()).unwrap();
        let mut state = inloop.initial_state().unwrap();
        let mut rng = SplitMix64::new(55);
        rng.fill_standard_normal(&mut state.x);
        rng.fill_standard_normal(&mut state.y);
        rng.fill_standard_normal(&mut state.p);
        state.weights = compute_weights(&problem.outer, problem.inner, &state.y).unwrap();
        let a = inloop.y_update(&state).unwrap();
        let b = ilr.y_update(&state).unwrap();
        assert_eq!(
            a, b,
            "one inner iteration must equal the linearized step exactly"
        );
    }

    #[test]
    fn inner_objective_nonincreasing_in_inner_iterations() {
        let n = 6;
        let problem = seeded_problem(n, 0.8, 31);
        let mut rng = SplitMix64::new(77);
        let mut state_template = None;
        let mut last = f64::INFINITY;
        for iters in 1..=10 {
            let cfg = BaselineConfig {
                solver: SolverConfig {
                    alpha0: 2.0,
                    alpha_max: 2.0,
                    ..Default::default()
                },
                inner_iters: iters,
            };
            let baseline = BaselineAdmm::new(BaselineKind::InLoop, &problem, &cfg).unwrap();
            let state = state_template.get_or_insert_with(|| {
                let mut s = baseline.initial_state().unwrap();
                rng.fill_standard_normal(&mut s.x);
                rng.fill_standard_normal(&mut s.y);
                rng.fill_standard_normal(&mut s.p);
                s.weights = compute_weights(&problem.outer, problem.inner, &s.y).unwrap();
                s
            });
            let y = baseline.y_update(state).unwrap();
            let obj = y_subproblem_objective(&problem, &state.x, &state.p, state.alpha, &y);
            assert!(
                obj <= last + 1e-10,
                "inner objective rose at {iters} iterations: {obj} > {last}"
            );
            last = obj;
        }
    }

    #[test]
    fn exact_prox_dominates_one_linearized_step() {
        let n = 8;
        let problem = seeded_problem(n, 0.7, 41);
        let cfg = config(2.0);
        let direct = BaselineAdmm::new(BaselineKind::Direct, &problem, &cfg).unwrap();
        let ilr = IlrAdmm::new(&problem, cfg.solver.clone()).unwrap();
        let mut state = direct.initial_state().unwrap();
        let mut rng = SplitMix64::new(91);
        rng.fill_standard_normal(&mut state.x);
        rng.fill_standard_normal(&mut state.y);
        rng.fill_standard_normal(&mut state.p);
        state.weights = compute_weights(&problem.outer, problem.inner, &state.y).unwrap();
        let y_exact = direct.y_update(&state).unwrap();
        let y_lin = ilr.y_update(&state).unwrap();
        let f_exact = y_subproblem_objective(&problem, &state.x, &state.p, state.alpha, &y_exact);
        let f_lin = y_subproblem_objective(&problem, &state.x, &state.p, state.alpha, &y_lin);
        assert!(
            f_exact <= f_lin + 1e-8 * (1.0 + f_lin.abs()),
            "exact prox must not lose to the linearized step: {f_exact} vs {f_lin}"
        );
    }

    #[test]
    fn run_honors_iteration_cap_and_trace_schema() {
        let n = 5;
        let problem = seeded_problem(n, 0.2, 13);
        let mut cfg = config(2.0);
        cfg.solver.max_iter = 12;
        cfg.solver.primal_tol = 1e-300;
        cfg.solver.step_tol = 1e-300;
        for kind in [BaselineKind::Direct, BaselineKind::InLoop] {
            let outcome = run_baseline(kind, &problem, &cfg).unwrap();
            assert_eq!(outcome.trace.len(), 12);
            for row in outcome.trace.rows() {
                assert!(row.lagrangian.is_finite());
                assert!(row.kkt.is_finite());
                assert!(row.weight_min > 0.0);
            }
        }
    }

    #[test]
    fn inner_iters_zero_rejected() {
        let n = 3;
        let problem = seeded_problem(n, 0.2, 2);
        let cfg = BaselineConfig {
            solver: SolverConfig::default(),
            inner_iters: 0,
        };
        assert!(BaselineAdmm::new(BaselineKind::InLoop, &problem, &cfg).is_err());
    }
}
