//! Seeded test instances used by the verification suite, the CLI `solve`
//! subcommand and the integration tests.

use crate::linalg::{self, DenseMatrix};
use crate::operators::{ConstraintSystem, LinearOperator};
use crate::penalties::{ConcaveOuter, InnerConvex};
use crate::rng::SplitMix64;
use crate::solver::{InitialPoint, ProblemSpec, SmoothLoss, SolverError};

/// Parameters of the seeded dense quadratic family
/// `min 0.5 |Psi x - b|^2 + sigma sum (|y_i| + eps)^q  s.t.  A x - y = 0`.
///
/// `A` and `Psi` are built as `Q1 D Q2^T` with prescribed singular values in
/// `[1, 2]`, so the spectral constants are known exactly by construction:
/// `theta(A) = 1`, `|A| = 2`, `L_f = |Psi|^2 = 4`.
#[derive(Debug, Clone)]
pub struct DenseInstanceParams {
    pub dim: usize,
    pub seed: u64,
    pub q: f64,
    pub epsilon: f64,
    pub sigma: f64,
}

impl Default for DenseInstanceParams {
    fn default() -> Self {
        Self {
            dim: 20,
            seed: 2024,
            q: 0.5,
            epsilon: 1e-7,
            sigma: 0.5,
        }
    }
}

/// Builds a full-row-rank dense instance with B = -I and c = 0.
pub fn dense_random_instance(params: &DenseInstanceParams) -> Result<ProblemSpec, SolverError> {
    let n = params.dim;
    let mut rng = SplitMix64::new(params.seed);
    let a = matrix_with_spectrum(n, 1.0, 2.0, &mut rng);
    let psi = matrix_with_spectrum(n, 1.0, 2.0, &mut rng);
    let mut data = vec![0.0; n];
    rng.fill_standard_normal(&mut data);
    let loss = SmoothLoss::quadratic(LinearOperator::dense(psi), data)?;
    let constraints = ConstraintSystem::new(
        LinearOperator::dense(a),
        LinearOperator::scaled_identity(n, -1.0),
        vec![0.0; n],
    )?;
    let outer = ConcaveOuter::power(params.q, params.epsilon, params.sigma)?;
    ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs)
}

/// Unconstrained minimizer of a quadratic loss by dense normal equations;
/// used to start runs at a point where the gradient-multiplier identity
/// `grad f(x0) = -A^T p0` holds exactly with `p0 = 0`.
pub fn quadratic_loss_minimizer(problem: &ProblemSpec) -> Result<Vec<f64>, SolverError> {
    let SmoothLoss::Quadratic { operator, data, .. } = &problem.loss else {
        return Err(SolverError::UnsupportedStructure(
            "loss minimizer initialization requires a quadratic loss".into(),
        ));
    };
    let dense = operator.to_dense()?;
    let rhs = dense.matvec_transpose(data);
    Ok(dense.gram().cholesky()?.solve(&rhs))
}

/// `Q1 diag(s) Q2^T` with singular values spread linearly over [lo, hi].
pub fn matrix_with_spectrum(n: usize, lo: f64, hi: f64, rng: &mut SplitMix64) -> DenseMatrix {
    let q1 = linalg::random_orthogonal(n, rng);
    let q2 = linalg::random_orthogonal(n, rng);
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let s = if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        };
        d.set(i, i, s);
    }
    q1.matmul(&d).matmul(&q2.transpose())
}

/// An instance together with an exactly critical starting point:
/// `f(x) = 0.5 |x - xhat|^2`, `A = I`, `B = -I`, `c = x*`, `y* = 0`,
/// `p* = xhat - x*` chosen small enough that `-B^T p*` stays inside
/// `W* dh(0)`. Every update of the solver fixes this point exactly.
pub struct CriticalPointInstance {
    pub problem: ProblemSpec,
    pub stationary: InitialPoint,
}

pub fn critical_point_instance() -> Result<CriticalPointInstance, SolverError> {
    let n = 2;
    // sqrt-type penalty with enough smoothing that w*(0) = 0.5 / sqrt(1e-2) = 5.
    let outer = ConcaveOuter::power(0.5, 1e-2, 1.0)?;
    let p_star = vec![1.0, -2.0]; // |p_i| <= 5 keeps 0 a fixed point of the prox
    let x_star = vec![0.4, -0.7];
    let xhat: Vec<f64> = x_star.iter().zip(&p_star).map(|(x, p)| x + p).collect();
    let loss = SmoothLoss::quadratic(LinearOperator::identity(n), xhat)?;
    let constraints = ConstraintSystem::new(
        LinearOperator::identity(n),
        LinearOperator::scaled_identity(n, -1.0),
        x_star.clone(),
    )?;
    let problem = ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs)?;
    Ok(CriticalPointInstance {
        problem,
        stationary: InitialPoint {
            x: x_star,
            y: vec![0.0; n],
            p: p_star,
        },
    })
}
