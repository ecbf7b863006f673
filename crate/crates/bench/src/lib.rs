//! Shared fixtures for the criterion benchmarks.

use ilradmm::experiments::{ExperimentConfig, InputSource};
use ilradmm::instances::{DenseInstanceParams, dense_random_instance};
use ilradmm::solver::ProblemSpec;

pub fn dense_problem(dim: usize) -> ProblemSpec {
    dense_random_instance(&DenseInstanceParams {
        dim,
        seed: 11,
        q: 0.5,
        epsilon: 1e-7,
        sigma: 0.5,
    })
    .expect("benchmark instance")
}

pub fn deblur_config(side: usize, max_iter: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.input = InputSource::Phantom {
        width: side,
        height: side,
    };
    cfg.max_iter = max_iter;
    cfg.seed = 7;
    cfg
}
