//! The deblurring experiment pipeline.
//!
//! Assembles the image-restoration problem
//! `min 0.5 |f0 - Psi u|^2 + sigma_reg sum (|(T u)_i| + eps)^q` over the
//! splitting `T u - v = 0` (A = forward differences, B = -I, c = 0), degrades
//! a reference image with a periodic Gaussian blur plus seeded noise, runs the
//! configured algorithm, and emits per-iteration CSV traces with an SNR
//! column. Every output is a pure function of the configuration, including
//! the seed.

use crate::baselines::{BaselineAdmm, BaselineConfig, BaselineKind};
use crate::diagnostics::IterateTrace;
use crate::image::{self, ImageBuffer, ImageError};
use crate::operators::{ConstraintSystem, Kernel2d, LinearOperator};
use crate::penalties::{ConcaveOuter, InnerConvex};
use crate::solver::{
    IlrAdmm, InitialPoint, ProblemSpec, SmoothLoss, SolveOutcome, SolverConfig, SolverError,
};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const CSV_HEADER: &str =
    "iter,alpha,r,lagrangian,primal_residual,step_x,step_y,dual_step,kkt,weight_min,weight_max,snr";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Operator(#[from] crate::operators::OperatorError),
    #[error(transparent)]
    Penalty(#[from] crate::penalties::PenaltyError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    /// Reweighted linearized ADMM.
    Ilr,
    /// Direct nonconvex ADMM with the exact scalar prox.
    Direct,
    /// ADMM with an inner reweighted proximal loop.
    InLoop,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ilr => "ilr",
            Self::Direct => "direct",
            Self::InLoop => "inloop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ilr" => Some(Self::Ilr),
            "direct" => Some(Self::Direct),
            "inloop" => Some(Self::InLoop),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum InputSource {
    Phantom { width: usize, height: usize },
    Pgm(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub input: InputSource,
    pub kernel_size: usize,
    pub kernel_width: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub q: f64,
    pub epsilon: f64,
    pub sigma_reg: f64,
    pub algorithm: AlgorithmKind,
    pub inner_iters: usize,
    pub alpha0: f64,
    pub rho: f64,
    pub alpha_max: f64,
    pub r_margin: f64,
    pub max_iter: usize,
    pub primal_tol: f64,
    pub step_tol: f64,
    pub repeats: usize,
    pub trace_path: Option<PathBuf>,
    pub out_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputSource::Phantom {
                width: 64,
                height: 64,
            },
            kernel_size: 9,
            kernel_width: 2.0,
            noise_std: 0.01,
            seed: 0,
            q: 0.5,
            epsilon: 1e-7,
            sigma_reg: 1e-4,
            algorithm: AlgorithmKind::Ilr,
            inner_iters: 10,
            alpha0: 1.0,
            rho: 1.05,
            alpha_max: 1e3,
            r_margin: 1e-6,
            max_iter: 200,
            primal_tol: 1e-6,
            step_tol: 1e-8,
            repeats: 1,
            trace_path: None,
            out_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "q must lie in (0, 1], got {}",
                self.q
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.sigma_reg >= 0.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "sigma_reg must be >= 0, got {}",
                self.sigma_reg
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(ExperimentError::InvalidConfig(format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.repeats == 0 {
            return Err(ExperimentError::InvalidConfig(
                "repeats must be >= 1".into(),
            ));
        }
        if self.inner_iters == 0 {
            return Err(ExperimentError::InvalidConfig(
                "inner_iters must be >= 1".into(),
            ));
        }
        self.solver_config(None).validate()?;
        Ok(())
    }

    pub fn solver_config(&self, init: Option<InitialPoint>) -> SolverConfig {
        SolverConfig {
            alpha0: self.alpha0,
            rho: self.rho,
            alpha_max: self.alpha_max,
            r_margin: self.r_margin,
            max_iter: self.max_iter,
            primal_tol: self.primal_tol,
            step_tol: self.step_tol,
            seed: self.seed,
            init,
        }
    }
}

/// The restoration problem assembled around a degraded observation.
pub struct DeblurProblem {
    pub problem: ProblemSpec,
    pub original: ImageBuffer,
    pub degraded: ImageBuffer,
    pub init: InitialPoint,
    pub width: usize,
    pub height: usize,
}

/// Loads or generates the reference image, degrades it (blur, seeded noise,
/// clamp into [0, 1]), and assembles the splitting problem with the degraded
/// image as the initial x.
pub fn assemble_deblur(
    config: &ExperimentConfig,
    noise_seed: u64,
) -> Result<DeblurProblem, ExperimentError> {
    config.validate()?;
    let original = match &config.input {
        InputSource::Phantom { width, height } => {
            image::phantom_image(*width, *height, config.seed)?
        }
        InputSource::Pgm(path) => image::load_pgm(path)?,
    };
    let (width, height) = (original.width(), original.height());
    let kernel_weights = image::gaussian_kernel(config.kernel_size, config.kernel_width)?;
    let kernel = Kernel2d::new(config.kernel_size, kernel_weights)?;
    let psi = LinearOperator::convolution_2d(height, width, kernel)?;

    let blurred_vec = psi.apply(original.pixels())?;
    let blurred = ImageBuffer::from_vector_clamped(width, height, &blurred_vec)?;
    let degraded = image::add_noise(&blurred, config.noise_std, noise_seed)?;

    let a = LinearOperator::difference_2d(height, width)?;
    let gradient_dim = a.out_dim();
    let b = LinearOperator::scaled_identity(gradient_dim, -1.0);
    let constraints = ConstraintSystem::new(a, b, vec![0.0; gradient_dim])?;
    let loss = SmoothLoss::quadratic(psi, degraded.pixels().to_vec())?;
    let outer = ConcaveOuter::power(config.q, config.epsilon, config.sigma_reg)?;
    let problem = ProblemSpec::new(loss, constraints, outer, InnerConvex::Abs)?;

    // Start from the degraded observation; y starts consistent with the
    // constraint (B = -I gives y0 = A x0), and p0 = 0 lies in Im(A).
    let x0 = degraded.pixels().to_vec();
    let y0 = problem.constraints.a.apply(&x0)?;
    let p0 = vec![0.0; gradient_dim];
    Ok(DeblurProblem {
        problem,
        original,
        degraded,
        init: InitialPoint {
            x: x0,
            y: y0,
            p: p0,
        },
        width,
        height,
    })
}

#[derive(Debug, Clone)]
pub struct DeblurOutcome {
    pub noise_seed: u64,
    pub restored: ImageBuffer,
    pub degraded: ImageBuffer,
    pub original: ImageBuffer,
    pub outcome: SolveOutcome,
    pub snr_degraded: f64,
    pub snr_restored: f64,
    pub elapsed: Duration,
}

/// Runs one algorithm on one noise realization.
pub fn run_deblur_once(
    config: &ExperimentConfig,
    algorithm: AlgorithmKind,
    noise_seed: u64,
) -> Result<DeblurOutcome, ExperimentError> {
    let setup = assemble_deblur(config, noise_seed)?;
    let solver_config = config.solver_config(Some(setup.init.clone()));
    let original = setup.original.clone();
    let observer = |state: &crate::solver::SolverState| image::snr_vs_vector(&original, &state.x);

    let start = Instant::now();
    let outcome = match algorithm {
        AlgorithmKind::Ilr => {
            IlrAdmm::new(&setup.problem, solver_config)?.run_observed(observer)?
        }
        AlgorithmKind::Direct => {
            let cfg = BaselineConfig {
                solver: solver_config,
                inner_iters: config.inner_iters,
            };
            BaselineAdmm::new(BaselineKind::Direct, &setup.problem, &cfg)?.run_observed(observer)?
        }
        AlgorithmKind::InLoop => {
            let cfg = BaselineConfig {
                solver: solver_config,
                inner_iters: config.inner_iters,
            };
            BaselineAdmm::new(BaselineKind::InLoop, &setup.problem, &cfg)?.run_observed(observer)?
        }
    };
    let elapsed = start.elapsed();

    let restored = ImageBuffer::from_vector_clamped(setup.width, setup.height, &outcome.state.x)?;
    let snr_restored = image::snr(&setup.original, &restored)?;
    let snr_degraded = image::snr(&setup.original, &setup.degraded)?;
    Ok(DeblurOutcome {
        noise_seed,
        restored,
        degraded: setup.degraded,
        original: setup.original,
        outcome,
        snr_degraded,
        snr_restored,
        elapsed,
    })
}

#[derive(Debug, Clone)]
pub struct DeblurReport {
    pub runs: Vec<DeblurOutcome>,
    /// Final restored SNR averaged over the noise realizations.
    pub avg_final_snr: f64,
    /// Per-iteration SNR averaged over realizations, truncated to the
    /// shortest run.
    pub avg_snr_per_iter: Vec<f64>,
}

/// Runs the configured algorithm over `repeats` noise realizations with seeds
/// `seed .. seed + repeats - 1`, writing the requested outputs:
/// the restored image and trace CSV of the first realization at the
/// configured paths, per-realization traces at `<stem>.seed<k>.csv` when
/// repeating, and the averaged SNR column at `<stem>.avg.csv`.
pub fn run_deblur(config: &ExperimentConfig) -> Result<DeblurReport, ExperimentError> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.repeats);
    for j in 0..config.repeats {
        runs.push(run_deblur_once(
            config,
            config.algorithm,
            config.seed + j as u64,
        )?);
    }
    let avg_final_snr = runs.iter().map(|r| r.snr_restored).sum::<f64>() / runs.len() as f64;
    let min_len = runs
        .iter()
        .map(|r| r.outcome.trace.len())
        .min()
        .unwrap_or(0);
    let mut avg_snr_per_iter = vec![0.0; min_len];
    for run in &runs {
        for (k, row) in run.outcome.trace.rows()[..min_len].iter().enumerate() {
            avg_snr_per_iter[k] += row.snr.unwrap_or(f64::NAN) / runs.len() as f64;
        }
    }

    if let Some(path) = &config.out_path {
        image::save_pgm(&runs[0].restored, path)?;
    }
    if let Some(path) = &config.trace_path {
        emit_csv(&runs[0].outcome.trace, path)?;
        if config.repeats > 1 {
            for run in &runs[1..] {
                emit_csv(
                    &run.outcome.trace,
                    &suffixed_path(path, &format!("seed{}", run.noise_seed)),
                )?;
            }
            let avg_path = suffixed_path(path, "avg");
            let mut text = String::from("iter,snr_avg\n");
            for (k, v) in avg_snr_per_iter.iter().enumerate() {
                text.push_str(&format!("{},{}\n", k + 1, format_sig12(*v)));
            }
            std::fs::write(&avg_path, text).map_err(|source| ExperimentError::Io {
                path: avg_path.display().to_string(),
                source,
            })?;
        }
    }
    Ok(DeblurReport {
        runs,
        avg_final_snr,
        avg_snr_per_iter,
    })
}

fn suffixed_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

#[derive(Debug, Clone)]
pub struct ComparisonEntry {
    pub algorithm: AlgorithmKind,
    pub final_snr: f64,
    pub snr_degraded: f64,
    pub elapsed: Duration,
    pub iterations: usize,
}

/// Runs all three algorithms on the same degraded observation and reports
/// final SNR and wall-clock side by side. The ordering is reported, not
/// asserted: it is instance-dependent.
pub fn run_algorithm_comparison(
    config: &ExperimentConfig,
) -> Result<Vec<ComparisonEntry>, ExperimentError> {
    let mut entries = Vec::new();
    for algorithm in [
        AlgorithmKind::Ilr,
        AlgorithmKind::Direct,
        AlgorithmKind::InLoop,
    ] {
        let run = run_deblur_once(config, algorithm, config.seed)?;
        entries.push(ComparisonEntry {
            algorithm,
            final_snr: run.snr_restored,
            snr_degraded: run.snr_degraded,
            elapsed: run.elapsed,
            iterations: run.outcome.trace.len(),
        });
    }
    Ok(entries)
}

/// Decimal notation with 12 significant digits.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn trace_to_csv(trace: &IterateTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in trace.rows() {
        let snr = row.snr.map(format_sig12).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.iter,
            format_sig12(row.alpha),
            format_sig12(row.r),
            format_sig12(row.lagrangian),
            format_sig12(row.primal_residual),
            format_sig12(row.step_x),
            format_sig12(row.step_y),
            format_sig12(row.dual_step),
            format_sig12(row.kkt),
            format_sig12(row.weight_min),
            format_sig12(row.weight_max),
            snr,
        ));
    }
    out
}

/// Writes the trace as CSV (LF newlines, header row, one row per iteration).
pub fn emit_csv(trace: &IterateTrace, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    let path = path.as_ref();
    std::fs::write(path, trace_to_csv(trace)).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One parsed CSV record; the numeric mirror of the serialized columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub iter: usize,
    pub alpha: f64,
    pub r: f64,
    pub lagrangian: f64,
    pub primal_residual: f64,
    pub step_x: f64,
    pub step_y: f64,
    pub dual_step: f64,
    pub kkt: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub snr: Option<f64>,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRecord>, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, other)) => {
            return Err(ExperimentError::CsvParse {
                line: 1,
                message: format!("unexpected header {other:?}"),
            });
        }
        None => {
            return Err(ExperimentError::CsvParse {
                line: 1,
                message: "empty file".into(),
            });
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(ExperimentError::CsvParse {
                line: idx + 1,
                message: format!("expected 12 columns, found {}", cols.len()),
            });
        }
        let f = |s: &str, what: &str| -> Result<f64, ExperimentError> {
            s.parse::<f64>().map_err(|e| ExperimentError::CsvParse {
                line: idx + 1,
                message: format!("bad {what}: {e}"),
            })
        };
        rows.push(CsvRecord {
            iter: cols[0].parse().map_err(|e| ExperimentError::CsvParse {
                line: idx + 1,
                message: format!("bad iter: {e}"),
            })?,
            alpha: f(cols[1], "alpha")?,
            r: f(cols[2], "r")?,
            lagrangian: f(cols[3], "lagrangian")?,
            primal_residual: f(cols[4], "primal_residual")?,
            step_x: f(cols[5], "step_x")?,
            step_y: f(cols[6], "step_y")?,
            dual_step: f(cols[7], "dual_step")?,
            kkt: f(cols[8], "kkt")?,
            weight_min: f(cols[9], "weight_min")?,
            weight_max: f(cols[10], "weight_max")?,
            snr: if cols[11].is_empty() {
                None
            } else {
                Some(f(cols[11], "snr")?)
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::TraceRow;

    fn sample_row(iter: usize) -> TraceRow {
        TraceRow {
            iter,
            alpha: 1.05_f64.powi(iter as i32),
            r: 1.05_f64.powi(iter as i32) + 1e-6,
            lagrangian: 123.456789 / iter as f64,
            primal_residual: 3.14e-7 * iter as f64,
            step_x: 1.0 / (iter * iter) as f64,
            step_y: 2e-12,
            dual_step: 0.5,
            kkt: 1e-9,
            weight_min: 1e-4,
            weight_max: 1581.1388300841897,
            snr: if iter % 2 == 0 { Some(11.73) } else { None },
            x_residual: 1e-12,
            x_norm: 2.0,
            p_norm: 0.1,
            grad_norm: 0.2,
            rel_err_ratio: 3.0,
            iterate_norm: 5.0,
        }
    }

    #[test]
    fn format_sig12_examples() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(1.0), "1.00000000000");
        assert_eq!(format_sig12(f64::INFINITY), "inf");
        let v = 3.141592653589793e-7;
        let s = format_sig12(v);
        let back: f64 = s.parse().unwrap();
        assert!((back - v).abs() <= 1e-10 * v.abs());
        assert!(!s.contains('e'), "decimal notation required: {s}");
    }

    #[test]
    fn empty_trace_gives_header_only() {
        let trace = IterateTrace::new(0.0, 1.0, 0.0);
        let text = trace_to_csv(&trace);
        assert_eq!(text, format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn csv_has_12_columns_per_row() {
        let mut trace = IterateTrace::new(0.0, 1.0, 0.0);
        for k in 1..=5 {
            trace.push(sample_row(k));
        }
        let text = trace_to_csv(&trace);
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), 12, "line {line:?}");
        }
        assert!(!text.contains('\r'), "LF newlines only");
    }

    #[test]
    fn csv_roundtrip_within_tolerance() {
        let mut trace = IterateTrace::new(0.0, 1.0, 0.0);
        for k in 1..=9 {
            trace.push(sample_row(k));
        }
        let text = trace_to_csv(&trace);
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), 9);
        for (rec, row) in rows.iter().zip(trace.rows()) {
            assert_eq!(rec.iter, row.iter);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + b.abs());
            assert!(close(rec.alpha, row.alpha));
            assert!(close(rec.lagrangian, row.lagrangian));
            assert!(close(rec.primal_residual, row.primal_residual));
            assert!(close(rec.weight_max, row.weight_max));
            match (rec.snr, row.snr) {
                (None, None) => {}
                (Some(a), Some(b)) => assert!(close(a, b)),
                other => panic!("snr mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn parse_rejects_wrong_header_and_columns() {
        assert!(parse_csv("nope\n1,2\n").is_err());
        let text = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(matches!(
            parse_csv(&text),
            Err(ExperimentError::CsvParse { line: 2, .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.q = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.kernel_size = 8;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.repeats = 0;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn noiseless_identity_kernel_with_zero_penalty_is_fixed() {
        // The observation solves the problem exactly, so the solver must not
        // move away from it.
        let mut cfg = ExperimentConfig::default();
        cfg.input = InputSource::Phantom {
            width: 16,
            height: 16,
        };
        cfg.kernel_size = 1;
        cfg.kernel_width = 1.0;
        cfg.noise_std = 0.0;
        cfg.sigma_reg = 0.0;
        cfg.max_iter = 8;
        let report = run_deblur(&cfg).unwrap();
        let run = &report.runs[0];
        for (a, b) in run.restored.pixels().iter().zip(run.original.pixels()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn deblur_pipeline_is_bitwise_deterministic() {
        let mut cfg = ExperimentConfig::default();
        cfg.input = InputSource::Phantom {
            width: 16,
            height: 16,
        };
        cfg.kernel_size = 3;
        cfg.max_iter = 5;
        let a = run_deblur(&cfg).unwrap();
        let b = run_deblur(&cfg).unwrap();
        let ta = trace_to_csv(&a.runs[0].outcome.trace);
        let tb = trace_to_csv(&b.runs[0].outcome.trace);
        assert_eq!(ta, tb);
        assert_eq!(a.runs[0].restored, b.runs[0].restored);
    }

    #[test]
    fn repeats_average_and_files() {
        let dir = std::env::temp_dir().join("ilradmm-exp-test");
        std::fs::create_dir_all(&dir).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.input = InputSource::Phantom {
            width: 16,
            height: 16,
        };
        cfg.kernel_size = 3;
        cfg.max_iter = 4;
        cfg.repeats = 3;
        cfg.trace_path = Some(dir.join("t.csv"));
        cfg.out_path = Some(dir.join("restored.pgm"));
        let report = run_deblur(&cfg).unwrap();
        assert_eq!(report.runs.len(), 3);
        assert_eq!(report.avg_snr_per_iter.len(), 4);
        assert!(dir.join("t.csv").exists());
        assert!(dir.join("t.seed1.csv").exists());
        assert!(dir.join("t.seed2.csv").exists());
        assert!(dir.join("t.avg.csv").exists());
        assert!(dir.join("restored.pgm").exists());
        let manual: f64 = report.runs.iter().map(|r| r.snr_restored).sum::<f64>() / 3.0;
        assert!((report.avg_final_snr - manual).abs() < 1e-12);
        std::fs::remove_dir_all(&dir).ok();
    }
}
