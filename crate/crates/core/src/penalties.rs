//! Composite penalties sigma * sum_i g[h(y_i)]: concave differentiable outer
//! functions g, convex proximable inner functions h, the reweighting map, and
//! the scalar proximal solvers the algorithms are built on.

use thiserror::Error;

/// Weights below this are clamped and counted instead of being returned as
/// exact zeros, so that a weight vector stays strictly positive.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum PenaltyError {
    #[error("outer function argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("derivative of the power penalty with epsilon = 0 is unbounded at 0; use epsilon > 0")]
    NonDifferentiableAtZero,
    #[error("prox parameter must satisfy r > 0, got {0}")]
    NonPositiveProxParameter(f64),
    #[error("weight must be nonnegative, got {0}")]
    NegativeWeight(f64),
    #[error("quadratic coefficient alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("penalty parameter out of range: {0}")]
    InvalidParameter(String),
    #[error("scalar root finder stalled on bracket [{lo}, {hi}] with values [{f_lo}, {f_hi}]")]
    RootFindingFailed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("weights and vector lengths disagree: {weights} vs {vector}")]
    WeightLength { weights: usize, vector: usize },
}

/// Concave outer penalty family. All kinds are normalized so g(0) = 0 except
/// the power kind with epsilon > 0, whose value at 0 is epsilon^q.
#[derive(Debug, Clone, PartialEq)]
pub enum OuterKind {
    /// (s + epsilon)^q with q in (0, 1], epsilon >= 0.
    Power { q: f64, epsilon: f64 },
    /// ln(1 + s / epsilon), epsilon > 0.
    Log { epsilon: f64 },
    /// (1 - exp(-gamma s)) / (1 - exp(-gamma)), gamma > 0.
    Etp { gamma: f64 },
    /// s / (s + gamma), gamma > 0.
    Geman { gamma: f64 },
    /// 1 - exp(-s / gamma), gamma > 0.
    Laplace { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveOuter {
    kind: OuterKind,
    scale: f64,
}

impl ConcaveOuter {
    pub fn new(kind: OuterKind, scale: f64) -> Result<Self, PenaltyError> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(PenaltyError::InvalidParameter(format!(
                "scale must be >= 0, got {scale}"
            )));
        }
        match &kind {
            OuterKind::Power { q, epsilon } => {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(PenaltyError::InvalidParameter(format!(
                        "power exponent q must lie in (0, 1], got {q}"
                    )));
                }
                if !(*epsilon >= 0.0) {
                    return Err(PenaltyError::InvalidParameter(format!(
                        "power smoothing epsilon must be >= 0, got {epsilon}"
                    )));
                }
            }
            OuterKind::Log { epsilon } => {
                if !(*epsilon > 0.0) {
                    return Err(PenaltyError::InvalidParameter(format!(
                        "log epsilon must be > 0, got {epsilon}"
                    )));
                }
            }
            OuterKind::Etp { gamma }
            | OuterKind::Geman { gamma }
            | OuterKind::Laplace { gamma } => {
                if !(*gamma > 0.0) {
                    return Err(PenaltyError::InvalidParameter(format!(
                        "shape parameter must be > 0, got {gamma}"
                    )));
                }
            }
        }
        Ok(Self { kind, scale })
    }

    pub fn power(q: f64, epsilon: f64, scale: f64) -> Result<Self, PenaltyError> {
        Self::new(OuterKind::Power { q, epsilon }, scale)
    }

    pub fn kind(&self) -> &OuterKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// sigma * g(s) for s >= 0.
    pub fn value(&self, s: f64) -> Result<f64, PenaltyError> {
        if s < 0.0 || s.is_nan() {
            return Err(PenaltyError::NegativeArgument(s));
        }
        let g = match &self.kind {
            OuterKind::Power { q, epsilon } => (s + epsilon).powf(*q),
            OuterKind::Log { epsilon } => (1.0 + s / epsilon).ln(),
            OuterKind::Etp { gamma } => (1.0 - (-gamma * s).exp()) / (1.0 - (-gamma).exp()),
            OuterKind::Geman { gamma } => s / (s + gamma),
            OuterKind::Laplace { gamma } => 1.0 - (-s / gamma).exp(),
        };
        Ok(self.scale * g)
    }

    /// sigma * g'(s); strictly positive on the domain.
    pub fn derivative(&self, s: f64) -> Result<f64, PenaltyError> {
        if s < 0.0 || s.is_nan() {
            return Err(PenaltyError::NegativeArgument(s));
        }
        let g = match &self.kind {
            OuterKind::Power { q, epsilon } => {
                if *epsilon == 0.0 && s == 0.0 && *q < 1.0 {
                    return Err(PenaltyError::NonDifferentiableAtZero);
                }
                if *q == 1.0 {
                    1.0
                } else {
                    q * (s + epsilon).powf(q - 1.0)
                }
            }
            OuterKind::Log { epsilon } => 1.0 / (epsilon + s),
            OuterKind::Etp { gamma } => gamma * (-gamma * s).exp() / (1.0 - (-gamma).exp()),
            OuterKind::Geman { gamma } => gamma / ((s + gamma) * (s + gamma)),
            OuterKind::Laplace { gamma } => (-s / gamma).exp() / gamma,
        };
        Ok(self.scale * g)
    }

    /// Lipschitz constant of the scaled derivative on [0, inf), when it has a
    /// closed form. The power kind with epsilon = 0 and q < 1 has none.
    pub fn gradient_lipschitz(&self) -> Option<f64> {
        let l = match &self.kind {
            OuterKind::Power { q, epsilon } => {
                if *q == 1.0 {
                    0.0
                } else if *epsilon > 0.0 {
                    q * (1.0 - q) * epsilon.powf(q - 2.0)
                } else {
                    return None;
                }
            }
            OuterKind::Log { epsilon } => 1.0 / (epsilon * epsilon),
            OuterKind::Etp { gamma } => gamma * gamma / (1.0 - (-gamma).exp()),
            OuterKind::Geman { gamma } => 2.0 / (gamma * gamma),
            OuterKind::Laplace { gamma } => 1.0 / (gamma * gamma),
        };
        Some(self.scale * l)
    }

    /// Whether sigma * g is coercive on [0, inf). Only the power family grows
    /// without bound; the saturating kinds are bounded.
    pub fn is_coercive(&self) -> bool {
        matches!(self.kind, OuterKind::Power { .. }) && self.scale > 0.0
    }
}

/// Inner convex functions with closed-form weighted proximal maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerConvex {
    Abs,
    Square,
}

impl InnerConvex {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Abs => t.abs(),
            Self::Square => t * t,
        }
    }

    /// Derivative on the smooth region (t > 0 for Abs).
    fn derivative_positive(&self, t: f64) -> f64 {
        match self {
            Self::Abs => 1.0,
            Self::Square => 2.0 * t,
        }
    }
}

/// argmin_t (w/r) h(t) + (t - v)^2 / 2. Unique by strong convexity.
pub fn prox_weighted_inner(h: InnerConvex, w: f64, r: f64, v: f64) -> Result<f64, PenaltyError> {
    if !(r > 0.0) {
        return Err(PenaltyError::NonPositiveProxParameter(r));
    }
    if !(w >= 0.0) {
        return Err(PenaltyError::NegativeWeight(w));
    }
    Ok(match h {
        InnerConvex::Abs => {
            let lambda = w / r;
            v.signum() * (v.abs() - lambda).max(0.0)
        }
        InnerConvex::Square => v / (1.0 + 2.0 * w / r),
    })
}

/// Strictly positive reweighting vector w_i = sigma * g'(h(y_i)).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
    underflow_clamps: usize,
}

impl WeightVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// How many entries underflowed and were clamped to [`WEIGHT_FLOOR`].
    pub fn underflow_clamps(&self) -> usize {
        self.underflow_clamps
    }
}

pub fn compute_weights(
    outer: &ConcaveOuter,
    inner: InnerConvex,
    y: &[f64],
) -> Result<WeightVector, PenaltyError> {
    let mut values = Vec::with_capacity(y.len());
    let mut clamps = 0usize;
    for &yi in y {
        let w = outer.derivative(inner.value(yi))?;
        if w < WEIGHT_FLOOR {
            clamps += 1;
            values.push(WEIGHT_FLOOR);
        } else {
            values.push(w);
        }
    }
    Ok(WeightVector {
        values,
        underflow_clamps: clamps,
    })
}

/// Global minimizer of t -> sigma * g(h(t)) + (alpha/2)(t - z)^2.
///
/// The penalty is even and nondecreasing in |t|, so the minimizer shares the
/// sign of z and lies in [0, |z|]. Candidates are t = 0 plus the stationary
/// points of the smooth branch, located by a sign scan and bisection;
/// candidates are compared by objective value, ties broken toward smaller |t|.
pub fn scalar_prox_composite(
    outer: &ConcaveOuter,
    inner: InnerConvex,
    alpha: f64,
    z: f64,
) -> Result<f64, PenaltyError> {
    if !(alpha > 0.0) {
        return Err(PenaltyError::NonPositiveAlpha(alpha));
    }
    if outer.scale() == 0.0 {
        return Ok(z);
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let zz = z.abs();
    let objective = |s: f64| -> Result<f64, PenaltyError> {
        Ok(outer.value(inner.value(s))? + 0.5 * alpha * (s - zz) * (s - zz))
    };
    // phi'(s) on s > 0.
    let slope = |s: f64| -> Result<f64, PenaltyError> {
        Ok(outer.derivative(inner.value(s))? * inner.derivative_positive(s) + alpha * (s - zz))
    };

    let mut candidates: Vec<f64> = vec![0.0];
    // Scan for sign changes of phi' on (0, zz]. The derivative of every
    // shipped kind has monotone curvature, so two roots at most exist; a
    // moderately fine scan brackets them all.
    let segments = 48usize;
    let lo_floor = zz * 1e-12;
    let mut prev_s = lo_floor.max(1e-308);
    let mut prev_f = match slope(prev_s) {
        Ok(v) => v,
        Err(PenaltyError::NonDifferentiableAtZero) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    for k in 1..=segments {
        let s = zz * (k as f64) / (segments as f64);
        let f = slope(s)?;
        if !f.is_nan() && prev_f.is_finite() && f.is_finite() && (prev_f <= 0.0) != (f <= 0.0) {
            candidates.push(bisect_root(&slope, prev_s, s, prev_f, f)?);
        } else if prev_f == f64::INFINITY && f <= 0.0 {
            // Unbounded derivative at 0 with a negative value later: the
            // crossing is inside (prev_s, s].
            candidates.push(bisect_root_from_infinite(&slope, prev_s, s, f)?);
        }
        prev_s = s;
        prev_f = f;
    }
    candidates.push(zz);

    let mut best = candidates[0];
    let mut best_val = objective(best)?;
    for &cand in &candidates[1..] {
        let val = objective(cand)?;
        let tie = (val - best_val).abs() <= 1e-12 * (1.0 + best_val.abs());
        if tie {
            if cand < best {
                best = cand;
            }
            best_val = best_val.min(val);
        } else if val < best_val {
            best_val = val;
            best = cand;
        }
    }
    Ok(if z < 0.0 { -best } else { best })
}

fn bisect_root(
    f: &impl Fn(f64) -> Result<f64, PenaltyError>,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    f_hi: f64,
) -> Result<f64, PenaltyError> {
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(PenaltyError::RootFindingFailed { lo, hi, f_lo, f_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if !fm.is_finite() {
            return Err(PenaltyError::RootFindingFailed {
                lo,
                hi,
                f_lo,
                f_hi: fm,
            });
        }
        if (f_lo <= 0.0) == (fm <= 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn bisect_root_from_infinite(
    f: &impl Fn(f64) -> Result<f64, PenaltyError>,
    mut lo: f64,
    mut hi: f64,
    f_hi: f64,
) -> Result<f64, PenaltyError> {
    // f(lo) = +inf conceptually; shrink from the right.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if !fm.is_finite() {
            lo = mid;
            continue;
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let _ = f_hi;
    Ok(0.5 * (lo + hi))
}
