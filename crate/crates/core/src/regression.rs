//! Local affine fits `sigma = w * eps + v` over a handful of data points.
//!
//! Two estimators are provided: ordinary least squares and Huber regression
//! solved by iteratively reweighted least squares (IRLS). The Huber threshold
//! is not fixed up front; it is `M = tune * s`, where `s` is the normalized
//! median absolute deviation of the current residuals, recomputed on every
//! outer iteration. Small `tune` values therefore behave close to an l1 fit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::DataPoint;

/// Consistency constant of the MAD for normally distributed residuals.
pub const MAD_NORMAL: f64 = 0.6745;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("singular design: all strains are identical")]
    SingularDesign,
    #[error("non-finite arithmetic in weighted fit")]
    NonFinite,
    #[error("invalid Huber configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Local law `sigma = w * eps + v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLaw {
    /// Tangent modulus, Pa.
    pub w: f64,
    /// Stress offset, Pa.
    pub v: f64,
}

impl LinearLaw {
    pub fn new(w: f64, v: f64) -> Self {
        Self { w, v }
    }

    pub fn stress(&self, eps: f64) -> f64 {
        self.w * eps + self.v
    }

    pub fn residual(&self, p: &DataPoint) -> f64 {
        self.stress(p.strain) - p.stress
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HuberConfig {
    /// Multiplier turning the robust residual scale into the threshold `M`.
    pub tune: f64,
    pub irls_max_iter: usize,
    /// Relative parameter-change tolerance.
    pub irls_tol: f64,
    /// Lower bound on the robust scale, Pa.
    pub scale_floor: f64,
}

impl Default for HuberConfig {
    fn default() -> Self {
        Self { tune: 1e-3, irls_max_iter: 100, irls_tol: 1e-8, scale_floor: 1e-12 }
    }
}

impl HuberConfig {
    pub fn with_tune(tune: f64) -> Self {
        Self { tune, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), RegressionError> {
        if !(self.tune > 0.0 && self.tune.is_finite()) {
            return Err(RegressionError::InvalidConfig("tune must be positive"));
        }
        if self.irls_max_iter == 0 {
            return Err(RegressionError::InvalidConfig("irls_max_iter must be at least 1"));
        }
        if !(self.irls_tol > 0.0) {
            return Err(RegressionError::InvalidConfig("irls_tol must be positive"));
        }
        if !(self.scale_floor > 0.0) {
            return Err(RegressionError::InvalidConfig("scale_floor must be positive"));
        }
        Ok(())
    }
}

/// Huber penalty: `t^2` inside `[-M, M]`, `M (2|t| - M)` outside.
pub fn huber_penalty(t: f64, m: f64) -> f64 {
    let a = t.abs();
    if a <= m {
        t * t
    } else {
        m * (2.0 * a - m)
    }
}

/// Sum of Huber penalties of the residuals of `law` at threshold `m`.
pub fn huber_objective(points: &[DataPoint], law: &LinearLaw, m: f64) -> f64 {
    points.iter().map(|p| huber_penalty(law.residual(p), m)).sum()
}

pub fn squared_objective(points: &[DataPoint], law: &LinearLaw) -> f64 {
    points.iter().map(|p| law.residual(p).powi(2)).sum()
}

fn check_design(points: &[DataPoint]) -> Result<(f64, f64), RegressionError> {
    if points.len() < 2 {
        return Err(RegressionError::TooFewPoints(points.len()));
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.strain), hi.max(p.strain))
    });
    if !(hi > lo) {
        return Err(RegressionError::SingularDesign);
    }
    let (slo, shi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.stress), hi.max(p.stress))
    });
    Ok((hi - lo, shi - slo))
}

/// Weighted least squares in centered form.
pub fn weighted_least_squares(points: &[DataPoint], weights: &[f64]) -> Result<LinearLaw, RegressionError> {
    debug_assert_eq!(points.len(), weights.len());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(RegressionError::NonFinite);
    }
    let mean_e = points.iter().zip(weights).map(|(p, w)| w * p.strain).sum::<f64>() / total;
    let mean_s = points.iter().zip(weights).map(|(p, w)| w * p.stress).sum::<f64>() / total;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (p, w) in points.iter().zip(weights) {
        let de = p.strain - mean_e;
        sxx += w * de * de;
        sxy += w * de * (p.stress - mean_s);
    }
    if sxx == 0.0 {
        return Err(RegressionError::SingularDesign);
    }
    let slope = sxy / sxx;
    let law = LinearLaw::new(slope, mean_s - slope * mean_e);
    if law.w.is_finite() && law.v.is_finite() {
        Ok(law)
    } else {
        Err(RegressionError::NonFinite)
    }
}

/// Ordinary least-squares affine fit.
pub fn least_squares_fit(points: &[DataPoint]) -> Result<LinearLaw, RegressionError> {
    check_design(points)?;
    weighted_least_squares(points, &vec![1.0; points.len()])
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + upper)
    }
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    median_in_place(&mut values.to_vec())
}

/// Robust residual scale `max(MAD / 0.6745, floor)`.
pub fn mad_scale(residuals: &[f64], floor: f64) -> f64 {
    assert!(!residuals.is_empty(), "mad_scale of an empty slice");
    let mut work = residuals.to_vec();
    let center = median_in_place(&mut work);
    for r in work.iter_mut() {
        *r = (*r - center).abs();
    }
    (median_in_place(&mut work) / MAD_NORMAL).max(floor)
}

/// Huber IRLS weights: 1 inside the threshold, `M / |r|` outside.
pub fn huber_weights(points: &[DataPoint], law: &LinearLaw, m: f64) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let r = law.residual(p).abs();
            if r <= m {
                1.0
            } else {
                m / r
            }
        })
        .collect()
}

/// One reweighting step at a fixed threshold. Never increases
/// [`huber_objective`] at that threshold.
pub fn huber_irls_step(points: &[DataPoint], law: &LinearLaw, m: f64) -> Result<LinearLaw, RegressionError> {
    weighted_least_squares(points, &huber_weights(points, law, m))
}

/// Result of a Huber fit together with its solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberFit {
    pub law: LinearLaw,
    /// Threshold `M` in force at the last iteration, Pa.
    pub threshold: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Huber regression by IRLS, started from the least-squares fit.
pub fn huber_fit_detailed(points: &[DataPoint], cfg: &HuberConfig) -> Result<HuberFit, RegressionError> {
    cfg.validate()?;
    let (strain_spread, stress_spread) = check_design(points)?;
    let initial = weighted_least_squares(points, &vec![1.0; points.len()])?;
    let denom = stress_spread.max(cfg.scale_floor);

    let mut law = initial;
    let mut threshold = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    let mut residuals = vec![0.0; points.len()];
    while iterations < cfg.irls_max_iter {
        for (r, p) in residuals.iter_mut().zip(points) {
            *r = law.residual(p);
        }
        threshold = cfg.tune * mad_scale(&residuals, cfg.scale_floor);
        let next = huber_irls_step(points, &law, threshold)?;
        let change = ((next.w - law.w).abs() * strain_spread).max((next.v - law.v).abs()) / denom;
        law = next;
        iterations += 1;
        if change <= cfg.irls_tol {
            converged = true;
            break;
        }
    }

    // The threshold moves between iterations, so descent is only guaranteed at
    // a frozen threshold. Fall back to frozen-threshold IRLS from the
    // initializer if the adaptive sequence ended above it.
    if huber_objective(points, &law, threshold) > huber_objective(points, &initial, threshold) {
        law = initial;
        converged = false;
        for _ in 0..cfg.irls_max_iter {
            let next = huber_irls_step(points, &law, threshold)?;
            let change = ((next.w - law.w).abs() * strain_spread).max((next.v - law.v).abs()) / denom;
            law = next;
            iterations += 1;
            if change <= cfg.irls_tol {
                converged = true;
                break;
            }
        }
    }

    Ok(HuberFit { law, threshold, iterations, converged })
}

pub fn huber_fit(points: &[DataPoint], cfg: &HuberConfig) -> Result<LinearLaw, RegressionError> {
    huber_fit_detailed(points, cfg).map(|fit| fit.law)
}
