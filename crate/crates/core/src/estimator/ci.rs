use statrs::distribution::{ContinuousCDF, Normal};

use super::{EstimatorConfig, LocalFit, WeightedSample};
use crate::error::{DegenerateCause, Error, Result};
use crate::kernel_psi::KernelSpec;
use crate::km::{validate_observations, CensoredObservation, KmFit};

/// Pointwise asymptotic confidence interval for the psi-regression function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiResult {
    pub theta_hat: f64,
    pub half_width: f64,
    pub level: f64,
    pub m_hat: f64,
    pub gamma1_hat: f64,
    pub ball_prob: f64,
    pub n_used: usize,
}

impl CiResult {
    pub fn lower(&self) -> f64 {
        self.theta_hat - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.theta_hat + self.half_width
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower() <= value && value <= self.upper()
    }

    /// The asymptotically standard normal pivot evaluated at `truth`.
    pub fn standardize(&self, truth: f64) -> f64 {
        normal_quantile(self.level) * (self.theta_hat - truth) / self.half_width
    }
}

/// Upper `(1 - level) / 2` quantile of the standard normal.
pub fn normal_quantile(level: f64) -> f64 {
    let alpha = 1.0 - level;
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Fraction of covariates within sup-norm distance `bandwidth` of `x`.
pub fn ball_probability(
    data: &[CensoredObservation],
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let dim = validate_observations(data)?;
    if x.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: x.len(),
        });
    }
    Ok(ball_probability_unchecked(data, x, cfg.bandwidth))
}

pub(crate) fn ball_probability_unchecked(
    data: &[CensoredObservation],
    x: &[f64],
    radius: f64,
) -> f64 {
    let inside = data
        .iter()
        .filter(|o| {
            o.x.iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
                <= radius
        })
        .count();
    inside as f64 / data.len() as f64
}

pub fn confidence_interval(
    data: &[CensoredObservation],
    km: &KmFit,
    x: &[f64],
    cfg: &EstimatorConfig,
    level: f64,
) -> Result<CiResult> {
    let sample = WeightedSample::with_km(data, km, cfg.km_floor)?;
    let local = sample.local(x, cfg)?;
    interval_from_local(&sample, &local, cfg, level)
}

/// Builds the interval from an already localized sample.
pub(crate) fn interval_from_local(
    sample: &WeightedSample<'_>,
    local: &LocalFit,
    cfg: &EstimatorConfig,
    level: f64,
) -> Result<CiResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let theta_hat = local.solve()?;
    let gamma1_hat = local.gamma1(theta_hat);
    let m_hat = local.m_hat(theta_hat);
    let ball_prob = ball_probability_unchecked(sample.data(), local.x(), cfg.bandwidth);
    let degenerate = |cause| Error::DegenerateCi {
        x: local.x().to_vec(),
        cause,
    };
    if !(gamma1_hat > 0.0) {
        return Err(degenerate(DegenerateCause::NonPositiveGamma));
    }
    if !(m_hat > 0.0) {
        return Err(degenerate(DegenerateCause::NonPositiveMHat));
    }
    if !(ball_prob > 0.0) {
        return Err(degenerate(DegenerateCause::EmptyBall));
    }
    let kernel = KernelSpec::new(cfg.kernel, sample.dim())?;
    let n = sample.len();
    let d = sample.dim() as f64;
    let scale = gamma1_hat
        * (n as f64 * ball_prob * d / (m_hat * kernel.moment(2))).sqrt()
        * kernel.moment(1);
    Ok(CiResult {
        theta_hat,
        half_width: normal_quantile(level) / scale,
        level,
        m_hat,
        gamma1_hat,
        ball_prob,
        n_used: n,
    })
}

impl WeightedSample<'_> {
    /// Confidence interval at `x`; see [`confidence_interval`].
    pub fn confidence_interval(
        &self,
        x: &[f64],
        cfg: &EstimatorConfig,
        level: f64,
    ) -> Result<CiResult> {
        let local = self.local(x, cfg)?;
        interval_from_local(self, &local, cfg, level)
    }
}
