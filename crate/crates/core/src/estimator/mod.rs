//! Kernel-weighted, censoring-corrected estimation of the psi-regression
//! function.
//!
//! For a point `x` the plug-in score is
//!
//! ```text
//! score(theta) = sum_i K((X_i - x)/h) * delta_i * psi(Y_i - theta) / G_n(Y_i-)
//!                / sum_i K((X_i - x)/h)
//! ```
//!
//! and the M-estimate is its root in `theta`. The inverse survival weights are
//! clamped below at `km_floor`. The synthetic-data Nadaraya-Watson comparator
//! replaces `psi(Y_i - theta)` by `Y_i`.

mod ci;
pub mod root;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_psi::{KernelFamily, KernelSpec, PsiSpec};
use crate::km::{check_floor, inverse_clamped, validate_observations, CensoredObservation, KmFit};

pub use ci::{ball_probability, confidence_interval, normal_quantile, CiResult};

pub const DEFAULT_KM_FLOOR: f64 = 0.01;
pub const DEFAULT_ROOT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_BRACKET_PAD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub kernel: KernelFamily,
    pub psi: PsiSpec,
    /// Kernel bandwidth, also the radius of the ball used for the empirical
    /// ball probability.
    pub bandwidth: f64,
    pub km_floor: f64,
    pub root_tol: f64,
    pub max_iter: usize,
    pub bracket_pad: f64,
    /// Use `delta_i * psi^2 / G_n^2` instead of `psi^2 / G_n` in `m_hat`.
    pub mhat_with_delta: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Gaussian,
            psi: PsiSpec::AlgebraicSigmoid,
            bandwidth: 0.1,
            km_floor: DEFAULT_KM_FLOOR,
            root_tol: DEFAULT_ROOT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            bracket_pad: DEFAULT_BRACKET_PAD,
            mhat_with_delta: false,
        }
    }
}

impl EstimatorConfig {
    pub fn with_bandwidth(mut self, bandwidth: f64) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("bandwidth", self.bandwidth)?;
        positive("root_tol", self.root_tol)?;
        positive("bracket_pad", self.bracket_pad)?;
        check_floor(self.km_floor)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if let PsiSpec::Huber { c } = self.psi {
            positive("huber constant", c)?;
        }
        Ok(())
    }

    /// Flat description of the configuration, echoed into reports.
    pub fn summary(&self) -> ConfigSummary {
        ConfigSummary {
            kernel: self.kernel.to_string(),
            psi: self.psi.to_string(),
            bandwidth: self.bandwidth,
            km_floor: self.km_floor,
            root_tol: self.root_tol,
            max_iter: self.max_iter,
            bracket_pad: self.bracket_pad,
            mhat_with_delta: self.mhat_with_delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub kernel: String,
    pub psi: String,
    pub bandwidth: f64,
    pub km_floor: f64,
    pub root_tol: f64,
    pub max_iter: usize,
    pub bracket_pad: f64,
    pub mhat_with_delta: bool,
}

/// Value of the plug-in score at one `theta`, with its raw sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue {
    pub score: f64,
    /// `sum_i Delta_i(x) delta_i psi(Y_i - theta) / G(Y_i)`.
    pub numerator: f64,
    /// `sum_i Delta_i(x)`.
    pub denominator: f64,
    /// Total kernel mass at `x`; equal to `denominator`.
    pub effective_weight: f64,
}

/// A dataset paired with the clamped inverse censoring-survival weight of each
/// observed time. Build once, then evaluate at many points.
#[derive(Debug, Clone)]
pub struct WeightedSample<'a> {
    data: &'a [CensoredObservation],
    inverse_survival: Vec<f64>,
    dim: usize,
}

impl<'a> WeightedSample<'a> {
    /// Weights `1 / max(G_n(Y_i-), floor)` from a fitted Kaplan-Meier curve.
    pub fn with_km(data: &'a [CensoredObservation], km: &KmFit, floor: f64) -> Result<Self> {
        Self::with_survival(data, |t| km.survival_before(t), floor)
    }

    /// Weights from a known survival function, e.g. the true censoring law in
    /// a simulation.
    pub fn with_survival<F>(
        data: &'a [CensoredObservation],
        survival: F,
        floor: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        let dim = validate_observations(data)?;
        check_floor(floor)?;
        let inverse_survival = data
            .iter()
            .map(|o| inverse_clamped(survival(o.y), floor))
            .collect();
        Ok(Self {
            data,
            inverse_survival,
            dim,
        })
    }

    pub fn data(&self) -> &'a [CensoredObservation] {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn inverse_survival(&self) -> &[f64] {
        &self.inverse_survival
    }

    /// Localizes the sample at `x`.
    pub fn local(&self, x: &[f64], cfg: &EstimatorConfig) -> Result<LocalFit> {
        cfg.validate()?;
        let weights = local_weights_unchecked(self.data, self.dim, x, cfg)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoLocalData {
                x: x.to_vec(),
                bandwidth: cfg.bandwidth,
            });
        }
        let mut fit = LocalFit {
            x: x.to_vec(),
            total_weight: total,
            psi: cfg.psi,
            cfg: *cfg,
            n: self.data.len(),
            y: Vec::new(),
            w: Vec::new(),
            g: Vec::new(),
            delta: Vec::new(),
            term_y: Vec::new(),
            term_a: Vec::new(),
        };
        for (i, (&w, obs)) in weights.iter().zip(self.data).enumerate() {
            if w <= 0.0 {
                continue;
            }
            let g = self.inverse_survival[i];
            fit.y.push(obs.y);
            fit.w.push(w);
            fit.g.push(g);
            fit.delta.push(obs.delta);
            if obs.delta {
                fit.term_y.push(obs.y);
                fit.term_a.push(w * g);
            }
        }
        Ok(fit)
    }
}

/// The sample localized at one point: the observations with positive kernel
/// weight, in their original order.
#[derive(Debug, Clone)]
pub struct LocalFit {
    x: Vec<f64>,
    total_weight: f64,
    psi: PsiSpec,
    cfg: EstimatorConfig,
    n: usize,
    y: Vec<f64>,
    w: Vec<f64>,
    g: Vec<f64>,
    delta: Vec<bool>,
    // uncensored terms: Y_i and Delta_i * inverse survival
    term_y: Vec<f64>,
    term_a: Vec<f64>,
}

impl LocalFit {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Number of observations in the full sample.
    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// Number of observations with positive weight.
    pub fn local_count(&self) -> usize {
        self.y.len()
    }

    pub fn uncensored_count(&self) -> usize {
        self.term_y.len()
    }

    fn numerator(&self, theta: f64) -> f64 {
        let psi = self.psi;
        self.term_a
            .iter()
            .zip(&self.term_y)
            .map(|(a, y)| a * psi.eval(y - theta))
            .sum()
    }

    pub fn score(&self, theta: f64) -> ScoreValue {
        let numerator = self.numerator(theta);
        ScoreValue {
            score: numerator / self.total_weight,
            numerator,
            denominator: self.total_weight,
            effective_weight: self.total_weight,
        }
    }

    /// Analytic derivative of the score in `theta`.
    pub fn score_derivative(&self, theta: f64) -> f64 {
        let psi = self.psi;
        let s: f64 = self
            .term_a
            .iter()
            .zip(&self.term_y)
            .map(|(a, y)| a * psi.derivative(y - theta))
            .sum();
        -s / self.total_weight
    }

    /// Root of the score with its final bracket.
    pub fn solve_detailed(&self) -> Result<root::Root> {
        let pad = self.cfg.bracket_pad;
        let source = if self.term_y.is_empty() {
            &self.y
        } else {
            &self.term_y
        };
        let (min, max) = source
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        root::solve_nonincreasing(
            |t| self.numerator(t),
            min - pad,
            max + pad,
            self.cfg.root_tol,
            self.cfg.max_iter,
        )
    }

    /// The M-estimate at `x`.
    pub fn solve(&self) -> Result<f64> {
        self.solve_detailed().map(|r| r.value)
    }

    /// Synthetic-data Nadaraya-Watson estimate `sum Delta_i delta_i Y_i / G(Y_i) / sum Delta_i`.
    pub fn nw(&self) -> f64 {
        let s: f64 = self
            .term_a
            .iter()
            .zip(&self.term_y)
            .map(|(a, y)| a * y)
            .sum();
        s / self.total_weight
    }

    /// Plug-in estimate of `E[psi^2(T - theta) / G(T) | X = x]`.
    pub fn m_hat(&self, theta: f64) -> f64 {
        let psi = self.psi;
        let s: f64 = if self.cfg.mhat_with_delta {
            self.y
                .iter()
                .zip(&self.w)
                .zip(&self.g)
                .zip(&self.delta)
                .filter(|(_, &d)| d)
                .map(|(((y, w), g), _)| {
                    let p = psi.eval(y - theta);
                    w * p * p * g * g
                })
                .sum()
        } else {
            self.y
                .iter()
                .zip(&self.w)
                .zip(&self.g)
                .map(|((y, w), g)| {
                    let p = psi.eval(y - theta);
                    w * p * p * g
                })
                .sum()
        };
        s / self.total_weight
    }

    /// Plug-in estimate of `E[psi'(T - theta) | X = x]`, using `Y_i` for `T_i`.
    pub fn gamma1(&self, theta: f64) -> f64 {
        let psi = self.psi;
        let s: f64 = self
            .y
            .iter()
            .zip(&self.w)
            .map(|(y, w)| w * psi.derivative(y - theta))
            .sum();
        s / self.total_weight
    }
}

fn local_weights_unchecked(
    data: &[CensoredObservation],
    dim: usize,
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    if x.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: x.len(),
        });
    }
    let kernel = KernelSpec::new(cfg.kernel, dim)?;
    Ok(data
        .iter()
        .map(|o| kernel.scaled_weight(&o.x, x, cfg.bandwidth))
        .collect())
}

/// Unnormalized kernel weights `K((X_i - x) / h)`.
pub fn local_weights(
    data: &[CensoredObservation],
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dim = validate_observations(data)?;
    local_weights_unchecked(data, dim, x, cfg)
}

pub fn psi_score(
    data: &[CensoredObservation],
    km: &KmFit,
    x: &[f64],
    theta: f64,
    cfg: &EstimatorConfig,
) -> Result<ScoreValue> {
    Ok(WeightedSample::with_km(data, km, cfg.km_floor)?
        .local(x, cfg)?
        .score(theta))
}

/// Score with a known censoring survival function in place of `G_n`.
pub fn psi_score_oracle<F>(
    data: &[CensoredObservation],
    true_survival: F,
    x: &[f64],
    theta: f64,
    cfg: &EstimatorConfig,
) -> Result<ScoreValue>
where
    F: Fn(f64) -> f64,
{
    Ok(
        WeightedSample::with_survival(data, true_survival, cfg.km_floor)?
            .local(x, cfg)?
            .score(theta),
    )
}

pub fn solve_m_estimator(
    data: &[CensoredObservation],
    km: &KmFit,
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    WeightedSample::with_km(data, km, cfg.km_floor)?
        .local(x, cfg)?
        .solve()
}

pub fn nw_estimator(
    data: &[CensoredObservation],
    km: &KmFit,
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    Ok(WeightedSample::with_km(data, km, cfg.km_floor)?
        .local(x, cfg)?
        .nw())
}

pub fn estimate_m_hat(
    data: &[CensoredObservation],
    km: &KmFit,
    x: &[f64],
    theta: f64,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    Ok(WeightedSample::with_km(data, km, cfg.km_floor)?
        .local(x, cfg)?
        .m_hat(theta))
}

/// `gamma1_hat` does not involve the censoring weights.
pub fn estimate_gamma1(
    data: &[CensoredObservation],
    x: &[f64],
    theta: f64,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    Ok(WeightedSample::with_survival(data, |_| 1.0, cfg.km_floor)?
        .local(x, cfg)?
        .gamma1(theta))
}
