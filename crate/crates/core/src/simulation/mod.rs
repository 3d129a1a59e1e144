//! Simulated censored regression data and the replication studies built on it.
//!
//! Covariates follow `X_i = 0.4 X_{i-1} + eta_i` with Bernoulli(1/2)
//! innovations, a stationary ergodic chain that is not strongly mixing. The
//! response is `T = m(X) + sigma * eps` and is right-censored by an
//! independent exponential variable.

mod scenario;
mod study;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::km::CensoredObservation;

pub use scenario::{BandwidthPolicy, Contamination, ContaminationMode, Scenario, SCHEMA_VERSION};
pub use study::{
    emit_curve_data, map_replications, resolve_bandwidth, run_coverage_study, run_gmse_study,
    run_scenario, select_bandwidth, simulate_replication, BandwidthTable, CoverageDraw,
    CoveragePoint, CoverageReport, CurveRow, GmseReport, ReplicationMse,
};

pub const AR_COEFFICIENT: f64 = 0.4;
pub const BURN_IN: usize = 500;
pub const DEFAULT_SIGMA: f64 = 0.01;
pub const DEFAULT_PILOT_SIZE: usize = 100_000;
const RATE_RANGE: (f64, f64) = (1e-4, 1e4);
/// Stream reserved for censoring-rate calibration; replication `b` uses
/// stream `b`.
pub const CALIBRATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    M1,
    M2,
    M3,
}

impl Model {
    pub fn mean(self, x: f64) -> f64 {
        regression_model(self, x)
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::M1 => "M1",
            Model::M2 => "M2",
            Model::M3 => "M3",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(Model::M1),
            "M2" => Ok(Model::M2),
            "M3" => Ok(Model::M3),
            _ => Err(Error::InvalidConfig(format!("unknown model '{s}'"))),
        }
    }
}

pub fn regression_model(model: Model, x: f64) -> f64 {
    match model {
        Model::M1 => x + 2.0 * (-16.0 * x * x).exp(),
        Model::M2 => x,
        Model::M3 => x * x + 1.0,
    }
}

/// Child generator for stream `stream` of `seed`.
pub fn child_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs the autoregression from `x0` with the given innovations.
pub fn ar_path_from_innovations(x0: f64, innovations: &[f64]) -> Vec<f64> {
    let mut x = x0;
    innovations
        .iter()
        .map(|eta| {
            x = AR_COEFFICIENT * x + eta;
            x
        })
        .collect()
}

/// `n` consecutive covariates after [`BURN_IN`] steps from zero.
pub fn gen_covariate_path<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut x = 0.0;
    for _ in 0..BURN_IN {
        x = AR_COEFFICIENT * x + bernoulli_half(rng);
    }
    let innovations: Vec<f64> = (0..n).map(|_| bernoulli_half(rng)).collect();
    ar_path_from_innovations(x, &innovations)
}

fn bernoulli_half<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        0.0
    }
}

/// A simulated sample together with the latent quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub observations: Vec<CensoredObservation>,
    pub lifetimes: Vec<f64>,
    pub censoring: Vec<f64>,
    pub rate: f64,
    pub model: Model,
}

impl SimDataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn covariates(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.x[0])
    }

    /// Exact censoring survival `P(C > t)`.
    pub fn true_survival(&self, t: f64) -> f64 {
        exp_survival(self.rate, t)
    }

    pub fn censoring_fraction(&self) -> f64 {
        let censored = self.observations.iter().filter(|o| !o.delta).count();
        censored as f64 / self.len() as f64
    }

    fn recensor(&mut self, i: usize) {
        let (t, c) = (self.lifetimes[i], self.censoring[i]);
        let obs = &mut self.observations[i];
        obs.y = t.min(c);
        obs.delta = t <= c;
    }
}

pub fn exp_survival(rate: f64, t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else {
        (-rate * t).exp()
    }
}

/// Draws covariates, lifetimes and `Exp(rate)` censoring times, in that
/// order, from `rng`.
pub fn gen_dataset<R: Rng + ?Sized>(
    model: Model,
    n: usize,
    sigma: f64,
    rate: f64,
    rng: &mut R,
) -> SimDataset {
    let xs = gen_covariate_path(n, rng);
    let lifetimes: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let eps: f64 = StandardNormal.sample(rng);
            model.mean(x) + sigma * eps
        })
        .collect();
    let censoring: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e / rate
        })
        .collect();
    let observations = xs
        .iter()
        .zip(lifetimes.iter().zip(&censoring))
        .map(|(&x, (&t, &c))| CensoredObservation::new(vec![x], t.min(c), t <= c))
        .collect();
    SimDataset {
        observations,
        lifetimes,
        censoring,
        rate,
        model,
    }
}

/// Multiplies the responses of a uniformly chosen `ceil(fraction * n)`
/// subset by `factor` and returns the chosen indices in increasing order.
pub fn contaminate<R: Rng + ?Sized>(
    data: &mut SimDataset,
    fraction: f64,
    factor: f64,
    mode: ContaminationMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "contamination fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "contamination factor must be positive, got {factor}"
        )));
    }
    let n = data.len();
    let count = ((fraction * n as f64).ceil() as usize).min(n);
    let mut chosen = sample(rng, n, count).into_vec();
    chosen.sort_unstable();
    for &i in &chosen {
        match mode {
            ContaminationMode::Latent => {
                data.lifetimes[i] *= factor;
                data.recensor(i);
            }
            ContaminationMode::Observed => data.observations[i].y *= factor,
        }
    }
    Ok(chosen)
}

/// Exponential rate giving censoring fraction `target` under `model`.
///
/// A pilot of `n_pilot` lifetimes and unit exponentials is drawn once, so the
/// pilot fraction `mean(E_i < rate * T_i)` is monotone in the rate and the
/// bisection on `log(rate)` is exact for that pilot.
pub fn calibrate_censoring_rate<R: Rng + ?Sized>(
    model: Model,
    sigma: f64,
    target: f64,
    n_pilot: usize,
    rng: &mut R,
) -> Result<f64> {
    calibrate_contaminated_rate(model, sigma, None, target, n_pilot, rng)
}

/// As [`calibrate_censoring_rate`] with the pilot lifetimes contaminated
/// first, so the target refers to the contaminated sample. Contamination of
/// the observed response leaves the censoring flags alone and is ignored.
pub fn calibrate_contaminated_rate<R: Rng + ?Sized>(
    model: Model,
    sigma: f64,
    contamination: Option<Contamination>,
    target: f64,
    n_pilot: usize,
    rng: &mut R,
) -> Result<f64> {
    let (lo_rate, hi_rate) = RATE_RANGE;
    let mut pilot = gen_dataset(model, n_pilot.max(1), sigma, 1.0, rng);
    if let Some(c) = contamination.filter(|c| c.mode == ContaminationMode::Latent) {
        contaminate(&mut pilot, c.fraction, c.factor, c.mode, rng)?;
    }
    let unit = &pilot.censoring;
    let fraction = |rate: f64| {
        let censored = unit
            .iter()
            .zip(&pilot.lifetimes)
            .filter(|(e, t)| **e < rate * **t)
            .count();
        censored as f64 / unit.len() as f64
    };
    let (min, max) = (fraction(lo_rate), fraction(hi_rate));
    let tolerance = 0.01;
    if !(target > 0.0 && target < 1.0) || target < min - tolerance || target > max + tolerance {
        return Err(Error::UnreachableCr { target, min, max });
    }
    let (mut lo, mut hi) = (lo_rate.ln(), hi_rate.ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if fraction(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let rate = (0.5 * (lo + hi)).exp();
    if (fraction(rate) - target).abs() > tolerance {
        return Err(Error::UnreachableCr { target, min, max });
    }
    Ok(rate)
}

/// The bandwidth grid `0.05, 0.07, ..., 0.99`.
pub fn bandwidth_grid() -> Vec<f64> {
    (0..48).map(|i| (5 + 2 * i) as f64 / 100.0).collect()
}
