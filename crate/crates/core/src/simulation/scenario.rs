use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    calibrate_contaminated_rate, child_rng, Model, CALIBRATION_STREAM, DEFAULT_PILOT_SIZE,
    DEFAULT_SIGMA,
};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationMode {
    /// Multiply the latent lifetime, then censor again.
    #[default]
    Latent,
    /// Multiply the observed response and keep the censoring flag.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub fraction: f64,
    pub factor: f64,
    #[serde(default)]
    pub mode: ContaminationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    Fixed(f64),
    GridSelect(Vec<f64>),
    /// `h = n^(-1/3)`
    RateRule,
}

impl BandwidthPolicy {
    pub fn describe(&self) -> String {
        match self {
            BandwidthPolicy::Fixed(h) => format!("fixed:{h}"),
            BandwidthPolicy::GridSelect(g) => format!("grid_select:{}", g.len()),
            BandwidthPolicy::RateRule => "rate_rule".into(),
        }
    }
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_replications() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: Model,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_cr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_rate: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contamination: Option<Contamination>,
    pub bandwidth_policy: BandwidthPolicy,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(model: Model, n: usize, target_cr: f64, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model,
            n,
            target_cr: Some(target_cr),
            fixed_rate: None,
            sigma: DEFAULT_SIGMA,
            contamination: None,
            bandwidth_policy: BandwidthPolicy::RateRule,
            replications: 100,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {}",
                self.schema_version
            ));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        match (self.target_cr, self.fixed_rate) {
            (Some(cr), None) if cr > 0.0 && cr < 1.0 => {}
            (Some(cr), None) => return bad(format!("target_cr must lie in (0, 1), got {cr}")),
            (None, Some(rate)) if rate > 0.0 && rate.is_finite() => {}
            (None, Some(rate)) => return bad(format!("fixed_rate must be positive, got {rate}")),
            _ => return bad("exactly one of target_cr and fixed_rate must be set".into()),
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if let Some(c) = self.contamination {
            if !(c.fraction > 0.0 && c.fraction < 1.0) {
                return bad(format!(
                    "contamination fraction must lie in (0, 1), got {}",
                    c.fraction
                ));
            }
            if !(c.factor > 0.0 && c.factor.is_finite()) {
                return bad(format!(
                    "contamination factor must be positive, got {}",
                    c.factor
                ));
            }
        }
        match &self.bandwidth_policy {
            BandwidthPolicy::Fixed(h) if !(*h > 0.0 && h.is_finite()) => {
                bad(format!("bandwidth must be positive, got {h}"))
            }
            BandwidthPolicy::GridSelect(g)
                if g.is_empty() || g.iter().any(|h| !(*h > 0.0 && h.is_finite())) =>
            {
                bad("bandwidth grid must be non-empty and positive".into())
            }
            _ => Ok(()),
        }
    }

    /// Censoring rate: the fixed rate, or the rate calibrated on the
    /// (contaminated) model from the reserved calibration stream.
    pub fn censoring_rate(&self) -> Result<f64> {
        self.validate()?;
        match (self.fixed_rate, self.target_cr) {
            (Some(rate), _) => Ok(rate),
            (None, Some(cr)) => {
                let mut rng = child_rng(self.seed, CALIBRATION_STREAM);
                calibrate_contaminated_rate(
                    self.model,
                    self.sigma,
                    self.contamination,
                    cr,
                    DEFAULT_PILOT_SIZE,
                    &mut rng,
                )
            }
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn rate_rule_bandwidth(&self) -> f64 {
        (self.n as f64).powf(-1.0 / 3.0)
    }
}
