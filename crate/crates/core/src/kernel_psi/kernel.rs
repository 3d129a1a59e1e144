use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial kernel families `K(u) = k(||u||_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `k(r) = 1{r <= 1}`, left unnormalized.
    Indicator,
    Epanechnikov,
    Triweight,
    Gaussian,
}

impl KernelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelFamily::Indicator => "indicator",
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Triweight => "triweight",
            KernelFamily::Gaussian => "gaussian",
        }
    }

    pub fn has_bounded_support(&self) -> bool {
        !matches!(self, KernelFamily::Gaussian)
    }

    // exponent p of the (1 - r^2)^p profile
    fn polynomial_power(&self) -> Option<u32> {
        match self {
            KernelFamily::Indicator => Some(0),
            KernelFamily::Epanechnikov => Some(1),
            KernelFamily::Triweight => Some(3),
            KernelFamily::Gaussian => None,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(KernelFamily::Indicator),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "triweight" => Ok(KernelFamily::Triweight),
            "gaussian" => Ok(KernelFamily::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown kernel {other:?}"))),
        }
    }
}

/// A kernel family in a fixed covariate dimension.
///
/// The Epanechnikov, triweight and Gaussian profiles are scaled so that `K`
/// integrates to one over `R^d`. The indicator keeps `k(r) = 1` on the unit
/// ball; every quantity built from it is a ratio in which the scale cancels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "kernel dimension must be positive".into(),
            ));
        }
        Ok(Self {
            family,
            dim,
            scale: normalizing_scale(family, dim),
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same family in another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.family, dim)
    }

    /// Radial profile `k` evaluated at the squared radius `r2 = r^2`.
    #[inline]
    pub fn profile_sq(&self, r2: f64) -> f64 {
        let c = self.scale;
        match self.family {
            KernelFamily::Indicator => {
                if r2 <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Epanechnikov => {
                if r2 <= 1.0 {
                    c * (1.0 - r2)
                } else {
                    0.0
                }
            }
            KernelFamily::Triweight => {
                if r2 <= 1.0 {
                    let s = 1.0 - r2;
                    c * s * s * s
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => c * (-0.5 * r2).exp(),
        }
    }

    /// Radial profile `k(r)` for `r >= 0`.
    pub fn profile(&self, r: f64) -> f64 {
        self.profile_sq(r * r)
    }

    /// `K(u) = k(||u||_2)`.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: u.len(),
            });
        }
        Ok(self.profile_sq(u.iter().map(|v| v * v).sum()))
    }

    /// `K((xi - x) / h)` without allocating; dimensions are assumed to match.
    #[inline]
    pub(crate) fn scaled_weight(&self, xi: &[f64], x: &[f64], bandwidth: f64) -> f64 {
        let r2: f64 = xi
            .iter()
            .zip(x)
            .map(|(a, b)| {
                let u = (a - b) / bandwidth;
                u * u
            })
            .sum();
        self.profile_sq(r2)
    }

    /// `int_0^1 k^j(u) u^{d-1} du`; over `[0, inf)` for the Gaussian family.
    pub fn moment(&self, j: u32) -> f64 {
        assert!(j >= 1, "kernel moment order must be positive");
        let c = self.scale;
        let d = self.dim as f64;
        match self.family.polynomial_power() {
            Some(p) => c.powi(j as i32) * radial_poly_integral(p * j, self.dim),
            // int_0^inf e^{-j u^2 / 2} u^{d-1} du = 0.5 * (2/j)^{d/2} * Gamma(d/2)
            None => c.powi(j as i32) * 0.5 * (2.0 / j as f64).powf(d / 2.0) * gamma_half(self.dim),
        }
    }
}

fn normalizing_scale(family: KernelFamily, dim: usize) -> f64 {
    let d = dim as f64;
    match family.polynomial_power() {
        Some(0) => 1.0,
        Some(p) => {
            // int_{R^d} (1 - |u|^2)^p du = d * V_d * int_0^1 (1 - r^2)^p r^{d-1} dr
            1.0 / (d * unit_ball_volume(dim) * radial_poly_integral(p, dim))
        }
        None => (2.0 * PI).powf(-d / 2.0),
    }
}

/// `int_0^1 (1 - r^2)^p r^{d-1} dr`, via integration by parts:
/// `I(p, d) = 2p/d * I(p - 1, d + 2)` and `I(0, d) = 1/d`.
pub(crate) fn radial_poly_integral(p: u32, d: usize) -> f64 {
    let mut acc = 1.0;
    let mut dd = d as f64;
    for k in (1..=p).rev() {
        acc *= 2.0 * k as f64 / dd;
        dd += 2.0;
    }
    acc / dd
}

/// `Gamma(m / 2)` for a positive integer `m`.
pub(crate) fn gamma_half(m: usize) -> f64 {
    assert!(m >= 1);
    let (mut value, mut arg) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = m as f64 / 2.0;
    while arg < target {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// Volume of the Euclidean unit ball in `R^d`.
pub(crate) fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma_half(d + 2)
}
