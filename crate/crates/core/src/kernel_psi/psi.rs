use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_HUBER_C: f64 = 1.345;

/// Nondecreasing score functions `psi` with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiSpec {
    /// `psi(u) = u`; the root is a weighted mean.
    Identity,
    /// `psi(u) = u / sqrt(1 + u^2)`.
    AlgebraicSigmoid,
    /// `psi(u) = clamp(u, -c, c)`.
    Huber { c: f64 },
}

impl PsiSpec {
    pub fn huber(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(PsiSpec::Huber { c })
        } else {
            Err(Error::InvalidConfig(format!(
                "huber constant must be positive, got {c}"
            )))
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            PsiSpec::Identity => u,
            PsiSpec::AlgebraicSigmoid => u / (1.0 + u * u).sqrt(),
            PsiSpec::Huber { c } => u.clamp(-c, c),
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            PsiSpec::Identity => 1.0,
            PsiSpec::AlgebraicSigmoid => {
                let s = 1.0 + u * u;
                1.0 / (s * s.sqrt())
            }
            PsiSpec::Huber { c } => {
                if u.abs() <= c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, PsiSpec::Identity)
    }
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Identity => f.write_str("identity"),
            PsiSpec::AlgebraicSigmoid => f.write_str("algebraic_sigmoid"),
            PsiSpec::Huber { c } => write!(f, "huber:{c}"),
        }
    }
}

impl FromStr for PsiSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(PsiSpec::Identity),
            "algebraic_sigmoid" => Ok(PsiSpec::AlgebraicSigmoid),
            "huber" => PsiSpec::huber(DEFAULT_HUBER_C),
            other => match other.strip_prefix("huber:") {
                Some(c) => {
                    let c: f64 = c.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad huber constant in {other:?}"))
                    })?;
                    PsiSpec::huber(c)
                }
                None => Err(Error::InvalidConfig(format!("unknown psi {other:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_values() {
        let p = PsiSpec::AlgebraicSigmoid;
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.derivative(0.0), 1.0);
        assert_relative_eq!(
            p.eval(1.0),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_relative_eq!(p.derivative(1.0), 2f64.powf(-1.5), epsilon = 1e-15);
    }

    #[test]
    fn identity_and_huber() {
        assert_eq!(PsiSpec::Identity.eval(-3.25), -3.25);
        assert_eq!(PsiSpec::Identity.derivative(7.0), 1.0);
        let h = PsiSpec::huber(1.345).unwrap();
        assert_eq!(h.eval(5.0), 1.345);
        assert_eq!(h.eval(-5.0), -1.345);
        assert_eq!(h.eval(0.5), 0.5);
        assert_eq!(h.derivative(1.345), 1.0);
        assert_eq!(h.derivative(1.35), 0.0);
    }

    #[test]
    fn parse_round_trip() {
        for p in [
            PsiSpec::Identity,
            PsiSpec::AlgebraicSigmoid,
            PsiSpec::Huber { c: 1.345 },
            PsiSpec::Huber { c: 2.5 },
        ] {
            assert_eq!(p.to_string().parse::<PsiSpec>().unwrap(), p);
        }
        assert_eq!(
            "huber".parse::<PsiSpec>().unwrap(),
            PsiSpec::Huber { c: 1.345 }
        );
        assert!("huber:-1".parse::<PsiSpec>().is_err());
        assert!("huber:abc".parse::<PsiSpec>().is_err());
        assert!("sign".parse::<PsiSpec>().is_err());
    }
}
