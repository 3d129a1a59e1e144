//! Kaplan-Meier estimate of the censoring survival function.
//!
//! The fitted object is the step function
//!
//! ```text
//! G_n(t) = prod_{i : Y_(i) <= t} (1 - (1 - delta_(i)) / (n - i + 1))   for t < Y_(n)
//! G_n(t) = 0                                                           otherwise
//! ```
//!
//! where `Y_(1) <= ... <= Y_(n)` are the sorted observed times and `delta_(i)`
//! the censoring flag carried along with `Y_(i)`. Tied times are ordered with
//! uncensored observations first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One right-censored record: covariate vector, observed time `min(T, C)` and
/// the flag `delta = 1{T <= C}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredObservation {
    pub x: Vec<f64>,
    pub y: f64,
    pub delta: bool,
}

impl CensoredObservation {
    pub fn new(x: Vec<f64>, y: f64, delta: bool) -> Self {
        Self { x, y, delta }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Checks the dataset-level invariants: non-empty, finite values and a common
/// covariate dimension. Returns that dimension.
pub fn validate_observations(data: &[CensoredObservation]) -> Result<usize> {
    let first = data.first().ok_or(Error::EmptyData)?;
    let d = first.dim();
    if d == 0 {
        return Err(Error::InvalidObservation {
            index: 0,
            reason: "covariate vector is empty".into(),
        });
    }
    for (index, obs) in data.iter().enumerate() {
        if obs.dim() != d {
            return Err(Error::InvalidObservation {
                index,
                reason: format!("covariate dimension {} differs from {}", obs.dim(), d),
            });
        }
        if !obs.y.is_finite() {
            return Err(Error::InvalidObservation {
                index,
                reason: format!("non-finite observed time {}", obs.y),
            });
        }
        if obs.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservation {
                index,
                reason: "non-finite covariate".into(),
            });
        }
    }
    Ok(d)
}

/// Fitted Kaplan-Meier survival function of the censoring variable.
///
/// `survival_values[k]` is the value of the product after the first `k`
/// order statistics, so `survival_values[0] == 1` and the vector has one more
/// entry than `jump_times`. The "0 at or beyond `y_max`" rule is applied at
/// evaluation time and is not baked into the stored products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmFit {
    jump_times: Vec<f64>,
    survival_values: Vec<f64>,
    y_max: f64,
}

impl KmFit {
    /// Fits the estimator from `(y, delta)` pairs.
    pub fn fit<I>(data: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, bool)>,
    {
        let mut pairs: Vec<(f64, bool)> = data.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyData);
        }
        if let Some(index) = pairs.iter().position(|(y, _)| !y.is_finite()) {
            return Err(Error::InvalidObservation {
                index,
                reason: format!("non-finite observed time {}", pairs[index].0),
            });
        }
        // uncensored (true) before censored (false) at tied times
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));

        let n = pairs.len();
        let mut survival_values = Vec::with_capacity(n + 1);
        let mut prod = 1.0_f64;
        survival_values.push(prod);
        for (i, &(_, delta)) in pairs.iter().enumerate() {
            let censored = if delta { 0.0 } else { 1.0 };
            prod *= 1.0 - censored / (n - i) as f64;
            survival_values.push(prod);
        }
        let jump_times: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y_max = jump_times[n - 1];
        Ok(Self {
            jump_times,
            survival_values,
            y_max,
        })
    }

    pub fn from_observations(data: &[CensoredObservation]) -> Result<Self> {
        Self::fit(data.iter().map(|o| (o.y, o.delta)))
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn survival_values(&self) -> &[f64] {
        &self.survival_values
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// `G_n(t)`, right-continuous, 0 for `t >= y_max`.
    pub fn survival_at(&self, t: f64) -> f64 {
        if !(t < self.y_max) {
            return 0.0;
        }
        let k = self.jump_times.partition_point(|&y| y <= t);
        self.survival_values[k]
    }

    /// Left limit `G_n(t-)`: the product over order statistics strictly below
    /// `t`, and 0 once `t` lies strictly beyond `y_max`.
    pub fn survival_before(&self, t: f64) -> f64 {
        if t > self.y_max {
            return 0.0;
        }
        let k = self.jump_times.partition_point(|&y| y < t);
        self.survival_values[k]
    }

    /// `1 / max(G_n(t), floor)`.
    pub fn clamped_inverse_survival(&self, t: f64, floor: f64) -> Result<f64> {
        check_floor(floor)?;
        Ok(inverse_clamped(self.survival_at(t), floor))
    }

    /// `1 / max(G_n(t-), floor)`; the weight used for observed times by the
    /// estimators.
    pub fn clamped_inverse_survival_before(&self, t: f64, floor: f64) -> Result<f64> {
        check_floor(floor)?;
        Ok(inverse_clamped(self.survival_before(t), floor))
    }

    /// Steps of the fitted function as `(t, G_n(t))` pairs at each distinct
    /// order statistic, preceded by the value on `(-inf, Y_(1))`.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.jump_times.len() + 1);
        out.push((f64::NEG_INFINITY, self.survival_values[0]));
        let mut prev: Option<f64> = None;
        for &t in &self.jump_times {
            if prev == Some(t) {
                continue;
            }
            prev = Some(t);
            out.push((t, self.survival_at(t)));
        }
        out
    }
}

pub(crate) fn check_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidFloor(floor))
    }
}

#[inline]
pub(crate) fn inverse_clamped(survival: f64, floor: f64) -> f64 {
    1.0 / survival.max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fit(y: &[f64], d: &[u8]) -> KmFit {
        KmFit::fit(y.iter().copied().zip(d.iter().map(|&v| v == 1))).unwrap()
    }

    #[test]
    fn all_uncensored_is_one_below_max() {
        let km = fit(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 1, 1]);
        for t in [-1.0, 0.0, 1.0, 2.5, 3.999] {
            assert_eq!(km.survival_at(t), 1.0);
        }
        assert_eq!(km.survival_at(4.0), 0.0);
        assert_eq!(km.survival_at(10.0), 0.0);
        assert!(km.survival_values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_censored_point() {
        let km = fit(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 1, 1]);
        assert_relative_eq!(km.survival_at(2.5), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(km.survival_at(1.5), 1.0);
        assert_eq!(km.survival_at(4.0), 0.0);
    }

    #[test]
    fn single_observation_censored() {
        let km = fit(&[5.0], &[0]);
        assert_eq!(km.survival_at(4.999), 1.0);
        assert_eq!(km.survival_at(5.0), 0.0);
        assert_eq!(km.survival_at(6.0), 0.0);
    }

    #[test]
    fn left_limit_keeps_last_uncensored_point() {
        let km = fit(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 1, 1]);
        assert_relative_eq!(km.survival_before(4.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(km.survival_before(2.0), 1.0);
        assert_relative_eq!(km.survival_before(2.0001), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(km.survival_before(4.5), 0.0);
    }

    #[test]
    fn clamped_inverse() {
        let km = fit(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 1, 1]);
        assert_eq!(km.clamped_inverse_survival(0.5, 0.05).unwrap(), 1.0);
        assert_relative_eq!(km.clamped_inverse_survival(4.0, 0.05).unwrap(), 20.0);
        assert_relative_eq!(
            km.clamped_inverse_survival(2.5, 0.05).unwrap(),
            1.5,
            epsilon = 1e-14
        );
        for bad in [0.0, 1.0, -0.1, 2.0, f64::NAN] {
            assert!(matches!(
                km.clamped_inverse_survival(1.0, bad),
                Err(Error::InvalidFloor(_))
            ));
        }
    }

    #[test]
    fn ties_put_uncensored_first() {
        // censored point tied with an uncensored one: the censored factor uses
        // the smaller risk set
        let km = fit(&[1.0, 1.0, 2.0], &[0, 1, 1]);
        assert_relative_eq!(km.survival_at(1.5), 0.5, epsilon = 1e-15);
        let swapped = fit(&[1.0, 1.0, 2.0], &[1, 0, 1]);
        assert_eq!(km, swapped);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            KmFit::fit(std::iter::empty()),
            Err(Error::EmptyData)
        ));
        assert!(matches!(
            KmFit::fit([(1.0, true), (f64::NAN, false)]),
            Err(Error::InvalidObservation { index: 1, .. })
        ));
    }

    #[test]
    fn all_censored_matches_empirical_product() {
        let y = [0.3, 0.9, 1.4, 2.2, 3.1];
        let km = fit(&y, &[0, 0, 0, 0, 0]);
        let n = y.len();
        let mut expected = 1.0;
        for i in 0..n - 1 {
            expected *= 1.0 - 1.0 / (n - i) as f64;
            assert_relative_eq!(km.survival_at(y[i] + 0.01), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn validation() {
        let ok = vec![
            CensoredObservation::new(vec![0.1], 1.0, true),
            CensoredObservation::new(vec![0.2], 2.0, false),
        ];
        assert_eq!(validate_observations(&ok).unwrap(), 1);
        let mixed = vec![
            CensoredObservation::new(vec![0.1], 1.0, true),
            CensoredObservation::new(vec![0.2, 0.3], 2.0, false),
        ];
        assert!(matches!(
            validate_observations(&mixed),
            Err(Error::InvalidObservation { index: 1, .. })
        ));
        assert!(matches!(validate_observations(&[]), Err(Error::EmptyData)));
    }
}
