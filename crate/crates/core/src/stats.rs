//! Weighted Generalized Entropy inequality indices.
//!
//! For a weighted sample with mean `mu` the index of order `alpha` is
//!
//! ```text
//! I(alpha) = 1/(alpha^2 - alpha) * ( sum_i w_i (y_i/mu)^alpha / sum_i w_i - 1 )
//! ```
//!
//! with the mean log deviation at `alpha = 0` and the Theil index at
//! `alpha = 1`. Within [`LIMIT_EPS`] of either pole the limiting form is used.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summation::chunked_sums;

/// Distance from 0 or 1 under which the limiting forms replace the general formula.
pub const LIMIT_EPS: f64 = 1e-9;

/// Negative round-off below this magnitude is clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Exponent used by every published decomposition in this toolkit.
pub const DEFAULT_ALPHA: f64 = 1.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty-sample: total weight is zero")]
    EmptySample,
    #[error("nonpositive value {value} at item {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("invalid weight {value} at item {index}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("values and weights differ in length ({values} vs {weights})")]
    LengthMismatch { values: usize, weights: usize },
    #[error("alpha must be finite, got {0}")]
    NonFiniteAlpha(f64),
    #[error("index evaluated to {value} for alpha {alpha}; beyond round-off")]
    NegativeIndex { alpha: f64, value: f64 },
}

/// Strictly positive values with non-negative weights and positive total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    total_weight: f64,
    mean: f64,
    equal_valued: bool,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self, StatsError> {
        if values.len() != weights.len() {
            return Err(StatsError::LengthMismatch {
                values: values.len(),
                weights: weights.len(),
            });
        }
        for (index, (&y, &w)) in values.iter().zip(&weights).enumerate() {
            if !(y.is_finite() && y > 0.0) {
                return Err(StatsError::NonPositiveValue { index, value: y });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(StatsError::InvalidWeight { index, value: w });
            }
        }
        let n = values.len();
        let [total_weight, mass] = chunked_sums(n, |i| [weights[i], weights[i] * values[i]]);
        if total_weight <= 0.0 {
            return Err(StatsError::EmptySample);
        }

        let mut positive = values
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&y, _)| y);
        let first = positive.next();
        let equal_valued = first.is_some_and(|y0| positive.all(|y| y == y0));
        let mean = match (equal_valued, first) {
            (true, Some(y0)) => y0,
            _ => mass / total_weight,
        };

        Ok(Self {
            values,
            weights,
            total_weight,
            mean,
            equal_valued,
        })
    }

    /// Unit-weight sample.
    pub fn unweighted(values: Vec<f64>) -> Result<Self, StatsError> {
        let weights = vec![1.0; values.len()];
        Self::new(values, weights)
    }

    pub fn from_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self, StatsError> {
        let (values, weights) = pairs.into_iter().unzip();
        Self::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// True when every positively weighted item carries the same value.
    pub fn is_equal_valued(&self) -> bool {
        self.equal_valued
    }

    /// Weighted mean income `mu(Y)`.
    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// `sum w_i y_i / sum w_i`.
pub fn weighted_mean(s: &WeightedSample) -> f64 {
    s.mean()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeIndex {
    pub alpha: f64,
    pub value: f64,
}

/// Which closed form evaluates the index at a given exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeForm {
    MeanLogDeviation,
    Theil,
    General,
}

impl GeForm {
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha.abs() <= LIMIT_EPS {
            GeForm::MeanLogDeviation
        } else if (alpha - 1.0).abs() <= LIMIT_EPS {
            GeForm::Theil
        } else {
            GeForm::General
        }
    }
}

pub fn ge_index(s: &WeightedSample, alpha: f64) -> Result<GeIndex, StatsError> {
    if !alpha.is_finite() {
        return Err(StatsError::NonFiniteAlpha(alpha));
    }
    if s.equal_valued {
        return Ok(GeIndex { alpha, value: 0.0 });
    }

    let mu = s.mean;
    let (y, w) = (&s.values[..], &s.weights[..]);
    let n = y.len();
    let raw = match GeForm::for_alpha(alpha) {
        GeForm::MeanLogDeviation => {
            let [acc] = chunked_sums(n, |i| [-w[i] * (y[i] / mu).ln()]);
            acc / s.total_weight
        }
        GeForm::Theil => {
            let [acc] = chunked_sums(n, |i| {
                let r = y[i] / mu;
                [w[i] * r * r.ln()]
            });
            acc / s.total_weight
        }
        GeForm::General => {
            // expm1 keeps r^alpha - 1 accurate when r^alpha is close to 1
            let [acc] = chunked_sums(n, |i| [w[i] * (alpha * (y[i] / mu).ln()).exp_m1()]);
            acc / s.total_weight / (alpha * (alpha - 1.0))
        }
    };

    let value = if raw < 0.0 {
        if raw < -NEGATIVE_CLAMP {
            return Err(StatsError::NegativeIndex { alpha, value: raw });
        }
        log::debug!("clamping GE({alpha}) round-off {raw:e} to zero");
        0.0
    } else {
        raw
    };
    Ok(GeIndex { alpha, value })
}

/// Indices over a sweep of exponents.
pub fn ge_curve(s: &WeightedSample, alphas: &[f64]) -> Result<Vec<GeIndex>, StatsError> {
    alphas.iter().map(|&a| ge_index(s, a)).collect()
}

/// `|GE(pole + offset) - GE(pole)|` where `pole` is 0 or 1; a continuity check
/// on the switch to the limiting forms.
pub fn continuity_gap(s: &WeightedSample, pole: f64, offset: f64) -> Result<f64, StatsError> {
    let near = ge_index(s, pole + offset)?;
    let at = ge_index(s, pole)?;
    Ok((near.value - at.value).abs())
}

/// Smallest value whose cumulative weight share reaches `q` (clamped to [0, 1]).
pub fn weighted_quantile(s: &WeightedSample, q: f64) -> f64 {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
    let target = q.clamp(0.0, 1.0) * s.total_weight;
    let mut cumulative = 0.0;
    for &i in &order {
        cumulative += s.weights[i];
        if cumulative >= target && s.weights[i] > 0.0 {
            return s.values[i];
        }
    }
    order.last().map(|&i| s.values[i]).unwrap_or(f64::NAN)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn sample(pairs: &[(f64, f64)]) -> WeightedSample {
        WeightedSample::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(weighted_mean(&sample(&[(2.0, 1.0), (4.0, 1.0)])), 3.0);
        assert_eq!(weighted_mean(&sample(&[(2.0, 1.0), (4.0, 3.0)])), 3.5);
        assert_eq!(weighted_mean(&sample(&[(0.1, 7.0)])), 0.1);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            WeightedSample::from_pairs([(1.0, 0.0), (2.0, 0.0)]),
            Err(StatsError::EmptySample)
        );
        assert_eq!(
            WeightedSample::from_pairs([]),
            Err(StatsError::EmptySample)
        );
        assert!(matches!(
            WeightedSample::from_pairs([(1.0, 1.0), (0.0, 1.0)]),
            Err(StatsError::NonPositiveValue { index: 1, .. })
        ));
        assert!(matches!(
            WeightedSample::from_pairs([(1.0, -1.0)]),
            Err(StatsError::InvalidWeight { index: 0, .. })
        ));
        assert!(matches!(
            WeightedSample::new(vec![1.0], vec![]),
            Err(StatsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn equal_values_give_zero() {
        let s = sample(&[(0.1, 3.0), (0.1, 0.7), (0.1, 11.0)]);
        for a in [-2.0, 0.0, 0.5, 1.0, 1.3, 4.0] {
            assert_eq!(ge_index(&s, a).unwrap().value, 0.0);
        }
    }

    #[test]
    fn half_squared_cv_at_two() {
        let s = sample(&[(1.0, 1.0), (3.0, 1.0)]);
        let v = ge_index(&s, 2.0).unwrap().value;
        assert!((v - 0.125).abs() < 1e-15, "{v}");
    }

    // Frozen from a 50-digit mpmath evaluation of the closed form.
    #[test]
    fn matches_arbitrary_precision_oracle() {
        let s = sample(&[(1.0, 1.0), (3.0, 1.0)]);
        let v = ge_index(&s, 1.3).unwrap().value;
        assert!((v - 0.128_393_078_671_026_844).abs() < 1e-12, "{v}");

        let s = sample(&[(1.0, 1.0), (3.0, 3.0)]);
        let cases = [
            (1.3, 0.068_112_181_765_563_437_4),
            (-0.7, 0.113_381_177_190_983_216_8),
            (2.5, 0.055_567_718_798_001_557_3),
            (0.0, 0.092_331_515_373_072_796_6),
            (1.0, 0.072_460_327_927_143_657_1),
        ];
        for (a, expected) in cases {
            let v = ge_index(&s, a).unwrap().value;
            assert!((v - expected).abs() < 1e-12, "alpha {a}: {v} vs {expected}");
        }
    }

    #[test]
    fn form_selection() {
        assert_eq!(GeForm::for_alpha(0.0), GeForm::MeanLogDeviation);
        assert_eq!(GeForm::for_alpha(-5e-10), GeForm::MeanLogDeviation);
        assert_eq!(GeForm::for_alpha(1.0 + 1e-10), GeForm::Theil);
        assert_eq!(GeForm::for_alpha(1e-7), GeForm::General);
    }

    #[test]
    fn rejects_non_finite_alpha() {
        let s = sample(&[(1.0, 1.0), (2.0, 1.0)]);
        assert!(matches!(ge_index(&s, f64::NAN), Err(StatsError::NonFiniteAlpha(_))));
    }

    #[test]
    fn curve_examples() {
        let s = sample(&[(1.0, 1.0), (3.0, 2.0), (7.0, 0.5)]);
        assert!(ge_curve(&s, &[]).unwrap().is_empty());
        let c = ge_curve(&s, &[2.0, 2.0]).unwrap();
        assert_eq!(c[0].value.to_bits(), c[1].value.to_bits());
    }

    #[test]
    fn quantile_picks_weighted_cutoff() {
        let s = sample(&[(5.0, 1.0), (1.0, 1.0), (3.0, 2.0)]);
        assert_eq!(weighted_quantile(&s, 0.25), 1.0);
        assert_eq!(weighted_quantile(&s, 0.5), 3.0);
        assert_eq!(weighted_quantile(&s, 0.76), 5.0);
    }
}
