//! Anomaly scores from reconstruction errors.
//!
//! Per-step reconstruction errors of normal training data are summarized by
//! a univariate Gaussian. The log-density (logPD) of an error under that
//! Gaussian is the anomaly score: normal steps score high, anomalous steps
//! score low. The decision threshold is the lowest score seen on the
//! training data, so the training set itself never produces an alarm.

use serde::{Deserialize, Serialize};

use crate::data::{DAYS_PER_WEEK, STEPS_PER_DAY, WEEK_LEN};
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub mu: f64,
    pub sigma: f64,
    pub threshold: f64,
}

impl ErrorModel {
    /// Fits mean and population standard deviation, then sets the threshold
    /// to the minimum logPD over the same errors.
    pub fn fit(errors: &[f64]) -> Result<Self> {
        if errors.len() < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 reconstruction errors, got {}",
                errors.len()
            )));
        }
        if errors.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidArgument(
                "reconstruction errors must be finite and nonnegative".into(),
            ));
        }
        let n = errors.len() as f64;
        let mu = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / n;
        let sigma = var.sqrt();
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(Error::Degenerate(
                "reconstruction errors have zero variance; add a noise floor to the inputs".into(),
            ));
        }
        let mut model = Self {
            mu,
            sigma,
            threshold: 0.0,
        };
        model.threshold = errors
            .iter()
            .map(|&e| model.logpd(e))
            .fold(f64::INFINITY, f64::min);
        Ok(model)
    }

    /// Log-density of `e` under `N(mu, sigma^2)`.
    pub fn logpd(&self, e: f64) -> f64 {
        let z = (e - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - LN_SQRT_2PI
    }

    /// The largest attainable score, reached at `e == mu`.
    pub fn max_logpd(&self) -> f64 {
        self.logpd(self.mu)
    }

    /// Scores one week of per-step errors into seven day verdicts.
    pub fn classify_errors(&self, errors: &[f64]) -> Result<DayVerdict> {
        if errors.len() != WEEK_LEN {
            return Err(Error::Dimension {
                expected: WEEK_LEN,
                got: errors.len(),
            });
        }
        let mut days = [DayScore::default(); DAYS_PER_WEEK];
        for (day, chunk) in days.iter_mut().zip(errors.chunks_exact(STEPS_PER_DAY)) {
            let min_logpd = chunk
                .iter()
                .map(|&e| self.logpd(e))
                .fold(f64::INFINITY, f64::min);
            *day = DayScore {
                anomalous: min_logpd < self.threshold,
                min_logpd,
            };
        }
        Ok(DayVerdict {
            days,
            threshold: self.threshold,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DayScore {
    pub anomalous: bool,
    pub min_logpd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayVerdict {
    pub days: [DayScore; DAYS_PER_WEEK],
    pub threshold: f64,
}

impl DayVerdict {
    pub fn predictions(&self) -> [bool; DAYS_PER_WEEK] {
        self.days.map(|d| d.anomalous)
    }

    pub fn anomalous_days(&self) -> usize {
        self.days.iter().filter(|d| d.anomalous).count()
    }

    /// True when every detected anomalous day is more extreme than the
    /// threshold by `factor`: `min_logpd <= threshold - (factor - 1) * |threshold|`,
    /// which is `factor * threshold` for the usual negative threshold.
    /// A verdict with no anomalous day is confident.
    pub fn is_confident(&self, factor: f64) -> Result<bool> {
        if factor.is_nan() || factor < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "confidence factor must be >= 1, got {factor}"
            )));
        }
        let bar = confidence_bar(self.threshold, factor);
        Ok(self
            .days
            .iter()
            .filter(|d| d.anomalous)
            .all(|d| d.min_logpd <= bar))
    }

    /// Fraction of days whose prediction matches `labels`.
    pub fn day_accuracy(&self, labels: &[bool; DAYS_PER_WEEK]) -> f64 {
        let correct = self
            .days
            .iter()
            .zip(labels)
            .filter(|(d, &l)| d.anomalous == l)
            .count();
        correct as f64 / DAYS_PER_WEEK as f64
    }
}

pub fn confidence_bar(threshold: f64, factor: f64) -> f64 {
    threshold - (factor - 1.0) * threshold.abs()
}
