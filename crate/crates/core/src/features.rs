//! Contextual state for the tier-selection policy: per-day summary
//! statistics of a standardized week.

use serde::{Deserialize, Serialize};

use crate::data::{DAYS_PER_WEEK, STEPS_PER_DAY, WEEK_LEN};
use crate::error::{Error, Result};

pub const FEATURES_PER_DAY: usize = 4;
pub const STATE_DIM: usize = FEATURES_PER_DAY * DAYS_PER_WEEK;

/// Order of the features within each day's block.
pub const FEATURE_ORDER: [&str; FEATURES_PER_DAY] = ["min", "max", "mean", "std"];

/// `(min, max, mean, std)` for each of the seven days, in day order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyState(#[serde(with = "state_serde")] pub [f64; STATE_DIM]);

impl PolicyState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn day(&self, d: usize) -> &[f64] {
        &self.0[d * FEATURES_PER_DAY..(d + 1) * FEATURES_PER_DAY]
    }
}

pub fn extract_state(window: &[f64]) -> Result<PolicyState> {
    if window.len() != WEEK_LEN {
        return Err(Error::Dimension {
            expected: WEEK_LEN,
            got: window.len(),
        });
    }
    let mut out = [0.0; STATE_DIM];
    for (feat, day) in out
        .chunks_exact_mut(FEATURES_PER_DAY)
        .zip(window.chunks_exact(STEPS_PER_DAY))
    {
        let n = day.len() as f64;
        let min = day.iter().copied().fold(f64::INFINITY, f64::min);
        let max = day.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding can push a constant day's mean a hair outside [min, max].
        let mean = (day.iter().sum::<f64>() / n).clamp(min, max);
        let std = if min == max {
            0.0
        } else {
            (day.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
        };
        feat.copy_from_slice(&[min, max, mean, std]);
    }
    Ok(PolicyState(out))
}

mod state_serde {
    use super::STATE_DIM;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; STATE_DIM], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; STATE_DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| serde::de::Error::invalid_length(v.len(), &"28 features"))
    }
}
