//! Detection delay and reward arithmetic.
//!
//! Running detector `k` on tier `k` costs the tier's network latency plus
//! `FLOP / FLOPS` of compute. The delay is mapped onto an accuracy-equivalent
//! penalty `alpha * t / (1 + alpha * t)` and subtracted from the accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cost trade-off.
pub const DEFAULT_ALPHA: f64 = 0.0025;

/// Range covered by the alpha sweep.
pub const ALPHA_SWEEP_RANGE: (f64, f64) = (0.0001, 0.0045);

/// One tier of the hierarchy, numbered from 1 (the IoT device).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    /// Floating point operations per second of the tier's machine.
    pub flops: f64,
    /// Latency between the IoT device and this tier.
    pub latency_ms: f64,
}

impl TierSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.flops > 0.0 && self.flops.is_finite()) {
            return Err(Error::InvalidArgument("tier flops must be positive".into()));
        }
        if !(self.latency_ms >= 0.0 && self.latency_ms.is_finite()) {
            return Err(Error::InvalidArgument(
                "tier latency must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// IoT device (Raspberry Pi class), edge server, cloud server.
pub fn standard_tiers() -> [TierSpec; 3] {
    [
        TierSpec {
            flops: 194e6,
            latency_ms: 0.0,
        },
        TierSpec {
            flops: 197e9,
            latency_ms: 50.0,
        },
        TierSpec {
            flops: 289e9,
            latency_ms: 100.0,
        },
    ]
}

pub fn validate_tiers(tiers: &[TierSpec]) -> Result<()> {
    if tiers.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one tier is required".into(),
        ));
    }
    for t in tiers {
        t.validate()?;
    }
    if tiers[0].latency_ms != 0.0 {
        return Err(Error::InvalidArgument(
            "tier 1 is local and must have zero latency".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub t_comm_ms: f64,
    pub t_comp_ms: f64,
    pub total_ms: f64,
}

/// Compute delay in milliseconds.
pub fn t_comp(model_flop: f64, tier: &TierSpec) -> f64 {
    1000.0 * model_flop / tier.flops
}

pub fn t_total(model_flop: f64, tier: &TierSpec) -> DelayBreakdown {
    let t_comp_ms = t_comp(model_flop, tier);
    DelayBreakdown {
        t_comm_ms: tier.latency_ms,
        t_comp_ms,
        total_ms: tier.latency_ms + t_comp_ms,
    }
}

pub fn f_cost(t_ms: f64, alpha: f64) -> f64 {
    let x = alpha * t_ms;
    x / (1.0 + x)
}

pub fn reward(accuracy: f64, delay: &DelayBreakdown, alpha: f64) -> f64 {
    accuracy - f_cost(delay.total_ms, alpha)
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )))
    }
}
