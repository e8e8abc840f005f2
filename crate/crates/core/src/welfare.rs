//! Welfare aggregation over per-round expected rewards, and regret.
//!
//! Everything is evaluated in the log domain: the Nash welfare is
//! `exp(mean ln ê_t)` and the p-mean is
//! `exp((LSE_t(p ln ê_t) − ln T) / p)` with a max-shifted log-sum-exp.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WelfareError {
    #[error("welfare of an empty trajectory is undefined")]
    EmptyTrajectory,
    #[error("fairness parameter p must be finite, got {0}")]
    NonFiniteP(f64),
}

/// Per-round estimates of `E[μ_{I_t}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrajectory {
    values: Vec<f64>,
}

impl MeanTrajectory {
    pub fn new(values: Vec<f64>) -> Result<Self, WelfareError> {
        if values.is_empty() {
            return Err(WelfareError::EmptyTrajectory);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareValue {
    pub value: f64,
    /// Set when a nonpositive round mean forced the welfare to 0.
    pub degenerate: bool,
}

impl WelfareValue {
    fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    fn floored() -> Self {
        Self {
            value: 0.0,
            degenerate: true,
        }
    }
}

/// `ln Σ exp(x_i)`, shifted by the maximum. `-∞` entries contribute nothing.
pub fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = xs.map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Geometric mean of the trajectory.
pub fn nash_welfare(traj: &MeanTrajectory) -> WelfareValue {
    if traj.values.iter().any(|&v| !(v > 0.0)) {
        return WelfareValue::floored();
    }
    // Shifting by the max keeps a constant trajectory exact.
    let top = traj
        .values
        .iter()
        .copied()
        .fold(f64::MIN_POSITIVE, f64::max);
    let mean_log = traj.values.iter().map(|v| (v / top).ln()).sum::<f64>() / traj.horizon() as f64;
    WelfareValue::ok(top * mean_log.exp())
}

/// Generalized power mean with exponent `p`; `p = 0` is the Nash welfare.
///
/// For `p < 0` any nonpositive entry floors the welfare to 0. For `p > 0`
/// zero entries contribute 0 to the power sum and negative entries floor.
pub fn p_mean_welfare(traj: &MeanTrajectory, p: f64) -> Result<WelfareValue, WelfareError> {
    if !p.is_finite() {
        return Err(WelfareError::NonFiniteP(p));
    }
    if p == 0.0 {
        return Ok(nash_welfare(traj));
    }
    let vals = &traj.values;
    let floor = if p < 0.0 {
        vals.iter().any(|&v| !(v > 0.0))
    } else {
        vals.iter().any(|&v| !(v >= 0.0))
    };
    if floor {
        return Ok(WelfareValue::floored());
    }
    // ln 0 = -inf and p > 0 here, so zero rounds drop out of the sum.
    let top = vals.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
    let lse = log_sum_exp(vals.iter().map(|&v| p * (v / top).ln()));
    if lse == f64::NEG_INFINITY {
        return Ok(WelfareValue::ok(0.0));
    }
    let log_mean = (lse - (vals.len() as f64).ln()) / p;
    Ok(WelfareValue::ok(top * log_mean.exp()))
}

/// `μ* − welfare`; a degenerate welfare counts as 0.
pub fn regret(mu_star: f64, welfare: WelfareValue) -> f64 {
    if welfare.degenerate {
        mu_star
    } else {
        mu_star - welfare.value
    }
}
