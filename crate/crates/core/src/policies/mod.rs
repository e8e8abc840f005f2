//! Arm-selection policies.
//!
//! Arms are 0-indexed throughout. Every argmax breaks ties toward the lowest
//! index, and "ln" is the natural logarithm.

mod baselines;
mod welfarist;

pub use baselines::{explore_then_ucb_select, ncb_select, ucb_select};
pub use welfarist::{draw_permutation, phase1_should_terminate, welfarist_select};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default constant in the Phase-I stopping threshold `n_i > C p_a² σ² ln T / (μ̂_i − w_i)²`.
pub const PHASE1_CONSTANT: f64 = 192.0;
/// Default multiplier of the NCB width `C √(μ̂ ln T / n)`.
pub const NCB_CONSTANT: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("horizon exhausted: round {t} requested with horizon {horizon}")]
    HorizonExhausted { t: u64, horizon: u64 },
    #[error("arm {arm} out of range for {k} arms")]
    ArmOutOfRange { arm: usize, k: usize },
    #[error("invalid policy configuration: {0}")]
    InvalidConfig(String),
}

/// Which policy to run, with its tunables. Serialized with a `variant` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyKind {
    WelfaristUcb {
        /// Multiplier on the confidence width in both phases. Anything other
        /// than 1 is a deliberately broken build used to test the verifier.
        #[serde(default = "unit", skip_serializing_if = "is_unit")]
        width_scale: f64,
        #[serde(
            default = "phase1_constant",
            skip_serializing_if = "is_phase1_constant"
        )]
        phase1_constant: f64,
    },
    PlainUcb,
    Ncb {
        /// Cap on the round-robin prefix; defaults to `⌈3 k ln T⌉`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ncb_prefix_rounds: Option<u64>,
        #[serde(default = "ncb_constant", skip_serializing_if = "is_ncb_constant")]
        ncb_constant: f64,
    },
    ExploreThenUcb {
        /// Defaults to `⌈√T / k⌉`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        explore_rounds_per_arm: Option<u64>,
    },
}

fn unit() -> f64 {
    1.0
}
fn is_unit(x: &f64) -> bool {
    *x == 1.0
}
fn phase1_constant() -> f64 {
    PHASE1_CONSTANT
}
fn is_phase1_constant(x: &f64) -> bool {
    *x == PHASE1_CONSTANT
}
fn ncb_constant() -> f64 {
    NCB_CONSTANT
}
fn is_ncb_constant(x: &f64) -> bool {
    *x == NCB_CONSTANT
}

impl PolicyKind {
    pub fn welfarist() -> Self {
        Self::WelfaristUcb {
            width_scale: 1.0,
            phase1_constant: PHASE1_CONSTANT,
        }
    }

    pub fn ncb() -> Self {
        Self::Ncb {
            ncb_prefix_rounds: None,
            ncb_constant: NCB_CONSTANT,
        }
    }

    pub fn explore_then_ucb() -> Self {
        Self::ExploreThenUcb {
            explore_rounds_per_arm: None,
        }
    }

    /// Short name used in result tables.
    pub fn label(&self) -> &'static str {
        match self {
            Self::WelfaristUcb { .. } => "welfarist_ucb",
            Self::PlainUcb => "plain_ucb",
            Self::Ncb { .. } => "ncb",
            Self::ExploreThenUcb { .. } => "explore_then_ucb",
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |msg: &str| Err(PolicyError::InvalidConfig(msg.to_owned()));
        match *self {
            Self::WelfaristUcb {
                width_scale,
                phase1_constant,
            } => {
                if !(width_scale.is_finite() && width_scale >= 0.0) {
                    return bad("width_scale must be finite and nonnegative");
                }
                if !(phase1_constant.is_finite() && phase1_constant >= 0.0) {
                    return bad("phase1_constant must be finite and nonnegative");
                }
            }
            Self::Ncb { ncb_constant, .. } => {
                if !(ncb_constant.is_finite() && ncb_constant >= 0.0) {
                    return bad("ncb_constant must be finite and nonnegative");
                }
            }
            Self::ExploreThenUcb {
                explore_rounds_per_arm: Some(0),
            } => return bad("explore_rounds_per_arm must be at least 1"),
            _ => {}
        }
        Ok(())
    }
}

/// `1` for `p ≥ −1`, otherwise `p` itself.
pub fn normalize_fairness(p: f64) -> f64 {
    if p >= -1.0 {
        1.0
    } else {
        p
    }
}

/// `2 √(2 σ² ln T / n)`; `None` when `n = 0`, which callers read as `+∞`.
pub fn confidence_width(n: u64, sigma_sq: f64, log_horizon: f64) -> Option<f64> {
    (n > 0).then(|| 2.0 * (2.0 * sigma_sq * log_horizon / n as f64).sqrt())
}

/// Default Explore-then-UCB budget per arm: `⌈√T / k⌉`.
pub fn default_explore_rounds_per_arm(horizon: u64, k: usize) -> u64 {
    ((horizon as f64).sqrt() / k as f64).ceil().max(1.0) as u64
}

/// Default cap on the NCB round-robin prefix: `⌈3 k ln T⌉`.
pub fn default_ncb_prefix_cap(horizon: u64, k: usize) -> u64 {
    (3.0 * k as f64 * (horizon as f64).ln()).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    PhaseI,
    PhaseII,
}

/// Evolving statistics of one policy over one run.
///
/// For the baselines the phases tag their forced-exploration prefix
/// (`PhaseI`) and index-driven rounds (`PhaseII`); `tau` records the length
/// of that prefix.
#[derive(Debug, Clone)]
pub struct PolicyState {
    pub(crate) kind: PolicyKind,
    pub(crate) k: usize,
    pub(crate) horizon: u64,
    pub(crate) log_horizon: f64,
    pub(crate) sigma_sq: f64,
    pub(crate) p_input: f64,
    pub(crate) p_a: f64,
    pub(crate) t: u64,
    pub(crate) counts: Vec<u64>,
    pub(crate) emp_means: Vec<f64>,
    pub(crate) phase: Phase,
    pub(crate) block_perm: Vec<usize>,
    pub(crate) tau: Option<u64>,
    pub(crate) width_scale: f64,
    pub(crate) explore_rounds_per_arm: u64,
    pub(crate) ncb_prefix_cap: u64,
}

impl PolicyState {
    pub fn new(
        kind: PolicyKind,
        k: usize,
        horizon: u64,
        sigma_sq: f64,
        p: f64,
    ) -> Result<Self, PolicyError> {
        kind.validate()?;
        if k == 0 {
            return Err(PolicyError::InvalidConfig("k must be at least 1".into()));
        }
        if horizon == 0 {
            return Err(PolicyError::InvalidConfig(
                "horizon must be at least 1".into(),
            ));
        }
        if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "sigma_sq must be positive, got {sigma_sq}"
            )));
        }
        if !p.is_finite() {
            return Err(PolicyError::InvalidConfig(format!(
                "p must be finite, got {p}"
            )));
        }
        let (width_scale, explore_rounds_per_arm, ncb_prefix_cap) = match kind {
            PolicyKind::WelfaristUcb { width_scale, .. } => (width_scale, 0, 0),
            PolicyKind::PlainUcb => (1.0, 0, 0),
            PolicyKind::Ncb {
                ncb_prefix_rounds, ..
            } => (
                1.0,
                0,
                ncb_prefix_rounds.unwrap_or_else(|| default_ncb_prefix_cap(horizon, k)),
            ),
            PolicyKind::ExploreThenUcb {
                explore_rounds_per_arm,
            } => (
                1.0,
                explore_rounds_per_arm
                    .unwrap_or_else(|| default_explore_rounds_per_arm(horizon, k)),
                0,
            ),
        };
        let (phase, tau) = match kind {
            PolicyKind::PlainUcb => (Phase::PhaseII, Some(0)),
            _ => (Phase::PhaseI, None),
        };
        Ok(Self {
            kind,
            k,
            horizon,
            log_horizon: (horizon as f64).ln(),
            sigma_sq,
            p_input: p,
            p_a: normalize_fairness(p),
            t: 1,
            counts: vec![0; k],
            emp_means: vec![0.0; k],
            phase,
            block_perm: Vec::with_capacity(k),
            tau,
            width_scale,
            explore_rounds_per_arm,
            ncb_prefix_cap,
        })
    }

    /// Replace `ln T` (e.g. to evaluate the index formulas at `T = e`).
    pub fn with_log_horizon(mut self, log_horizon: f64) -> Self {
        self.log_horizon = log_horizon;
        self
    }

    /// Overwrite the per-arm statistics, setting `t = Σ n_i + 1`.
    pub fn with_stats(mut self, counts: Vec<u64>, emp_means: Vec<f64>) -> Self {
        assert_eq!(counts.len(), self.k);
        assert_eq!(emp_means.len(), self.k);
        self.t = counts.iter().sum::<u64>() + 1;
        self.counts = counts;
        self.emp_means = emp_means;
        self
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn horizon(&self) -> u64 {
        self.horizon
    }
    pub fn log_horizon(&self) -> f64 {
        self.log_horizon
    }
    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }
    pub fn p_input(&self) -> f64 {
        self.p_input
    }
    pub fn p_a(&self) -> f64 {
        self.p_a
    }
    /// The round about to be played (1-based).
    pub fn t(&self) -> u64 {
        self.t
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn emp_means(&self) -> &[f64] {
        &self.emp_means
    }
    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn tau(&self) -> Option<u64> {
        self.tau
    }
    pub fn explore_rounds_per_arm(&self) -> u64 {
        self.explore_rounds_per_arm
    }
    pub fn ncb_prefix_cap(&self) -> u64 {
        self.ncb_prefix_cap
    }

    /// Width used by this policy's UCB index for arm statistics `n`.
    pub(crate) fn ucb_width(&self, n: u64) -> f64 {
        confidence_width(n, self.sigma_sq, self.log_horizon)
            .map_or(f64::INFINITY, |w| self.width_scale * w)
    }

    pub(crate) fn enter_phase_two(&mut self) {
        if self.phase == Phase::PhaseI {
            self.phase = Phase::PhaseII;
            self.tau = Some(self.t - 1);
        }
    }

    fn check_horizon(&self) -> Result<(), PolicyError> {
        if self.t > self.horizon {
            Err(PolicyError::HorizonExhausted {
                t: self.t,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }

    /// Choose the arm for round `t`. May advance the phase.
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize, PolicyError> {
        match self.kind {
            PolicyKind::WelfaristUcb { .. } => welfarist_select(self, rng),
            PolicyKind::PlainUcb => {
                self.check_horizon()?;
                Ok(ucb_select(self))
            }
            PolicyKind::Ncb { .. } => {
                self.check_horizon()?;
                Ok(baselines::ncb_step(self))
            }
            PolicyKind::ExploreThenUcb { .. } => {
                self.check_horizon()?;
                if self.t > self.k as u64 * self.explore_rounds_per_arm {
                    self.enter_phase_two();
                }
                Ok(explore_then_ucb_select(self))
            }
        }
    }

    /// Record `reward` for `arm` and advance to the next round.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        if arm >= self.k {
            return Err(PolicyError::ArmOutOfRange { arm, k: self.k });
        }
        let n = self.counts[arm] + 1;
        self.counts[arm] = n;
        let nf = n as f64;
        self.emp_means[arm] = ((nf - 1.0) * self.emp_means[arm] + reward) / nf;
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use std::f64::consts::E;

    #[test]
    fn fairness_normalization() {
        assert_eq!(normalize_fairness(0.0), 1.0);
        assert_eq!(normalize_fairness(-0.5), 1.0);
        assert_eq!(normalize_fairness(-1.0), 1.0);
        assert_eq!(normalize_fairness(0.5), 1.0);
        assert_eq!(normalize_fairness(-2.0), -2.0);
        assert_eq!(normalize_fairness(-1.5), -1.5);
    }

    #[test]
    fn width_values() {
        let ln_e = E.ln();
        let w = |n| confidence_width(n, 1.0, ln_e).unwrap();
        assert!((w(8) - 1.0).abs() < 1e-12);
        assert!((w(2) - 2.0).abs() < 1e-12);
        assert!((w(128) - 0.25).abs() < 1e-12);
        assert_eq!(confidence_width(0, 1.0, ln_e), None);
    }

    #[test]
    fn update_incremental_mean() {
        let mut s = PolicyState::new(PolicyKind::PlainUcb, 2, 2000, 1.0, 0.0).unwrap();
        s.update(0, 5.0).unwrap();
        assert_eq!((s.counts()[0], s.emp_means()[0]), (1, 5.0));
        s.update(0, 3.0).unwrap();
        assert_eq!((s.counts()[0], s.emp_means()[0]), (2, 4.0));
        assert_eq!(s.t(), 3);
    }

    #[test]
    fn update_arithmetic_series() {
        let mut s = PolicyState::new(PolicyKind::PlainUcb, 1, 2000, 1.0, 0.0).unwrap();
        for r in 1..=1000 {
            s.update(0, r as f64).unwrap();
        }
        assert!((s.emp_means()[0] - 500.5).abs() / 500.5 < 1e-9);
        assert_eq!(s.t(), 1001);
    }

    #[test]
    fn update_rejects_bad_arm() {
        let mut s = PolicyState::new(PolicyKind::PlainUcb, 2, 10, 1.0, 0.0).unwrap();
        assert_eq!(
            s.update(2, 1.0),
            Err(PolicyError::ArmOutOfRange { arm: 2, k: 2 })
        );
    }

    #[test]
    fn state_rejects_bad_config() {
        assert!(PolicyState::new(PolicyKind::PlainUcb, 0, 10, 1.0, 0.0).is_err());
        assert!(PolicyState::new(PolicyKind::PlainUcb, 2, 10, 0.0, 0.0).is_err());
        assert!(PolicyState::new(PolicyKind::PlainUcb, 2, 10, 1.0, f64::NAN).is_err());
        let etu = PolicyKind::ExploreThenUcb {
            explore_rounds_per_arm: Some(0),
        };
        assert!(PolicyState::new(etu, 2, 10, 1.0, 0.0).is_err());
    }

    #[test]
    fn horizon_exhaustion() {
        let mut rng = RngStream::new(0, 0).generator();
        for kind in [
            PolicyKind::welfarist(),
            PolicyKind::PlainUcb,
            PolicyKind::ncb(),
            PolicyKind::explore_then_ucb(),
        ] {
            let mut s = PolicyState::new(kind, 2, 3, 1.0, 0.0).unwrap();
            for _ in 0..3 {
                let a = s.select(&mut rng).unwrap();
                s.update(a, 0.5).unwrap();
            }
            assert_eq!(
                s.select(&mut rng),
                Err(PolicyError::HorizonExhausted { t: 4, horizon: 3 })
            );
        }
    }

    #[test]
    fn policy_json() {
        let k: PolicyKind = serde_json::from_str(r#"{"variant":"welfarist_ucb"}"#).unwrap();
        assert_eq!(k, PolicyKind::welfarist());
        let k: PolicyKind =
            serde_json::from_str(r#"{"variant":"explore_then_ucb","explore_rounds_per_arm":3}"#)
                .unwrap();
        assert_eq!(
            k,
            PolicyKind::ExploreThenUcb {
                explore_rounds_per_arm: Some(3)
            }
        );
        let k: PolicyKind =
            serde_json::from_str(r#"{"variant":"ncb","ncb_prefix_rounds":10}"#).unwrap();
        assert_eq!(
            serde_json::to_string(&k).unwrap(),
            r#"{"variant":"ncb","ncb_prefix_rounds":10}"#
        );
        assert!(serde_json::from_str::<PolicyKind>(r#"{"variant":"thompson"}"#).is_err());
    }

    #[test]
    fn explore_budget_default() {
        assert_eq!(default_explore_rounds_per_arm(10_000, 50), 2);
        assert_eq!(default_explore_rounds_per_arm(10_000, 5), 20);
        assert_eq!(default_explore_rounds_per_arm(4, 50), 1);
    }
}
