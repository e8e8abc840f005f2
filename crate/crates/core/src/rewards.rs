//! Reward laws and bandit instances.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;

/// Hoeffding variance-proxy (as a standard deviation) for rewards in `[0, 1]`.
pub const BERNOULLI_PROXY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("bernoulli mean {0} outside [0, 1]")]
    BernoulliMean(f64),
    #[error("gaussian std {0} must be finite and nonnegative")]
    GaussianStd(f64),
    #[error("arm mean {0} is negative or not finite; means must be nonnegative")]
    NegativeMean(f64),
    #[error("an instance needs at least one arm")]
    NoArms,
    #[error("mean range [{low}, {high}] is invalid")]
    MeanRange { low: f64, high: f64 },
    #[error("gaussian instances need a std; bernoulli instances must not set one")]
    StdMismatch,
    #[error("sigma proxy {given} is below the largest per-arm proxy {required}")]
    SigmaTooSmall { given: f64, required: f64 },
    #[error("sigma proxy must be positive (all arms are deterministic; set sigma_override)")]
    SigmaNotPositive,
}

/// Law of a single arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardDistribution {
    Bernoulli { mean: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl RewardDistribution {
    pub fn bernoulli(mean: f64) -> Result<Self, InstanceError> {
        if !(0.0..=1.0).contains(&mean) {
            return Err(InstanceError::BernoulliMean(mean));
        }
        Ok(Self::Bernoulli { mean })
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self, InstanceError> {
        if !mean.is_finite() {
            return Err(InstanceError::NegativeMean(mean));
        }
        if !(std.is_finite() && std >= 0.0) {
            return Err(InstanceError::GaussianStd(std));
        }
        Ok(Self::Gaussian { mean, std })
    }

    pub fn expected_value(&self) -> f64 {
        match *self {
            Self::Bernoulli { mean } | Self::Gaussian { mean, .. } => mean,
        }
    }

    /// Sub-Gaussian proxy expressed as a standard deviation (`σ`, not `σ²`).
    pub fn sub_gaussian_proxy(&self) -> f64 {
        match *self {
            Self::Bernoulli { .. } => BERNOULLI_PROXY,
            Self::Gaussian { std, .. } => std,
        }
    }

    /// One draw. Bernoulli returns exactly 0 or 1; Gaussian draws may be
    /// negative even though the mean is not.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Bernoulli { mean } => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Gaussian { mean, std } => {
                if std == 0.0 {
                    mean
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    mean + std * z
                }
            }
        }
    }
}

pub fn sample_reward<R: Rng + ?Sized>(dist: &RewardDistribution, rng: &mut R) -> f64 {
    dist.sample(rng)
}

pub fn sub_gaussian_proxy(dist: &RewardDistribution) -> f64 {
    dist.sub_gaussian_proxy()
}

/// An ordered set of arms sharing one variance-proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    arms: Vec<RewardDistribution>,
    sigma_proxy: f64,
    mu_star: f64,
}

impl BanditInstance {
    /// `sigma_override` replaces the default proxy (the largest per-arm
    /// proxy). It may not undercut a Gaussian arm's std; for Bernoulli arms
    /// it replaces the Hoeffding proxy of 0.5.
    pub fn new(
        arms: Vec<RewardDistribution>,
        sigma_override: Option<f64>,
    ) -> Result<Self, InstanceError> {
        if arms.is_empty() {
            return Err(InstanceError::NoArms);
        }
        for arm in &arms {
            let m = arm.expected_value();
            if !(m.is_finite() && m >= 0.0) {
                return Err(InstanceError::NegativeMean(m));
            }
        }
        let required = arms
            .iter()
            .map(|arm| match arm {
                RewardDistribution::Bernoulli { .. } if sigma_override.is_some() => 0.0,
                _ => arm.sub_gaussian_proxy(),
            })
            .fold(0.0, f64::max);
        let sigma_proxy = match sigma_override {
            Some(s) if !(s >= required) => {
                return Err(InstanceError::SigmaTooSmall { given: s, required })
            }
            Some(s) => s,
            None => required,
        };
        if !(sigma_proxy > 0.0 && sigma_proxy.is_finite()) {
            return Err(InstanceError::SigmaNotPositive);
        }
        let mu_star = arms
            .iter()
            .map(RewardDistribution::expected_value)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            arms,
            sigma_proxy,
            mu_star,
        })
    }

    pub fn arms(&self) -> &[RewardDistribution] {
        &self.arms
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn mu_star(&self) -> f64 {
        self.mu_star
    }

    pub fn sigma_proxy(&self) -> f64 {
        self.sigma_proxy
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_proxy * self.sigma_proxy
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.arms[arm].expected_value()
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms
            .iter()
            .map(RewardDistribution::expected_value)
            .collect()
    }

    /// Index of the first arm attaining `mu_star`.
    pub fn best_arm(&self) -> usize {
        self.arms
            .iter()
            .position(|a| a.expected_value() == self.mu_star)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    Bernoulli,
    Gaussian,
}

/// Draw `k` means i.i.d. uniform on `[mean_low, mean_high]` and build the
/// instance. Deterministic in `rng`.
pub fn make_instance(
    kind: ArmKind,
    k: usize,
    mean_low: f64,
    mean_high: f64,
    std: Option<f64>,
    rng: RngStream,
) -> Result<BanditInstance, InstanceError> {
    InstanceSpec {
        kind,
        k,
        mean_low,
        mean_high,
        std,
        sigma_override: None,
        seed: rng.seed,
    }
    .build_with(rng)
}

/// Serializable recipe for a random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub kind: ArmKind,
    pub k: usize,
    pub mean_low: f64,
    pub mean_high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_override: Option<f64>,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<BanditInstance, InstanceError> {
        self.build_with(RngStream::new(self.seed, 0))
    }

    /// Build with an explicit stream, ignoring `self.seed`.
    pub fn build_with(&self, rng: RngStream) -> Result<BanditInstance, InstanceError> {
        self.validate()?;
        let mut gen = rng.generator();
        let uniform = Uniform::new_inclusive(self.mean_low, self.mean_high).map_err(|_| {
            InstanceError::MeanRange {
                low: self.mean_low,
                high: self.mean_high,
            }
        })?;
        let arms = (0..self.k)
            .map(|_| {
                let mean = uniform.sample(&mut gen);
                match self.kind {
                    ArmKind::Bernoulli => RewardDistribution::bernoulli(mean),
                    ArmKind::Gaussian => {
                        RewardDistribution::gaussian(mean, self.std.unwrap_or_default())
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        BanditInstance::new(arms, self.sigma_override)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.k == 0 {
            return Err(InstanceError::NoArms);
        }
        if !(self.mean_low.is_finite() && self.mean_high.is_finite())
            || self.mean_low > self.mean_high
        {
            return Err(InstanceError::MeanRange {
                low: self.mean_low,
                high: self.mean_high,
            });
        }
        if self.mean_low < 0.0 {
            return Err(InstanceError::NegativeMean(self.mean_low));
        }
        match (self.kind, self.std) {
            (ArmKind::Bernoulli, None) => {
                if self.mean_high > 1.0 {
                    return Err(InstanceError::BernoulliMean(self.mean_high));
                }
            }
            (ArmKind::Gaussian, Some(s)) => {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(InstanceError::GaussianStd(s));
                }
            }
            _ => return Err(InstanceError::StdMismatch),
        }
        Ok(())
    }
}
