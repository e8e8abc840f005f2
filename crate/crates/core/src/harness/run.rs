use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::policies::{Phase, PolicyKind, PolicyState};
use crate::rewards::BanditInstance;
use crate::rng::RngStream;
use crate::welfare::MeanTrajectory;

/// Statistics of the pulled arm right after its update at some round.
/// Only the pulled arm changes per round, so the sequence of snapshots
/// determines every arm's `(n_i, μ̂_i)` at every round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSnapshot {
    pub arm: usize,
    pub count: u64,
    pub mean: f64,
}

/// Record of one run of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrajectory {
    pub policy: PolicyKind,
    pub p: f64,
    pub chosen: Vec<usize>,
    pub true_means: Vec<f64>,
    pub phase_tags: Vec<Phase>,
    pub tau: Option<u64>,
    pub final_counts: Vec<u64>,
    pub audit: Option<Vec<AuditSnapshot>>,
}

impl RunTrajectory {
    pub fn horizon(&self) -> usize {
        self.chosen.len()
    }

    /// Number of Phase-II pulls of each arm (`m_i`).
    pub fn phase2_counts(&self) -> Vec<u64> {
        let mut m = vec![0; self.final_counts.len()];
        for (&arm, &tag) in self.chosen.iter().zip(&self.phase_tags) {
            if tag == Phase::PhaseII {
                m[arm] += 1;
            }
        }
        m
    }

    /// Arms pulled at least once in Phase II (their count is `ℓ`).
    pub fn phase2_arms(&self) -> Vec<usize> {
        self.phase2_counts()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stream keys: the policy draws from stream 0 and arm `i` from stream
/// `i + 1` of a key derived from `rng`, so reward sequences of an arm do
/// not depend on which policy is pulling it.
fn streams(rng: RngStream) -> RngStream {
    rng.derive(0x5EED)
}

pub fn run_single(
    policy: &PolicyKind,
    instance: &BanditInstance,
    horizon: u64,
    p: f64,
    rng: RngStream,
) -> Result<RunTrajectory, HarnessError> {
    run_single_with(policy, instance, horizon, p, rng, false)
}

/// Drive select/update for exactly `horizon` rounds. With `record_audit`
/// the per-round snapshots needed by the good-event check are kept.
pub fn run_single_with(
    policy: &PolicyKind,
    instance: &BanditInstance,
    horizon: u64,
    p: f64,
    rng: RngStream,
    record_audit: bool,
) -> Result<RunTrajectory, HarnessError> {
    let k = instance.k();
    if horizon < k as u64 {
        return Err(HarnessError::Config(format!(
            "horizon {horizon} is smaller than k = {k}"
        )));
    }
    let mut state = PolicyState::new(policy.clone(), k, horizon, instance.sigma_sq(), p)?;
    let key = streams(rng);
    let mut policy_rng = key.with_stream(0).generator();
    let mut arm_rngs: Vec<_> = (0..k)
        .map(|i| key.with_stream(i as u64 + 1).generator())
        .collect();

    let len = horizon as usize;
    let mut chosen = Vec::with_capacity(len);
    let mut true_means = Vec::with_capacity(len);
    let mut phase_tags = Vec::with_capacity(len);
    let mut audit = record_audit.then(|| Vec::with_capacity(len));

    for _ in 0..horizon {
        let arm = state.select(&mut policy_rng)?;
        let dist = &instance.arms()[arm];
        let reward = dist.sample(&mut arm_rngs[arm]);
        state.update(arm, reward)?;
        chosen.push(arm);
        true_means.push(dist.expected_value());
        phase_tags.push(state.phase());
        if let Some(a) = audit.as_mut() {
            a.push(AuditSnapshot {
                arm,
                count: state.counts()[arm],
                mean: state.emp_means()[arm],
            });
        }
    }

    Ok(RunTrajectory {
        policy: policy.clone(),
        p,
        chosen,
        true_means,
        phase_tags,
        tau: state.tau(),
        final_counts: state.counts().to_vec(),
        audit,
    })
}

/// `ê_t = (1/R) Σ_r μ_{I_t}^{(r)}`, summed in run order.
pub fn estimate_round_means(
    trajectories: &[RunTrajectory],
) -> Result<MeanTrajectory, HarnessError> {
    let first = trajectories.first().ok_or(HarnessError::NoRuns)?;
    let horizon = first.horizon();
    let mut sums = vec![0.0; horizon];
    for traj in trajectories {
        if traj.horizon() != horizon {
            return Err(HarnessError::HorizonMismatch {
                expected: horizon,
                found: traj.horizon(),
            });
        }
        for (s, &m) in sums.iter_mut().zip(&traj.true_means) {
            *s += m;
        }
    }
    let r = trajectories.len() as f64;
    sums.iter_mut().for_each(|s| *s /= r);
    Ok(MeanTrajectory::new(sums)?)
}
