use rayon::prelude::*;

use super::config::{ExperimentConfig, InstanceMode};
use super::run::run_single;
use super::table::{RegretRow, RegretTable};
use super::HarnessError;
use crate::policies::{Phase, PolicyKind};
use crate::rewards::{BanditInstance, InstanceSpec};
use crate::rng::{hash_str, mix_all, RngStream};
use crate::welfare::{p_mean_welfare, regret, MeanTrajectory};

/// Number of run batches for the jackknife standard error.
const JACKKNIFE_BATCHES: usize = 5;

/// Seed of run `run_index` in the `(policy, p, horizon)` cell.
pub fn cell_seed(base_seed: u64, policy: &PolicyKind, p: f64, horizon: u64, run_index: u64) -> u64 {
    // The full serialized spec, so tuned variants get their own streams.
    let policy_id = hash_str(&serde_json::to_string(policy).expect("policy serializes"));
    let p_bits = if p == 0.0 { 0 } else { p.to_bits() };
    base_seed ^ mix_all(&[policy_id, p_bits, horizon, run_index])
}

enum InstanceSource<'a> {
    Fixed(&'a BanditInstance),
    PerRun(&'a InstanceSpec),
}

impl InstanceSource<'_> {
    fn for_run(&self, run_index: u64) -> Result<BanditInstance, HarnessError> {
        match self {
            Self::Fixed(inst) => Ok((*inst).clone()),
            Self::PerRun(spec) => {
                Ok(spec.build_with(RngStream::new(mix_all(&[spec.seed, run_index]), 0))?)
            }
        }
    }
}

struct RunSummary {
    true_means: Vec<f64>,
    tau: Option<u64>,
    mu_star: f64,
    degenerate: bool,
}

/// Aggregate of one `(policy, p, horizon)` cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub row: RegretRow,
    pub round_means: MeanTrajectory,
    pub mu_star: f64,
    pub degenerate: bool,
}

fn run_is_degenerate(means: &[f64], p: f64) -> bool {
    if p <= 0.0 {
        means.iter().any(|&m| !(m > 0.0))
    } else {
        means.iter().any(|&m| !(m >= 0.0))
    }
}

fn cell_regret(
    sums: &[f64],
    runs: usize,
    mu_star_sum: f64,
    p: f64,
) -> Result<(f64, bool), HarnessError> {
    let r = runs as f64;
    let means = MeanTrajectory::new(sums.iter().map(|s| s / r).collect())?;
    let welfare = p_mean_welfare(&means, p)?;
    Ok((regret(mu_star_sum / r, welfare), welfare.degenerate))
}

fn run_cell_from(
    source: &InstanceSource<'_>,
    policy: &PolicyKind,
    p: f64,
    horizon: u64,
    runs: usize,
    base_seed: u64,
) -> Result<CellResult, HarnessError> {
    if runs == 0 {
        return Err(HarnessError::NoRuns);
    }
    let summaries: Vec<RunSummary> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let instance = source.for_run(r)?;
            let seed = cell_seed(base_seed, policy, p, horizon, r);
            let traj = run_single(policy, &instance, horizon, p, RngStream::new(seed, 0))?;
            debug_assert_eq!(
                traj.tau.is_some(),
                traj.phase_tags.contains(&Phase::PhaseII)
            );
            Ok(RunSummary {
                degenerate: run_is_degenerate(&traj.true_means, p),
                true_means: traj.true_means,
                tau: traj.tau,
                mu_star: instance.mu_star(),
            })
        })
        .collect::<Result<_, HarnessError>>()?;

    // Deterministic reduction: contiguous batches, each summed in run order.
    let len = horizon as usize;
    let batches = JACKKNIFE_BATCHES.min(runs);
    let mut batch_sums = vec![vec![0.0; len]; batches];
    let mut batch_runs = vec![0usize; batches];
    let mut batch_mu = vec![0.0; batches];
    for (r, s) in summaries.iter().enumerate() {
        let b = r * batches / runs;
        batch_runs[b] += 1;
        batch_mu[b] += s.mu_star;
        for (acc, &m) in batch_sums[b].iter_mut().zip(&s.true_means) {
            *acc += m;
        }
    }
    let mut total = vec![0.0; len];
    for sums in &batch_sums {
        for (acc, &s) in total.iter_mut().zip(sums) {
            *acc += s;
        }
    }
    let mu_total: f64 = batch_mu.iter().sum();
    let (estimate, degenerate) = cell_regret(&total, runs, mu_total, p)?;

    let std_error = if batches >= 2 {
        let mut loo = Vec::with_capacity(batches);
        let mut rest = vec![0.0; len];
        for b in 0..batches {
            for ((acc, &t), &s) in rest.iter_mut().zip(&total).zip(&batch_sums[b]) {
                *acc = t - s;
            }
            let (theta, _) = cell_regret(&rest, runs - batch_runs[b], mu_total - batch_mu[b], p)?;
            loo.push(theta);
        }
        let bf = batches as f64;
        let mean = loo.iter().sum::<f64>() / bf;
        let ss: f64 = loo.iter().map(|x| (x - mean) * (x - mean)).sum();
        ((bf - 1.0) / bf * ss).sqrt()
    } else {
        0.0
    };

    let taus: Vec<u64> = summaries.iter().filter_map(|s| s.tau).collect();
    let tau_mean =
        (!taus.is_empty()).then(|| taus.iter().map(|&t| t as f64).sum::<f64>() / taus.len() as f64);
    let mu_star = mu_total / runs as f64;
    let round_means = MeanTrajectory::new(total.iter().map(|s| s / runs as f64).collect())?;

    Ok(CellResult {
        row: RegretRow {
            policy: policy.label().to_owned(),
            p,
            horizon,
            regret: estimate,
            runs: runs as u64,
            std_error,
            tau_mean,
            degenerate_runs: summaries.iter().filter(|s| s.degenerate).count() as u64,
        },
        round_means,
        mu_star,
        degenerate,
    })
}

/// One `(policy, p, horizon)` cell against a fixed instance.
pub fn run_cell(
    instance: &BanditInstance,
    policy: &PolicyKind,
    p: f64,
    horizon: u64,
    runs: usize,
    base_seed: u64,
) -> Result<CellResult, HarnessError> {
    run_cell_from(
        &InstanceSource::Fixed(instance),
        policy,
        p,
        horizon,
        runs,
        base_seed,
    )
}

/// Every `(policy, p, horizon)` cell of `config`, in config order. Each
/// horizon is a fresh experiment since the indices depend on `ln T`.
///
/// Runs inside a cell execute on the ambient rayon pool; the result does
/// not depend on its size.
pub fn sweep(config: &ExperimentConfig) -> Result<RegretTable, HarnessError> {
    config.validate()?;
    let fixed;
    let source = match config.instance_mode {
        InstanceMode::Fixed => {
            fixed = config.instance_spec.build()?;
            InstanceSource::Fixed(&fixed)
        }
        InstanceMode::PerRun => InstanceSource::PerRun(&config.instance_spec),
    };
    let mut rows = Vec::new();
    for policy in &config.policy_specs {
        for &p in &config.p_values {
            for &horizon in &config.horizon_grid {
                let cell =
                    run_cell_from(&source, policy, p, horizon, config.runs, config.base_seed)?;
                rows.push(cell.row);
            }
        }
    }
    Ok(RegretTable { rows })
}
