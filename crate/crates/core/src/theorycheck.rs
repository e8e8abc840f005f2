//! Empirical checks of the guarantees behind Welfarist-UCB, run against
//! recorded trajectories.
//!
//! The stopping-time and Phase-II lemmas only hold on the good event (every
//! empirical mean stays inside its confidence width for the whole run), so
//! the suite first audits each run for that event and checks the lemmas on
//! the good runs only. Under the event those lemmas are deterministic, so a
//! single violation points at a bug in the policy code.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::{cell_seed, run_single_with, HarnessError, RunTrajectory};
use crate::policies::{confidence_width, draw_permutation, normalize_fairness, PolicyKind};
use crate::rewards::{ArmKind, BanditInstance, InstanceSpec};
use crate::rng::RngStream;

pub const GOOD_EVENT: &str = "good_event";
pub const TAU_BOUNDS: &str = "tau_bounds";
pub const PHASE2_NEAR_OPTIMALITY: &str = "phase2_near_optimality";
pub const NUMERIC_CLAIMS: &str = "numeric_claims";
pub const PERMUTATION_MARGINALS: &str = "permutation_marginals";

/// Absolute-relative tolerance for the closed-form inequalities.
pub const NUMERIC_TOLERANCE: f64 = 1e-12;

/// Outcome of one family of checks. `worst_margin` is the smallest slack
/// seen (negative means violated); `None` when nothing was checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub lemma_id: String,
    pub instances_checked: u64,
    pub violations: u64,
    pub worst_margin: Option<f64>,
}

impl LemmaVerdict {
    pub fn empty(lemma_id: &str) -> Self {
        Self {
            lemma_id: lemma_id.to_owned(),
            instances_checked: 0,
            violations: 0,
            worst_margin: None,
        }
    }

    /// Record one check with the given slack.
    pub fn record(&mut self, margin: f64) {
        self.instances_checked += 1;
        if !(margin >= 0.0) {
            self.violations += 1;
        }
        self.worst_margin = Some(match self.worst_margin {
            Some(w) => w.min(margin),
            None => margin,
        });
    }

    pub fn merge(&mut self, other: &LemmaVerdict) {
        self.instances_checked += other.instances_checked;
        self.violations += other.violations;
        self.worst_margin = match (self.worst_margin, other.worst_margin) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// First round (1-based) and arm at which an empirical mean left its width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub run: u64,
    pub round: u64,
    pub arm: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodEventReport {
    pub runs_total: u64,
    pub runs_good: u64,
    /// `1 − 2/T`.
    pub bound: f64,
    pub first_violations: Vec<Violation>,
}

impl GoodEventReport {
    pub fn frequency(&self) -> f64 {
        self.runs_good as f64 / self.runs_total.max(1) as f64
    }

    /// Three binomial standard deviations of the frequency at `1 − bound`.
    pub fn slack(&self) -> f64 {
        let q = 1.0 - self.bound;
        3.0 * (q * (1.0 - q) / self.runs_total.max(1) as f64).sqrt()
    }

    pub fn consistent(&self) -> bool {
        self.frequency() >= self.bound - self.slack()
    }
}

/// `(round, arm)` of the first snapshot with `|μ̂_i − μ_i| > 2√(2σ² ln T / n_i)`.
pub fn first_good_event_violation(
    traj: &RunTrajectory,
    instance: &BanditInstance,
) -> Result<Option<(u64, usize)>, HarnessError> {
    let audit = traj.audit.as_ref().ok_or(HarnessError::MissingAudit)?;
    let log_t = (traj.horizon() as f64).ln();
    let sigma_sq = instance.sigma_sq();
    for (i, snap) in audit.iter().enumerate() {
        let width = confidence_width(snap.count, sigma_sq, log_t).unwrap_or(f64::INFINITY);
        if !((snap.mean - instance.mean(snap.arm)).abs() <= width) {
            return Ok(Some((i as u64 + 1, snap.arm)));
        }
    }
    Ok(None)
}

/// Whether the good event held throughout the run.
pub fn check_good_event(
    traj: &RunTrajectory,
    instance: &BanditInstance,
) -> Result<bool, HarnessError> {
    Ok(first_good_event_violation(traj, instance)?.is_none())
}

/// `S = 4 p_a² σ² ln T / (μ*)²`.
pub fn exploration_scale(instance: &BanditInstance, horizon: u64, p: f64) -> f64 {
    let p_a = normalize_fairness(p);
    4.0 * p_a * p_a * instance.sigma_sq() * (horizon as f64).ln()
        / (instance.mu_star() * instance.mu_star())
}

/// `(32kS − k, 128kS + k)`: the stopping-time window with block slack.
pub fn tau_window(instance: &BanditInstance, horizon: u64, p: f64) -> (f64, f64) {
    let s = exploration_scale(instance, horizon, p);
    let k = instance.k() as f64;
    (32.0 * k * s - k, 128.0 * k * s + k)
}

/// Check `32kS ≤ τ ≤ 128kS` (± k). `None` when Phase I never ended.
pub fn check_tau_bounds(
    traj: &RunTrajectory,
    instance: &BanditInstance,
    p: f64,
) -> Option<LemmaVerdict> {
    let tau = traj.tau? as f64;
    let (lo, hi) = tau_window(instance, traj.horizon() as u64, p);
    let mut v = LemmaVerdict::empty(TAU_BOUNDS);
    v.record((tau - lo).min(hi - tau));
    Some(v)
}

/// Every arm pulled in Phase II satisfies `μ_i ≥ μ* − 4√(2σ² ln T / (T_i − 1))`.
pub fn check_phase2_near_optimality(
    traj: &RunTrajectory,
    instance: &BanditInstance,
) -> Result<LemmaVerdict, HarnessError> {
    let log_t = (traj.horizon() as f64).ln();
    let mut v = LemmaVerdict::empty(PHASE2_NEAR_OPTIMALITY);
    for arm in traj.phase2_arms() {
        let pulls = traj.final_counts[arm];
        if pulls < 2 {
            return Err(HarnessError::Config(format!(
                "arm {arm} was pulled in Phase II with only {pulls} total pull(s)"
            )));
        }
        let radius = 4.0 * (2.0 * instance.sigma_sq() * log_t / (pulls - 1) as f64).sqrt();
        v.record(instance.mean(arm) - (instance.mu_star() - radius));
    }
    Ok(v)
}

fn tolerance(scale: f64) -> f64 {
    NUMERIC_TOLERANCE * scale.abs().max(1.0)
}

/// Slack of `(1 − x)^a ≥ 1 − 2ax`.
pub fn claim_power_lower(x: f64, a: f64) -> f64 {
    let rhs = 1.0 - 2.0 * a * x;
    (1.0 - x).powf(a) - rhs + tolerance(rhs)
}

/// Slack of `(1 − x)^{−q} ≤ 1 + 2qx`.
pub fn claim_inverse_power_upper(x: f64, q: f64) -> f64 {
    let rhs = 1.0 + 2.0 * q * x;
    rhs - (1.0 - x).powf(-q) + tolerance(rhs)
}

/// Property-sample the three closed-form inequalities used in the regret
/// analysis, plus their boundary points.
pub fn check_numeric_claims(samples: u64, rng: RngStream) -> LemmaVerdict {
    let mut rng = rng.generator();
    let mut v = LemmaVerdict::empty(NUMERIC_CLAIMS);

    for &(x, a) in &[
        (0.0, 0.0),
        (0.0, 50.0),
        (0.5, 0.0),
        (0.5, 1.0),
        (0.5, 100.0),
    ] {
        v.record(claim_power_lower(x, a));
    }
    for &q in &[1.0, 2.0, 10.0, 1e3] {
        v.record(claim_inverse_power_upper(0.0, q));
        v.record(claim_inverse_power_upper(1.0 / (2.0 * q), q));
    }
    for &q in &[1e-9, 0.5, 1.0] {
        v.record(claim_inverse_power_upper(0.5, q));
    }

    let unit = Uniform::new_inclusive(0.0, 1.0).expect("valid range");
    // a log-uniform over [1e-6, 100] covers both tiny and large exponents.
    let log_a = Uniform::new_inclusive((1e-6f64).ln(), 100f64.ln()).expect("valid range");
    let log_q = Uniform::new_inclusive(0.0, 100f64.ln()).expect("valid range");
    for _ in 0..samples {
        let x = 0.5 * unit.sample(&mut rng);
        let a = log_a.sample(&mut rng).exp();
        v.record(claim_power_lower(x, a));

        let q = log_q.sample(&mut rng).exp();
        let x = unit.sample(&mut rng) / (2.0 * q);
        v.record(claim_inverse_power_upper(x, q));

        let q = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let x = 0.5 * unit.sample(&mut rng);
        v.record(claim_inverse_power_upper(x, q));
    }
    v
}

/// Draw `blocks` Phase-I permutations and compare every (position, arm)
/// frequency against `1/k ± 4√((1/k)(1 − 1/k)/blocks)`. A block that is not
/// a permutation also counts as a violation.
pub fn check_permutation_marginals(
    k: usize,
    blocks: u64,
    rng: RngStream,
) -> Result<LemmaVerdict, HarnessError> {
    if blocks < 1000 {
        return Err(HarnessError::Config(format!(
            "permutation check needs at least 1000 blocks, got {blocks}"
        )));
    }
    if k == 0 {
        return Err(HarnessError::Config("k must be at least 1".into()));
    }
    let mut rng = rng.generator();
    let mut freq = vec![vec![0u64; k]; k];
    let mut v = LemmaVerdict::empty(PERMUTATION_MARGINALS);
    let mut seen = vec![false; k];
    for _ in 0..blocks {
        let perm = draw_permutation(k, &mut rng);
        seen.iter_mut().for_each(|s| *s = false);
        let mut valid = perm.len() == k;
        for (pos, &arm) in perm.iter().enumerate() {
            if arm >= k || seen[arm] {
                valid = false;
                break;
            }
            seen[arm] = true;
            freq[pos][arm] += 1;
        }
        if !valid {
            v.record(-1.0);
        }
    }
    let target = 1.0 / k as f64;
    let tol = 4.0 * (target * (1.0 - target) / blocks as f64).sqrt();
    for row in &freq {
        for &c in row {
            v.record(tol - (c as f64 / blocks as f64 - target).abs());
        }
    }
    Ok(v)
}

/// Parameters of the lemma suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub instance_spec: InstanceSpec,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    pub horizon: u64,
    pub runs: usize,
    pub p_values: Vec<f64>,
    pub base_seed: u64,
    pub numeric_samples: u64,
    pub permutation_k: usize,
    pub permutation_blocks: u64,
}

fn default_policy() -> PolicyKind {
    PolicyKind::welfarist()
}

impl Default for VerifyConfig {
    /// Gaussian `k = 5` instance with means in `[10, 100]`, `σ = 20`,
    /// `T = 10⁴`, 200 runs per p.
    fn default() -> Self {
        Self {
            instance_spec: InstanceSpec {
                kind: ArmKind::Gaussian,
                k: 5,
                mean_low: 10.0,
                mean_high: 100.0,
                std: Some(20.0),
                sigma_override: None,
                seed: 2025,
            },
            policy: default_policy(),
            horizon: 10_000,
            runs: 200,
            p_values: vec![0.0, -1.5],
            base_seed: 17,
            numeric_samples: 1_000_000,
            permutation_k: 3,
            permutation_blocks: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub good_event: GoodEventReport,
    /// Runs whose Phase I never ended; excluded from the stopping-time check.
    pub tau_inapplicable: u64,
    pub verdicts: Vec<LemmaVerdict>,
}

impl VerifyReport {
    pub fn verdict(&self, lemma_id: &str) -> Option<&LemmaVerdict> {
        self.verdicts.iter().find(|v| v.lemma_id == lemma_id)
    }

    /// Violations of the checks that must hold exactly (no sampling noise).
    pub fn deterministic_violations(&self) -> u64 {
        [TAU_BOUNDS, PHASE2_NEAR_OPTIMALITY, NUMERIC_CLAIMS]
            .iter()
            .filter_map(|id| self.verdict(id))
            .map(|v| v.violations)
            .sum()
    }

    /// Good-event frequency and permutation marginals within their bands.
    pub fn statistical_ok(&self) -> bool {
        self.good_event.consistent()
            && self
                .verdict(PERMUTATION_MARGINALS)
                .is_some_and(LemmaVerdict::passed)
    }
}

struct RunChecks {
    violation: Option<(u64, usize)>,
    tau: Option<LemmaVerdict>,
    phase2: Option<LemmaVerdict>,
}

/// Run the whole suite. Runs execute in parallel; the report does not
/// depend on the pool size.
pub fn verify(config: &VerifyConfig) -> Result<VerifyReport, HarnessError> {
    let instance = config.instance_spec.build()?;
    if config.runs == 0 {
        return Err(HarnessError::Config("runs must be at least 1".into()));
    }
    if config.horizon < instance.k() as u64 {
        return Err(HarnessError::Config(format!(
            "horizon {} is smaller than k = {}",
            config.horizon,
            instance.k()
        )));
    }

    let mut good = GoodEventReport {
        runs_total: 0,
        runs_good: 0,
        bound: 1.0 - 2.0 / config.horizon as f64,
        first_violations: Vec::new(),
    };
    let mut tau = LemmaVerdict::empty(TAU_BOUNDS);
    let mut phase2 = LemmaVerdict::empty(PHASE2_NEAR_OPTIMALITY);
    let mut tau_inapplicable = 0;

    for &p in &config.p_values {
        let checks: Vec<RunChecks> = (0..config.runs as u64)
            .into_par_iter()
            .map(|r| {
                let seed = cell_seed(config.base_seed, &config.policy, p, config.horizon, r);
                let traj = run_single_with(
                    &config.policy,
                    &instance,
                    config.horizon,
                    p,
                    RngStream::new(seed, 0),
                    true,
                )?;
                let violation = first_good_event_violation(&traj, &instance)?;
                let (tau, phase2) = if violation.is_none() {
                    (
                        check_tau_bounds(&traj, &instance, p),
                        Some(check_phase2_near_optimality(&traj, &instance)?),
                    )
                } else {
                    (None, None)
                };
                Ok(RunChecks {
                    violation,
                    tau,
                    phase2,
                })
            })
            .collect::<Result<_, HarnessError>>()?;

        for c in &checks {
            good.runs_total += 1;
            match c.violation {
                Some((round, arm)) => good.first_violations.push(Violation {
                    run: good.runs_total - 1,
                    round,
                    arm,
                }),
                None => {
                    good.runs_good += 1;
                    match &c.tau {
                        Some(v) => tau.merge(v),
                        None => tau_inapplicable += 1,
                    }
                }
            }
            if let Some(v) = &c.phase2 {
                phase2.merge(v);
            }
        }
    }

    let base = RngStream::new(config.base_seed, 0);
    let numeric = check_numeric_claims(config.numeric_samples, base.derive(1));
    let perms = check_permutation_marginals(
        config.permutation_k,
        config.permutation_blocks,
        base.derive(2),
    )?;

    let mut good_verdict = LemmaVerdict::empty(GOOD_EVENT);
    good_verdict.instances_checked = good.runs_total;
    good_verdict.violations = u64::from(!good.consistent());
    good_verdict.worst_margin = Some(good.frequency() - (good.bound - good.slack()));

    Ok(VerifyReport {
        good_event: good,
        tau_inapplicable,
        verdicts: vec![good_verdict, tau, phase2, numeric, perms],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_single, AuditSnapshot};
    use crate::policies::Phase;
    use crate::rewards::RewardDistribution;

    fn gaussian(means: &[f64], std: f64, sigma: Option<f64>) -> BanditInstance {
        BanditInstance::new(
            means
                .iter()
                .map(|&m| RewardDistribution::gaussian(m, std).unwrap())
                .collect(),
            sigma,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_arms_always_good() {
        let inst = gaussian(&[1.0, 2.0, 3.0], 0.0, Some(1.0));
        for seed in 0..5 {
            let t = run_single_with(
                &PolicyKind::welfarist(),
                &inst,
                500,
                0.0,
                RngStream::new(seed, 0),
                true,
            )
            .unwrap();
            assert!(check_good_event(&t, &inst).unwrap());
        }
    }

    #[test]
    fn constructed_violation_detected() {
        let inst = gaussian(&[1.0, 2.0], 0.0, Some(1.0));
        let mut t = run_single_with(
            &PolicyKind::PlainUcb,
            &inst,
            50,
            0.0,
            RngStream::new(0, 0),
            true,
        )
        .unwrap();
        let width = confidence_width(4, 1.0, 50f64.ln()).unwrap();
        t.audit.as_mut().unwrap()[10] = AuditSnapshot {
            arm: 1,
            count: 4,
            mean: 2.0 + 10.0 * width,
        };
        assert!(!check_good_event(&t, &inst).unwrap());
        assert_eq!(
            first_good_event_violation(&t, &inst).unwrap(),
            Some((11, 1))
        );
    }

    #[test]
    fn missing_audit_is_an_error() {
        let inst = gaussian(&[1.0], 0.0, Some(1.0));
        let t = run_single(&PolicyKind::PlainUcb, &inst, 5, 0.0, RngStream::new(0, 0)).unwrap();
        assert!(matches!(
            check_good_event(&t, &inst),
            Err(HarnessError::MissingAudit)
        ));
    }

    #[test]
    fn exploration_scale_example() {
        // μ* = 100, σ = 20, k = 5, T = 10⁴, p = 0.
        let inst = gaussian(&[20.0, 40.0, 60.0, 80.0, 100.0], 20.0, None);
        let s = exploration_scale(&inst, 10_000, 0.0);
        assert!((s - 1600.0 * 10_000f64.ln() / 10_000.0).abs() < 1e-12);
        assert!((s - 1.4737).abs() < 1e-4);
        let (lo, hi) = tau_window(&inst, 10_000, 0.0);
        assert!((lo - (32.0 * 5.0 * s - 5.0)).abs() < 1e-9);
        assert!((hi - (128.0 * 5.0 * s + 5.0)).abs() < 1e-9);
        assert!(lo > 230.0 && hi < 950.0);
    }

    #[test]
    fn tau_inapplicable_without_termination() {
        let inst = gaussian(&[0.0, 0.0], 0.0, Some(1.0));
        let t = run_single(
            &PolicyKind::welfarist(),
            &inst,
            100,
            0.0,
            RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(check_tau_bounds(&t, &inst, 0.0), None);
    }

    #[test]
    fn tau_single_arm() {
        let inst = gaussian(&[5.0], 1.0, None);
        let t = run_single(
            &PolicyKind::welfarist(),
            &inst,
            2000,
            0.0,
            RngStream::new(3, 0),
        )
        .unwrap();
        let v = check_tau_bounds(&t, &inst, 0.0).unwrap();
        assert_eq!(v.instances_checked, 1);
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn phase2_single_arm_vacuous() {
        let inst = gaussian(&[5.0], 1.0, None);
        let t = run_single(
            &PolicyKind::welfarist(),
            &inst,
            2000,
            0.0,
            RngStream::new(3, 0),
        )
        .unwrap();
        let v = check_phase2_near_optimality(&t, &inst).unwrap();
        assert!(v.passed());
        assert!(v.worst_margin.unwrap() > 0.0);
    }

    #[test]
    fn phase2_constructed_counterexample() {
        let inst = gaussian(&[1.0, 100.0], 1.0, None);
        let mut t =
            run_single(&PolicyKind::PlainUcb, &inst, 10, 0.0, RngStream::new(0, 0)).unwrap();
        t.chosen = vec![0; 10_000];
        t.phase_tags = vec![Phase::PhaseII; 10_000];
        t.true_means = vec![1.0; 10_000];
        t.final_counts = vec![10_000, 0];
        let v = check_phase2_near_optimality(&t, &inst).unwrap();
        assert_eq!(v.violations, 1);
        t.final_counts = vec![1, 0];
        assert!(check_phase2_near_optimality(&t, &inst).is_err());
    }

    #[test]
    fn numeric_claim_points() {
        assert!(claim_power_lower(0.0, 7.0) >= 0.0);
        // 0.5^1 = 0.5 ≥ 0.
        assert!((claim_power_lower(0.5, 1.0) - 0.5).abs() < 1e-9);
        // 0.75^-2 = 16/9 ≤ 2.
        let slack = claim_inverse_power_upper(0.25, 2.0);
        assert!((slack - (2.0 - 16.0 / 9.0)).abs() < 1e-9);
        // equality case q = 1, x = 1/2.
        assert!(claim_inverse_power_upper(0.5, 1.0) >= 0.0);
        // outside the stated domain the claim fails.
        assert!(claim_inverse_power_upper(0.9, 2.0) < 0.0);
    }

    #[test]
    fn numeric_claims_sampled() {
        let v = check_numeric_claims(20_000, RngStream::new(1, 1));
        assert_eq!(v.violations, 0);
        assert!(v.instances_checked >= 60_000);
    }

    #[test]
    fn permutation_single_arm_exact() {
        let v = check_permutation_marginals(1, 1000, RngStream::new(0, 0)).unwrap();
        assert_eq!(v.violations, 0);
        assert_eq!(v.worst_margin, Some(0.0));
    }

    #[test]
    fn permutation_needs_enough_blocks() {
        assert!(check_permutation_marginals(3, 999, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn verdict_merge() {
        let mut a = LemmaVerdict::empty("x");
        a.record(0.5);
        let mut b = LemmaVerdict::empty("x");
        b.record(-0.1);
        a.merge(&b);
        assert_eq!(a.instances_checked, 2);
        assert_eq!(a.violations, 1);
        assert_eq!(a.worst_margin, Some(-0.1));
        let json = serde_json::to_value(&a).unwrap();
        assert_eq!(
            json.as_object().unwrap().keys().collect::<Vec<_>>(),
            [
                "instances_checked",
                "lemma_id",
                "violations",
                "worst_margin"
            ]
        );
    }
}
