use rand::Rng;
use rayon::prelude::*;

use welfarist_core::figures::gaussian_instance;
use welfarist_core::harness::{cell_seed, run_single_with};
use welfarist_core::policies::{draw_permutation, Phase};
use welfarist_core::theorycheck::{
    check_good_event, check_phase2_near_optimality, check_tau_bounds, exploration_scale, tau_window,
};
use welfarist_core::{
    estimate_round_means, sweep, ArmKind, BanditInstance, ExperimentConfig, InstanceSpec,
    PolicyKind, RewardDistribution, RngStream, RunTrajectory,
};

#[test]
fn sample_means_concentrate() {
    let laws = [
        RewardDistribution::bernoulli(0.3).unwrap(),
        RewardDistribution::gaussian(5.0, 2.0).unwrap(),
    ];
    let n = 1000usize;
    for (i, law) in laws.iter().enumerate() {
        let sigma = law.sub_gaussian_proxy();
        let radius = 2.0 * sigma * (2.0 * 20f64.ln() / n as f64).sqrt();
        let failures = (0..100u64)
            .filter(|&trial| {
                let mut rng = RngStream::new(trial, i as u64).generator();
                let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
                (mean - law.expected_value()).abs() > radius
            })
            .count();
        assert!(failures <= 10, "{law:?}: {failures} failures");
    }
}

#[test]
fn permutation_positions_are_uniform() {
    let mut rng = RngStream::new(11, 0).generator();
    let blocks = 100_000;
    let mut hits = [[0u32; 3]; 3];
    for _ in 0..blocks {
        let perm = draw_permutation(3, &mut rng);
        for (pos, &arm) in perm.iter().enumerate() {
            hits[pos][arm] += 1;
        }
    }
    for row in hits {
        for h in row {
            assert!((h as f64 / blocks as f64 - 1.0 / 3.0).abs() <= 0.01);
        }
    }
}

#[test]
fn round_means_of_a_random_policy() {
    let horizon = 200;
    let mut rng = RngStream::new(5, 0).generator();
    let runs: Vec<RunTrajectory> = (0..50)
        .map(|_| {
            let chosen: Vec<usize> = (0..horizon).map(|_| rng.random_range(0..2)).collect();
            RunTrajectory {
                policy: PolicyKind::PlainUcb,
                p: 0.0,
                true_means: chosen.iter().map(|&a| a as f64).collect(),
                phase_tags: vec![Phase::PhaseII; horizon],
                tau: Some(0),
                final_counts: vec![0, 0],
                audit: None,
                chosen,
            }
        })
        .collect();
    let means = estimate_round_means(&runs).unwrap();
    let close = means
        .values()
        .iter()
        .filter(|&&e| (e - 0.5).abs() <= 0.2)
        .count();
    assert!(close as f64 >= 0.99 * horizon as f64, "{close}/{horizon}");
}

fn welfarist_runs(
    instance: &BanditInstance,
    horizon: u64,
    p: f64,
    runs: u64,
) -> Vec<RunTrajectory> {
    let policy = PolicyKind::welfarist();
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let seed = cell_seed(99, &policy, p, horizon, r);
            run_single_with(&policy, instance, horizon, p, RngStream::new(seed, 0), true).unwrap()
        })
        .collect()
}

#[test]
fn good_event_frequency_on_bernoulli_arms() {
    let instance = InstanceSpec {
        kind: ArmKind::Bernoulli,
        k: 5,
        mean_low: 0.1,
        mean_high: 0.9,
        std: None,
        sigma_override: None,
        seed: 4,
    }
    .build()
    .unwrap();
    let runs = welfarist_runs(&instance, 1000, 0.0, 200);
    let good = runs
        .iter()
        .filter(|t| check_good_event(t, &instance).unwrap())
        .count();
    let slack = 3.0 * (0.002f64 * 0.998 / 200.0).sqrt();
    assert!(
        good as f64 / 200.0 >= 1.0 - 2.0 / 1000.0 - slack,
        "{good}/200"
    );
}

#[test]
fn stopping_time_lands_in_window() {
    let arms = [100.0, 80.0, 60.0, 40.0, 20.0]
        .map(|m| RewardDistribution::gaussian(m, 20.0).unwrap())
        .to_vec();
    let instance = BanditInstance::new(arms, None).unwrap();
    let s = exploration_scale(&instance, 10_000, 0.0);
    let want = 4.0 * 400.0 * 10_000f64.ln() / 10_000.0;
    assert!((s - want).abs() < 1e-12);
    assert!((s - 1.474).abs() < 1e-3);
    let (lo, hi) = tau_window(&instance, 10_000, 0.0);
    assert!((lo - (32.0 * 5.0 * want - 5.0)).abs() < 1e-9);
    assert!((hi - (128.0 * 5.0 * want + 5.0)).abs() < 1e-9);

    let mut checked = 0;
    for traj in welfarist_runs(&instance, 10_000, 0.0, 100) {
        if !check_good_event(&traj, &instance).unwrap() {
            continue;
        }
        let v = check_tau_bounds(&traj, &instance, 0.0).expect("phase I ends");
        assert_eq!(v.violations, 0, "tau = {:?}", traj.tau);
        let tau = traj.tau.unwrap() as f64;
        assert!(lo <= tau && tau <= hi);
        checked += 1;
    }
    assert!(checked >= 95);
}

#[test]
fn phase_two_arms_are_near_optimal() {
    let instance = gaussian_instance().build().unwrap();
    let mut good = 0;
    for traj in welfarist_runs(&instance, 5000, 0.0, 500) {
        if check_good_event(&traj, &instance).unwrap() {
            good += 1;
            let v = check_phase2_near_optimality(&traj, &instance).unwrap();
            assert_eq!(v.violations, 0);
        }
    }
    assert!(good >= 490, "{good}");
}

#[test]
fn sweep_is_reproducible() {
    let config = ExperimentConfig {
        instance_spec: gaussian_instance(),
        policy_specs: vec![
            PolicyKind::welfarist(),
            PolicyKind::ncb(),
            PolicyKind::PlainUcb,
        ],
        p_values: vec![0.0, -1.5],
        horizon_grid: vec![500, 1000],
        runs: 10,
        base_seed: 3,
        output_path: "unused.csv".into(),
        instance_mode: Default::default(),
    };
    let a = sweep(&config).unwrap();
    let b = sweep(&config).unwrap();
    assert_eq!(a.to_csv_bytes(), b.to_csv_bytes());
    assert_eq!(a.rows.len(), 12);
}
