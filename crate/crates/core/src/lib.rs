//! Fairness-aware stochastic bandits.
//!
//! * [`rewards`]: arm laws, instances, and their JSON recipes.
//! * [`policies`]: Welfarist-UCB and the plain UCB, NCB and Explore-then-UCB
//!   baselines.
//! * [`welfare`]: log-domain Nash and p-mean welfare, and regret.
//! * [`harness`]: seeded single runs, sweeps, and CSV result tables.
//! * [`theorycheck`]: empirical checks of the algorithm's guarantees.
//! * [`figures`]: the six comparison datasets.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod figures;
pub mod harness;
pub mod policies;
pub mod rewards;
pub mod rng;
pub mod theorycheck;
pub mod welfare;

pub use harness::{
    estimate_round_means, read_table, run_single, sweep, write_table, ExperimentConfig,
    HarnessError, RegretRow, RegretTable, RunTrajectory,
};
pub use policies::{Phase, PolicyKind, PolicyState};
pub use rewards::{ArmKind, BanditInstance, InstanceSpec, RewardDistribution};
pub use rng::RngStream;
pub use welfare::{nash_welfare, p_mean_welfare, regret, MeanTrajectory, WelfareValue};
