//! Datasets behind the six comparison panels.
//!
//! | panel | instance  | policies                         | p                       |
//! |-------|-----------|----------------------------------|-------------------------|
//! | a     | Bernoulli | Welfarist-UCB, NCB               | 0                       |
//! | b     | Gaussian  | Welfarist-UCB, NCB               | 0                       |
//! | c     | Gaussian  | Welfarist-UCB, Explore-then-UCB  | 0.5                     |
//! | d     | Gaussian  | Welfarist-UCB, Explore-then-UCB  | −0.5                    |
//! | e     | Gaussian  | Welfarist-UCB, Explore-then-UCB  | −1.5                    |
//! | f     | Gaussian  | Welfarist-UCB                    | 0.5, 0, −0.5, −1.5      |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::{
    sweep, write_table, ExperimentConfig, HarnessError, InstanceMode, RegretTable,
};
use crate::policies::PolicyKind;
use crate::rewards::{ArmKind, InstanceSpec};

pub const PANELS: [char; 6] = ['a', 'b', 'c', 'd', 'e', 'f'];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiguresConfig {
    #[serde(default = "bernoulli_instance")]
    pub bernoulli_instance: InstanceSpec,
    #[serde(default = "gaussian_instance")]
    pub gaussian_instance: InstanceSpec,
    #[serde(default = "default_grid")]
    pub horizon_grid: Vec<u64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Overrides the NCB / Explore-then-UCB defaults when set.
    #[serde(default = "PolicyKind::ncb")]
    pub ncb: PolicyKind,
    #[serde(default = "PolicyKind::explore_then_ucb")]
    pub explore_then_ucb: PolicyKind,
}

/// 50 Bernoulli arms with means uniform on `[0.005, 1]`.
pub fn bernoulli_instance() -> InstanceSpec {
    InstanceSpec {
        kind: ArmKind::Bernoulli,
        k: 50,
        mean_low: 0.005,
        mean_high: 1.0,
        std: None,
        sigma_override: None,
        seed: 1,
    }
}

/// 50 Gaussian arms with means uniform on `[10, 1000]` and `σ = 20`.
pub fn gaussian_instance() -> InstanceSpec {
    InstanceSpec {
        kind: ArmKind::Gaussian,
        k: 50,
        mean_low: 10.0,
        mean_high: 1000.0,
        std: Some(20.0),
        sigma_override: None,
        seed: 1,
    }
}

pub fn default_grid() -> Vec<u64> {
    vec![1000, 2000, 5000, 10_000, 20_000, 50_000]
}

fn default_runs() -> usize {
    50
}

impl Default for FiguresConfig {
    fn default() -> Self {
        Self {
            bernoulli_instance: bernoulli_instance(),
            gaussian_instance: gaussian_instance(),
            horizon_grid: default_grid(),
            runs: default_runs(),
            base_seed: 0,
            ncb: PolicyKind::ncb(),
            explore_then_ucb: PolicyKind::explore_then_ucb(),
        }
    }
}

impl FiguresConfig {
    /// The sweep behind `panel`, or `None` for an unknown panel id.
    pub fn panel(&self, panel: char) -> Option<ExperimentConfig> {
        let welfarist = PolicyKind::welfarist();
        let (instance, policies, p_values) = match panel {
            'a' => (
                &self.bernoulli_instance,
                vec![welfarist, self.ncb.clone()],
                vec![0.0],
            ),
            'b' => (
                &self.gaussian_instance,
                vec![welfarist, self.ncb.clone()],
                vec![0.0],
            ),
            'c' | 'd' | 'e' => (
                &self.gaussian_instance,
                vec![welfarist, self.explore_then_ucb.clone()],
                vec![match panel {
                    'c' => 0.5,
                    'd' => -0.5,
                    _ => -1.5,
                }],
            ),
            'f' => (
                &self.gaussian_instance,
                vec![welfarist],
                vec![0.5, 0.0, -0.5, -1.5],
            ),
            _ => return None,
        };
        Some(ExperimentConfig {
            instance_spec: instance.clone(),
            policy_specs: policies,
            p_values,
            horizon_grid: self.horizon_grid.clone(),
            runs: self.runs,
            base_seed: self.base_seed,
            output_path: PathBuf::from(format!("panel_{panel}.csv")),
            instance_mode: InstanceMode::Fixed,
        })
    }
}

/// Run every panel and write `panel_<id>.csv` files into `out_dir`.
pub fn generate(
    config: &FiguresConfig,
    out_dir: &Path,
) -> Result<Vec<(char, PathBuf, RegretTable)>, HarnessError> {
    let mut written = Vec::with_capacity(PANELS.len());
    for panel in PANELS {
        let exp = config.panel(panel).expect("known panel");
        let table = sweep(&exp)?;
        let path = out_dir.join(&exp.output_path);
        write_table(&table, &path)?;
        written.push((panel, path, table));
    }
    Ok(written)
}
