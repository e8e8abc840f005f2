use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::policies::PolicyKind;
use crate::rewards::InstanceSpec;

/// Whether arm means are drawn once per sweep or once per run index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceMode {
    #[default]
    Fixed,
    PerRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance_spec: InstanceSpec,
    pub policy_specs: Vec<PolicyKind>,
    pub p_values: Vec<f64>,
    pub horizon_grid: Vec<u64>,
    pub runs: usize,
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    #[serde(default, skip_serializing_if = "is_fixed")]
    pub instance_mode: InstanceMode,
}

fn default_output() -> PathBuf {
    PathBuf::from("regret.csv")
}

fn is_fixed(m: &InstanceMode) -> bool {
    *m == InstanceMode::Fixed
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.instance_spec.validate()?;
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.horizon_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("horizon_grid must be strictly ascending".into());
        }
        let k = self.instance_spec.k as u64;
        if let Some(&h) = self.horizon_grid.iter().find(|&&h| h < k) {
            return bad(format!("horizon {h} is smaller than k = {k}"));
        }
        if let Some(p) = self.p_values.iter().find(|p| !p.is_finite()) {
            return bad(format!("p value {p} is not finite"));
        }
        for policy in &self.policy_specs {
            policy.validate()?;
        }
        Ok(())
    }
}
