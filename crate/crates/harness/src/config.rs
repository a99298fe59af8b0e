//! Experiment configuration documents.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use trajrl::cost::PickupWeights;
use trajrl::env::{ArmConfig, LinearEnvConfig, PickupConfig};
use trajrl::generalization::{ObservationMode, ResetMode};
use trajrl::learner::LearnerConfig;

use crate::error::HarnessError;

pub const SCHEMA: &str = "trajrl.experiment/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub env: EnvBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBlock>,
    /// `learner.seed` is replaced by a stream derived from the master seed.
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<DemoBlock>,
    #[serde(default)]
    pub library: LibraryBlock,
    #[serde(default)]
    pub distill: DistillBlock,
    #[serde(default)]
    pub evaluate: EvaluateBlock,
    #[serde(default)]
    pub oracle: OracleBlock,
    #[serde(default)]
    pub export: ExportBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvBlock {
    Linear(LinearEnvConfig),
    Arm(ArmConfig),
    Pickup(PickupConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostBlock {
    /// Joint target defaults to the environment's own target (zero for the
    /// linear env).
    Pose {
        #[serde(default)]
        target: Option<Vec<f64>>,
    },
    /// Targets default to the nominal joints, the object lifted in place and
    /// zero rotation.
    Manipulation {
        #[serde(default)]
        joint_target: Option<Vec<f64>>,
        #[serde(default)]
        position_target: Option<Vec<f64>>,
        #[serde(default)]
        rotation_target: Option<Vec<f64>>,
    },
    Imitation {
        #[serde(default = "default_lift")]
        lift_height: f64,
    },
    WeightedPickup {
        weights: PickupWeights,
        #[serde(default)]
        joint_target: Option<Vec<f64>>,
        #[serde(default)]
        position_target: Option<Vec<f64>>,
        #[serde(default)]
        rotation_target: Option<Vec<f64>>,
    },
}

fn default_lift() -> f64 {
    0.12
}

/// Scripted teleoperated demonstration at the environment's nominal condition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoBlock {
    /// Smoothed command noise added by the operator.
    pub tremor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LibraryBlock {
    pub conditions_deg: Vec<f64>,
    pub iterations: usize,
    pub lift_height: f64,
}

impl Default for LibraryBlock {
    fn default() -> Self {
        Self { conditions_deg: evenly_spaced(-90.0, 90.0, 10), iterations: 10, lift_height: 0.12 }
    }
}

pub fn evenly_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillBlock {
    /// Library file; defaults to `library.json` in the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub library: Option<PathBuf>,
    /// Library entries to train on; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<usize>>,
    pub observation: ObservationMode,
    pub hidden_layers: usize,
    pub width: usize,
    pub samples_per_policy: usize,
    pub noise_scale: f64,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for DistillBlock {
    fn default() -> Self {
        Self {
            library: None,
            entries: None,
            observation: ObservationMode::Full,
            hidden_layers: 6,
            width: 150,
            samples_per_policy: 50,
            noise_scale: 1.0,
            epochs: 20,
            batch: 64,
            learning_rate: 0.001,
            momentum: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateBlock {
    /// Library file; defaults to `library.json` in the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub library: Option<PathBuf>,
    /// Network policy files to sweep alongside the library.
    pub networks: Vec<PathBuf>,
    /// Also sweep every library controller on its own.
    pub single_policies: bool,
    pub conditions: usize,
    pub range_deg: [f64; 2],
    pub trials_per_condition: usize,
    pub action_noise: f64,
    pub reset: ResetMode,
}

impl Default for EvaluateBlock {
    fn default() -> Self {
        Self {
            library: None,
            networks: Vec::new(),
            single_policies: true,
            conditions: 10,
            range_deg: [-90.0, 90.0],
            trials_per_condition: 100,
            action_noise: 0.0,
            reset: ResetMode::Nominal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleBlock {
    pub gain_tolerance: f64,
    /// Relative tolerance on the optimal cost from the true dynamics.
    pub cost_tolerance: f64,
    /// Also train from scratch and compare the final model-expected cost.
    pub train: bool,
    pub trained_cost_tolerance: f64,
}

impl Default for OracleBlock {
    fn default() -> Self {
        Self { gain_tolerance: 1e-6, cost_tolerance: 1e-8, train: true, trained_cost_tolerance: 0.05 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportBlock {
    /// Run directories holding `curve.json`; the output directory when empty.
    pub runs: Vec<PathBuf>,
}

impl ExperimentConfig {
    /// Parse a configuration document, reporting the offending field path.
    pub fn from_value(value: Value) -> Result<Self, HarnessError> {
        let value = unwrap_manifest(value);
        let cfg: Self = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                HarnessError::Config(inner.to_string())
            } else {
                HarnessError::Config(format!("{path}: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: Value = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: &str, msg: &str| Err(HarnessError::Config(format!("{field}: {msg}")));
        if self.schema != SCHEMA {
            return bad("schema", &format!("expected \"{SCHEMA}\", found \"{}\"", self.schema));
        }
        let with_demo = self.demo.is_some() || matches!(self.cost, Some(CostBlock::Imitation { .. }));
        if let Err(e) = self.learner.validate(with_demo) {
            return bad("learner", &e.to_string());
        }
        if self.library.iterations == 0 {
            return bad("library.iterations", "must be at least 1");
        }
        let d = &self.distill;
        if d.samples_per_policy == 0 || d.batch == 0 || !(d.learning_rate > 0.0) || !(d.noise_scale >= 0.0) {
            return bad("distill", "samples_per_policy and batch must be positive, learning_rate > 0, noise_scale >= 0");
        }
        if !(0.0..1.0).contains(&d.momentum) {
            return bad("distill.momentum", "must lie in [0, 1)");
        }
        let e = &self.evaluate;
        if e.conditions == 0 || e.trials_per_condition == 0 || !(e.range_deg[0] <= e.range_deg[1]) {
            return bad("evaluate", "conditions and trials must be positive and range_deg ordered");
        }
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("configuration serializes")
    }
}

/// A run manifest can be used as a configuration: its `config` member is the
/// resolved document that produced the run.
pub fn unwrap_manifest(value: Value) -> Value {
    match value {
        Value::Object(mut map) if map.get("schema").and_then(Value::as_str) == Some(crate::artifacts::MANIFEST_SCHEMA) => {
            map.remove("config").unwrap_or(Value::Null)
        }
        v => v,
    }
}

/// Recursive JSON merge: objects merge key by key, everything else replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
