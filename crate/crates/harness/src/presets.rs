//! Named configurations for the shipped experiments.

use serde_json::{json, Value};

use crate::config::SCHEMA;

pub const PRESETS: &[&str] = &[
    "linear",
    "linear-lag",
    "arm",
    "arm-delayed",
    "arm-naive",
    "pickup-demo",
    "pickup-scratch",
    "pickup-library",
    "pickup-hardware",
    "distill-full",
    "distill-touch",
    "distill-proprioceptive",
    "distill-small",
    "distill-hardware",
];

fn arm(robustify: bool, start: usize) -> Value {
    json!({
        "env": {"kind": "arm"},
        "cost": {"kind": "pose"},
        "learner": {"initial_cov_scale": 0.1, "robustify": robustify, "robustify_start": start, "state_noise": 0.025},
        "evaluate": {"trials_per_condition": 20}
    })
}

fn pickup_library(conditions: Vec<f64>) -> Value {
    json!({
        "env": {"kind": "pickup"},
        "cost": {"kind": "imitation", "lift_height": 0.12},
        "learner": {"epsilon_per_step": 0.25},
        "library": {"conditions_deg": conditions, "iterations": 10}
    })
}

fn distill(observation: &str, hidden_layers: usize, width: usize) -> Value {
    let mut v = pickup_library(crate::config::evenly_spaced(-90.0, 90.0, 10));
    crate::config::merge(
        &mut v,
        json!({"distill": {"observation": observation, "hidden_layers": hidden_layers, "width": width}}),
    );
    v
}

/// Configuration document for a preset name.
pub fn preset(name: &str) -> Option<Value> {
    let mut v = match name {
        "linear" => json!({"env": {"kind": "linear"}, "cost": {"kind": "pose"}}),
        "linear-lag" => json!({"env": {"kind": "linear", "lag": true}, "cost": {"kind": "pose"}}),
        "arm" => arm(false, 10),
        "arm-delayed" => arm(true, 10),
        "arm-naive" => arm(true, 0),
        "pickup-demo" => json!({
            "env": {"kind": "pickup"},
            "cost": {"kind": "imitation", "lift_height": 0.12},
            "demo": {},
            "learner": {"epsilon_per_step": 0.25}
        }),
        "pickup-scratch" => json!({
            "env": {"kind": "pickup"},
            "cost": {
                "kind": "weighted_pickup",
                "weights": {"joint": 0.01, "control": 0.001, "position": 1.0, "rotation": 10.0}
            },
            "learner": {"epsilon_per_step": 0.25}
        }),
        "pickup-library" => pickup_library(crate::config::evenly_spaced(-90.0, 90.0, 10)),
        "pickup-hardware" => {
            let mut v = pickup_library(vec![-60.0, -20.0, 20.0, 60.0]);
            crate::config::merge(&mut v, json!({"distill": {"samples_per_policy": 20, "hidden_layers": 6, "width": 120}}));
            v
        }
        "distill-full" => distill("full", 6, 150),
        "distill-touch" => distill("partial_touch", 6, 150),
        "distill-proprioceptive" => distill("proprioceptive", 6, 150),
        "distill-small" => distill("partial_touch", 4, 80),
        "distill-hardware" => {
            let mut v = distill("partial_touch", 6, 120);
            crate::config::merge(&mut v, json!({"library": {"conditions_deg": [-60.0, -20.0, 20.0, 60.0]}, "distill": {"samples_per_policy": 20}}));
            v
        }
        _ => return None,
    };
    crate::config::merge(&mut v, json!({"schema": SCHEMA}));
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn every_preset_is_a_valid_config() {
        for name in PRESETS {
            let v = preset(name).unwrap();
            ExperimentConfig::from_value(v).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_none());
    }
}
