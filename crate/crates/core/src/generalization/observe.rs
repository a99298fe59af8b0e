//! Observation projections for policies with partial sensing.

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{invalid, Result};
use crate::linalg::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    Full,
    /// Object pose and velocity removed, per-finger contact bits appended.
    PartialTouch,
    /// Object pose and velocity removed.
    Proprioceptive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSpec {
    mode: ObservationMode,
    kept: Vec<usize>,
    touch_dim: usize,
    state_dim: usize,
}

impl ObservationSpec {
    pub fn new(mode: ObservationMode, env: &dyn Environment) -> Result<Self> {
        let dx = env.state_dim();
        if mode == ObservationMode::Full {
            return Ok(Self { mode, kept: (0..dx).collect(), touch_dim: 0, state_dim: dx });
        }
        let object = env.layout().object_indices();
        if object.is_empty() {
            return invalid(format!("environment {} has no object ranges to hide", env.name()));
        }
        let kept = (0..dx).filter(|i| !object.contains(i)).collect();
        let touch_dim = match mode {
            ObservationMode::PartialTouch => match env.touch_features(&env.nominal_state()) {
                Some(t) => t.len(),
                None => return invalid(format!("environment {} has no touch sensing", env.name())),
            },
            _ => 0,
        };
        Ok(Self { mode, kept, touch_dim, state_dim: dx })
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.kept.len() + self.touch_dim
    }

    /// State indices passed through, in order.
    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    pub fn touch_dim(&self) -> usize {
        self.touch_dim
    }
}

pub fn observe(x: &Vector, env: &dyn Environment, spec: &ObservationSpec) -> Result<Vector> {
    if x.len() != spec.state_dim {
        return invalid(format!("state has dimension {}, observation spec expects {}", x.len(), spec.state_dim));
    }
    if spec.mode == ObservationMode::Full {
        return Ok(x.clone());
    }
    let mut out: Vec<f64> = spec.kept.iter().map(|&i| x[i]).collect();
    if spec.touch_dim > 0 {
        match env.touch_features(x) {
            Some(t) if t.len() == spec.touch_dim => out.extend(t.iter()),
            _ => return invalid("environment touch features do not match the observation spec"),
        }
    }
    Ok(Vector::from_vec(out))
}
