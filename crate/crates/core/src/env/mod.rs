//! Analytic desk-scale environments.

mod arm;
mod linear;
pub mod pickup;
mod teleop;

use std::ops::Range;

pub use arm::{arm_env, ArmConfig, ArmEnv};
pub use linear::{linear_env, LinearEnv, LinearEnvConfig, LinearModel};
pub use pickup::{pickup_env, PickupConfig, PickupEnv};
pub use teleop::{canonical_pickup_plan, generate_demo, teleop_map, Demonstration, Plan, Waypoint};

use crate::linalg::Vector;
use crate::trajectory::Trajectory;

/// Named index ranges into the state vector.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateLayout {
    /// Joint (or generalized) positions.
    pub q: Range<usize>,
    pub q_dot: Option<Range<usize>>,
    /// Actuator-lag states.
    pub lag: Option<Range<usize>>,
    /// Object position; the last component is the vertical height.
    pub obj_pos: Option<Range<usize>>,
    pub obj_rot: Option<Range<usize>>,
    /// Object linear and angular velocities.
    pub obj_vel: Option<Range<usize>>,
}

impl StateLayout {
    pub fn height_index(&self) -> Option<usize> {
        self.obj_pos.as_ref().filter(|r| !r.is_empty()).map(|r| r.end - 1)
    }

    /// All indices that carry object pose or object velocity information.
    pub fn object_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = [&self.obj_pos, &self.obj_rot, &self.obj_vel]
            .into_iter()
            .flatten()
            .flat_map(|r| r.clone())
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    pub fn has_object(&self) -> bool {
        self.obj_pos.is_some() && self.obj_rot.is_some()
    }
}

/// A deterministic, time-invariant simulated system.
pub trait Environment: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn dt(&self) -> f64;
    fn nominal_state(&self) -> Vector;
    /// Per-dimension span used to scale initial-state perturbations.
    fn state_range(&self) -> Vector;
    fn layout(&self) -> &StateLayout;

    /// Advance one step. Actions are clamped internally.
    fn step(&self, x: &Vector, u: &Vector) -> Vector;

    /// The action actually applied for a commanded action.
    fn clamp_action(&self, u: &Vector) -> Vector {
        u.clone()
    }

    fn is_success(&self, traj: &Trajectory) -> bool;

    /// Per-finger binary contact bits, for environments with touch sensing.
    fn touch_features(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    /// Key identifying the task condition of a state (e.g. object angle).
    fn condition_key(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    /// Nominal initial state for a condition key.
    fn state_for_condition(&self, _key: &Vector) -> Option<Vector> {
        None
    }
}
