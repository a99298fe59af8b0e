//! Toy grasp-and-lift task with a discontinuous contact model.
//!
//! State layout: fingers `f_L, f_R`, wrist height `w`, object lateral
//! position `y`, object height `z`, object angle `theta`, followed by the six
//! corresponding velocities.

use super::{Environment, StateLayout};
use crate::linalg::Vector;
use crate::trajectory::Trajectory;

pub const FINGER_L: usize = 0;
pub const FINGER_R: usize = 1;
pub const WRIST: usize = 2;
pub const OBJ_Y: usize = 3;
pub const OBJ_Z: usize = 4;
pub const OBJ_THETA: usize = 5;
const VEL: usize = 6;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PickupConfig {
    pub dt: f64,
    pub horizon: usize,
    /// Object angle of the nominal initial state, radians.
    pub angle: f64,
    /// Half length of the object.
    pub half_length: f64,
    /// Offset of the object's centre along its axis normal, scaled by `sin(theta)`.
    pub center_shift: f64,
    /// Grasp-zone half width at `theta = 0`; it shrinks to half at `|theta| = pi/2`.
    pub zone_half_width: f64,
    /// Distance from an object end within which a level finger senses contact.
    pub touch_tolerance: f64,
    /// Maximum `|w - z|` at which the fingers are level with the object.
    pub level_tolerance: f64,
    /// Closing-rate threshold `v_L - v_R` that counts as a squeeze.
    pub squeeze_threshold: f64,
    /// Object height above which the grip holds without squeezing.
    pub hold_height: f64,
    /// Angular rate at which a grasped object aligns to `theta = 0`.
    pub alignment_rate: f64,
    pub finger_gain: f64,
    pub finger_damping: f64,
    pub finger_limit: f64,
    pub wrist_gain: f64,
    pub wrist_damping: f64,
    pub wrist_floor: f64,
    /// Finger indentation into a grasped object per unit of pressing action.
    pub compliance: f64,
    pub gravity: f64,
    /// Lateral displacement of an object hit between its ends.
    pub knock_distance: f64,
    pub action_limit: f64,
    pub initial_fingers: [f64; 2],
    pub initial_wrist: f64,
    pub success_height: f64,
    pub success_angle: f64,
    pub success_velocity: f64,
}

impl Default for PickupConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            horizon: 80,
            angle: 0.0,
            half_length: 0.25,
            center_shift: 0.15,
            zone_half_width: 0.05,
            touch_tolerance: 0.1,
            level_tolerance: 0.03,
            squeeze_threshold: 0.15,
            hold_height: 0.005,
            alignment_rate: 3.0,
            finger_gain: 4.0,
            finger_damping: 8.0,
            finger_limit: 0.6,
            wrist_gain: 2.0,
            wrist_damping: 6.0,
            wrist_floor: 0.0,
            compliance: 0.02,
            gravity: 9.81,
            knock_distance: 0.8,
            action_limit: 1.0,
            initial_fingers: [-0.35, 0.35],
            initial_wrist: 0.1,
            success_height: 0.12,
            success_angle: 0.1,
            success_velocity: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PickupEnv {
    config: PickupConfig,
    layout: StateLayout,
}

pub fn pickup_env() -> PickupEnv {
    PickupEnv::new(PickupConfig::default())
}

impl PickupEnv {
    pub fn new(config: PickupConfig) -> Self {
        let layout = StateLayout {
            q: 0..3,
            q_dot: Some(6..9),
            lag: None,
            obj_pos: Some(3..5),
            obj_rot: Some(5..6),
            obj_vel: Some(9..12),
        };
        Self { config, layout }
    }

    pub fn config(&self) -> &PickupConfig {
        &self.config
    }

    /// Positions of the left and right object ends along the finger axis.
    pub fn ends(&self, y: f64, theta: f64) -> (f64, f64) {
        let c = y + self.config.center_shift * theta.sin();
        let half = self.config.half_length * theta.cos();
        (c - half, c + half)
    }

    pub fn zone_half_width(&self, theta: f64) -> f64 {
        self.config.zone_half_width * (0.5 + 0.5 * theta.cos())
    }

    /// Whether each finger lies inside the grasp zone around its object end.
    pub fn in_zone(&self, x: &Vector) -> (bool, bool) {
        let (e_l, e_r) = self.ends(x[OBJ_Y], x[OBJ_THETA]);
        let hw = self.zone_half_width(x[OBJ_THETA]);
        ((x[FINGER_L] - e_l).abs() <= hw, (x[FINGER_R] - e_r).abs() <= hw)
    }

    pub fn is_level(&self, w: f64, z: f64) -> bool {
        (w - z).abs() <= self.config.level_tolerance
    }

    /// Whether the step from `x` under action `u` happens with the object held.
    pub fn grasped(&self, x: &Vector, u: &Vector) -> bool {
        let u = self.clamp_action(u);
        let c = &self.config;
        let (in_l, in_r) = self.in_zone(x);
        if !(in_l && in_r && self.is_level(x[WRIST], x[OBJ_Z])) {
            return false;
        }
        let v_l = x[VEL] + c.dt * (c.finger_gain * u[0] - c.finger_damping * x[VEL]);
        let v_r = x[VEL + 1] + c.dt * (c.finger_gain * u[1] - c.finger_damping * x[VEL + 1]);
        v_l - v_r > c.squeeze_threshold || x[OBJ_Z] > c.hold_height
    }

    fn state_with_angle(&self, theta: f64) -> Vector {
        let c = &self.config;
        let mut x = Vector::zeros(12);
        x[FINGER_L] = c.initial_fingers[0];
        x[FINGER_R] = c.initial_fingers[1];
        x[WRIST] = c.initial_wrist;
        x[OBJ_THETA] = theta;
        x
    }
}

impl Environment for PickupEnv {
    fn name(&self) -> &str {
        "pickup"
    }

    fn state_dim(&self) -> usize {
        12
    }

    fn action_dim(&self) -> usize {
        3
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn nominal_state(&self) -> Vector {
        self.state_with_angle(self.config.angle)
    }

    fn state_range(&self) -> Vector {
        let pi = std::f64::consts::PI;
        Vector::from_vec(vec![1.2, 1.2, 0.3, 0.2, 0.2, pi, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    }

    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn clamp_action(&self, u: &Vector) -> Vector {
        let lim = self.config.action_limit;
        u.map(|v| v.clamp(-lim, lim))
    }

    fn step(&self, x: &Vector, u: &Vector) -> Vector {
        let c = &self.config;
        let dt = c.dt;
        let held = self.grasped(x, u);
        let u = self.clamp_action(u);
        let mut next = x.clone();

        let mut v_w = x[VEL + 2] + dt * (c.wrist_gain * u[2] - c.wrist_damping * x[VEL + 2]);
        let mut w = x[WRIST] + dt * v_w;
        if w < c.wrist_floor {
            w = c.wrist_floor;
            v_w = 0.0;
        }
        next[WRIST] = w;
        next[VEL + 2] = v_w;
        next[VEL + OBJ_Y] = 0.0;

        if held {
            let theta = x[OBJ_THETA];
            let aligned = theta - theta.signum() * theta.abs().min(c.alignment_rate * dt);
            let z = (x[OBJ_Z] + (w - x[WRIST])).max(0.0);
            let (e_l, e_r) = self.ends(x[OBJ_Y], aligned);
            next[OBJ_THETA] = aligned;
            next[VEL + OBJ_THETA] = (aligned - theta) / dt;
            next[OBJ_Z] = z;
            next[VEL + OBJ_Z] = (z - x[OBJ_Z]) / dt;
            next[FINGER_L] = e_l + c.compliance * u[0].max(0.0);
            next[FINGER_R] = e_r - c.compliance * (-u[1]).max(0.0);
            next[VEL] = 0.0;
            next[VEL + 1] = 0.0;
            return next;
        }

        for i in 0..2 {
            let mut v = x[VEL + i] + dt * (c.finger_gain * u[i] - c.finger_damping * x[VEL + i]);
            let mut f = x[i] + dt * v;
            if f.abs() > c.finger_limit {
                f = f.clamp(-c.finger_limit, c.finger_limit);
                v = 0.0;
            }
            next[i] = f;
            next[VEL + i] = v;
        }

        let mut v_z = x[VEL + OBJ_Z] - c.gravity * dt;
        let mut z = x[OBJ_Z] + dt * v_z;
        if z <= 0.0 {
            z = 0.0;
            v_z = 0.0;
        }
        next[OBJ_Z] = z;
        next[VEL + OBJ_Z] = v_z;
        next[VEL + OBJ_THETA] = 0.0;

        // A finger level with the object and strictly between the grasp zones
        // knocks it sideways, once.
        let y = x[OBJ_Y];
        if y.abs() < 0.5 * c.knock_distance && self.is_level(w, z) {
            let (e_l, e_r) = self.ends(y, x[OBJ_THETA]);
            let hw = self.zone_half_width(x[OBJ_THETA]);
            let inside = |f: f64| f > e_l + hw && f < e_r - hw;
            if inside(next[FINGER_L]) {
                next[OBJ_Y] = y + c.knock_distance;
            } else if inside(next[FINGER_R]) {
                next[OBJ_Y] = y - c.knock_distance;
            }
        }
        next
    }

    /// Final object at least `success_height` up, nearly aligned and at rest.
    fn is_success(&self, traj: &Trajectory) -> bool {
        let c = &self.config;
        let x = traj.final_state();
        x[OBJ_Z] >= c.success_height
            && x[OBJ_THETA].abs() <= c.success_angle
            && x[VEL + OBJ_Z].abs() <= c.success_velocity
            && x[VEL + OBJ_THETA].abs() <= c.success_velocity
    }

    fn touch_features(&self, x: &Vector) -> Option<Vector> {
        let level = self.is_level(x[WRIST], x[OBJ_Z]);
        let (e_l, e_r) = self.ends(x[OBJ_Y], x[OBJ_THETA]);
        let tol = self.config.touch_tolerance;
        let bit = |f: f64, e: f64| if level && (f - e).abs() <= tol { 1.0 } else { 0.0 };
        Some(Vector::from_vec(vec![bit(x[FINGER_L], e_l), bit(x[FINGER_R], e_r)]))
    }

    fn condition_key(&self, x: &Vector) -> Option<Vector> {
        Some(Vector::from_element(1, x[OBJ_THETA]))
    }

    fn state_for_condition(&self, key: &Vector) -> Option<Vector> {
        (key.len() == 1).then(|| self.state_with_angle(key[0]))
    }
}
