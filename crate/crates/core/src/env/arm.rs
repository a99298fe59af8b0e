//! Planar two-link arm under torque control with gravity.

use super::{Environment, StateLayout};
use crate::linalg::Vector;
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmConfig {
    /// +1: gravity pulls toward the target pose; -1: gravity opposes it.
    pub gravity_sign: f64,
    pub gravity: f64,
    pub dt: f64,
    pub horizon: usize,
    pub link_mass: [f64; 2],
    pub link_length: [f64; 2],
    pub damping: f64,
    pub torque_gain: f64,
    pub action_limit: f64,
    pub initial_q: [f64; 2],
    pub target_q: [f64; 2],
    /// Per-joint final error counted as success, in radians.
    pub success_tolerance: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            gravity_sign: -1.0,
            gravity: 9.81,
            dt: 0.02,
            horizon: 75,
            link_mass: [1.0, 1.0],
            link_length: [1.0, 1.0],
            damping: 1.0,
            torque_gain: 10.0,
            action_limit: 4.0,
            initial_q: [0.0, 0.0],
            target_q: [0.9, 0.6],
            success_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArmEnv {
    config: ArmConfig,
    layout: StateLayout,
}

pub fn arm_env(gravity_sign: f64) -> ArmEnv {
    ArmEnv::new(ArmConfig { gravity_sign: gravity_sign.signum(), ..Default::default() })
}

impl ArmEnv {
    pub fn new(config: ArmConfig) -> Self {
        let layout = StateLayout { q: 0..2, q_dot: Some(2..4), ..Default::default() };
        Self { config, layout }
    }

    pub fn config(&self) -> &ArmConfig {
        &self.config
    }

    pub fn target(&self) -> Vector {
        Vector::from_column_slice(&self.config.target_q)
    }

    /// Joint torques exerted by gravity, with angles measured from the
    /// horizontal and the sign convention of `gravity_sign`.
    pub fn gravity_torque(&self, q: [f64; 2]) -> [f64; 2] {
        let c = &self.config;
        let [m1, m2] = c.link_mass;
        let [l1, l2] = c.link_length;
        let g12 = m2 * 0.5 * l2 * c.gravity * (q[0] + q[1]).cos();
        let g1 = (m1 * 0.5 * l1 + m2 * l1) * c.gravity * q[0].cos() + g12;
        [c.gravity_sign * g1, c.gravity_sign * g12]
    }

    /// Joint accelerations for state `(q, q_dot)` and applied torques.
    pub fn acceleration(&self, q: [f64; 2], qd: [f64; 2], torque: [f64; 2]) -> [f64; 2] {
        let c = &self.config;
        let [m1, m2] = c.link_mass;
        let [l1, l2] = c.link_length;
        let (lc1, lc2) = (0.5 * l1, 0.5 * l2);
        let (i1, i2) = (m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0);
        let cos2 = q[1].cos();
        let m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * cos2) + i1 + i2;
        let m12 = m2 * (lc2 * lc2 + l1 * lc2 * cos2) + i2;
        let m22 = m2 * lc2 * lc2 + i2;
        let h = m2 * l1 * lc2 * q[1].sin();
        let coriolis = [-h * qd[1] * (2.0 * qd[0] + qd[1]), h * qd[0] * qd[0]];
        let grav = self.gravity_torque(q);
        let rhs: Vec<f64> = (0..2)
            .map(|i| torque[i] - coriolis[i] + grav[i] - c.damping * qd[i])
            .collect();
        let det = m11 * m22 - m12 * m12;
        [(m22 * rhs[0] - m12 * rhs[1]) / det, (m11 * rhs[1] - m12 * rhs[0]) / det]
    }
}

impl Environment for ArmEnv {
    fn name(&self) -> &str {
        "arm"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn nominal_state(&self) -> Vector {
        Vector::from_vec(vec![self.config.initial_q[0], self.config.initial_q[1], 0.0, 0.0])
    }

    fn state_range(&self) -> Vector {
        Vector::from_vec(vec![std::f64::consts::PI, std::f64::consts::PI, 4.0, 4.0])
    }

    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn clamp_action(&self, u: &Vector) -> Vector {
        let lim = self.config.action_limit;
        u.map(|v| v.clamp(-lim, lim))
    }

    /// Semi-implicit Euler.
    fn step(&self, x: &Vector, u: &Vector) -> Vector {
        let u = self.clamp_action(u);
        let dt = self.config.dt;
        let gain = self.config.torque_gain;
        let acc = self.acceleration([x[0], x[1]], [x[2], x[3]], [gain * u[0], gain * u[1]]);
        let qd = [x[2] + dt * acc[0], x[3] + dt * acc[1]];
        Vector::from_vec(vec![x[0] + dt * qd[0], x[1] + dt * qd[1], qd[0], qd[1]])
    }

    fn is_success(&self, traj: &Trajectory) -> bool {
        let x = traj.final_state();
        (0..2).all(|i| (x[i] - self.config.target_q[i]).abs() <= self.config.success_tolerance)
    }
}
