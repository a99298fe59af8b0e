//! Planar double integrator with optional first-order actuator lag.
//!
//! Without lag the state is `(p, v)`, with lag `(p, v, a)` where the applied
//! force is the lag state `a`. The discretization is exact, so the system is
//! an exact discrete-time linear system.

use super::{Environment, StateLayout};
use crate::linalg::{Mat, Vector};
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearEnvConfig {
    pub dt: f64,
    pub horizon: usize,
    pub mass: f64,
    pub lag: bool,
    /// Actuator time constant in seconds.
    pub lag_tau: f64,
    pub initial_position: [f64; 2],
    /// Final distance to the origin counted as success.
    pub success_radius: f64,
}

impl Default for LinearEnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            horizon: 50,
            mass: 1.0,
            lag: false,
            lag_tau: 0.020,
            initial_position: [2.0, -1.0],
            success_radius: 0.05,
        }
    }
}

/// `x' = A x + B u + c`; exposed for oracle use only.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Vector,
}

#[derive(Clone, Debug)]
pub struct LinearEnv {
    config: LinearEnvConfig,
    layout: StateLayout,
    model: LinearModel,
}

pub fn linear_env(config: LinearEnvConfig) -> LinearEnv {
    let dt = config.dt;
    let inv_m = 1.0 / config.mass;
    let dx = if config.lag { 6 } else { 4 };
    let mut a = Mat::identity(dx, dx);
    let mut b = Mat::zeros(dx, 2);
    for i in 0..2 {
        a[(i, 2 + i)] = dt;
        if config.lag {
            let decay = (-dt / config.lag_tau).exp();
            a[(i, 4 + i)] = 0.5 * dt * dt * inv_m;
            a[(2 + i, 4 + i)] = dt * inv_m;
            a[(4 + i, 4 + i)] = decay;
            b[(4 + i, i)] = 1.0 - decay;
        } else {
            b[(i, i)] = 0.5 * dt * dt * inv_m;
            b[(2 + i, i)] = dt * inv_m;
        }
    }
    let layout = StateLayout {
        q: 0..2,
        q_dot: Some(2..4),
        lag: config.lag.then_some(4..6),
        ..Default::default()
    };
    LinearEnv { model: LinearModel { a, b, c: Vector::zeros(dx) }, config, layout }
}

impl LinearEnv {
    pub fn config(&self) -> &LinearEnvConfig {
        &self.config
    }

    /// Exact system matrices. Diagnostic interface for the Riccati oracle;
    /// the learner never reads these.
    pub fn oracle_model(&self) -> &LinearModel {
        &self.model
    }
}

impl Environment for LinearEnv {
    fn name(&self) -> &str {
        "linear"
    }

    fn state_dim(&self) -> usize {
        self.model.a.nrows()
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
        let mut x = Vector::zeros(self.state_dim());
        x[0] = self.config.initial_position[0];
        x[1] = self.config.initial_position[1];
        x
    }

    fn state_range(&self) -> Vector {
        Vector::from_fn(self.state_dim(), |i, _| if i < 2 { 4.0 } else if i < 4 { 8.0 } else { 20.0 })
    }

    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.model.a * x + &self.model.b * u + &self.model.c
    }

    fn is_success(&self, traj: &Trajectory) -> bool {
        let x = traj.final_state();
        x.rows(0, 2).norm() <= self.config.success_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_control_keeps_the_origin_fixed() {
        let env = linear_env(LinearEnvConfig::default());
        let zero = Vector::zeros(4);
        assert_eq!(env.step(&zero, &Vector::zeros(2)), zero);
    }

    #[test]
    fn constant_force_matches_closed_form_kinematics() {
        let cfg = LinearEnvConfig { mass: 2.0, ..Default::default() };
        let env = linear_env(cfg.clone());
        let u = Vector::from_vec(vec![1.0, -0.5]);
        let mut x = Vector::zeros(4);
        for k in 1..=30usize {
            x = env.step(&x, &u);
            let t = k as f64 * cfg.dt;
            for i in 0..2 {
                let acc = u[i] / cfg.mass;
                assert!((x[i] - 0.5 * acc * t * t).abs() < 1e-12);
                assert!((x[2 + i] - acc * t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lag_reaches_63_percent_after_one_time_constant() {
        let cfg = LinearEnvConfig { lag: true, dt: 0.005, ..Default::default() };
        let env = linear_env(cfg.clone());
        let u = Vector::from_vec(vec![1.0, 0.0]);
        let mut x = Vector::zeros(6);
        let steps = (cfg.lag_tau / cfg.dt).round() as usize;
        for _ in 0..steps {
            x = env.step(&x, &u);
        }
        assert!((x[4] - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }
}
