//! Scripted expert: waypoint plans tracked through the teleoperation map.

use super::pickup::{PickupEnv, FINGER_L, FINGER_R, WRIST};
use super::Environment;
use crate::error::{invalid, Error, Result};
use crate::linalg::{Mat, Vector};
use crate::trajectory::{generate_smoothed_noise, NoiseMatrix, Trajectory};

/// `u = gains .* (J (q - q_c))`.
pub fn teleop_map(q: &Vector, q_c: &Vector, tendon: &Mat, gains: &Vector) -> Result<Vector> {
    if q.len() != q_c.len() || tendon.ncols() != q.len() || tendon.nrows() != gains.len() {
        return invalid(format!(
            "teleop dimensions: q {}, q_c {}, J {}x{}, gains {}",
            q.len(),
            q_c.len(),
            tendon.nrows(),
            tendon.ncols(),
            gains.len()
        ));
    }
    Ok((tendon * (q - q_c)).component_mul(gains))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Waypoint {
    /// Seconds from the start of the episode.
    pub time: f64,
    pub q: Vec<f64>,
}

/// Commanded joint path plus the operator's mapping parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub waypoints: Vec<Waypoint>,
    pub tendon: Mat,
    pub gains: Vector,
    pub label: String,
    pub condition: Vector,
    /// Amplitude of smoothed operator tremor added to the commanded path.
    pub tremor: f64,
}

impl Plan {
    /// Piecewise-linear command at time `s`, held beyond the last waypoint.
    pub fn command(&self, s: f64) -> Vector {
        let w = &self.waypoints;
        let first = &w[0];
        if s <= first.time {
            return Vector::from_column_slice(&first.q);
        }
        for pair in w.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if s <= b.time {
                let span = b.time - a.time;
                let frac = if span > 0.0 { (s - a.time) / span } else { 1.0 };
                return Vector::from_iterator(a.q.len(), a.q.iter().zip(&b.q).map(|(p, r)| p + frac * (r - p)));
            }
        }
        Vector::from_column_slice(&w[w.len() - 1].q)
    }
}

/// A successful expert trajectory and the condition it was recorded under.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    pub label: String,
    pub condition: Vector,
}

/// Runs the plan through `teleop_map` and keeps it only if the task succeeds.
pub fn generate_demo(env: &dyn Environment, plan: &Plan, seed: u64) -> Result<Demonstration> {
    let q_idx = env.layout().q.clone();
    let nq = q_idx.len();
    if plan.waypoints.is_empty() {
        return invalid("plan has no waypoints");
    }
    if let Some(bad) = plan.waypoints.iter().find(|w| w.q.len() != nq || !w.q.iter().all(|v| v.is_finite())) {
        return invalid(format!("waypoint at {} s does not match {nq} joints", bad.time));
    }
    if plan.waypoints.windows(2).any(|p| p[1].time < p[0].time) {
        return invalid("waypoint times must be non-decreasing");
    }
    let x0 = env.state_for_condition(&plan.condition).unwrap_or_else(|| env.nominal_state());
    let horizon = env.horizon();
    let tremor = if plan.tremor > 0.0 {
        generate_smoothed_noise(horizon, nq, 2.0, seed)?.scaled(plan.tremor)
    } else {
        NoiseMatrix::zeros(horizon, nq)
    };
    let mut states = vec![x0];
    let mut actions = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let x = &states[t];
        let q = Vector::from_iterator(nq, q_idx.clone().map(|i| x[i]));
        let q_c = plan.command(t as f64 * env.dt()) + tremor.row(t);
        let u = env.clamp_action(&teleop_map(&q, &q_c, &plan.tendon, &plan.gains)?);
        let next = env.step(x, &u);
        actions.push(u);
        states.push(next);
    }
    let trajectory = Trajectory::new(states, actions)?;
    if !env.is_success(&trajectory) {
        return Err(Error::DemoFailed { final_state: trajectory.final_state().iter().copied().collect() });
    }
    Ok(Demonstration { trajectory, label: plan.label.clone(), condition: plan.condition.clone() })
}

const CREEP_SPEED: f64 = 0.4;
const SQUEEZE_DEPTH: f64 = 0.15;
const LIFT_TARGET: f64 = 0.3;
const _: () = assert!(FINGER_L == 0 && FINGER_R == 1 && WRIST == 2);

/// Descend, creep each finger onto its object end at a common speed, squeeze,
/// then lift.
pub fn canonical_pickup_plan(env: &PickupEnv, theta: f64) -> Plan {
    let c = env.config();
    let (e_l, e_r) = env.ends(0.0, theta);
    let [f_l, f_r] = c.initial_fingers;
    let w0 = c.initial_wrist;
    let start = 0.4;
    let t_l = (e_l - f_l).abs() / CREEP_SPEED;
    let t_r = (e_r - f_r).abs() / CREEP_SPEED;
    let mut waypoints = Vec::new();
    let mut push = |time: f64, q: [f64; 3]| waypoints.push(Waypoint { time, q: q.to_vec() });
    push(0.0, [f_l, f_r, w0]);
    push(0.3, [f_l, f_r, 0.0]);
    push(start, [f_l, f_r, 0.0]);
    let first = t_l.min(t_r);
    let partial = |f: f64, e: f64, t: f64| if t > 0.0 { f + (e - f) * first / t } else { e };
    if first < t_l.max(t_r) {
        push(start + first, [partial(f_l, e_l, t_l), partial(f_r, e_r, t_r), 0.0]);
    }
    let arrive = start + t_l.max(t_r).max(0.2);
    push(arrive, [e_l, e_r, 0.0]);
    let squeeze = arrive + 0.3;
    push(squeeze, [e_l, e_r, 0.0]);
    let grip = [e_l + SQUEEZE_DEPTH, e_r - SQUEEZE_DEPTH];
    push(squeeze + c.dt, [grip[0], grip[1], 0.0]);
    push(squeeze + 0.3, [grip[0], grip[1], 0.0]);
    push(squeeze + 0.8, [grip[0], grip[1], LIFT_TARGET]);
    Plan {
        waypoints,
        tendon: -Mat::identity(3, 3),
        gains: Vector::from_vec(vec![10.0, 10.0, 10.0]),
        label: format!("expert theta={theta:.4}"),
        condition: Vector::from_element(1, theta),
        tremor: 0.0,
    }
}
