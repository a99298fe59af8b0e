//! Trajectories, temporally smoothed exploration noise, and rollouts.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::controller::LinearGaussianController;
use crate::cost::CostFunction;
use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::linalg::{all_finite, Vector};
use crate::rng;

/// States `x_0..x_T`, actions `u_0..u_{T-1}` and, once evaluated, the
/// `T` running costs followed by the terminal cost at `x_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    states: Vec<Vector>,
    actions: Vec<Vector>,
    costs: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<Vector>, actions: Vec<Vector>) -> Result<Self> {
        if actions.is_empty() {
            return invalid("trajectory horizon must be positive");
        }
        if states.len() != actions.len() + 1 {
            return invalid(format!(
                "trajectory has {} states for {} actions",
                states.len(),
                actions.len()
            ));
        }
        let dx = states[0].len();
        let du = actions[0].len();
        if states.iter().any(|s| s.len() != dx) || actions.iter().any(|a| a.len() != du) {
            return invalid("trajectory vectors have inconsistent dimensions");
        }
        if !states.iter().all(all_finite) || !actions.iter().all(all_finite) {
            return invalid("trajectory contains non-finite entries");
        }
        Ok(Self { states, actions, costs: None })
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn actions(&self) -> &[Vector] {
        &self.actions
    }

    pub fn state(&self, t: usize) -> &Vector {
        &self.states[t]
    }

    pub fn action(&self, t: usize) -> &Vector {
        &self.actions[t]
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("non-empty")
    }

    pub fn costs(&self) -> Option<&[f64]> {
        self.costs.as_deref()
    }

    pub fn total_cost(&self) -> Option<f64> {
        self.costs.as_ref().map(|c| c.iter().sum())
    }

    pub fn to_file(&self) -> TrajectoryFile {
        TrajectoryFile {
            horizon: self.horizon(),
            states: self.states.iter().map(|s| s.iter().cloned().collect()).collect(),
            actions: self.actions.iter().map(|a| a.iter().cloned().collect()).collect(),
            costs: self.costs.clone().unwrap_or_default(),
        }
    }

    pub fn from_file(file: &TrajectoryFile) -> Result<Self> {
        let mut traj = Self::new(
            file.states.iter().map(|s| Vector::from_vec(s.clone())).collect(),
            file.actions.iter().map(|a| Vector::from_vec(a.clone())).collect(),
        )?;
        if traj.horizon() != file.horizon {
            return Err(Error::Format("trajectory T does not match its action count".into()));
        }
        if !file.costs.is_empty() {
            if file.costs.len() != file.horizon + 1 {
                return Err(Error::Format("trajectory costs must have T+1 entries".into()));
            }
            traj.costs = Some(file.costs.clone());
        }
        Ok(traj)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(&self.to_file())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }
}

/// Serialized trajectory, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    #[serde(default)]
    pub costs: Vec<f64>,
}

/// Pre-generated `T x d_u` exploration noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMatrix {
    values: DMatrix<f64>,
    sigma: f64,
    seed: u64,
}

impl NoiseMatrix {
    pub fn zeros(horizon: usize, action_dim: usize) -> Self {
        Self { values: DMatrix::zeros(horizon, action_dim), sigma: 0.0, seed: 0 }
    }

    pub fn from_values(values: DMatrix<f64>) -> Self {
        Self { values, sigma: 0.0, seed: 0 }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, t: usize) -> Vector {
        self.values.row(t).transpose()
    }

    pub fn horizon(&self) -> usize {
        self.values.nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: &self.values * factor, ..self.clone() }
    }
}

/// Mirror an out-of-range index back into `0..len` (edge sample not repeated).
fn reflect(index: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let m = index.rem_euclid(period);
    if m >= len as i64 {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// White standard-normal noise convolved per column with a Gaussian kernel of
/// standard deviation `sigma` (in timesteps), truncated at 4 sigma with
/// reflected boundaries, then rescaled so every entry has unit variance.
pub fn generate_smoothed_noise(horizon: usize, action_dim: usize, sigma: f64, seed: u64) -> Result<NoiseMatrix> {
    if horizon == 0 || action_dim == 0 {
        return invalid("noise dimensions must be positive");
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return invalid("noise sigma must be finite and non-negative");
    }
    let mut rng = rng::seeded(seed);
    let mut white = DMatrix::zeros(horizon, action_dim);
    for t in 0..horizon {
        for j in 0..action_dim {
            white[(t, j)] = StandardNormal.sample(&mut rng);
        }
    }
    if sigma == 0.0 {
        return Ok(NoiseMatrix { values: white, sigma, seed });
    }

    let radius = (4.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();

    let mut values = DMatrix::zeros(horizon, action_dim);
    let mut effective = vec![0.0; horizon];
    for t in 0..horizon {
        // Reflection can fold several taps onto one source sample; the exact
        // variance of the output entry is the sum of squared folded weights.
        effective.iter_mut().for_each(|w| *w = 0.0);
        let mut touched = Vec::with_capacity(kernel.len());
        for (i, w) in kernel.iter().enumerate() {
            let src = reflect(t as i64 + i as i64 - radius, horizon);
            if effective[src] == 0.0 {
                touched.push(src);
            }
            effective[src] += w;
        }
        let norm = touched.iter().map(|&s| effective[s] * effective[s]).sum::<f64>().sqrt();
        for j in 0..action_dim {
            let acc: f64 = touched.iter().map(|&s| effective[s] * white[(s, j)]).sum();
            values[(t, j)] = acc / norm;
        }
    }
    Ok(NoiseMatrix { values, sigma, seed })
}

/// Execute `u_t = K_t x_t + k_t + L_t eps_t` from `x0`, where `L_t` is the
/// lower Cholesky factor of `C_t` and `eps_t` is row `t` of `noise`.
/// Recorded actions are the ones the environment applied.
pub fn rollout(
    env: &dyn Environment,
    controller: &LinearGaussianController,
    x0: &Vector,
    noise: &NoiseMatrix,
) -> Result<Trajectory> {
    let horizon = controller.horizon();
    if horizon != env.horizon() {
        return invalid(format!(
            "controller horizon {horizon} differs from environment horizon {}",
            env.horizon()
        ));
    }
    if controller.state_dim() != env.state_dim() || controller.action_dim() != env.action_dim() {
        return invalid("controller dimensions differ from the environment");
    }
    if x0.len() != env.state_dim() {
        return invalid("initial state has the wrong dimension");
    }
    if noise.horizon() != horizon || noise.action_dim() != env.action_dim() {
        return invalid("noise matrix shape differs from (T, d_u)");
    }
    let factors = controller.cholesky_factors()?;

    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut x = x0.clone();
    if !all_finite(&x) {
        return Err(Error::Divergence { t: 0 });
    }
    for (t, l) in factors.iter().enumerate() {
        let u = controller.mean_action(t, &x) + l * noise.row(t);
        if !all_finite(&u) {
            return Err(Error::Divergence { t });
        }
        let applied = env.clamp_action(&u);
        let next = env.step(&x, &applied);
        if !all_finite(&next) {
            return Err(Error::Divergence { t: t + 1 });
        }
        states.push(std::mem::replace(&mut x, next));
        actions.push(applied);
    }
    states.push(x);
    Trajectory::new(states, actions)
}

/// Deterministic rollout of the controller's mean law.
pub fn rollout_mean(env: &dyn Environment, controller: &LinearGaussianController, x0: &Vector) -> Result<Trajectory> {
    rollout(env, controller, x0, &NoiseMatrix::zeros(controller.horizon(), controller.action_dim()))
}

/// Sum of the running costs at `t < T` plus the terminal cost at `x_T`;
/// stores the per-step terms on the trajectory.
pub fn trajectory_total_cost(traj: &mut Trajectory, cost: &dyn CostFunction) -> Result<f64> {
    let (dx, du) = cost.dims();
    if traj.state_dim() != dx || traj.action_dim() != du {
        return invalid(format!(
            "cost expects (d_x, d_u) = ({dx}, {du}), trajectory has ({}, {})",
            traj.state_dim(),
            traj.action_dim()
        ));
    }
    let horizon = traj.horizon();
    let mut costs = Vec::with_capacity(horizon + 1);
    for t in 0..horizon {
        costs.push(cost.running(&traj.states[t], &traj.actions[t], t));
    }
    costs.push(cost.terminal(traj.final_state()));
    let total = costs.iter().sum();
    traj.costs = Some(costs);
    Ok(total)
}
