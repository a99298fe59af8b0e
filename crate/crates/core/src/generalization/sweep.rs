//! Success-rate sweeps over randomized task conditions.

use rand::Rng;

use crate::controller::LinearGaussianController;
use crate::cost::CostFunction;
use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::json::format_f64;
use crate::linalg::{all_finite, Vector};
use crate::rng::{derive_seed, seeded};
use crate::trajectory::{generate_smoothed_noise, rollout, trajectory_total_cost, NoiseMatrix, Trajectory};

use super::library::LocalPolicyLibrary;
use super::mlp::{mlp_act, MlpPolicy};
use super::observe::{observe, ObservationSpec};

pub const SWEEP_NOISE_SIGMA: f64 = 2.0;

#[derive(Clone, Copy, Debug)]
pub enum SweepPolicy<'a> {
    /// Controller chosen once from the initial condition key.
    Nearest(&'a LocalPolicyLibrary),
    Mlp { policy: &'a MlpPolicy, spec: &'a ObservationSpec },
    Single(&'a LinearGaussianController),
}

/// A condition key with a uniform jitter box; every trial draws its key from
/// `key +- jitter`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCondition {
    pub key: Vector,
    pub jitter: Vector,
}

/// Initial hand state used in trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// The environment's nominal state for the trial key.
    #[default]
    Nominal,
    /// Non-object components copied from the nearest library entry's initial state.
    NearestEntry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub trials_per_condition: usize,
    /// Scale of smoothed action noise (controller-covariance units for local
    /// controllers, absolute for networks); 0 executes the mean law.
    pub action_noise: f64,
    pub seed: u64,
    pub reset: ResetMode,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { trials_per_condition: 100, action_noise: 0.0, seed: 0, reset: ResetMode::Nominal }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub condition: usize,
    pub trial: usize,
    pub key: Vector,
    pub success: bool,
    /// Infinite when the rollout diverged.
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub conditions: usize,
    pub trials_per_condition: usize,
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn successes(&self) -> usize {
        self.records.iter().filter(|r| r.success).count()
    }

    pub fn overall_rate(&self) -> f64 {
        self.successes() as f64 / self.records.len().max(1) as f64
    }

    pub fn condition_rates(&self) -> Vec<f64> {
        (0..self.conditions)
            .map(|c| {
                let hits = self.records.iter().filter(|r| r.condition == c && r.success).count();
                hits as f64 / self.trials_per_condition.max(1) as f64
            })
            .collect()
    }

    /// `condition,trial,success,cost`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("condition,trial,success,cost\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{},{}\n", r.condition, r.trial, r.success as u8, format_f64(r.cost)));
        }
        s
    }
}

/// Run `policy` from the initial state of the environment's condition at
/// each trial key.
pub fn rollout_mlp(
    env: &dyn Environment,
    policy: &MlpPolicy,
    spec: &ObservationSpec,
    x0: &Vector,
    noise: Option<&NoiseMatrix>,
) -> Result<Trajectory> {
    let horizon = env.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut x = x0.clone();
    for t in 0..horizon {
        let mut u = mlp_act(policy, &observe(&x, env, spec)?)?;
        if let Some(n) = noise {
            u += n.row(t);
        }
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

pub fn evaluate_sweep(
    policy: SweepPolicy<'_>,
    env: &dyn Environment,
    cost: &dyn CostFunction,
    conditions: &[SweepCondition],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    let library = match policy {
        SweepPolicy::Nearest(lib) => Some(lib),
        _ => None,
    };
    if settings.reset == ResetMode::NearestEntry && library.is_none() {
        return invalid("nearest-entry reset needs a library policy");
    }
    let (du, horizon) = (env.action_dim(), env.horizon());
    let object = env.layout().object_indices();
    let mut records = Vec::with_capacity(conditions.len() * settings.trials_per_condition);
    for (c, cond) in conditions.iter().enumerate() {
        if cond.jitter.len() != cond.key.len() {
            return invalid(format!("condition {c} jitter and key dimensions differ"));
        }
        for trial in 0..settings.trials_per_condition {
            let index = (c * settings.trials_per_condition + trial) as u64;
            let mut rng = seeded(derive_seed(settings.seed, "sweep-key", index));
            let key = Vector::from_fn(cond.key.len(), |i, _| {
                let j = cond.jitter[i];
                cond.key[i] + if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 }
            });
            let Some(mut x0) = env.state_for_condition(&key) else {
                return invalid(format!("environment {} has no conditions", env.name()));
            };
            let noise = generate_smoothed_noise(horizon, du, SWEEP_NOISE_SIGMA, derive_seed(settings.seed, "sweep-noise", index))?
                .scaled(settings.action_noise);
            let nearest = library.map(|lib| lib.nearest_index(&key)).transpose()?;
            if let (ResetMode::NearestEntry, Some(lib), Some(i)) = (settings.reset, library, nearest) {
                let init = &lib.entry(i).initial_state;
                for k in (0..x0.len()).filter(|k| !object.contains(k)) {
                    x0[k] = init[k];
                }
            }
            let result = match policy {
                SweepPolicy::Nearest(lib) => rollout(env, &lib.entry(nearest.expect("library policy")).controller, &x0, &noise),
                SweepPolicy::Single(ctrl) => rollout(env, ctrl, &x0, &noise),
                SweepPolicy::Mlp { policy, spec } => rollout_mlp(env, policy, spec, &x0, Some(&noise)),
            };
            let (success, cost) = match result {
                Ok(mut traj) => (env.is_success(&traj), trajectory_total_cost(&mut traj, cost)?),
                Err(Error::Divergence { .. }) => (false, f64::INFINITY),
                Err(e) => return Err(e),
            };
            records.push(TrialRecord { condition: c, trial, key, success, cost });
        }
    }
    Ok(SweepResult { conditions: conditions.len(), trials_per_condition: settings.trials_per_condition, records })
}

/// `n` conditions evenly covering `[lo, hi]` in one key dimension, each
/// jittered over its own cell.
pub fn uniform_conditions(lo: f64, hi: f64, n: usize) -> Vec<SweepCondition> {
    let width = (hi - lo) / n.max(1) as f64;
    (0..n)
        .map(|i| SweepCondition {
            key: Vector::from_element(1, lo + width * (i as f64 + 0.5)),
            jitter: Vector::from_element(1, 0.5 * width),
        })
        .collect()
}
