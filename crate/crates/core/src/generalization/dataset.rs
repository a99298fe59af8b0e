//! State-action pairs sampled from local controllers.

use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::linalg::Vector;
use crate::rng::derive_seed;
use crate::trajectory::{generate_smoothed_noise, rollout};

use super::library::LocalPolicyLibrary;
use super::observe::{observe, ObservationSpec};

/// Smoothing width of the exploration noise, in timesteps.
pub const CLONING_NOISE_SIGMA: f64 = 2.0;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CloningDataset {
    pub observations: Vec<Vector>,
    pub actions: Vec<Vector>,
    /// Library entry each pair came from.
    pub sources: Vec<usize>,
    pub timesteps: Vec<usize>,
    /// Rollouts dropped because they diverged.
    pub skipped: usize,
}

impl CloningDataset {
    pub fn from_pairs(observations: Vec<Vector>, actions: Vec<Vector>) -> Result<Self> {
        let n = observations.len();
        let data = Self { observations, actions, sources: vec![0; n], timesteps: (0..n).collect(), skipped: 0 };
        data.check()?;
        Ok(data)
    }

    fn check(&self) -> Result<()> {
        if self.actions.len() != self.observations.len() {
            return invalid("observation and action counts differ");
        }
        if let (Some(o), Some(a)) = (self.observations.first(), self.actions.first()) {
            if self.observations.iter().any(|v| v.len() != o.len()) || self.actions.iter().any(|v| v.len() != a.len()) {
                return invalid("dataset vectors have inconsistent dimensions");
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observation_dim(&self) -> usize {
        self.observations.first().map_or(0, |v| v.len())
    }

    pub fn action_dim(&self) -> usize {
        self.actions.first().map_or(0, |v| v.len())
    }
}

/// Roll out every library controller `samples_per_policy` times from its own
/// initial state with smoothed exploration noise scaled by `noise_scale`
/// (in units of the controller covariance) and record `(observe(x_t), u_t)`.
pub fn generate_cloning_data(
    lib: &LocalPolicyLibrary,
    env: &dyn Environment,
    spec: &ObservationSpec,
    samples_per_policy: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<CloningDataset> {
    if samples_per_policy == 0 {
        return invalid("samples_per_policy must be at least 1");
    }
    if lib.is_empty() {
        return invalid("cannot generate cloning data from an empty library");
    }
    if !(noise_scale >= 0.0) {
        return invalid("noise_scale must be non-negative");
    }
    let mut data = CloningDataset::default();
    let total = lib.len() * samples_per_policy;
    for (i, entry) in lib.entries().iter().enumerate() {
        let c = &entry.controller;
        for j in 0..samples_per_policy {
            let index = (i * samples_per_policy + j) as u64;
            let noise = generate_smoothed_noise(c.horizon(), c.action_dim(), CLONING_NOISE_SIGMA, derive_seed(seed, "cloning", index))?
                .scaled(noise_scale);
            let traj = match rollout(env, c, &entry.initial_state, &noise) {
                Ok(t) => t,
                Err(Error::Divergence { .. }) => {
                    data.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            for t in 0..traj.horizon() {
                data.observations.push(observe(traj.state(t), env, spec)?);
                data.actions.push(traj.action(t).clone());
                data.sources.push(i);
                data.timesteps.push(t);
            }
        }
    }
    if data.skipped * 10 > total {
        return Err(Error::DatasetDiverged { skipped: data.skipped, total });
    }
    Ok(data)
}
