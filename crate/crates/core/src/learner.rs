//! The outer training loop: sample, fit dynamics, expand cost, take a
//! KL-bounded step.

use rand::Rng as _;

use crate::controller::LinearGaussianController;
use crate::cost::{expand_cost, CostFunction};
use crate::dynamics::{default_components, fit_dynamics, fit_gmm, transition_tuples, LinearGaussianDynamics, NiwStrength};
use crate::env::{Demonstration, Environment};
use crate::error::{invalid, Error, Result};
use crate::json::format_f64;
use crate::linalg::{Mat, Vector};
use crate::lqg::{solve_kl_constrained, ConstrainedSolution};
use crate::rng::{derive_seed, seeded};
use crate::trajectory::{generate_smoothed_noise, rollout, trajectory_total_cost, Trajectory};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmSettings {
    /// Mixture size; `None` picks one from the pool size.
    pub components: Option<usize>,
    pub max_iters: usize,
    /// Number of most recent iterations whose rollouts feed the prior.
    pub pool_iterations: usize,
}

impl Default for GmmSettings {
    fn default() -> Self {
        Self { components: None, max_iters: 20, pool_iterations: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub iterations: usize,
    pub rollouts: usize,
    /// Exploration noise smoothing, in timesteps.
    pub noise_sigma: f64,
    /// KL bound per timestep; the trajectory bound is this times `T`.
    pub epsilon_per_step: f64,
    /// Perturb initial states once iterations exceed `robustify_start`.
    pub robustify: bool,
    pub robustify_start: usize,
    /// Half-width of the uniform initial-state noise, as a fraction of the state range.
    pub state_noise: f64,
    pub initial_cov_scale: f64,
    /// Scale of the smoothed noise added to demonstration controls.
    pub demo_noise: f64,
    pub gmm: GmmSettings,
    pub niw: NiwStrength,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            iterations: 15,
            rollouts: 5,
            noise_sigma: 2.0,
            epsilon_per_step: 1.0,
            robustify: false,
            robustify_start: 10,
            state_noise: 0.025,
            initial_cov_scale: 1.0,
            demo_noise: 0.03,
            gmm: GmmSettings::default(),
            niw: NiwStrength::default(),
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self, with_demo: bool) -> Result<()> {
        if self.iterations == 0 {
            return invalid("iterations must be at least 1");
        }
        if self.rollouts < 2 && !(with_demo && self.rollouts == 1) {
            return invalid("at least 2 rollouts per iteration are needed (1 with a demonstration)");
        }
        if !(0.0..=0.5).contains(&self.state_noise) {
            return invalid("state_noise must lie in [0, 0.5]");
        }
        if !(self.epsilon_per_step > 0.0) || !(self.initial_cov_scale > 0.0) || !(self.noise_sigma >= 0.0) {
            return invalid("epsilon_per_step and initial_cov_scale must be positive, noise_sigma non-negative");
        }
        if with_demo && !(self.demo_noise > 0.0) {
            return invalid("demo_noise must be positive");
        }
        if self.gmm.pool_iterations == 0 {
            return invalid("gmm.pool_iterations must be at least 1");
        }
        Ok(())
    }

    /// Whether iteration `i` (1-based) draws perturbed initial states.
    pub fn robust_at(&self, i: usize) -> bool {
        self.robustify && i > self.robustify_start
    }
}

/// `K_t = 0`, `k_t = 0`, `C_t = cov_scale I`.
pub fn init_controller(horizon: usize, state_dim: usize, action_dim: usize, cov_scale: f64) -> Result<LinearGaussianController> {
    LinearGaussianController::zero_mean(horizon, state_dim, action_dim, cov_scale)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    /// Mean total cost of the rollouts sampled this iteration.
    pub mean_cost: f64,
    /// Expected cost of the updated controller under this iteration's model.
    pub model_cost: f64,
    /// Expected cost of the controller that was sampled, under the same model.
    pub prev_model_cost: f64,
    pub kl: f64,
    pub eta: f64,
    pub dual_iters: usize,
    pub stalled: bool,
    pub successes: usize,
    pub robust: bool,
    pub diverged: usize,
    pub regularized_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub const CSV_HEADER: &'static str = "iteration,mean_cost,model_cost,kl,eta,dual_iters,successes";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iteration,
                format_f64(r.mean_cost),
                format_f64(r.model_cost),
                format_f64(r.kl),
                format_f64(r.eta),
                r.dual_iters,
                r.successes
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub controller: LinearGaussianController,
    pub curve: LearningCurve,
    /// Set when training stopped early; the controller is the last good one.
    pub aborted: Option<String>,
    pub stalled_iterations: Vec<usize>,
    /// Rollouts sampled in the final iteration.
    pub last_rollouts: Vec<Trajectory>,
}

/// Open-loop replays of the demonstration controls with smoothed noise.
pub fn bootstrap_from_demo(
    env: &dyn Environment,
    demo: &Demonstration,
    noise_scale: f64,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let traj = &demo.trajectory;
    if traj.horizon() != env.horizon() || traj.state_dim() != env.state_dim() {
        return invalid("demonstration does not match the environment");
    }
    if !(noise_scale >= 0.0) {
        return invalid("noise_scale must be non-negative");
    }
    let replay = LinearGaussianController::open_loop(traj.actions(), env.state_dim(), 1.0)?;
    (0..n)
        .map(|i| {
            let noise = generate_smoothed_noise(env.horizon(), env.action_dim(), sigma, derive_seed(seed, "demo-noise", i as u64))?
                .scaled(noise_scale);
            rollout(env, &replay, traj.state(0), &noise)
        })
        .collect()
}

fn initial_states(env: &dyn Environment, nominal: &Vector, config: &LearnerConfig, iteration: usize) -> Vec<Vector> {
    let range = env.state_range();
    (0..config.rollouts)
        .map(|n| {
            if !config.robust_at(iteration) {
                return nominal.clone();
            }
            let mut rng = seeded(derive_seed(config.seed, "initial-state", (iteration * 1000 + n) as u64));
            Vector::from_fn(nominal.len(), |i, _| {
                let half = config.state_noise * range[i];
                nominal[i] + if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 }
            })
        })
        .collect()
}

/// What one iteration fitted and solved, for inspection by callers.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub dynamics: &'a LinearGaussianDynamics,
    pub previous: &'a LinearGaussianController,
    pub solution: &'a ConstrainedSolution,
    pub x1_mean: &'a Vector,
    pub x1_cov: &'a Mat,
    pub epsilon: f64,
}

/// Runs the configured number of iterations from a zero-mean controller, or
/// from noisy replays of `demo` when one is given.
pub fn train(
    env: &dyn Environment,
    cost: &dyn CostFunction,
    config: &LearnerConfig,
    demo: Option<&Demonstration>,
) -> Result<TrainOutcome> {
    train_observed(env, cost, config, demo, &mut |_| {})
}

/// `train`, calling `observe` after every KL-constrained update.
pub fn train_observed(
    env: &dyn Environment,
    cost: &dyn CostFunction,
    config: &LearnerConfig,
    demo: Option<&Demonstration>,
    observe: &mut dyn FnMut(&IterationView<'_>),
) -> Result<TrainOutcome> {
    config.validate(demo.is_some())?;
    let (dx, du, horizon) = (env.state_dim(), env.action_dim(), env.horizon());
    if cost.dims() != (dx, du) {
        return invalid("cost dimensions differ from the environment");
    }
    let nominal = match demo {
        Some(d) => d.trajectory.state(0).clone(),
        None => env.nominal_state(),
    };
    let mut controller = match demo {
        Some(d) => LinearGaussianController::open_loop(d.trajectory.actions(), dx, config.demo_noise * config.demo_noise)?,
        None => init_controller(horizon, dx, du, config.initial_cov_scale)?,
    };
    let epsilon = config.epsilon_per_step * horizon as f64;
    let mut curve = LearningCurve::default();
    let mut pool: Vec<Vec<Trajectory>> = Vec::new();
    let mut stalled_iterations = Vec::new();
    let mut last_rollouts = Vec::new();

    for iteration in 1..=config.iterations {
        let starts = initial_states(env, &nominal, config, iteration);
        let attempts: Vec<Result<Trajectory>> = match demo {
            Some(d) if iteration == 1 => {
                let seed = derive_seed(config.seed, "bootstrap", 0);
                match bootstrap_from_demo(env, d, config.demo_noise, config.rollouts, config.noise_sigma, seed) {
                    Ok(v) => v.into_iter().map(Ok).collect(),
                    Err(e) => vec![Err(e)],
                }
            }
            _ => starts
                .iter()
                .enumerate()
                .map(|(n, x0)| {
                    let seed = derive_seed(config.seed, "exploration", (iteration * 1000 + n) as u64);
                    let noise = generate_smoothed_noise(horizon, du, config.noise_sigma, seed)?;
                    rollout(env, &controller, x0, &noise)
                })
                .collect(),
        };
        let mut rollouts = Vec::new();
        let mut diverged = 0;
        for a in attempts {
            match a {
                Ok(t) => rollouts.push(t),
                Err(Error::Divergence { .. }) => diverged += 1,
                Err(e) => return Err(e),
            }
        }
        if rollouts.is_empty() {
            return Ok(TrainOutcome {
                controller,
                curve,
                aborted: Some(format!("all rollouts diverged at iteration {iteration}")),
                stalled_iterations,
                last_rollouts,
            });
        }
        let mut costs = Vec::with_capacity(rollouts.len());
        for r in rollouts.iter_mut() {
            costs.push(trajectory_total_cost(r, cost)?);
        }
        let successes = rollouts.iter().filter(|r| env.is_success(r)).count();

        pool.push(rollouts.clone());
        if pool.len() > config.gmm.pool_iterations {
            pool.remove(0);
        }
        let pooled: Vec<Trajectory> = pool.iter().flatten().cloned().collect();
        let tuples = transition_tuples(&pooled);
        let k = config.gmm.components.unwrap_or_else(|| default_components(tuples.len())).min(tuples.len());
        let prior = fit_gmm(&tuples, k, derive_seed(config.seed, "gmm", iteration as u64), config.gmm.max_iters)?;
        let dynamics = fit_dynamics(&rollouts, Some(&prior), config.niw)?;
        let expansion = expand_cost(cost, &rollouts)?;

        let (x1_mean, x1_cov) = if config.robust_at(iteration) {
            let range = env.state_range();
            let var = range.map(|r| (config.state_noise * r).powi(2) / 3.0);
            (nominal.clone(), Mat::from_diagonal(&var))
        } else {
            (nominal.clone(), Mat::zeros(dx, dx))
        };
        let solution = solve_kl_constrained(&dynamics, &expansion, &controller, epsilon, &x1_mean, &x1_cov)?;
        if solution.dual.stalled {
            stalled_iterations.push(iteration);
        }
        curve.rows.push(CurveRow {
            iteration,
            mean_cost: costs.iter().sum::<f64>() / costs.len() as f64,
            model_cost: solution.expected_cost,
            prev_model_cost: solution.prev_expected_cost,
            kl: solution.dual.kl,
            eta: solution.dual.eta,
            dual_iters: solution.dual.iterations,
            stalled: solution.dual.stalled,
            successes,
            robust: config.robust_at(iteration),
            diverged,
            regularized_steps: solution.dual.regularized_steps,
        });
        observe(&IterationView {
            iteration,
            dynamics: &dynamics,
            previous: &controller,
            solution: &solution,
            x1_mean: &x1_mean,
            x1_cov: &x1_cov,
            epsilon,
        });
        controller = solution.controller;
        last_rollouts = rollouts;
    }
    Ok(TrainOutcome { controller, curve, aborted: None, stalled_iterations, last_rollouts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::pose_cost;
    use crate::env::{canonical_pickup_plan, generate_demo, linear_env, pickup_env, LinearEnvConfig};

    fn short(iterations: usize, seed: u64) -> LearnerConfig {
        LearnerConfig { iterations, seed, ..Default::default() }
    }

    #[test]
    fn validation_rejects_bad_settings() {
        assert!(LearnerConfig { iterations: 0, ..Default::default() }.validate(false).is_err());
        assert!(LearnerConfig { rollouts: 1, ..Default::default() }.validate(false).is_err());
        assert!(LearnerConfig { rollouts: 1, ..Default::default() }.validate(true).is_ok());
        assert!(LearnerConfig { state_noise: 0.6, ..Default::default() }.validate(false).is_err());
        assert!(LearnerConfig { epsilon_per_step: 0.0, ..Default::default() }.validate(false).is_err());
    }

    #[test]
    fn robustification_starts_after_the_configured_iteration() {
        let c = LearnerConfig { robustify: true, robustify_start: 10, ..Default::default() };
        assert!(!c.robust_at(10));
        assert!(c.robust_at(11));
        let naive = LearnerConfig { robustify: true, robustify_start: 0, ..Default::default() };
        assert!(naive.robust_at(1));
        assert!(!LearnerConfig::default().robust_at(15));
    }

    #[test]
    fn curve_has_one_row_per_iteration_and_is_reproducible() {
        let env = linear_env(LinearEnvConfig::default());
        let cost = pose_cost(&env, &Vector::zeros(2)).unwrap();
        let a = train(&env, &cost, &short(3, 7), None).unwrap();
        let b = train(&env, &cost, &short(3, 7), None).unwrap();
        assert_eq!(a.curve.rows.len(), 3);
        assert_eq!(a.curve.to_csv(), b.curve.to_csv());
        assert_eq!(a.controller, b.controller);
        assert_eq!(a.last_rollouts.len(), 5);
        assert!(a.aborted.is_none());
        assert!(a.curve.rows[2].mean_cost < a.curve.rows[0].mean_cost);
        let c = train(&env, &cost, &short(3, 8), None).unwrap();
        assert_ne!(a.curve.to_csv(), c.curve.to_csv());
    }

    #[test]
    fn csv_header_and_row_format() {
        let env = linear_env(LinearEnvConfig::default());
        let cost = pose_cost(&env, &Vector::zeros(2)).unwrap();
        let out = train(&env, &cost, &short(1, 0), None).unwrap();
        let csv = out.curve.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(LearningCurve::CSV_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn mismatched_cost_is_rejected() {
        let env = linear_env(LinearEnvConfig::default());
        let lag = linear_env(LinearEnvConfig { lag: true, ..Default::default() });
        let cost = pose_cost(&lag, &Vector::zeros(2)).unwrap();
        assert!(matches!(train(&env, &cost, &short(1, 0), None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn noiseless_demo_replays_reproduce_the_demo() {
        let env = pickup_env();
        let demo = generate_demo(&env, &canonical_pickup_plan(&env, 0.0), 0).unwrap();
        let replays = bootstrap_from_demo(&env, &demo, 0.0, 2, 2.0, 1).unwrap();
        for r in &replays {
            assert!((r.final_state() - demo.trajectory.final_state()).amax() < 1e-12);
        }
        let noisy = bootstrap_from_demo(&env, &demo, 0.1, 2, 2.0, 1).unwrap();
        assert_ne!(noisy[0].actions(), noisy[1].actions());
    }
}
