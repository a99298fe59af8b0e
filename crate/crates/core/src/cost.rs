//! Task costs and their local quadratic expansions.
//!
//! Running costs are evaluated on `(x_t, u_t)` for `t < T`; the terminal cost
//! is a function of `x_T` only.

use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::linalg::{clamp_eigenvalues, symmetrize, vstack, Mat, Vector};
use crate::trajectory::Trajectory;

/// `l(z) ~ 1/2 z^T H z + z^T g + c` in absolute coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticExpansion {
    pub hessian: Mat,
    pub gradient: Vector,
    pub constant: f64,
}

impl QuadraticExpansion {
    pub fn zeros(dim: usize) -> Self {
        Self { hessian: Mat::zeros(dim, dim), gradient: Vector::zeros(dim), constant: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn eval(&self, z: &Vector) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + z.dot(&self.gradient) + self.constant
    }

    /// Re-centre a local expansion `l(z0) + grad^T dz + 1/2 dz^T H dz` at the origin.
    pub fn from_local(value: f64, grad: &Vector, hessian: Mat, z0: &Vector) -> Self {
        let hz = &hessian * z0;
        Self {
            gradient: grad - &hz,
            constant: value - grad.dot(z0) + 0.5 * z0.dot(&hz),
            hessian,
        }
    }

    fn accumulate(&mut self, other: &Self, weight: f64) {
        self.hessian += &other.hessian * weight;
        self.gradient += &other.gradient * weight;
        self.constant += other.constant * weight;
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self.gradient.iter().all(|v| v.is_finite())
            && self.hessian.iter().all(|v| v.is_finite())
    }
}

pub trait CostFunction: Send + Sync {
    /// `(d_x, d_u)`.
    fn dims(&self) -> (usize, usize);
    fn running(&self, x: &Vector, u: &Vector, t: usize) -> f64;
    fn terminal(&self, x: &Vector) -> f64;

    /// Exact expansion of the running cost when it is quadratic in `(x, u)`.
    fn exact_running(&self, _t: usize) -> Option<QuadraticExpansion> {
        None
    }

    /// Exact expansion of the terminal cost when it is quadratic in `x`.
    fn exact_terminal(&self) -> Option<QuadraticExpansion> {
        None
    }
}

#[derive(Clone, Debug)]
enum Selector {
    State(Vec<usize>),
    Action,
}

#[derive(Clone, Debug)]
enum Target {
    Constant(Vector),
    /// One target per state index `0..=T`.
    PerStep(Vec<Vector>),
}

#[derive(Clone, Debug)]
struct Term {
    selector: Selector,
    target: Target,
    running_weight: f64,
    terminal_weight: f64,
}

impl Term {
    fn target(&self, t: usize) -> &Vector {
        match &self.target {
            Target::Constant(v) => v,
            Target::PerStep(v) => &v[t.min(v.len() - 1)],
        }
    }

    fn error_sq(&self, x: &Vector, u: Option<&Vector>, t: usize) -> f64 {
        let target = self.target(t);
        match (&self.selector, u) {
            (Selector::State(idx), _) => idx.iter().zip(target.iter()).map(|(&i, g)| (x[i] - g).powi(2)).sum(),
            (Selector::Action, Some(u)) => u.iter().zip(target.iter()).map(|(a, g)| (a - g).powi(2)).sum(),
            (Selector::Action, None) => 0.0,
        }
    }
}

/// Sum of weighted squared errors of selected state components and actions.
/// Every cost built here is exactly quadratic.
#[derive(Clone, Debug)]
pub struct TaskCost {
    state_dim: usize,
    action_dim: usize,
    terms: Vec<Term>,
}

impl TaskCost {
    fn new(env: &dyn Environment) -> Self {
        Self { state_dim: env.state_dim(), action_dim: env.action_dim(), terms: Vec::new() }
    }

    fn state_term(mut self, idx: Vec<usize>, target: Target, running: f64, terminal: f64) -> Self {
        self.terms.push(Term { selector: Selector::State(idx), target, running_weight: running, terminal_weight: terminal });
        self
    }

    fn action_term(mut self, weight: f64) -> Self {
        let target = Target::Constant(Vector::zeros(self.action_dim));
        self.terms.push(Term { selector: Selector::Action, target, running_weight: weight, terminal_weight: 0.0 });
        self
    }

    fn expansion(&self, t: usize, terminal: bool) -> QuadraticExpansion {
        let dx = self.state_dim;
        let dim = if terminal { dx } else { dx + self.action_dim };
        let mut out = QuadraticExpansion::zeros(dim);
        for term in &self.terms {
            let w = if terminal { term.terminal_weight } else { term.running_weight };
            if w == 0.0 {
                continue;
            }
            let target = term.target(t);
            let indices: Vec<usize> = match &term.selector {
                Selector::State(idx) => idx.clone(),
                Selector::Action if terminal => continue,
                Selector::Action => (dx..dx + self.action_dim).collect(),
            };
            for (&i, g) in indices.iter().zip(target.iter()) {
                out.hessian[(i, i)] += 2.0 * w;
                out.gradient[i] -= 2.0 * w * g;
                out.constant += w * g * g;
            }
        }
        out
    }
}

impl CostFunction for TaskCost {
    fn dims(&self) -> (usize, usize) {
        (self.state_dim, self.action_dim)
    }

    fn running(&self, x: &Vector, u: &Vector, t: usize) -> f64 {
        self.terms.iter().map(|term| term.running_weight * term.error_sq(x, Some(u), t)).sum()
    }

    fn terminal(&self, x: &Vector) -> f64 {
        let t = self.final_index();
        self.terms.iter().map(|term| term.terminal_weight * term.error_sq(x, None, t)).sum()
    }

    fn exact_running(&self, t: usize) -> Option<QuadraticExpansion> {
        Some(self.expansion(t, false))
    }

    fn exact_terminal(&self) -> Option<QuadraticExpansion> {
        Some(self.expansion(self.final_index(), true))
    }
}

impl TaskCost {
    fn final_index(&self) -> usize {
        self.terms
            .iter()
            .filter_map(|term| match &term.target {
                Target::PerStep(v) => Some(v.len() - 1),
                Target::Constant(_) => None,
            })
            .max()
            .unwrap_or(usize::MAX)
    }
}

fn range_indices(r: &std::ops::Range<usize>) -> Vec<usize> {
    r.clone().collect()
}

fn check_len(what: &str, v: &Vector, n: usize) -> Result<()> {
    if v.len() != n {
        return invalid(format!("{what} has dimension {}, expected {n}", v.len()));
    }
    Ok(())
}

/// Running `|q - q*|^2 + 0.001 |u|^2`; terminal `10 |q - q*|^2`.
pub fn pose_cost(env: &dyn Environment, q_target: &Vector) -> Result<TaskCost> {
    let q = range_indices(&env.layout().q);
    check_len("pose target", q_target, q.len())?;
    Ok(TaskCost::new(env)
        .state_term(q, Target::Constant(q_target.clone()), 1.0, 10.0)
        .action_term(0.001))
}

/// Running `0.01|q - q*|^2 + 0.001|u|^2 + |q_pos - q_pos*|^2 + 10|q_rot - q_rot*|^2`;
/// terminal is twice the running cost without the control term.
pub fn manipulation_cost(
    env: &dyn Environment,
    q_target: &Vector,
    pos_target: &Vector,
    rot_target: &Vector,
) -> Result<TaskCost> {
    let layout = env.layout();
    let (Some(pos), Some(rot)) = (&layout.obj_pos, &layout.obj_rot) else {
        return invalid("manipulation cost needs an environment with object position and rotation");
    };
    let q = range_indices(&layout.q);
    check_len("joint target", q_target, q.len())?;
    check_len("object position target", pos_target, pos.len())?;
    check_len("object rotation target", rot_target, rot.len())?;
    Ok(TaskCost::new(env)
        .state_term(q, Target::Constant(q_target.clone()), 0.01, 0.02)
        .action_term(0.001)
        .state_term(range_indices(pos), Target::Constant(pos_target.clone()), 1.0, 2.0)
        .state_term(range_indices(rot), Target::Constant(rot_target.clone()), 10.0, 20.0))
}

/// `|q_t - q_demo_t|^2 + 0.1|u|^2 + 50 (z - lift_height)^2`, with the same
/// expression (minus the control term) at the terminal step.
pub fn imitation_cost(env: &dyn Environment, demo: &Trajectory, lift_height: f64) -> Result<TaskCost> {
    if demo.horizon() != env.horizon() {
        return invalid(format!(
            "demonstration horizon {} differs from environment horizon {}",
            demo.horizon(),
            env.horizon()
        ));
    }
    let layout = env.layout();
    let Some(height) = layout.height_index() else {
        return invalid("imitation cost needs an environment with an object height");
    };
    let q = range_indices(&layout.q);
    let reference = demo
        .states()
        .iter()
        .map(|s| Vector::from_iterator(q.len(), q.iter().map(|&i| s[i])))
        .collect();
    Ok(TaskCost::new(env)
        .state_term(q, Target::PerStep(reference), 1.0, 1.0)
        .action_term(0.1)
        .state_term(vec![height], Target::Constant(Vector::from_element(1, lift_height)), 50.0, 50.0))
}

/// Weights of the weighted pickup cost
/// `a1|q - q*|^2 + a2|u|^2 + a3|q_pos - q_pos*|^2 + a4|q_rot - q_rot*|^2`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PickupWeights {
    pub joint: f64,
    pub control: f64,
    pub position: f64,
    pub rotation: f64,
}

/// Weighted pickup cost with caller-supplied weights; the terminal step uses
/// the same state weights.
pub fn weighted_pickup_cost(
    env: &dyn Environment,
    weights: PickupWeights,
    q_target: &Vector,
    pos_target: &Vector,
    rot_target: &Vector,
) -> Result<TaskCost> {
    let layout = env.layout();
    let (Some(pos), Some(rot)) = (&layout.obj_pos, &layout.obj_rot) else {
        return invalid("pickup cost needs an environment with object position and rotation");
    };
    let q = range_indices(&layout.q);
    check_len("joint target", q_target, q.len())?;
    check_len("object position target", pos_target, pos.len())?;
    check_len("object rotation target", rot_target, rot.len())?;
    Ok(TaskCost::new(env)
        .state_term(q, Target::Constant(q_target.clone()), weights.joint, weights.joint)
        .action_term(weights.control)
        .state_term(range_indices(pos), Target::Constant(pos_target.clone()), weights.position, weights.position)
        .state_term(range_indices(rot), Target::Constant(rot_target.clone()), weights.rotation, weights.rotation))
}

/// Averaged quadratic cost model along a horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct CostExpansion {
    /// `T` expansions over `[x; u]`.
    pub running: Vec<QuadraticExpansion>,
    /// Expansion over `x_T`.
    pub terminal: QuadraticExpansion,
    /// Timesteps at which the action-action block had to be raised.
    pub clamp_activations: usize,
}

impl CostExpansion {
    pub fn horizon(&self) -> usize {
        self.running.len()
    }
}

pub const ACTION_HESSIAN_FLOOR: f64 = 1e-6;
const GRADIENT_STEP: f64 = 1e-5;
const HESSIAN_STEP: f64 = 1e-4;

/// Central finite-difference expansion of `f` at `z0`.
pub fn finite_difference_expansion(f: &dyn Fn(&Vector) -> f64, z0: &Vector) -> QuadraticExpansion {
    let n = z0.len();
    let f0 = f(z0);
    let shifted = |steps: &[(usize, f64)]| {
        let mut z = z0.clone();
        for &(i, h) in steps {
            z[i] += h;
        }
        f(&z)
    };
    let step = |base: f64, i: usize| base * z0[i].abs().max(1.0);

    let grad = Vector::from_fn(n, |i, _| {
        let h = step(GRADIENT_STEP, i);
        (shifted(&[(i, h)]) - shifted(&[(i, -h)])) / (2.0 * h)
    });
    let mut hess = Mat::zeros(n, n);
    for i in 0..n {
        let hi = step(HESSIAN_STEP, i);
        hess[(i, i)] = (shifted(&[(i, hi)]) - 2.0 * f0 + shifted(&[(i, -hi)])) / (hi * hi);
        for j in 0..i {
            let hj = step(HESSIAN_STEP, j);
            let v = (shifted(&[(i, hi), (j, hj)]) - shifted(&[(i, hi), (j, -hj)]) - shifted(&[(i, -hi), (j, hj)])
                + shifted(&[(i, -hi), (j, -hj)]))
                / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    QuadraticExpansion::from_local(f0, &grad, hess, z0)
}

/// Finite-difference expansion of the running cost at `(x, u)`.
pub fn numeric_running_expansion(cost: &dyn CostFunction, x: &Vector, u: &Vector, t: usize) -> QuadraticExpansion {
    let dx = x.len();
    let du = u.len();
    let f = |z: &Vector| cost.running(&z.rows(0, dx).into_owned(), &z.rows(dx, du).into_owned(), t);
    finite_difference_expansion(&f, &vstack(x, u))
}

pub fn numeric_terminal_expansion(cost: &dyn CostFunction, x: &Vector) -> QuadraticExpansion {
    finite_difference_expansion(&|z: &Vector| cost.terminal(z), x)
}

/// Average per-sample second-order expansions over the rollouts, using the
/// exact expansion when the cost provides one and central differences
/// otherwise. Hessians are symmetrized and the action block is floored.
pub fn expand_cost(cost: &dyn CostFunction, rollouts: &[Trajectory]) -> Result<CostExpansion> {
    let Some(first) = rollouts.first() else {
        return invalid("cost expansion needs at least one rollout");
    };
    let (dx, du) = cost.dims();
    let horizon = first.horizon();
    for r in rollouts {
        if r.horizon() != horizon || r.state_dim() != dx || r.action_dim() != du {
            return invalid("rollouts differ in horizon or dimensions from the cost");
        }
    }
    let weight = 1.0 / rollouts.len() as f64;

    let mut running = Vec::with_capacity(horizon);
    let mut clamp_activations = 0;
    for t in 0..horizon {
        let mut avg = QuadraticExpansion::zeros(dx + du);
        let exact = cost.exact_running(t);
        for (r, traj) in rollouts.iter().enumerate() {
            let e = match &exact {
                Some(e) => e.clone(),
                None => numeric_running_expansion(cost, traj.state(t), traj.action(t), t),
            };
            if !e.is_finite() {
                return Err(Error::NonFiniteExpansion { rollout: r, t });
            }
            avg.accumulate(&e, weight);
        }
        avg.hessian = symmetrize(&avg.hessian);
        let uu = avg.hessian.view((dx, dx), (du, du)).into_owned();
        let (floored, hit) = clamp_eigenvalues(&uu, ACTION_HESSIAN_FLOOR);
        if hit {
            clamp_activations += 1;
            avg.hessian.view_mut((dx, dx), (du, du)).copy_from(&floored);
        }
        running.push(avg);
    }

    let mut terminal = QuadraticExpansion::zeros(dx);
    let exact = cost.exact_terminal();
    for (r, traj) in rollouts.iter().enumerate() {
        let e = match &exact {
            Some(e) => e.clone(),
            None => numeric_terminal_expansion(cost, traj.final_state()),
        };
        if !e.is_finite() {
            return Err(Error::NonFiniteExpansion { rollout: r, t: horizon });
        }
        terminal.accumulate(&e, weight);
    }
    terminal.hessian = symmetrize(&terminal.hessian);
    Ok(CostExpansion { running, terminal, clamp_activations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{linear_env, pickup_env, LinearEnvConfig};
    use crate::rng::seeded;
    use rand::Rng;

    fn random_vec(n: usize, rng: &mut crate::rng::Rng) -> Vector {
        Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_exact(cost: &TaskCost, horizon: usize) {
        let (dx, du) = cost.dims();
        let mut rng = seeded(11);
        for t in [0, horizon / 2, horizon - 1] {
            let e = cost.exact_running(t).unwrap();
            for _ in 0..5 {
                let (x, u) = (random_vec(dx, &mut rng), random_vec(du, &mut rng));
                let direct = cost.running(&x, &u, t);
                assert!((e.eval(&vstack(&x, &u)) - direct).abs() < 1e-10 * direct.abs().max(1.0));
            }
        }
        let e = cost.exact_terminal().unwrap();
        let x = random_vec(dx, &mut rng);
        assert!((e.eval(&x) - cost.terminal(&x)).abs() < 1e-10);
    }

    #[test]
    fn pose_cost_values() {
        let env = linear_env(LinearEnvConfig::default());
        let cost = pose_cost(&env, &Vector::zeros(2)).unwrap();
        let x = Vector::from_vec(vec![1.0, 2.0, 5.0, 5.0]);
        let u = Vector::from_vec(vec![10.0, 0.0]);
        assert!((cost.running(&x, &u, 0) - (5.0 + 0.1)).abs() < 1e-12);
        assert!((cost.terminal(&x) - 50.0).abs() < 1e-12);
        assert_exact(&cost, env.horizon());
    }

    #[test]
    fn manipulation_terminal_is_twice_running_without_control() {
        let env = pickup_env();
        let cost = manipulation_cost(&env, &Vector::zeros(3), &Vector::from_vec(vec![0.0, 0.12]), &Vector::zeros(1)).unwrap();
        let mut rng = seeded(3);
        let x = random_vec(env.state_dim(), &mut rng);
        let zero = Vector::zeros(env.action_dim());
        assert!((cost.terminal(&x) - 2.0 * cost.running(&x, &zero, 0)).abs() < 1e-12);
        assert_exact(&cost, env.horizon());
    }

    #[test]
    fn imitation_cost_follows_the_demo_per_step() {
        let env = pickup_env();
        let t = env.horizon();
        let states: Vec<Vector> = (0..=t).map(|k| Vector::from_element(env.state_dim(), k as f64 * 0.01)).collect();
        let actions = vec![Vector::zeros(3); t];
        let demo = Trajectory::new(states.clone(), actions).unwrap();
        let cost = imitation_cost(&env, &demo, 0.12).unwrap();
        let mut on_demo = states[7].clone();
        on_demo[env.layout().height_index().unwrap()] = 0.12;
        assert!(cost.running(&on_demo, &Vector::zeros(3), 7).abs() < 1e-12);
        on_demo[0] += 0.5;
        assert!((cost.running(&on_demo, &Vector::zeros(3), 7) - 0.25).abs() < 1e-12);
        assert!((cost.running(&on_demo, &Vector::zeros(3), 8) - (0.49f64.powi(2) + 2e-4)).abs() < 1e-12);
        assert_exact(&cost, t);
    }

    #[test]
    fn imitation_cost_rejects_horizon_mismatch() {
        let env = pickup_env();
        let demo = Trajectory::new(vec![env.nominal_state(); 3], vec![Vector::zeros(3); 2]).unwrap();
        assert!(matches!(imitation_cost(&env, &demo, 0.12), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn exact_and_numeric_expansions_agree() {
        let env = pickup_env();
        let w = PickupWeights { joint: 0.5, control: 0.2, position: 1.0, rotation: 3.0 };
        let cost = weighted_pickup_cost(&env, w, &Vector::zeros(3), &Vector::from_vec(vec![0.1, 0.12]), &Vector::zeros(1)).unwrap();
        let mut rng = seeded(5);
        let x = random_vec(env.state_dim(), &mut rng);
        let u = random_vec(3, &mut rng);
        let exact = cost.exact_running(4).unwrap();
        let numeric = numeric_running_expansion(&cost, &x, &u, 4);
        assert!((&exact.hessian - &numeric.hessian).amax() < 1e-5);
        assert!((&exact.gradient - &numeric.gradient).amax() < 1e-6);
        assert!((exact.constant - numeric.constant).abs() < 1e-6);
    }

    #[test]
    fn zero_control_weight_triggers_the_action_floor() {
        let env = pickup_env();
        let w = PickupWeights { joint: 1.0, control: 0.0, position: 1.0, rotation: 1.0 };
        let cost = weighted_pickup_cost(&env, w, &Vector::zeros(3), &Vector::zeros(2), &Vector::zeros(1)).unwrap();
        let t = env.horizon();
        let traj = Trajectory::new(vec![env.nominal_state(); t + 1], vec![Vector::zeros(3); t]).unwrap();
        let e = expand_cost(&cost, &[traj]).unwrap();
        assert_eq!(e.clamp_activations, t);
        let dx = env.state_dim();
        let uu = e.running[0].hessian.view((dx, dx), (3, 3)).into_owned();
        assert!((uu - Mat::identity(3, 3) * ACTION_HESSIAN_FLOOR).amax() < 1e-15);
    }

    #[test]
    fn expansion_averages_over_rollouts() {
        struct Quartic;
        impl CostFunction for Quartic {
            fn dims(&self) -> (usize, usize) {
                (1, 1)
            }
            fn running(&self, x: &Vector, u: &Vector, _t: usize) -> f64 {
                x[0].powi(4) + u[0] * u[0]
            }
            fn terminal(&self, x: &Vector) -> f64 {
                x[0].powi(4)
            }
        }
        let at = |v: f64| Trajectory::new(vec![Vector::from_element(1, v); 2], vec![Vector::zeros(1)]).unwrap();
        let e = expand_cost(&Quartic, &[at(1.0), at(-1.0)]).unwrap();
        // Hessian 12 x^2 at both points; gradients 4 x^3 cancel.
        assert!((e.terminal.hessian[(0, 0)] - 12.0).abs() < 1e-4);
        assert!(e.terminal.gradient[0].abs() < 1e-6);
    }
}
