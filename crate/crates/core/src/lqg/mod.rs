//! Linear-quadratic-Gaussian machinery: backward pass, forward moments, KL and
//! the trust-region update.

mod backward;
mod dual;
mod forward;

pub use backward::{backward_pass, neg_log_policy_expansion, BackwardResult, ValueFunction};
pub use dual::{solve_kl_constrained, ConstrainedSolution, DualState, ETA_MAX, ETA_MIN};
pub use forward::{expected_cost, forward_pass, kl_trajectory, TrajectoryDistribution};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::LinearGaussianController;
    use crate::cost::{expand_cost, pose_cost, CostExpansion};
    use crate::dynamics::LinearGaussianDynamics;
    use crate::env::{linear_env, Environment, LinearEnv, LinearEnvConfig};
    use crate::linalg::{Mat, Vector};
    use crate::oracle::solve_riccati;
    use crate::trajectory::Trajectory;

    fn setup(lag: bool) -> (LinearEnv, LinearGaussianDynamics, CostExpansion) {
        let env = linear_env(LinearEnvConfig { lag, ..Default::default() });
        let (t, dx) = (env.horizon(), env.state_dim());
        let m = env.oracle_model();
        let dynamics = LinearGaussianDynamics::time_invariant(&m.a, &m.b, &m.c, &Mat::zeros(dx, dx), t);
        let cost = pose_cost(&env, &Vector::zeros(2)).unwrap();
        let probe = Trajectory::new(vec![env.nominal_state(); t + 1], vec![Vector::zeros(2); t]).unwrap();
        let expansion = expand_cost(&cost, &[probe]).unwrap();
        (env, dynamics, expansion)
    }

    #[test]
    fn unconstrained_backward_pass_matches_riccati() {
        for lag in [false, true] {
            let (env, dynamics, expansion) = setup(lag);
            let riccati = solve_riccati(env.oracle_model(), &expansion).unwrap();
            let result = backward_pass(&dynamics, &expansion, None, 1.0).unwrap();
            for t in 0..env.horizon() {
                assert!((result.controller.gain(t) - &riccati.gains[t]).amax() < 1e-9);
                assert!((result.controller.offset(t) - &riccati.offsets[t]).amax() < 1e-9);
            }
            let x0 = env.nominal_state();
            let v = result.values[0].eval(&x0);
            assert!((v - riccati.value(0, &x0)).abs() < 1e-9 * v.abs());
        }
    }

    #[test]
    fn mean_law_without_prior_is_independent_of_eta() {
        let (_, dynamics, expansion) = setup(false);
        let a = backward_pass(&dynamics, &expansion, None, 1.0).unwrap();
        let b = backward_pass(&dynamics, &expansion, None, 1e3).unwrap();
        assert!(a.controller.mean_law_distance(&b.controller) < 1e-9);
        // Covariance is (Q_uu / eta)^{-1}, so it scales with eta.
        assert!((b.controller.covariance(3) - a.controller.covariance(3) * 1e3).amax() < 1e-9 * b.controller.covariance(3).amax());
    }

    #[test]
    fn forward_pass_without_noise_is_the_deterministic_rollout() {
        let (env, dynamics, expansion) = setup(false);
        let dx = env.state_dim();
        let exact = LinearGaussianDynamics::time_invariant(&dynamics.fx[0], &dynamics.fu[0], &dynamics.fc[0], &Mat::zeros(dx, dx), env.horizon());
        let ctrl = backward_pass(&exact, &expansion, None, 1.0).unwrap().controller;
        let ctrl = ctrl.with_covariances(vec![Mat::identity(2, 2) * 1e-300; env.horizon()]).unwrap();
        let dist = forward_pass(&exact, &ctrl, &env.nominal_state(), &Mat::zeros(dx, dx)).unwrap();
        let mut x = env.nominal_state();
        for t in 0..env.horizon() {
            x = env.step(&x, &ctrl.mean_action(t, &x));
            assert!((&dist.state_means[t + 1] - &x).amax() < 1e-9);
            assert!(dist.state_covs[t + 1].amax() < 1e-200);
        }
    }

    #[test]
    fn kl_of_identical_controllers_is_zero_and_covariance_only_kl_is_closed_form() {
        let (env, dynamics, _) = setup(false);
        let (t, dx) = (env.horizon(), env.state_dim());
        let c = LinearGaussianController::zero_mean(t, dx, 2, 1.0).unwrap();
        let dist = forward_pass(&dynamics, &c, &env.nominal_state(), &Mat::zeros(dx, dx)).unwrap();
        assert_eq!(kl_trajectory(&dist, &c, &c).unwrap(), 0.0);
        let wide = LinearGaussianController::zero_mean(t, dx, 2, 2.0).unwrap();
        // KL(N(0, I) || N(0, 2I)) = 1/2 (d/2 - d + d ln 2) per step with d = 2.
        let per_step = 0.5 * (1.0 - 2.0 + 2.0 * 2f64.ln());
        assert!((kl_trajectory(&dist, &c, &wide).unwrap() - t as f64 * per_step).abs() < 1e-12);
    }

    #[test]
    fn constrained_step_respects_the_bound_and_lowers_expected_cost() {
        let (env, dynamics, expansion) = setup(false);
        let (t, dx) = (env.horizon(), env.state_dim());
        let prev = LinearGaussianController::zero_mean(t, dx, 2, 1.0).unwrap();
        let x0 = env.nominal_state();
        let cov = Mat::zeros(dx, dx);
        for eps in [1.0, 10.0, 50.0] {
            let s = solve_kl_constrained(&dynamics, &expansion, &prev, eps, &x0, &cov).unwrap();
            assert!(!s.dual.stalled);
            assert!(s.dual.kl <= eps * 1.01);
            assert!(s.expected_cost < s.prev_expected_cost);
            assert!(s.dual.eta >= ETA_MIN && s.dual.eta <= ETA_MAX);
        }
        assert!(solve_kl_constrained(&dynamics, &expansion, &prev, 0.0, &x0, &cov).is_err());
    }

    #[test]
    fn larger_bound_allows_lower_cost() {
        let (env, dynamics, expansion) = setup(false);
        let (t, dx) = (env.horizon(), env.state_dim());
        let prev = LinearGaussianController::zero_mean(t, dx, 2, 1.0).unwrap();
        let x0 = env.nominal_state();
        let cov = Mat::zeros(dx, dx);
        let small = solve_kl_constrained(&dynamics, &expansion, &prev, 1.0, &x0, &cov).unwrap();
        let large = solve_kl_constrained(&dynamics, &expansion, &prev, 20.0, &x0, &cov).unwrap();
        assert!(large.expected_cost < small.expected_cost);
        assert!(large.dual.eta < small.dual.eta);
    }
}
