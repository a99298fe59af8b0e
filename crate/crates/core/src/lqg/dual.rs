//! KL-constrained update by a one-dimensional search over the multiplier `eta`.

use super::backward::backward_pass;
use super::forward::{expected_cost, forward_pass, kl_trajectory, TrajectoryDistribution};
use crate::controller::LinearGaussianController;
use crate::cost::CostExpansion;
use crate::dynamics::LinearGaussianDynamics;
use crate::error::{invalid, Result};
use crate::linalg::{Mat, Vector};

pub const ETA_MIN: f64 = 1e-8;
pub const ETA_MAX: f64 = 1e16;
const MAX_ITERATIONS: usize = 50;
const TOLERANCE: f64 = 0.1;
const FEASIBILITY_SLACK: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DualState {
    pub eta: f64,
    /// `(eta_low, eta_high)`: KL above the bound at `eta_low`, below at `eta_high`.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub kl: f64,
    /// No `eta` in range satisfied the bound; the previous controller was kept.
    pub stalled: bool,
    /// Backward passes that needed a `Q_uu` shift, summed over iterations.
    pub regularized_steps: usize,
}

#[derive(Clone, Debug)]
pub struct ConstrainedSolution {
    pub controller: LinearGaussianController,
    pub dual: DualState,
    pub distribution: TrajectoryDistribution,
    /// Expected cost of the returned controller under the model.
    pub expected_cost: f64,
    /// Expected cost of the previous controller under the same model.
    pub prev_expected_cost: f64,
}

struct Probe {
    eta: f64,
    kl: f64,
    controller: LinearGaussianController,
    distribution: TrajectoryDistribution,
}

/// `argmin E[l]` subject to `KL(p || p_prev) <= epsilon`.
///
/// The search starts at `eta = 1`, extends geometrically until the bound is
/// bracketed, and then refines with secant steps on `(ln eta, ln KL)`
/// safeguarded by bisection in `ln eta`.
pub fn solve_kl_constrained(
    dynamics: &LinearGaussianDynamics,
    cost: &CostExpansion,
    prev: &LinearGaussianController,
    epsilon: f64,
    x1_mean: &Vector,
    x1_cov: &Mat,
) -> Result<ConstrainedSolution> {
    if !(epsilon > 0.0) {
        return invalid(format!("KL bound must be positive, got {epsilon}"));
    }
    let prev_dist = forward_pass(dynamics, prev, x1_mean, x1_cov)?;
    let prev_expected_cost = expected_cost(&prev_dist, cost)?;
    let mut regularized = 0;
    let mut probe = |eta: f64| -> Result<Probe> {
        let result = backward_pass(dynamics, cost, Some(prev), eta)?;
        regularized += result.regularized_steps.len();
        let distribution = forward_pass(dynamics, &result.controller, x1_mean, x1_cov)?;
        let kl = kl_trajectory(&distribution, &result.controller, prev)?;
        Ok(Probe { eta, kl, controller: result.controller, distribution })
    };

    let limit = epsilon * (1.0 + FEASIBILITY_SLACK);
    let mut best: Option<Probe> = None;
    let mut low: Option<(f64, f64)> = None;
    let mut high: Option<(f64, f64)> = None;
    let mut eta: f64 = 1.0;
    let mut iterations = 0;
    let mut done = false;
    // For the Illinois modification: which side moved last.
    let mut last_side = 0i8;
    let mut low_weight = 1.0;
    let mut high_weight = 1.0;

    while iterations < MAX_ITERATIONS && !done {
        let p = probe(eta)?;
        iterations += 1;
        let (le, lk) = (p.eta.ln(), p.kl.max(1e-300).ln());
        if p.kl > epsilon {
            low = Some((le, lk));
            if last_side == -1 {
                high_weight *= 0.5;
            }
            last_side = -1;
            low_weight = 1.0;
        } else {
            high = Some((le, lk));
            if last_side == 1 {
                low_weight *= 0.5;
            }
            last_side = 1;
            high_weight = 1.0;
        }
        let feasible = p.kl <= limit;
        if feasible && (p.kl - epsilon).abs() <= TOLERANCE * epsilon {
            done = true;
        }
        let better = match &best {
            None => true,
            Some(b) => match (feasible, b.kl <= limit) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => p.kl > b.kl,
                (false, false) => p.kl < b.kl,
            },
        };
        if better {
            best = Some(p);
        }
        if done {
            break;
        }
        let target = epsilon.ln();
        let next = match (low, high) {
            (Some((l_e, l_k)), Some((h_e, h_k))) => {
                let (wl, wh) = (l_k - target, h_k - target);
                let (wl, wh) = (wl * low_weight, wh * high_weight);
                let secant = if (wl - wh).abs() > 0.0 { l_e - wl * (h_e - l_e) / (wh - wl) } else { f64::NAN };
                let (lo, hi) = (l_e.min(h_e), l_e.max(h_e));
                let margin = 0.01 * (hi - lo);
                if secant.is_finite() && secant > lo + margin && secant < hi - margin {
                    secant
                } else {
                    0.5 * (l_e + h_e)
                }
            }
            (Some((l_e, l_k)), None) => {
                if l_e >= ETA_MAX.ln() {
                    break;
                }
                // KL decays roughly like eta^-2 once the prior dominates.
                let step = (0.5 * (l_k - target)).clamp(2f64.ln(), 10f64.ln() * 3.0);
                (l_e + step).min(ETA_MAX.ln())
            }
            (None, Some((h_e, h_k))) => {
                if h_e <= ETA_MIN.ln() {
                    break;
                }
                let step = (0.5 * (target - h_k)).clamp(2f64.ln(), 10f64.ln() * 3.0);
                (h_e - step).max(ETA_MIN.ln())
            }
            (None, None) => unreachable!("every probe lands on one side"),
        };
        eta = next.exp();
    }

    let mut best = best.expect("at least one probe was evaluated");
    if low.is_none() && best.eta <= ETA_MIN * (1.0 + 1e-9) {
        // The bound is inactive even at the smallest multiplier: take the
        // eta -> 0 mean law with the covariances of the last probe.
        let lqr = backward_pass(dynamics, cost, None, 1.0)?;
        let covs = (0..prev.horizon()).map(|t| best.controller.covariance(t).clone()).collect();
        let controller = lqr.controller.with_covariances(covs)?;
        let distribution = forward_pass(dynamics, &controller, x1_mean, x1_cov)?;
        let kl = kl_trajectory(&distribution, &controller, prev)?;
        if kl <= limit {
            best = Probe { eta: best.eta, kl, controller, distribution };
        }
    }
    let bracket = (low.map_or(ETA_MIN, |(e, _)| e.exp()), high.map_or(ETA_MAX, |(e, _)| e.exp()));
    if best.kl > limit {
        return Ok(ConstrainedSolution {
            controller: prev.clone(),
            dual: DualState { eta: best.eta, bracket, iterations, kl: 0.0, stalled: true, regularized_steps: regularized },
            distribution: prev_dist,
            expected_cost: prev_expected_cost,
            prev_expected_cost,
        });
    }
    let expected = expected_cost(&best.distribution, cost)?;
    Ok(ConstrainedSolution {
        dual: DualState { eta: best.eta, bracket, iterations, kl: best.kl, stalled: false, regularized_steps: regularized },
        controller: best.controller,
        distribution: best.distribution,
        expected_cost: expected,
        prev_expected_cost,
    })
}
