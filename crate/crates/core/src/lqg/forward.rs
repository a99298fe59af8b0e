//! Gaussian moment propagation, expected cost and trajectory KL.

use crate::controller::LinearGaussianController;
use crate::cost::CostExpansion;
use crate::dynamics::LinearGaussianDynamics;
use crate::error::{invalid, Result};
use crate::linalg::{spd_inverse, spd_logdet, symmetrize, vstack, Mat, Vector};

/// Marginals of `p(tau)`: `T + 1` state moments and `T` joint `[x; u]` moments.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDistribution {
    pub state_means: Vec<Vector>,
    pub state_covs: Vec<Mat>,
    pub joint_means: Vec<Vector>,
    pub joint_covs: Vec<Mat>,
}

impl TrajectoryDistribution {
    pub fn horizon(&self) -> usize {
        self.joint_means.len()
    }
}

pub fn forward_pass(
    dynamics: &LinearGaussianDynamics,
    controller: &LinearGaussianController,
    x1_mean: &Vector,
    x1_cov: &Mat,
) -> Result<TrajectoryDistribution> {
    let horizon = dynamics.horizon();
    let (dx, du) = (dynamics.state_dim(), dynamics.action_dim());
    if controller.horizon() != horizon || controller.state_dim() != dx || controller.action_dim() != du {
        return invalid("controller does not match the dynamics");
    }
    if x1_mean.len() != dx || x1_cov.nrows() != dx || x1_cov.ncols() != dx {
        return invalid("initial state moments do not match the state dimension");
    }
    let mut mu = x1_mean.clone();
    let mut sigma = symmetrize(x1_cov);
    let mut out = TrajectoryDistribution {
        state_means: Vec::with_capacity(horizon + 1),
        state_covs: Vec::with_capacity(horizon + 1),
        joint_means: Vec::with_capacity(horizon),
        joint_covs: Vec::with_capacity(horizon),
    };
    for t in 0..horizon {
        let k = controller.gain(t);
        let mu_u = controller.mean_action(t, &mu);
        let sk = &sigma * k.transpose();
        let mut joint = Mat::zeros(dx + du, dx + du);
        joint.view_mut((0, 0), (dx, dx)).copy_from(&sigma);
        joint.view_mut((0, dx), (dx, du)).copy_from(&sk);
        joint.view_mut((dx, 0), (du, dx)).copy_from(&sk.transpose());
        joint.view_mut((dx, dx), (du, du)).copy_from(&(k * &sk + controller.covariance(t)));
        let joint = symmetrize(&joint);
        let z = vstack(&mu, &mu_u);

        let mut f = Mat::zeros(dx, dx + du);
        f.view_mut((0, 0), (dx, dx)).copy_from(&dynamics.fx[t]);
        f.view_mut((0, dx), (dx, du)).copy_from(&dynamics.fu[t]);
        let next_mu = &f * &z + &dynamics.fc[t];
        let next_sigma = symmetrize(&(&f * &joint * f.transpose() + &dynamics.cov[t]));

        out.state_means.push(mu);
        out.state_covs.push(sigma);
        out.joint_means.push(z);
        out.joint_covs.push(joint);
        mu = next_mu;
        sigma = next_sigma;
    }
    out.state_means.push(mu);
    out.state_covs.push(sigma);
    Ok(out)
}

/// `E[sum_t l_t + l_T]` of the quadratic cost model under Gaussian marginals.
pub fn expected_cost(dist: &TrajectoryDistribution, cost: &CostExpansion) -> Result<f64> {
    let horizon = dist.horizon();
    if cost.horizon() != horizon {
        return invalid("cost horizon differs from the distribution horizon");
    }
    let quad = |h: &Mat, g: &Vector, c: f64, mu: &Vector, sigma: &Mat| {
        0.5 * (h * sigma).trace() + 0.5 * mu.dot(&(h * mu)) + mu.dot(g) + c
    };
    let mut total = 0.0;
    for (t, e) in cost.running.iter().enumerate() {
        if e.dim() != dist.joint_means[t].len() {
            return invalid("cost expansion dimension differs from the distribution");
        }
        total += quad(&e.hessian, &e.gradient, e.constant, &dist.joint_means[t], &dist.joint_covs[t]);
    }
    let e = &cost.terminal;
    total += quad(&e.hessian, &e.gradient, e.constant, &dist.state_means[horizon], &dist.state_covs[horizon]);
    Ok(total)
}

/// `sum_t E_{x ~ p_t}[KL(N(Kx + k, C) || N(K'x + k', C'))]` using the state
/// marginals of `dist`, which should be those of `new`.
pub fn kl_trajectory(
    dist: &TrajectoryDistribution,
    new: &LinearGaussianController,
    prev: &LinearGaussianController,
) -> Result<f64> {
    let horizon = dist.horizon();
    if new.horizon() != horizon || prev.horizon() != horizon {
        return invalid("controller horizons differ from the distribution");
    }
    if new.state_dim() != prev.state_dim() || new.action_dim() != prev.action_dim() {
        return invalid("controllers differ in dimensions");
    }
    let du = new.action_dim() as f64;
    let mut total = 0.0;
    for t in 0..horizon {
        if new.gain(t) == prev.gain(t) && new.offset(t) == prev.offset(t) && new.covariance(t) == prev.covariance(t) {
            continue;
        }
        let prec = spd_inverse(prev.covariance(t))
            .ok_or_else(|| crate::error::Error::InvalidArgument(format!("previous covariance at t={t} is singular")))?;
        let logdet_prev = spd_logdet(prev.covariance(t)).expect("invertible covariance has a log determinant");
        let logdet_new = spd_logdet(new.covariance(t)).ok_or(crate::error::Error::ControllerInvalid { t })?;
        let dk = new.gain(t) - prev.gain(t);
        let mu = &dist.state_means[t];
        let dm = &dk * mu + (new.offset(t) - prev.offset(t));
        let mean_term = dm.dot(&(&prec * &dm)) + (dk.transpose() * &prec * &dk * &dist.state_covs[t]).trace();
        let kl = 0.5 * ((&prec * new.covariance(t)).trace() - du + logdet_prev - logdet_new + mean_term);
        total += kl.max(0.0);
    }
    Ok(total)
}
