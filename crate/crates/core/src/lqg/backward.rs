//! Maximum-entropy LQR backward recursion.

use crate::controller::LinearGaussianController;
use crate::cost::{CostExpansion, QuadraticExpansion};
use crate::dynamics::LinearGaussianDynamics;
use crate::error::{invalid, Error, Result};
use crate::linalg::{asymmetry, spd_inverse, spd_logdet, symmetrize, Mat, Vector};

const LEVENBERG_START: f64 = 1e-6;
const LEVENBERG_GROWTH: f64 = 10.0;
const MAX_ESCALATIONS: usize = 20;

/// Quadratic value function `1/2 x^T V_xx x + x^T v_x + v_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    pub vxx: Mat,
    pub vx: Vector,
    pub vc: f64,
}

impl ValueFunction {
    pub fn eval(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.vxx * x)) + x.dot(&self.vx) + self.vc
    }
}

#[derive(Clone, Debug)]
pub struct BackwardResult {
    pub controller: LinearGaussianController,
    /// `T + 1` value functions of the mean policy, the last being the terminal cost.
    pub values: Vec<ValueFunction>,
    /// Timesteps at which `Q_uu` needed a diagonal shift.
    pub regularized_steps: Vec<usize>,
    /// Largest asymmetry of `V_xx` before symmetrization.
    pub max_asymmetry: f64,
}

fn check_dims(dynamics: &LinearGaussianDynamics, cost: &CostExpansion) -> Result<(usize, usize, usize)> {
    let horizon = dynamics.horizon();
    if horizon == 0 || cost.horizon() != horizon {
        return invalid(format!("cost horizon {} differs from dynamics horizon {horizon}", cost.horizon()));
    }
    let (dx, du) = (dynamics.state_dim(), dynamics.action_dim());
    if cost.running.iter().any(|e| e.dim() != dx + du) || cost.terminal.dim() != dx {
        return invalid("cost expansion dimensions do not match the dynamics");
    }
    Ok((horizon, dx, du))
}

/// `-log p(u|x)` of a linear-Gaussian conditional as a quadratic in `[x; u]`.
pub fn neg_log_policy_expansion(gain: &Mat, offset: &Vector, cov: &Mat, t: usize) -> Result<QuadraticExpansion> {
    let (du, dx) = (gain.nrows(), gain.ncols());
    let prec = spd_inverse(cov).ok_or(Error::ControllerInvalid { t })?;
    let logdet = spd_logdet(cov).ok_or(Error::ControllerInvalid { t })?;
    let mut m = Mat::zeros(du, dx + du);
    m.view_mut((0, 0), (du, dx)).copy_from(&(-gain));
    m.view_mut((0, dx), (du, du)).fill_with_identity();
    let pm = &prec * &m;
    Ok(QuadraticExpansion {
        hessian: symmetrize(&(m.transpose() * &pm)),
        gradient: -(pm.transpose() * offset),
        constant: 0.5 * offset.dot(&(&prec * offset)) + 0.5 * (logdet + du as f64 * (2.0 * std::f64::consts::PI).ln()),
    })
}

/// Backward pass on `cost / eta - log p_prev(u|x)`; with `prev = None` this is
/// plain LQR on `cost / eta` and the mean law is independent of `eta`.
pub fn backward_pass(
    dynamics: &LinearGaussianDynamics,
    cost: &CostExpansion,
    prev: Option<&LinearGaussianController>,
    eta: f64,
) -> Result<BackwardResult> {
    let (horizon, dx, du) = check_dims(dynamics, cost)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return invalid(format!("eta must be positive and finite, got {eta}"));
    }
    if let Some(p) = prev {
        if p.horizon() != horizon || p.state_dim() != dx || p.action_dim() != du {
            return invalid("previous controller does not match the dynamics");
        }
    }
    let scale = 1.0 / eta;
    let mut value = ValueFunction {
        vxx: &cost.terminal.hessian * scale,
        vx: &cost.terminal.gradient * scale,
        vc: cost.terminal.constant * scale,
    };
    let mut values = vec![value.clone()];
    let mut gains = vec![Mat::zeros(du, dx); horizon];
    let mut offsets = vec![Vector::zeros(du); horizon];
    let mut covs = vec![Mat::zeros(du, du); horizon];
    let mut regularized_steps = Vec::new();
    let mut max_asymmetry: f64 = 0.0;

    for t in (0..horizon).rev() {
        let running = &cost.running[t];
        let mut h = &running.hessian * scale;
        let mut g = &running.gradient * scale;
        let mut c = running.constant * scale;
        if let Some(p) = prev {
            let prior = neg_log_policy_expansion(p.gain(t), p.offset(t), p.covariance(t), t)?;
            h += prior.hessian;
            g += prior.gradient;
            c += prior.constant;
        }
        let mut f = Mat::zeros(dx, dx + du);
        f.view_mut((0, 0), (dx, dx)).copy_from(&dynamics.fx[t]);
        f.view_mut((0, dx), (dx, du)).copy_from(&dynamics.fu[t]);
        let fc = &dynamics.fc[t];
        let vf = &value.vxx * &f;
        let q_zz = symmetrize(&(h + f.transpose() * &vf));
        let next_grad = &value.vxx * fc + &value.vx;
        let q_z = g + f.transpose() * &next_grad;
        let q_c = c
            + 0.5 * fc.dot(&(&value.vxx * fc))
            + fc.dot(&value.vx)
            + value.vc
            + 0.5 * (&value.vxx * &dynamics.cov[t]).trace();

        let q_xx = q_zz.view((0, 0), (dx, dx)).into_owned();
        let q_ux = q_zz.view((dx, 0), (du, dx)).into_owned();
        let mut q_uu = q_zz.view((dx, dx), (du, du)).into_owned();
        let q_x = q_z.rows(0, dx).into_owned();
        let q_u = q_z.rows(dx, du).into_owned();

        let mut inv = spd_inverse(&q_uu);
        let mut shift = LEVENBERG_START;
        let mut escalations = 0;
        while inv.is_none() {
            if escalations == MAX_ESCALATIONS {
                return Err(Error::Solver { t, escalations });
            }
            let shifted = &q_uu + Mat::identity(du, du) * shift;
            inv = spd_inverse(&shifted);
            if inv.is_some() {
                q_uu = shifted;
            }
            shift *= LEVENBERG_GROWTH;
            escalations += 1;
        }
        if escalations > 0 {
            regularized_steps.push(t);
        }
        let c_t = symmetrize(&inv.expect("loop exits with an inverse"));
        let k_mat = -(&c_t * &q_ux);
        let k_vec = -(&c_t * &q_u);

        let kt_quu = k_mat.transpose() * &q_uu;
        let raw_vxx = &q_xx + &kt_quu * &k_mat + k_mat.transpose() * &q_ux + q_ux.transpose() * &k_mat;
        max_asymmetry = max_asymmetry.max(asymmetry(&raw_vxx));
        value = ValueFunction {
            vxx: symmetrize(&raw_vxx),
            vx: &q_x + &kt_quu * &k_vec + k_mat.transpose() * &q_u + q_ux.transpose() * &k_vec,
            vc: q_c + 0.5 * k_vec.dot(&(&q_uu * &k_vec)) + k_vec.dot(&q_u),
        };
        values.push(value.clone());
        gains[t] = k_mat;
        offsets[t] = k_vec;
        covs[t] = c_t;
    }
    values.reverse();
    let controller = LinearGaussianController::new(gains, offsets, covs)?;
    Ok(BackwardResult { controller, values, regularized_steps, max_asymmetry })
}
