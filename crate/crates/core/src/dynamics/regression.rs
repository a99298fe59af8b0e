//! Per-timestep linear-Gaussian dynamics by regression with a mixture prior.

use super::gmm::GmmPrior;
use crate::error::{invalid, Error, Result};
use crate::linalg::{all_finite_mat, clamp_eigenvalues, mat_from_rows, min_eigenvalue, rows_of, spd_inverse, symmetrize, vstack, Mat, Vector};
use crate::trajectory::Trajectory;

const RIDGE: f64 = 1e-8;
const SINGULAR_RCOND: f64 = 1e-13;

/// Result of conditioning a joint Gaussian on its leading block.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditional {
    pub coeffs: Mat,
    pub offset: Vector,
    pub residual_cov: Mat,
    /// Whether the input block needed a ridge to be inverted.
    pub ridge: bool,
}

/// Condition `N(mean, cov)` over `[input; output]` on the first `in_dim` entries.
pub fn condition_gaussian(mean: &Vector, cov: &Mat, in_dim: usize) -> Result<Conditional> {
    let d = mean.len();
    if cov.nrows() != d || cov.ncols() != d || in_dim == 0 || in_dim >= d {
        return invalid(format!("cannot condition a {d}-dimensional Gaussian on {in_dim} inputs"));
    }
    let out_dim = d - in_dim;
    let s_ii = symmetrize(&cov.view((0, 0), (in_dim, in_dim)).into_owned());
    let s_oi = cov.view((in_dim, 0), (out_dim, in_dim)).into_owned();
    let s_oo = cov.view((in_dim, in_dim), (out_dim, out_dim)).into_owned();
    let scale = (s_ii.trace() / in_dim as f64).max(f64::MIN_POSITIVE);
    let singular = min_eigenvalue(&s_ii) <= SINGULAR_RCOND * scale;
    let (inv, ridge) = match (singular, spd_inverse(&s_ii)) {
        (false, Some(inv)) => (inv, false),
        _ => {
            let ridged = &s_ii + Mat::identity(in_dim, in_dim) * (RIDGE * scale);
            let inv = spd_inverse(&ridged).ok_or_else(|| Error::Format("input covariance is not invertible".into()))?;
            (inv, true)
        }
    };
    let coeffs = &s_oi * inv;
    let offset = mean.rows(in_dim, out_dim) - &coeffs * mean.rows(0, in_dim);
    let residual_cov = symmetrize(&(s_oo - &coeffs * s_oi.transpose()));
    Ok(Conditional { coeffs, offset, residual_cov, ridge })
}

/// Normal-inverse-Wishart prior strengths: pseudo-counts for the mean and covariance.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NiwStrength {
    pub m: f64,
    pub n0: f64,
}

impl Default for NiwStrength {
    fn default() -> Self {
        Self { m: 1.0, n0: 1.0 }
    }
}

/// `x_{t+1} ~ N(f_x x_t + f_u u_t + f_c, F)` for each `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianDynamics {
    pub fx: Vec<Mat>,
    pub fu: Vec<Mat>,
    pub fc: Vec<Vector>,
    pub cov: Vec<Mat>,
    pub diagnostics: DynamicsDiagnostics,
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DynamicsDiagnostics {
    /// Timesteps whose regression needed a ridge.
    pub ridge_steps: Vec<usize>,
    /// EM iterations of the prior used for the fit, if any.
    pub em_iterations: Option<usize>,
    pub prior_components: Option<usize>,
}

impl LinearGaussianDynamics {
    /// The same model at every step.
    pub fn time_invariant(fx: &Mat, fu: &Mat, fc: &Vector, cov: &Mat, horizon: usize) -> Self {
        Self {
            fx: vec![fx.clone(); horizon],
            fu: vec![fu.clone(); horizon],
            fc: vec![fc.clone(); horizon],
            cov: vec![cov.clone(); horizon],
            diagnostics: DynamicsDiagnostics::default(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.fx.len()
    }

    pub fn state_dim(&self) -> usize {
        self.fx[0].nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.fu[0].ncols()
    }

    pub fn predict(&self, t: usize, x: &Vector, u: &Vector) -> Vector {
        &self.fx[t] * x + &self.fu[t] * u + &self.fc[t]
    }

    /// One-step predictive log density of `x_next`; `floor` is added to the
    /// covariance diagonal so deterministic fits stay evaluable.
    pub fn log_likelihood(&self, t: usize, x: &Vector, u: &Vector, x_next: &Vector, floor: f64) -> f64 {
        let d = x.len();
        let cov = &self.cov[t] + Mat::identity(d, d) * floor;
        match crate::linalg::cholesky_lower(&cov) {
            Some(l) => crate::linalg::gaussian_logpdf_chol(x_next, &self.predict(t, x, u), &l),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn to_file(&self) -> DynamicsFile {
        DynamicsFile {
            horizon: self.horizon(),
            state_dim: self.state_dim(),
            action_dim: self.action_dim(),
            steps: (0..self.horizon())
                .map(|t| DynamicsStep {
                    fx: rows_of(&self.fx[t]),
                    fu: rows_of(&self.fu[t]),
                    fc: self.fc[t].iter().copied().collect(),
                    cov: rows_of(&self.cov[t]),
                })
                .collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn from_file(file: &DynamicsFile) -> Result<Self> {
        let (dx, du) = (file.state_dim, file.action_dim);
        if file.steps.len() != file.horizon {
            return Err(Error::Format(format!("{} steps for horizon {}", file.steps.len(), file.horizon)));
        }
        let bad = |what: &str, t: usize| Error::Format(format!("{what} at t={t} has the wrong shape"));
        let mut out = Self { fx: vec![], fu: vec![], fc: vec![], cov: vec![], diagnostics: file.diagnostics.clone() };
        for (t, s) in file.steps.iter().enumerate() {
            let fx = mat_from_rows(&s.fx, dx).filter(|m| m.nrows() == dx).ok_or_else(|| bad("f_x", t))?;
            let fu = mat_from_rows(&s.fu, du).filter(|m| m.nrows() == dx).ok_or_else(|| bad("f_u", t))?;
            let cov = mat_from_rows(&s.cov, dx).filter(|m| m.nrows() == dx).ok_or_else(|| bad("F", t))?;
            if s.fc.len() != dx {
                return Err(bad("f_c", t));
            }
            out.fx.push(fx);
            out.fu.push(fu);
            out.fc.push(Vector::from_column_slice(&s.fc));
            out.cov.push(cov);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsFile {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub steps: Vec<DynamicsStep>,
    pub diagnostics: DynamicsDiagnostics,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsStep {
    pub fx: Vec<Vec<f64>>,
    pub fu: Vec<Vec<f64>>,
    pub fc: Vec<f64>,
    #[serde(rename = "F")]
    pub cov: Vec<Vec<f64>>,
}

/// All `[x_t; u_t; x_{t+1}]` tuples of a set of rollouts.
pub fn transition_tuples(rollouts: &[Trajectory]) -> Vec<Vector> {
    rollouts
        .iter()
        .flat_map(|r| {
            (0..r.horizon()).map(move |t| vstack(&vstack(r.state(t), r.action(t)), r.state(t + 1)))
        })
        .collect()
}

/// Fit time-varying dynamics to rollouts, blending per-step sample moments
/// with the prior's moments under a normal-inverse-Wishart update.
pub fn fit_dynamics(rollouts: &[Trajectory], prior: Option<&GmmPrior>, strength: NiwStrength) -> Result<LinearGaussianDynamics> {
    let Some(first) = rollouts.first() else {
        return invalid("no rollouts to fit");
    };
    if rollouts.len() < 2 && prior.is_none() {
        return invalid("a single rollout needs a prior to define a covariance");
    }
    if !(strength.m > 0.0 && strength.n0 > 0.0) {
        return invalid("prior strengths must be positive");
    }
    let (horizon, dx, du) = (first.horizon(), first.state_dim(), first.action_dim());
    if rollouts.iter().any(|r| r.horizon() != horizon || r.state_dim() != dx || r.action_dim() != du) {
        return invalid("rollouts differ in horizon or dimensions");
    }
    let dim = 2 * dx + du;
    if let Some(p) = prior {
        if p.dim() != dim {
            return invalid(format!("prior dimension {} differs from tuple dimension {dim}", p.dim()));
        }
    }
    let n = rollouts.len() as f64;
    let mut out = LinearGaussianDynamics {
        fx: Vec::with_capacity(horizon),
        fu: Vec::with_capacity(horizon),
        fc: Vec::with_capacity(horizon),
        cov: Vec::with_capacity(horizon),
        diagnostics: DynamicsDiagnostics {
            ridge_steps: Vec::new(),
            em_iterations: prior.map(|p| p.iterations),
            prior_components: prior.map(|p| p.components.len()),
        },
    };
    for t in 0..horizon {
        let samples: Vec<Vector> =
            rollouts.iter().map(|r| vstack(&vstack(r.state(t), r.action(t)), r.state(t + 1))).collect();
        let mut mean = Vector::zeros(dim);
        for s in &samples {
            mean += s;
        }
        mean /= n;
        let mut emp = Mat::zeros(dim, dim);
        for s in &samples {
            let diff = s - &mean;
            emp.ger(1.0 / n, &diff, &diff, 1.0);
        }
        let (mu, sigma) = match prior {
            Some(p) => {
                let (mu0, sigma0) = p.moments_at(&mean);
                let NiwStrength { m, n0 } = strength;
                let mu = (&mu0 * m + &mean * n) / (m + n);
                let shift = &mean - &mu0;
                let sigma = (&sigma0 * n0 + &emp * n + &shift * shift.transpose() * (n * m / (n + m))) / (n + n0);
                (mu, symmetrize(&sigma))
            }
            None => (mean, emp),
        };
        let cond = condition_gaussian(&mu, &sigma, dx + du)?;
        if cond.ridge {
            out.diagnostics.ridge_steps.push(t);
        }
        let (cov, _) = clamp_eigenvalues(&cond.residual_cov, 0.0);
        if !all_finite_mat(&cond.coeffs) || !all_finite_mat(&cov) {
            return Err(Error::Format(format!("non-finite dynamics fit at t={t}")));
        }
        out.fx.push(cond.coeffs.columns(0, dx).into_owned());
        out.fu.push(cond.coeffs.columns(dx, du).into_owned());
        out.fc.push(cond.offset);
        out.cov.push(cov);
    }
    Ok(out)
}
