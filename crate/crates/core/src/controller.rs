//! Time-varying linear-Gaussian controllers `u ~ N(K_t x + k_t, C_t)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_lower, mat_from_rows, rows_of, Mat, Vector};

/// Per-timestep gains, offsets and action covariances in absolute form
/// (any nominal trajectory is folded into the offsets).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianController {
    gains: Vec<Mat>,
    offsets: Vec<Vector>,
    covariances: Vec<Mat>,
}

impl LinearGaussianController {
    pub fn new(gains: Vec<Mat>, offsets: Vec<Vector>, covariances: Vec<Mat>) -> Result<Self> {
        let horizon = gains.len();
        if horizon == 0 {
            return invalid("controller horizon must be positive");
        }
        if offsets.len() != horizon || covariances.len() != horizon {
            return invalid("controller gain/offset/covariance sequences differ in length");
        }
        let (du, dx) = gains[0].shape();
        for t in 0..horizon {
            if gains[t].shape() != (du, dx)
                || offsets[t].len() != du
                || covariances[t].shape() != (du, du)
            {
                return invalid(format!("controller block at t={t} has inconsistent dimensions"));
            }
        }
        Ok(Self { gains, offsets, covariances })
    }

    /// Zero gain, zero offset, `C_t = cov_scale * I`.
    pub fn zero_mean(horizon: usize, state_dim: usize, action_dim: usize, cov_scale: f64) -> Result<Self> {
        if !(cov_scale > 0.0) {
            return invalid("cov_scale must be positive");
        }
        Self::new(
            vec![Mat::zeros(action_dim, state_dim); horizon],
            vec![Vector::zeros(action_dim); horizon],
            vec![Mat::identity(action_dim, action_dim) * cov_scale; horizon],
        )
    }

    /// Open-loop controller replaying `actions` with isotropic covariance.
    pub fn open_loop(actions: &[Vector], state_dim: usize, variance: f64) -> Result<Self> {
        let du = actions.first().map(|a| a.len()).unwrap_or(0);
        Self::new(
            vec![Mat::zeros(du, state_dim); actions.len()],
            actions.to_vec(),
            vec![Mat::identity(du, du) * variance; actions.len()],
        )
    }

    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    pub fn state_dim(&self) -> usize {
        self.gains[0].ncols()
    }

    pub fn action_dim(&self) -> usize {
        self.gains[0].nrows()
    }

    pub fn gain(&self, t: usize) -> &Mat {
        &self.gains[t]
    }

    pub fn offset(&self, t: usize) -> &Vector {
        &self.offsets[t]
    }

    pub fn covariance(&self, t: usize) -> &Mat {
        &self.covariances[t]
    }

    pub fn mean_action(&self, t: usize, x: &Vector) -> Vector {
        &self.gains[t] * x + &self.offsets[t]
    }

    /// Lower Cholesky factors of every `C_t`. Never regularizes.
    pub fn cholesky_factors(&self) -> Result<Vec<Mat>> {
        self.covariances
            .iter()
            .enumerate()
            .map(|(t, c)| cholesky_lower(c).ok_or(Error::ControllerInvalid { t }))
            .collect()
    }

    /// Same controller with the mean law kept and covariances replaced.
    pub fn with_covariances(&self, covariances: Vec<Mat>) -> Result<Self> {
        Self::new(self.gains.clone(), self.offsets.clone(), covariances)
    }

    /// Largest absolute difference of gains and offsets.
    pub fn mean_law_distance(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for t in 0..self.horizon().min(other.horizon()) {
            d = d.max((&self.gains[t] - &other.gains[t]).amax());
            d = d.max((&self.offsets[t] - &other.offsets[t]).amax());
        }
        d
    }

    pub fn to_file(&self) -> ControllerFile {
        ControllerFile {
            horizon: self.horizon(),
            state_dim: self.state_dim(),
            action_dim: self.action_dim(),
            steps: (0..self.horizon())
                .map(|t| ControllerStep {
                    gain: rows_of(&self.gains[t]),
                    offset: self.offsets[t].iter().cloned().collect(),
                    covariance: rows_of(&self.covariances[t]),
                })
                .collect(),
            diagnostics: None,
        }
    }

    pub fn from_file(file: &ControllerFile) -> Result<Self> {
        let (dx, du) = (file.state_dim, file.action_dim);
        let bad = |t: usize| Error::Format(format!("controller step {t} has wrong shape"));
        let mut gains = Vec::with_capacity(file.steps.len());
        let mut offsets = Vec::with_capacity(file.steps.len());
        let mut covs = Vec::with_capacity(file.steps.len());
        for (t, s) in file.steps.iter().enumerate() {
            let k = mat_from_rows(&s.gain, dx).filter(|m| m.nrows() == du).ok_or_else(|| bad(t))?;
            let c = mat_from_rows(&s.covariance, du).filter(|m| m.nrows() == du).ok_or_else(|| bad(t))?;
            if s.offset.len() != du {
                return Err(bad(t));
            }
            gains.push(k);
            offsets.push(Vector::from_vec(s.offset.clone()));
            covs.push(c);
        }
        if gains.len() != file.horizon {
            return Err(Error::Format("controller step count differs from T".into()));
        }
        Self::new(gains, offsets, covs)
    }
}

/// Serialized controller: per-timestep `K`, `k`, `C` blocks, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub steps: Vec<ControllerStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerStep {
    #[serde(rename = "K")]
    pub gain: Vec<Vec<f64>>,
    #[serde(rename = "k")]
    pub offset: Vec<f64>,
    #[serde(rename = "C")]
    pub covariance: Vec<Vec<f64>>,
}
