//! Gaussian mixture model fitted by EM, used as a prior over `(x, u, x')` tuples.

use rand::Rng as _;

use crate::error::{invalid, Result};
use crate::linalg::{cholesky_lower, clamp_eigenvalues, gaussian_logpdf_chol, log_sum_exp, symmetrize, Mat, Vector};
use crate::rng::seeded;

/// Eigenvalue floor applied to every component covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-6;
const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vector,
    pub covariance: Mat,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GmmPrior {
    pub components: Vec<GmmComponent>,
    /// Mean per-point log-likelihood after each E-step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    /// Components removed after degenerating twice.
    pub dropped: usize,
}

impl GmmPrior {
    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().unwrap_or(&f64::NEG_INFINITY)
    }

    /// Posterior responsibilities of the components for one point.
    pub fn responsibilities(&self, point: &Vector) -> Vec<f64> {
        let chols: Vec<Mat> = self.components.iter().map(|c| chol_or_floor(&c.covariance)).collect();
        let logs: Vec<f64> = self
            .components
            .iter()
            .zip(&chols)
            .map(|(c, l)| c.weight.ln() + gaussian_logpdf_chol(point, &c.mean, l))
            .collect();
        let norm = log_sum_exp(&logs);
        logs.iter().map(|l| (l - norm).exp()).collect()
    }

    /// Moments of the mixture reweighted by the responsibilities of `point`.
    pub fn moments_at(&self, point: &Vector) -> (Vector, Mat) {
        let r = self.responsibilities(point);
        let d = self.dim();
        let mut mean = Vector::zeros(d);
        for (c, w) in self.components.iter().zip(&r) {
            mean += &c.mean * *w;
        }
        let mut cov = Mat::zeros(d, d);
        for (c, w) in self.components.iter().zip(&r) {
            let diff = &c.mean - &mean;
            cov += (&c.covariance + &diff * diff.transpose()) * *w;
        }
        (mean, symmetrize(&cov))
    }
}

fn chol_or_floor(m: &Mat) -> Mat {
    cholesky_lower(m).unwrap_or_else(|| {
        let (fixed, _) = clamp_eigenvalues(m, COVARIANCE_FLOOR);
        cholesky_lower(&fixed).expect("floored covariance is positive definite")
    })
}

/// Default component count for a pool of `n` tuples.
pub fn default_components(n: usize) -> usize {
    (n / 40).clamp(2, 20)
}

/// EM from a seeded k-means++ initialisation.
///
/// Covariances are floored by clamping eigenvalues to [`COVARIANCE_FLOOR`],
/// which keeps each M-step a maximiser over the floored set so the
/// likelihood trace never decreases.
pub fn fit_gmm(tuples: &[Vector], k: usize, seed: u64, max_iters: usize) -> Result<GmmPrior> {
    if k == 0 {
        return invalid("GMM needs at least one component");
    }
    if tuples.len() < k {
        return invalid(format!("{} tuples cannot support {k} components", tuples.len()));
    }
    let d = tuples[0].len();
    if d == 0 || tuples.iter().any(|t| t.len() != d || !t.iter().all(|v| v.is_finite())) {
        return invalid("GMM tuples must be finite and share one non-zero dimension");
    }
    let n = tuples.len();
    let mut rng = seeded(seed);

    // k-means++ seeding, then one hard assignment to initialise the moments.
    let mut centers: Vec<Vector> = vec![tuples[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = tuples
            .iter()
            .map(|p| centers.iter().map(|c| (p - c).norm_squared()).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(tuples[pick].clone());
    }
    let data = Mat::from_columns(tuples);
    let mut resp = Mat::zeros(n, k);
    for (i, p) in tuples.iter().enumerate() {
        let j = (0..k)
            .min_by(|&a, &b| (p - &centers[a]).norm_squared().total_cmp(&(p - &centers[b]).norm_squared()))
            .unwrap_or(0);
        resp[(i, j)] = 1.0;
    }

    let global = weighted_moments(&data, &vec![1.0; n]).1;
    let mut components = m_step(&data, &resp, &global);
    let mut reseeded = vec![false; components.len()];
    let mut dropped = 0;
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let (ll, new_resp) = e_step(&data, &components);
        trace.push(ll);
        resp = new_resp;
        let converged = trace.len() >= 2 && {
            let prev = trace[trace.len() - 2];
            (ll - prev).abs() <= 1e-9 * ll.abs().max(1.0)
        };
        if converged || iterations >= max_iters {
            break;
        }
        let mut next = m_step(&data, &resp, &global);
        let mut changed = false;
        let mut j = 0;
        while j < next.len() {
            if next[j].weight >= WEIGHT_FLOOR {
                j += 1;
                continue;
            }
            changed = true;
            if !reseeded[j] {
                // Re-seed at the point the mixture explains worst.
                reseeded[j] = true;
                let worst = worst_explained(&data, &components);
                next[j] = GmmComponent { weight: 1.0 / n as f64, mean: tuples[worst].clone(), covariance: global.clone() };
                j += 1;
            } else {
                next.remove(j);
                reseeded.remove(j);
                dropped += 1;
            }
        }
        if changed {
            let total: f64 = next.iter().map(|c| c.weight).sum();
            next.iter_mut().for_each(|c| c.weight /= total);
            // The reseeded mixture restarts the monotone sequence.
            trace.clear();
        }
        components = next;
        iterations += 1;
    }
    Ok(GmmPrior { components, log_likelihood_trace: trace, iterations, dropped })
}

/// Per-point, per-component `ln w_k + ln N(x | mu_k, Sigma_k)`, `n x k`.
fn component_log_densities(data: &Mat, components: &[GmmComponent]) -> Mat {
    let (d, n) = data.shape();
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut out = Mat::zeros(n, components.len());
    for (j, c) in components.iter().enumerate() {
        let l = chol_or_floor(&c.covariance);
        let logdet: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mut diff = data.clone();
        for mut col in diff.column_iter_mut() {
            col -= &c.mean;
        }
        let z = l.solve_lower_triangular(&diff).expect("Cholesky factor has a non-zero diagonal");
        let base = c.weight.ln() - 0.5 * (logdet + d as f64 * log_2pi);
        for i in 0..n {
            out[(i, j)] = base - 0.5 * z.column(i).norm_squared();
        }
    }
    out
}

fn worst_explained(data: &Mat, components: &[GmmComponent]) -> usize {
    let logs = component_log_densities(data, components);
    let mut worst = (0, f64::INFINITY);
    for i in 0..logs.nrows() {
        let row: Vec<f64> = logs.row(i).iter().copied().collect();
        let ll = log_sum_exp(&row);
        if ll < worst.1 {
            worst = (i, ll);
        }
    }
    worst.0
}

fn e_step(data: &Mat, components: &[GmmComponent]) -> (f64, Mat) {
    let mut logs = component_log_densities(data, components);
    let n = logs.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let row: Vec<f64> = logs.row(i).iter().copied().collect();
        let norm = log_sum_exp(&row);
        total += norm;
        for v in logs.row_mut(i).iter_mut() {
            *v = (*v - norm).exp();
        }
    }
    (total / n as f64, logs)
}

fn weighted_moments(data: &Mat, w: &[f64]) -> (Vector, Mat) {
    let total: f64 = w.iter().sum();
    let wv = Vector::from_iterator(w.len(), w.iter().map(|v| v / total));
    let mean = data * &wv;
    let mut diff = data.clone();
    for (i, mut col) in diff.column_iter_mut().enumerate() {
        col -= &mean;
        col *= wv[i].sqrt();
    }
    let cov = &diff * diff.transpose();
    (mean, symmetrize(&cov))
}

fn m_step(data: &Mat, resp: &Mat, global: &Mat) -> Vec<GmmComponent> {
    let n = data.ncols() as f64;
    let k = resp.ncols();
    (0..k)
        .map(|j| {
            let w: Vec<f64> = resp.column(j).iter().copied().collect();
            let mass: f64 = w.iter().sum();
            if mass / n < WEIGHT_FLOOR {
                return GmmComponent { weight: mass / n, mean: data.column(0).into_owned(), covariance: global.clone() };
            }
            let (mean, cov) = weighted_moments(data, &w);
            let (covariance, _) = clamp_eigenvalues(&cov, COVARIANCE_FLOOR);
            GmmComponent { weight: mass / n, mean, covariance }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(seed: u64) -> (Vec<Vector>, [Vector; 2]) {
        let mut rng = seeded(seed);
        let centers = [Vector::from_vec(vec![-3.0, 1.0]), Vector::from_vec(vec![4.0, -2.0])];
        let pts = (0..400)
            .map(|i| {
                let c = &centers[i % 2];
                c + Vector::from_fn(2, |_, _| { let e: f64 = StandardNormal.sample(&mut rng); 0.3 * e })
            })
            .collect();
        (pts, centers)
    }

    #[test]
    fn single_component_is_sample_moments() {
        let (pts, _) = blobs(1);
        let gmm = fit_gmm(&pts, 1, 3, 50).unwrap();
        let (mean, cov) = weighted_moments(&Mat::from_columns(&pts), &vec![1.0; pts.len()]);
        let c = &gmm.components[0];
        assert!((c.weight - 1.0).abs() < 1e-12);
        assert!((&c.mean - mean).amax() < 1e-12);
        assert!((&c.covariance - cov).amax() < 1e-10);
    }

    #[test]
    fn recovers_separated_means() {
        let (pts, centers) = blobs(2);
        let gmm = fit_gmm(&pts, 2, 11, 100).unwrap();
        for c in &centers {
            let best = gmm.components.iter().map(|g| (&g.mean - c).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 0.05, "{best}");
        }
    }

    #[test]
    fn too_few_tuples_is_rejected() {
        let pts = vec![Vector::zeros(2); 3];
        assert!(fit_gmm(&pts, 4, 0, 10).is_err());
        assert!(fit_gmm(&pts, 0, 0, 10).is_err());
    }

    #[test]
    fn duplicated_points_do_not_break_em() {
        let pts = vec![Vector::from_vec(vec![1.0, 2.0]); 10];
        let gmm = fit_gmm(&pts, 3, 0, 20).unwrap();
        let w: f64 = gmm.components.iter().map(|c| c.weight).sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!(gmm.log_likelihood().is_finite());
    }

    #[test]
    fn moments_at_single_component_are_the_component() {
        let (pts, _) = blobs(4);
        let gmm = fit_gmm(&pts, 1, 0, 10).unwrap();
        let (m, c) = gmm.moments_at(&pts[0]);
        assert!((&m - &gmm.components[0].mean).amax() < 1e-12);
        assert!((&c - &gmm.components[0].covariance).amax() < 1e-12);
    }
}
