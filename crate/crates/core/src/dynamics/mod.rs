//! Time-varying linear-Gaussian dynamics fitted from rollouts.

mod gmm;
mod regression;

pub use gmm::{default_components, fit_gmm, GmmComponent, GmmPrior, COVARIANCE_FLOOR};
pub use regression::{
    condition_gaussian, fit_dynamics, transition_tuples, Conditional, DynamicsDiagnostics, DynamicsFile, DynamicsStep,
    LinearGaussianDynamics, NiwStrength,
};
