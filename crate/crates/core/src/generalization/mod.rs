//! Generalizing beyond single local controllers: nearest-neighbor libraries
//! and behavior-cloned networks.

mod dataset;
mod library;
mod mlp;
mod observe;
mod sweep;

pub use dataset::{generate_cloning_data, CloningDataset, CLONING_NOISE_SIGMA};
pub use library::{nearest_neighbor_select, LibraryEntry, LibraryEntryFile, LibraryFile, LocalPolicyLibrary};
pub use mlp::{mlp_act, train_mlp, DenseLayer, LayerFile, MlpFile, MlpGradient, MlpMeta, MlpPolicy, MlpTrainConfig, MlpTraining};
pub use observe::{observe, ObservationMode, ObservationSpec};
pub use sweep::{
    evaluate_sweep, rollout_mlp, uniform_conditions, ResetMode, SweepCondition, SweepPolicy, SweepResult, SweepSettings,
    TrialRecord, SWEEP_NOISE_SIGMA,
};
