//! Sequence estimator: a sparse-attention encoder/decoder with a Student-t
//! output head, trained by negative log-likelihood on a self-contained
//! reverse-mode gradient engine.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod params;
pub mod tape;
pub mod train;

pub use adam::Adam;
pub use attention::{probsparse_attention, query_budget, sparsity_measure};
pub use checkpoint::{load_checkpoint, save_checkpoint, MlCheckpoint};
pub use loss::{studentt_nll, studentt_nll_scalar};
pub use model::{predict_with_uncertainty, Model, ModelConfig, StudentTParams};
pub use train::{train_ml, EpochStats, TrainLog, TrainOptions};
