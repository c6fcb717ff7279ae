//! The masked autoencoder: parameters, layers, losses, training and
//! inference.

pub mod block;
pub mod checkpoint;
pub mod config;
pub mod diag;
pub mod gradcheck;
pub mod impute;
pub mod loss;
pub mod model;
pub mod ops;
pub mod optim;
pub mod params;
pub mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{batch_size_schedule, BlockKind, LossKind, ModelConfig, ResidualForm, TrainConfig};
pub use diag::{token_mixing_magnitudes, write_magnitudes, MixingMagnitude, Stage};
pub use impute::{fill_missing, imputation_matrix, impute, predict_all};
pub use loss::{pmae_loss, pmae_loss_grad, remasker_loss, remasker_loss_grad};
pub use model::{Architecture, ModelParameters, TokenSource};
pub use optim::{learning_rate, AdamW};
pub use train::{train, train_from, write_loss_curve, EpochLoss, TrainOutcome};
