//! Tabular imputation with proportionally masked autoencoders.
//!
//! The crate is organised around the stages of an imputation experiment:
//!
//! - [`data`]: schema-typed tables, preprocessing (category regrouping,
//!   level encoding, empirical-CDF transform) and synthetic tables.
//! - [`missingness`]: logistic observation models and missing patterns.
//! - [`masking`]: observed proportions and the masking-rate family used to
//!   draw the additional training mask.
//! - [`nn`]: the masked autoencoder (Transformer and Mixer blocks), its
//!   losses, training loop, imputation and checkpoints.
//! - [`baselines`]: mean/mode and k-nearest-neighbour imputers.
//! - [`eval`]: imputation accuracy, RMSE, rank aggregation and the
//!   inverse-propensity diagnostic.
//! - [`bench`]: configuration and execution of benchmark grids.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod masking;
pub mod missingness;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
