//! Zero-shot learning with adaptive structural embedding.
//!
//! The crate learns a bilinear compatibility matrix `V` between visual
//! features and class semantic vectors from labelled seen classes, then
//! recognises unseen classes through their semantic vectors alone.
//!
//! * [`aste`]: bilinear scoring, adaptive-margin loss and the stochastic CCCP trainer.
//! * [`spass`] and [`taste`]: self-paced pseudo-label selection and the
//!   transductive retraining loop over unlabelled unseen data.
//! * [`fast_training`]: class-mean condensation of the training set.
//! * [`baselines`]: closed-form ridge regression and ESZSL.
//! * [`eval`]: per-class accuracy, multi-trial reports, FT benchmarking and subsampling sweeps.
//! * [`data_io`]: text matrix/label/manifest formats and a synthetic data generator.

pub mod aste;
pub mod baselines;
pub mod data_io;
pub mod error;
pub mod eval;
pub mod fast_training;
pub mod gradcheck;
pub mod spass;
pub mod taste;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    one_hot, validate_pair, validate_parts, CompatibilityModel, Dataset, LabelVector,
    SemanticMatrix, TrainConfig, ValidationReport, Violation,
};
