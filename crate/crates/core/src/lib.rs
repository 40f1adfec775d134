//! Churn propensity modelling and causal effect estimation.
//!
//! The crate covers the full workflow: windowed member snapshots, resampling
//! and feature elimination, neural and linear classifiers with voting
//! ensembles, evaluation metrics, model explanation, and backdoor-adjusted
//! effect estimation on a causal graph. [`synth`] provides corpora and causal
//! models with exactly known ground truth; [`pipeline`] chains the stages
//! from a JSON configuration.

pub mod causal;
pub mod dataset;
pub mod error;
pub mod featsel;
pub mod interpret;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod nnet;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod synth;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use models::{Classifier, Model};
