//! XNNTab: an interpretable MLP for tabular data.
//!
//! Training runs in four steps. An MLP is trained with cross-entropy and an
//! L1 penalty; a tied-weight sparse autoencoder decomposes its penultimate
//! representation into dictionary features; the decision layer is
//! fine-tuned on the SAE reconstructions; finally decoder and decision layer
//! are multiplied into one linear head over the sparse codes. Every
//! dictionary feature is then described by a high-precision decision rule
//! mined from the training rows that activate it most.
//!
//! Module map:
//!
//! - [`data`]: CSV loading, train-fitted encoding, stratified folds
//! - [`nn`]: the MLP, its training, fine-tuning and metrics
//! - [`sae`]: the sparse autoencoder
//! - [`merged`]: the collapsed interpretable predictor
//! - [`rules`]: CART trees and the bagged high-precision rule miner
//! - [`interpret`]: feature semantics, local and global explanations
//! - [`baselines`]: logistic regression and decision-tree baselines
//! - [`experiment`]: configuration, random search and the 5-fold harness
//! - [`artifact`]: versioned JSON artifacts with provenance ids

pub mod artifact;
pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod interpret;
pub mod matrix;
pub mod merged;
pub mod nn;
pub mod optim;
pub mod rules;
pub mod sae;
pub mod seed;

pub use error::{Error, Result};
