//! Channel-learning classifiers for blind SSB index detection: a multilayer
//! perceptron, logistic regression, an RBF support vector classifier, a
//! random forest and a hard-voting ensemble over the four, all behind the
//! [`Classifier`] interface.

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod lbfgs;
pub mod logreg;
pub mod mlp;
pub mod model;
pub mod svc;
pub mod vote;

#[cfg(test)]
mod testutil;

pub use classifier::Classifier;
pub use dataset::{Dataset, Split};
pub use error::{Error, Result};
pub use model::{train, Detector, Model, ModelFile, ModelKind, Provenance, TrainParams};
