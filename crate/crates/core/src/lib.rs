//! Recurrent collective classification.
//!
//! Iterative collective classifiers label the nodes of a graph by repeatedly
//! recomputing relational features from the current neighbor predictions and
//! reclassifying every node. This crate treats that loop as an unrolled
//! recurrent computation and trains the local classifier by back-propagating
//! the final loss through every round. The classical true-label ICA trainer,
//! Gibbs-sampling prediction and a local-only baseline are provided for
//! comparison, together with a sweep harness for noise-robustness studies.
//!
//! Module map:
//!
//! - [`graphdata`]: graphs, dataset loaders, synthetic generators, splits and noise.
//! - [`localclf`]: sigmoid and tempered-softmax local classifiers, their Jacobians and loss.
//! - [`relfeat`]: sum, proportion and soft-mode neighbor aggregation.
//! - [`inference`]: the iterative prediction loop, Gibbs sampling and hard labels.
//! - [`train`]: sparse back-propagation through the unroll, adagrad, baselines and diagnostics.
//! - [`experiment`]: metrics, sweeps, CSV output and run configuration.

pub mod error;
pub mod experiment;
pub mod graphdata;
pub mod inference;
pub mod localclf;
pub mod relfeat;
pub mod train;

pub use error::{Error, Result};
