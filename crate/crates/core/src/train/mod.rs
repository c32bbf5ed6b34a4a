//! Training: back-propagation through the unrolled prediction loop, the
//! true-label ICA baseline, a local-only baseline, adagrad, and gradient and
//! loss-surface diagnostics.

mod adagrad;
mod backprop;
mod diagnostics;
mod objective;

use crate::error::{arg_err, Result};
use crate::graphdata::{AttributedGraph, GraphView, LabelVector};
use crate::localclf::{Classifier, ParamMatrix};
use crate::relfeat::{aggregate, Aggregator};

pub use crate::inference::UnrollTrace;
pub use crate::localclf::DeltaMatrix;
pub use adagrad::{adagrad_fit, Adagrad, FitResult};
pub use backprop::{rcc_backprop, rcc_parameter_gradient};
pub use diagnostics::{finite_difference_check, loss_cross_section, rcc_gradient_check};
pub use objective::{FixedInputObjective, Objective, RccObjective};

/// Regularization strengths swept by default.
pub const LAMBDA_GRID: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Unroll length `T` for the recurrent objective.
    pub unroll: usize,
    pub eta: f64,
    pub iterations: usize,
    /// L2 strength; the bias row is not penalized.
    pub lambda: f64,
    /// Seed for data noise and splits; training itself is deterministic.
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            unroll: 10,
            eta: 0.1,
            iterations: 500,
            lambda: 1e-3,
            seed: 0,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.unroll == 0 {
            return Err(arg_err("unroll length must be at least 1"));
        }
        if !(self.eta > 0.0) || !(self.epsilon > 0.0) || !(self.lambda >= 0.0) {
            return Err(arg_err("eta and epsilon must be positive, lambda non-negative"));
        }
        Ok(())
    }
}

fn require_labels(graph: &AttributedGraph) -> Result<&LabelVector> {
    graph
        .labels()
        .ok_or_else(|| arg_err("training requires a labeled graph"))
}

/// Fits parameters by back-propagating the final-step loss through the
/// whole unroll.
pub fn train_rcc(
    graph: &AttributedGraph,
    classifier: Classifier,
    aggregator: Aggregator,
    config: &TrainConfig,
) -> Result<FitResult> {
    config.validate()?;
    let labels = require_labels(graph)?;
    let objective = RccObjective {
        adjacency: graph.adjacency(),
        features: graph.features(),
        labels,
        classifier,
        aggregator,
        unroll: config.unroll,
        lambda: config.lambda,
    };
    adagrad_fit(&objective, ParamMatrix::zeros(graph.d(), labels.k()), config)
}

/// Classical training: relational features are computed once from the true
/// labels and treated as fixed inputs.
pub fn train_ica_baseline(
    graph: &AttributedGraph,
    classifier: Classifier,
    aggregator: Aggregator,
    config: &TrainConfig,
) -> Result<FitResult> {
    config.validate()?;
    let labels = require_labels(graph)?;
    let relational = aggregate(aggregator, &labels.one_hot(), graph.adjacency())?;
    let objective = FixedInputObjective {
        features: graph.features(),
        relational,
        labels,
        classifier,
        lambda: config.lambda,
    };
    adagrad_fit(&objective, ParamMatrix::zeros(graph.d(), labels.k()), config)
}

/// Local features only; the relational block stays exactly zero.
pub fn train_local(
    graph: &AttributedGraph,
    classifier: Classifier,
    config: &TrainConfig,
) -> Result<FitResult> {
    config.validate()?;
    let labels = require_labels(graph)?;
    let objective = FixedInputObjective {
        features: graph.features(),
        relational: ndarray::Array2::zeros((graph.n(), labels.k())),
        labels,
        classifier,
        lambda: config.lambda,
    };
    adagrad_fit(&objective, ParamMatrix::zeros(graph.d(), labels.k()), config)
}
