use ndarray::Array2;

use crate::error::{dim_err, Result};
use crate::graphdata::{Adjacency, LabelVector, NodeFeatures};
use crate::inference::{ica_predict_parts, InferenceConfig};
use crate::localclf::{
    classifier_forward, classifier_param_gradient, cross_entropy_loss_and_grad, Classifier,
    ParamMatrix,
};
use crate::relfeat::Aggregator;

use super::{rcc_backprop, rcc_parameter_gradient};

/// A differentiable training objective over a parameter matrix.
pub trait Objective {
    /// `(d, k)` of the parameter matrices this objective accepts.
    fn dims(&self) -> (usize, usize);

    fn loss(&self, params: &ParamMatrix) -> Result<f64>;

    fn loss_and_gradient(&self, params: &ParamMatrix) -> Result<(f64, Array2<f64>)>;
}

fn check_dims(objective: &impl Objective, params: &ParamMatrix) -> Result<()> {
    if objective.dims() != (params.d(), params.k()) {
        return Err(dim_err(format!(
            "objective expects (d, k) = {:?}, parameters are ({}, {})",
            objective.dims(),
            params.d(),
            params.k()
        )));
    }
    Ok(())
}

/// Cross-entropy of the final prediction of the `T`-step unroll started
/// from zeros, plus `(lambda / 2) ||Theta||^2`.
#[derive(Clone, Debug)]
pub struct RccObjective<'a> {
    pub adjacency: &'a Adjacency,
    pub features: &'a NodeFeatures,
    pub labels: &'a LabelVector,
    pub classifier: Classifier,
    pub aggregator: Aggregator,
    pub unroll: usize,
    pub lambda: f64,
}

impl Objective for RccObjective<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.features.d(), self.labels.k())
    }

    fn loss(&self, params: &ParamMatrix) -> Result<f64> {
        check_dims(self, params)?;
        let (out, _) = ica_predict_parts(
            self.adjacency,
            self.features,
            self.classifier,
            self.aggregator,
            params,
            &InferenceConfig::unrolled(self.unroll),
        )?;
        let (loss, _) = cross_entropy_loss_and_grad(self.classifier, &out, self.labels.as_slice())?;
        Ok(loss + params.l2_penalty(self.lambda))
    }

    fn loss_and_gradient(&self, params: &ParamMatrix) -> Result<(f64, Array2<f64>)> {
        check_dims(self, params)?;
        let (out, trace) = ica_predict_parts(
            self.adjacency,
            self.features,
            self.classifier,
            self.aggregator,
            params,
            &InferenceConfig::unrolled(self.unroll),
        )?;
        let (loss, delta) =
            cross_entropy_loss_and_grad(self.classifier, &out, self.labels.as_slice())?;
        let deltas = rcc_backprop(
            &trace,
            &delta,
            self.adjacency,
            self.classifier,
            self.aggregator,
            params,
        )?;
        let grad = rcc_parameter_gradient(
            &trace,
            &deltas,
            self.features.matrix(),
            self.classifier,
            params,
            self.lambda,
        )?;
        Ok((loss + params.l2_penalty(self.lambda), grad))
    }
}

/// Supervised loss with relational inputs held fixed: the true-label
/// relational features for the ICA baseline, zeros for the local classifier.
#[derive(Clone, Debug)]
pub struct FixedInputObjective<'a> {
    pub features: &'a NodeFeatures,
    pub relational: Array2<f64>,
    pub labels: &'a LabelVector,
    pub classifier: Classifier,
    pub lambda: f64,
}

impl Objective for FixedInputObjective<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.features.d(), self.labels.k())
    }

    fn loss(&self, params: &ParamMatrix) -> Result<f64> {
        check_dims(self, params)?;
        let out = classifier_forward(self.classifier, self.features.matrix(), &self.relational, params)?;
        let (loss, _) = cross_entropy_loss_and_grad(self.classifier, &out, self.labels.as_slice())?;
        Ok(loss + params.l2_penalty(self.lambda))
    }

    fn loss_and_gradient(&self, params: &ParamMatrix) -> Result<(f64, Array2<f64>)> {
        check_dims(self, params)?;
        let x = self.features.matrix();
        let out = classifier_forward(self.classifier, x, &self.relational, params)?;
        let (loss, delta) =
            cross_entropy_loss_and_grad(self.classifier, &out, self.labels.as_slice())?;
        let mut grad = classifier_param_gradient(self.classifier, x, &self.relational, &out, &delta)?;
        params.add_l2_gradient(&mut grad, self.lambda);
        Ok((loss + params.l2_penalty(self.lambda), grad))
    }
}
