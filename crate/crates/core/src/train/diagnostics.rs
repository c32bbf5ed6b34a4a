use ndarray::Array2;

use crate::error::{dim_err, Result};
use crate::graphdata::{AttributedGraph, GraphView};
use crate::localclf::{Classifier, ParamMatrix};
use crate::relfeat::Aggregator;

use super::{require_labels, Objective, RccObjective};

/// Largest coordinate-wise `|analytic - numeric| / max(1, |numeric|)` between
/// the objective's gradient and central differences with step `step`.
pub fn finite_difference_check(
    objective: &dyn Objective,
    params: &ParamMatrix,
    step: f64,
) -> Result<f64> {
    let (_, analytic) = objective.loss_and_gradient(params)?;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for idx in ndarray::indices(params.theta().dim()) {
        let original = params.theta()[idx];
        probe.theta_mut()[idx] = original + step;
        let plus = objective.loss(&probe)?;
        probe.theta_mut()[idx] = original - step;
        let minus = objective.loss(&probe)?;
        probe.theta_mut()[idx] = original;
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max((analytic[idx] - numeric).abs() / numeric.abs().max(1.0));
    }
    Ok(worst)
}

/// [`finite_difference_check`] on the unregularized recurrent objective.
pub fn rcc_gradient_check(
    graph: &AttributedGraph,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
    unroll: usize,
    step: f64,
) -> Result<f64> {
    let objective = RccObjective {
        adjacency: graph.adjacency(),
        features: graph.features(),
        labels: require_labels(graph)?,
        classifier,
        aggregator,
        unroll,
        lambda: 0.0,
    };
    finite_difference_check(&objective, params, step)
}

/// Recurrent training objective (unrolled loss plus `(lambda / 2) |Theta|^2`,
/// bias excluded) along the line `theta_a + alpha * (theta_b - theta_a)`.
/// `lambda = 0` gives the bare loss.
#[allow(clippy::too_many_arguments)]
pub fn loss_cross_section(
    theta_a: &ParamMatrix,
    theta_b: &ParamMatrix,
    alphas: &[f64],
    graph: &AttributedGraph,
    classifier: Classifier,
    aggregator: Aggregator,
    unroll: usize,
    lambda: f64,
) -> Result<Vec<(f64, f64)>> {
    if theta_a.theta().dim() != theta_b.theta().dim() || theta_a.d() != theta_b.d() {
        return Err(dim_err("cross-section endpoints must have the same shape"));
    }
    let objective = RccObjective {
        adjacency: graph.adjacency(),
        features: graph.features(),
        labels: require_labels(graph)?,
        classifier,
        aggregator,
        unroll,
        lambda,
    };
    let direction: Array2<f64> = theta_b.theta() - theta_a.theta();
    alphas
        .iter()
        .map(|&alpha| {
            let theta = theta_a.theta() + &(&direction * alpha);
            let params = ParamMatrix::from_array(theta, theta_a.d())?;
            Ok((alpha, objective.loss(&params)?))
        })
        .collect()
}
