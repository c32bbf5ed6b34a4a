//! Back-propagation through the unrolled prediction loop.
//!
//! With `R(t) = g(P(t-1))` and `P(t) = f(X, R(t))`, the loss gradient flows
//! from `P(t)` to `P(t-1)` only along edges:
//!
//! ```text
//! delta_j(t-1) = sum_{i in N(j)} delta_i(t) * dp_i(t)/dr_i(t) * dr_i(t)/dp_j(t-1)
//! ```
//!
//! The first factor is block diagonal over nodes and the second has the
//! block sparsity of the adjacency matrix, so one step costs `O(|E| k^2)`.

use ndarray::{Array2, Axis};

use crate::error::{dim_err, Result};
use crate::graphdata::Adjacency;
use crate::inference::UnrollTrace;
use crate::localclf::{score_gradient, Classifier, DeltaMatrix, ParamMatrix};
use crate::relfeat::{node_block, Aggregator};

fn check_trace(trace: &UnrollTrace, n: usize, k: usize) -> Result<()> {
    if trace.predictions.len() != trace.relationals.len() + 1 {
        return Err(dim_err(format!(
            "trace holds {} prediction and {} relational matrices",
            trace.predictions.len(),
            trace.relationals.len()
        )));
    }
    if trace.relationals.is_empty() {
        return Err(dim_err("trace has no iterations"));
    }
    let bad = trace
        .predictions
        .iter()
        .chain(&trace.relationals)
        .any(|m| m.dim() != (n, k));
    if bad {
        return Err(dim_err(format!("trace matrices must all be {n} x {k}")));
    }
    Ok(())
}

/// Loss gradients `Delta(t) = dL/dP(t)` for every iteration, given
/// `delta_final = dL/dP(T)`.
///
/// Element `t - 1` of the result holds `Delta(t)`, so the last element is
/// `delta_final` itself.
pub fn rcc_backprop(
    trace: &UnrollTrace,
    delta_final: &DeltaMatrix,
    adjacency: &Adjacency,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
) -> Result<Vec<DeltaMatrix>> {
    let n = adjacency.n();
    let k = params.k();
    check_trace(trace, n, k)?;
    if delta_final.dim() != (n, k) {
        return Err(dim_err("final delta must be n x k"));
    }
    let steps = trace.steps();
    let theta_r_t = params.relational_block().t().to_owned();

    let mut deltas = vec![delta_final.clone()];
    for t in (2..=steps).rev() {
        let upstream = deltas.last().expect("non-empty");
        // dL/dR(t), row i = delta_i(t) * dp_i(t)/dr_i(t)
        let dscores = score_gradient(classifier, &trace.predictions[t], upstream);
        let drel = dscores.dot(&theta_r_t);

        let relational = &trace.relationals[t - 1];
        let blocks: Vec<_> = (0..n)
            .map(|i| node_block(aggregator, adjacency.degree(i), relational.row(i)))
            .collect();
        let mut previous = Array2::zeros((n, k));
        for (j, mut row) in previous.rows_mut().into_iter().enumerate() {
            for &i in adjacency.neighbors(j) {
                blocks[i].accumulate(drel.row(i), row.view_mut());
            }
        }
        deltas.push(previous);
    }
    deltas.reverse();
    Ok(deltas)
}

/// `dL/dTheta = sum_t Delta(t) f'_t(Theta)`, plus the gradient of
/// `(lambda / 2) ||Theta||^2` (bias row excluded).
pub fn rcc_parameter_gradient(
    trace: &UnrollTrace,
    deltas: &[DeltaMatrix],
    features: &Array2<f64>,
    classifier: Classifier,
    params: &ParamMatrix,
    lambda: f64,
) -> Result<Array2<f64>> {
    let n = features.nrows();
    let k = params.k();
    let d = params.d();
    check_trace(trace, n, k)?;
    if deltas.len() != trace.steps() {
        return Err(dim_err(format!(
            "{} deltas for {} iterations",
            deltas.len(),
            trace.steps()
        )));
    }
    if features.ncols() != d {
        return Err(dim_err("feature width does not match parameters"));
    }

    // X^T and the bias row see the same input every step, so their
    // contributions are summed over t before the product.
    let mut dscores_total = Array2::<f64>::zeros((n, k));
    let mut grad = Array2::<f64>::zeros((d + 1 + k, k));
    for (t, delta) in deltas.iter().enumerate() {
        if delta.dim() != (n, k) {
            return Err(dim_err("every delta must be n x k"));
        }
        let dscores = score_gradient(classifier, &trace.predictions[t + 1], delta);
        let rel_grad = trace.relationals[t].t().dot(&dscores);
        grad.slice_mut(ndarray::s![d + 1.., ..]).scaled_add(1.0, &rel_grad);
        dscores_total += &dscores;
    }
    grad.slice_mut(ndarray::s![..d, ..])
        .assign(&features.t().dot(&dscores_total));
    grad.row_mut(d).assign(&dscores_total.sum_axis(Axis(0)));
    params.add_l2_gradient(&mut grad, lambda);
    Ok(grad)
}
