mod common;

use common::*;
use ndarray::Array2;
use rcc::graphdata::{generate_synthetic_homophily_graph, Adjacency, AttributedGraph, GraphView, SyntheticConfig};
use rcc::inference::{ica_predict, InferenceConfig};
use rcc::localclf::{classifier_param_gradient, cross_entropy_loss_and_grad, Classifier, ParamMatrix};
use rcc::relfeat::{aggregate, Aggregator};
use rcc::train::{
    rcc_backprop, rcc_gradient_check, rcc_parameter_gradient, train_rcc, Objective, RccObjective,
    TrainConfig,
};

fn library_deltas(
    graph: &AttributedGraph,
    clf: Classifier,
    agg: Aggregator,
    params: &ParamMatrix,
    steps: usize,
) -> (rcc::train::UnrollTrace, Vec<Array2<f64>>) {
    let (out, trace) = ica_predict(graph, clf, agg, params, &InferenceConfig::unrolled(steps)).unwrap();
    let (_, delta) = cross_entropy_loss_and_grad(clf, &out, graph.labels().unwrap().as_slice()).unwrap();
    let deltas = rcc_backprop(&trace, &delta, graph.adjacency(), clf, agg, params).unwrap();
    (trace, deltas)
}

/// Dense deltas seeded with the crate's `Delta(T)`, after checking that seed
/// against the reference loss gradient.
fn dense_reference(
    g: &AttributedGraph,
    clf: Classifier,
    agg: Aggregator,
    params: &ParamMatrix,
    steps: usize,
    delta_final: &Array2<f64>,
) -> Vec<Vec<f64>> {
    let trace = dense_forward(g, clf, agg, params, steps);
    let reference = dense_loss_gradient(g, clf, &trace);
    for (a, b) in delta_final.iter().zip(&reference) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    dense_deltas(g, clf, agg, params, &trace, delta_final.as_slice().unwrap())
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn forward_matches_dense_reference() {
    let g = random_graph(9, 3, 3, 0.35, 1);
    for clf in classifiers() {
        for agg in aggregators() {
            let params = random_params(3, 3, 1.0, 2);
            let dense = dense_forward(&g, clf, agg, &params, 4);
            let (_, trace) = ica_predict(&g, clf, agg, &params, &InferenceConfig::unrolled(4)).unwrap();
            for t in 0..=4 {
                assert!(max_abs_diff(&trace.predictions[t], &to_matrix(&dense.p[t])) < 1e-12);
            }
        }
    }
}

#[test]
fn path_graph_deltas_match_dense_chain_rule() {
    let adj = Adjacency::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let base = random_graph(3, 2, 2, 0.0, 7);
    let g = AttributedGraph::new(adj, base.features().clone(), base.labels().cloned()).unwrap();
    for clf in classifiers() {
        for agg in aggregators() {
            let params = random_params(2, 2, 1.0, 11);
            let (_, deltas) = library_deltas(&g, clf, agg, &params, 3);
            let dense = dense_reference(&g, clf, agg, &params, 3, &deltas[2]);
            for t in 0..3 {
                let diff = max_abs_diff(&deltas[t], &flat_to_matrix(&dense[t], 2));
                assert!(diff < 1e-10, "{clf} {agg} t={} diff={diff}", t + 1);
            }
            let err = rcc_gradient_check(&g, clf, agg, &params, 3, 1e-6).unwrap();
            assert!(err < 1e-4, "{clf} {agg}: {err}");
        }
    }
}

#[test]
fn random_small_graphs_match_dense_chain_rule() {
    for seed in 0..10u64 {
        let n = 2 + (seed as usize % 9);
        let g = random_graph(n, 3, 3, 0.4, 100 + seed);
        for clf in classifiers() {
            for agg in aggregators() {
                let params = random_params(3, 3, 1.0, 200 + seed);
                let (_, deltas) = library_deltas(&g, clf, agg, &params, 4);
                let dense = dense_reference(&g, clf, agg, &params, 4, &deltas[3]);
                for t in 0..4 {
                    let want = flat_to_matrix(&dense[t], 3);
                    let diff = max_abs_diff(&deltas[t], &want);
                    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    assert!(diff < 1e-10, "seed {seed} {clf} {agg} t={} diff={diff} scale={scale}", t + 1);
                }
            }
        }
    }
}

/// Central differences of the dense reference loss, independent of the
/// crate's forward pass.
fn reference_numeric_gradient(
    g: &AttributedGraph,
    clf: Classifier,
    agg: Aggregator,
    params: &ParamMatrix,
    steps: usize,
    lambda: f64,
) -> Array2<f64> {
    let y = g.labels().unwrap().as_slice();
    let d = params.d();
    let objective = |p: &ParamMatrix| {
        let reg: f64 = p
            .theta()
            .indexed_iter()
            .filter(|((row, _), _)| *row != d)
            .map(|(_, v)| v * v)
            .sum::<f64>()
            * lambda
            / 2.0;
        dense_loss(clf, dense_forward(g, clf, agg, p, steps).p.last().unwrap(), y) + reg
    };
    let h = 1e-6;
    let mut probe = params.clone();
    Array2::from_shape_fn(params.theta().dim(), |idx| {
        let v = params.theta()[idx];
        probe.theta_mut()[idx] = v + h;
        let plus = objective(&probe);
        probe.theta_mut()[idx] = v - h;
        let minus = objective(&probe);
        probe.theta_mut()[idx] = v;
        (plus - minus) / (2.0 * h)
    })
}

#[test]
fn parameter_gradient_matches_reference_differences() {
    let g = random_graph(8, 3, 3, 0.4, 31);
    for clf in classifiers() {
        for agg in aggregators() {
            for lambda in [0.0, 0.2] {
                let params = random_params(3, 3, 0.8, 32);
                let objective = RccObjective {
                    adjacency: g.adjacency(),
                    features: g.features(),
                    labels: g.labels().unwrap(),
                    classifier: clf,
                    aggregator: agg,
                    unroll: 3,
                    lambda,
                };
                let (_, analytic) = objective.loss_and_gradient(&params).unwrap();
                let numeric = reference_numeric_gradient(&g, clf, agg, &params, 3, lambda);
                for (a, b) in analytic.iter().zip(numeric.iter()) {
                    assert!((a - b).abs() / b.abs().max(1.0) < 1e-4, "{clf} {agg} {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn single_step_reduces_to_local_classifier_on_initial_features() {
    let g = random_graph(10, 4, 3, 0.3, 41);
    for clf in classifiers() {
        for agg in aggregators() {
            let params = random_params(4, 3, 1.0, 42);
            let (trace, deltas) = library_deltas(&g, clf, agg, &params, 1);
            let recurrent = rcc_parameter_gradient(&trace, &deltas, g.features().matrix(), clf, &params, 0.0).unwrap();
            let r0 = aggregate(agg, &Array2::zeros((10, 3)), g.adjacency()).unwrap();
            let (_, delta) = cross_entropy_loss_and_grad(clf, &trace.predictions[1], g.labels().unwrap().as_slice()).unwrap();
            let local = classifier_param_gradient(clf, g.features().matrix(), &r0, &trace.predictions[1], &delta).unwrap();
            assert!(max_abs_diff(&recurrent, &local) < 1e-13);
        }
    }
}

#[test]
fn every_pair_passes_finite_difference_check() {
    let g = random_graph(20, 5, 3, 0.15, 51);
    for clf in classifiers() {
        for agg in aggregators() {
            for steps in [1, 2, 5] {
                let params = random_params(5, 3, 1.0, 52);
                let err = rcc_gradient_check(&g, clf, agg, &params, steps, 1e-6).unwrap();
                assert!(err < 1e-4, "{clf} {agg} T={steps}: {err}");
            }
        }
    }
}

#[test]
fn accuracy_is_insensitive_to_unroll_length() {
    let g = generate_synthetic_homophily_graph(&SyntheticConfig { n: 300, signal: 0.3, seed: 3, ..Default::default() }).unwrap();
    let y = g.labels().unwrap().as_slice();
    let accuracies: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&steps| {
            let config = TrainConfig { unroll: steps, iterations: 200, ..Default::default() };
            let fit = train_rcc(&g, Classifier::Sigmoid, Aggregator::Proportion, &config).unwrap();
            let (out, _) = ica_predict(&g.unlabeled(), Classifier::Sigmoid, Aggregator::Proportion, &fit.params, &InferenceConfig::unrolled(steps)).unwrap();
            let pred = rcc::inference::hard_labels(&out);
            pred.as_slice().iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
        })
        .collect();
    let spread = accuracies.iter().cloned().fold(f64::MIN, f64::max) - accuracies.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.05, "{accuracies:?}");
}
