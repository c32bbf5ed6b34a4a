//! Collective prediction: the synchronous iterative loop, Gibbs sampling and
//! hard-label extraction.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, Result};
use crate::graphdata::{Adjacency, GraphView, LabelVector, NodeFeatures};
use crate::localclf::{forward_from_local, local_scores, tempered_softmax_inplace, Classifier, ParamMatrix, PredictionMatrix};
use crate::relfeat::{aggregate, Aggregator, RelationalMatrix};

/// Starting estimate `P(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Zeros,
    /// Every entry `1 / k`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceConfig {
    /// Number of unrolled iterations `T`.
    pub iterations: usize,
    pub init: Init,
    /// Stop once `max |P(t) - P(t-1)| < tol`. Leave `None` when the trace is
    /// used for back-propagation.
    pub tolerance: Option<f64>,
    /// Gibbs sampling only.
    pub seed: u64,
    pub burn_in: usize,
    pub samples: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            iterations: 10,
            init: Init::Uniform,
            tolerance: None,
            seed: 0,
            burn_in: 100,
            samples: 1000,
        }
    }
}

impl InferenceConfig {
    /// The configuration used during training: zero start, no early stop.
    pub fn unrolled(iterations: usize) -> Self {
        InferenceConfig {
            iterations,
            init: Init::Zeros,
            ..Default::default()
        }
    }
}

/// Everything the forward loop computed: `P(0) ... P(T)` and `R(1) ... R(T)`,
/// where `R(t) = g(P(t-1))` and `P(t) = f(X, R(t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnrollTrace {
    pub predictions: Vec<PredictionMatrix>,
    pub relationals: Vec<RelationalMatrix>,
}

impl UnrollTrace {
    /// Number of executed iterations.
    pub fn steps(&self) -> usize {
        self.relationals.len()
    }

    pub fn final_predictions(&self) -> &PredictionMatrix {
        self.predictions.last().expect("trace always holds P(0)")
    }
}

fn check_params(adjacency: &Adjacency, features: &NodeFeatures, params: &ParamMatrix) -> Result<()> {
    if features.d() != params.d() {
        return Err(dim_err(format!(
            "graph has {} features but parameters expect {}",
            features.d(),
            params.d()
        )));
    }
    if features.n() != adjacency.n() {
        return Err(dim_err("feature rows do not match node count"));
    }
    Ok(())
}

/// Iterative classification: `R(t) <- g(P(t-1))`, `P(t) <- f(X, R(t))` for
/// `t = 1..T`, all nodes updated synchronously.
pub fn ica_predict<G: GraphView>(
    graph: &G,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
    config: &InferenceConfig,
) -> Result<(PredictionMatrix, UnrollTrace)> {
    ica_predict_parts(
        graph.adjacency(),
        graph.features(),
        classifier,
        aggregator,
        params,
        config,
    )
}

/// [`ica_predict`] on bare components.
pub fn ica_predict_parts(
    adjacency: &Adjacency,
    features: &NodeFeatures,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
    config: &InferenceConfig,
) -> Result<(PredictionMatrix, UnrollTrace)> {
    check_params(adjacency, features, params)?;
    let n = adjacency.n();
    let k = params.k();
    let start = match config.init {
        Init::Zeros => Array2::zeros((n, k)),
        Init::Uniform => Array2::from_elem((n, k), 1.0 / k as f64),
    };
    let local = local_scores(features.matrix(), params);
    let mut trace = UnrollTrace {
        predictions: vec![start],
        relationals: Vec::with_capacity(config.iterations),
    };
    for _ in 0..config.iterations {
        let previous = trace.final_predictions();
        let relational = aggregate(aggregator, previous, adjacency)?;
        let next = forward_from_local(classifier, &local, &relational, params);
        let change = next
            .iter()
            .zip(previous.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.relationals.push(relational);
        trace.predictions.push(next);
        if config.tolerance.is_some_and(|tol| change < tol) {
            break;
        }
    }
    Ok((trace.final_predictions().clone(), trace))
}

/// Local-only prediction `f(X, 0)`.
pub fn local_predict<G: GraphView>(
    graph: &G,
    classifier: Classifier,
    params: &ParamMatrix,
) -> Result<PredictionMatrix> {
    check_params(graph.adjacency(), graph.features(), params)?;
    let n = graph.adjacency().n();
    let local = local_scores(graph.features().matrix(), params);
    Ok(forward_from_local(
        classifier,
        &local,
        &Array2::zeros((n, params.k())),
        params,
    ))
}

/// Gibbs-sampling collective prediction.
///
/// Each node holds a hard label. A sweep visits nodes in ascending order,
/// recomputes the node's class distribution from the one-hot labels of its
/// neighbors and resamples its label. Sigmoid outputs are normalized into a
/// distribution before sampling. Labels start at the argmax of `f(X, g(0))`.
/// Returns label frequencies over `samples` sweeps after `burn_in` sweeps.
pub fn gibbs_predict<G: GraphView>(
    graph: &G,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
    config: &InferenceConfig,
) -> Result<PredictionMatrix> {
    check_params(graph.adjacency(), graph.features(), params)?;
    let adjacency = graph.adjacency();
    let n = adjacency.n();
    let k = params.k();
    let local = local_scores(graph.features().matrix(), params);
    let theta_r = params.relational_block();

    let bootstrap = {
        let r0 = aggregate(aggregator, &Array2::zeros((n, k)), adjacency)?;
        forward_from_local(classifier, &local, &r0, params)
    };
    let mut labels: Vec<usize> = hard_labels(&bootstrap).as_slice().to_vec();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut counts = Array2::<f64>::zeros((n, k));
    let mut relational = Array1::<f64>::zeros(k);
    let mut probs = Array1::<f64>::zeros(k);
    let samples = config.samples.max(1);
    for sweep in 0..config.burn_in + samples {
        for i in 0..n {
            let neighbors = adjacency.neighbors(i);
            relational.fill(0.0);
            if !neighbors.is_empty() {
                for &j in neighbors {
                    relational[labels[j]] += 1.0;
                }
                match aggregator {
                    Aggregator::Sum => {}
                    Aggregator::Proportion => {
                        let inv = 1.0 / neighbors.len() as f64;
                        relational.mapv_inplace(|v| v * inv);
                    }
                    Aggregator::Mode { temperature } => {
                        tempered_softmax_inplace(relational.view_mut(), temperature)
                    }
                }
            }
            probs.assign(&local.row(i));
            probs += &relational.dot(&theta_r);
            match classifier {
                Classifier::Sigmoid => probs.mapv_inplace(|s| 1.0 / (1.0 + (-s).exp())),
                Classifier::Softmax { temperature } => {
                    tempered_softmax_inplace(probs.view_mut(), temperature)
                }
            }
            labels[i] = sample_index(&mut rng, probs.as_slice().expect("contiguous"));
        }
        if sweep >= config.burn_in {
            for (i, &y) in labels.iter().enumerate() {
                counts[[i, y]] += 1.0;
            }
        }
    }
    counts.mapv_inplace(|c| c / samples as f64);
    Ok(counts)
}

/// Draws an index with probability proportional to `weights`.
fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (c, &w) in weights.iter().enumerate() {
        if u < w {
            return c;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn hard_labels(predictions: &PredictionMatrix) -> LabelVector {
    let labels = predictions
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    LabelVector::from_parts(labels, predictions.ncols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::AttributedGraph;
    use crate::localclf::classifier_forward;
    use ndarray::{array, s};

    fn graph(n: usize, edges: &[(usize, usize)], d: usize, seed: u64) -> AttributedGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AttributedGraph::new(
            Adjacency::from_edges(n, edges.iter().copied()).unwrap(),
            NodeFeatures::new(Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0)))
                .unwrap(),
            None,
        )
        .unwrap()
    }

    fn params(d: usize, k: usize, seed: u64) -> ParamMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParamMatrix::from_array(
            Array2::from_shape_fn((d + 1 + k, k), |_| rng.random_range(-1.5..1.5)),
            d,
        )
        .unwrap()
    }

    const CLASSIFIERS: [Classifier; 2] = [Classifier::Sigmoid, Classifier::Softmax { temperature: 0.5 }];
    const AGGREGATORS: [Aggregator; 3] = [
        Aggregator::Sum,
        Aggregator::Proportion,
        Aggregator::Mode { temperature: 0.5 },
    ];

    fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (i, (i + 1) % n)).chain([(0, n / 2)]).collect()
    }

    #[test]
    fn severed_relational_path_gives_local_prediction() {
        let g = graph(8, &cycle_edges(8), 3, 1);
        let mut p = params(3, 3, 2);
        p.theta_mut().slice_mut(s![4.., ..]).fill(0.0);
        for clf in CLASSIFIERS {
            let local = local_predict(&g, clf, &p).unwrap();
            for agg in AGGREGATORS {
                for t in [1, 4] {
                    let cfg = InferenceConfig { iterations: t, ..Default::default() };
                    let (out, _) = ica_predict(&g, clf, agg, &p, &cfg).unwrap();
                    assert_eq!(out, local);
                }
            }
        }
    }

    #[test]
    fn first_step_from_zeros() {
        let g = graph(6, &cycle_edges(6), 2, 3);
        let p = params(2, 3, 4);
        let (out, trace) =
            ica_predict(&g, Classifier::Sigmoid, Aggregator::Sum, &p, &InferenceConfig::unrolled(1)).unwrap();
        let direct = classifier_forward(Classifier::Sigmoid, g.features().matrix(), &Array2::zeros((6, 3)), &p).unwrap();
        assert_eq!(out, direct);
        assert_eq!(trace.steps(), 1);
        assert_eq!(trace.predictions.len(), 2);
    }

    #[test]
    fn edgeless_graph_matches_local_classifier() {
        let g = graph(5, &[], 3, 5);
        let p = params(3, 2, 6);
        for clf in CLASSIFIERS {
            let local = local_predict(&g, clf, &p).unwrap();
            for agg in AGGREGATORS {
                let (out, _) = ica_predict(&g, clf, agg, &p, &InferenceConfig::default()).unwrap();
                assert_eq!(out, local);
            }
        }
    }

    #[test]
    fn trace_replays_bitwise() {
        let g = graph(10, &cycle_edges(10), 4, 7);
        let p = params(4, 3, 8);
        for clf in CLASSIFIERS {
            for agg in AGGREGATORS {
                let (_, trace) = ica_predict(&g, clf, agg, &p, &InferenceConfig::unrolled(5)).unwrap();
                for t in 1..=trace.steps() {
                    let r = aggregate(agg, &trace.predictions[t - 1], g.adjacency()).unwrap();
                    assert_eq!(r, trace.relationals[t - 1]);
                    let replay = classifier_forward(clf, g.features().matrix(), &r, &p).unwrap();
                    let same = replay
                        .iter()
                        .zip(trace.predictions[t].iter())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                    assert!(same, "{clf}/{agg} step {t}");
                }
            }
        }
    }

    #[test]
    fn early_stopping_truncates_trace() {
        let g = graph(10, &cycle_edges(10), 4, 9);
        let mut p = params(4, 3, 10);
        p.theta_mut().slice_mut(s![5.., ..]).mapv_inplace(|v| v * 0.1);
        let cfg = InferenceConfig { iterations: 200, tolerance: Some(1e-6), ..Default::default() };
        let (_, trace) = ica_predict(&g, Classifier::Sigmoid, Aggregator::Proportion, &p, &cfg).unwrap();
        assert!(trace.steps() < 200);
    }

    #[test]
    fn dimension_mismatch() {
        let g = graph(4, &[], 3, 1);
        let p = params(2, 3, 1);
        assert!(ica_predict(&g, Classifier::Sigmoid, Aggregator::Sum, &p, &InferenceConfig::default()).is_err());
        assert!(gibbs_predict(&g, Classifier::Sigmoid, Aggregator::Sum, &p, &InferenceConfig::default()).is_err());
    }

    #[test]
    fn hard_label_rules() {
        let p = array![[0.0, 1.0, 0.0], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.2, 0.5, 0.3]];
        assert_eq!(hard_labels(&p).as_slice(), &[1, 0, 1]);
        assert_eq!(hard_labels(&p).k(), 3);
    }

    #[test]
    fn gibbs_without_relational_weights_matches_local_distribution() {
        let n = 50;
        let g = graph(n, &cycle_edges(n), 3, 11);
        let clf = Classifier::Softmax { temperature: 1.0 };
        let mut p = params(3, 3, 12);
        p.theta_mut().slice_mut(s![4.., ..]).fill(0.0);
        let cfg = InferenceConfig { samples: 2000, burn_in: 10, seed: 3, ..Default::default() };
        let freq = gibbs_predict(&g, clf, Aggregator::Proportion, &p, &cfg).unwrap();
        let exact = local_predict(&g, clf, &p).unwrap();
        for i in 0..n {
            let tv: f64 = 0.5 * freq.row(i).iter().zip(exact.row(i)).map(|(a, b)| (a - b).abs()).sum::<f64>();
            assert!(tv < 0.05, "node {i}: tv {tv}");
            assert!((freq.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_is_seeded() {
        let g = graph(12, &cycle_edges(12), 3, 13);
        let p = params(3, 3, 14);
        let cfg = InferenceConfig { samples: 50, burn_in: 5, seed: 99, ..Default::default() };
        for agg in AGGREGATORS {
            let a = gibbs_predict(&g, Classifier::Sigmoid, agg, &p, &cfg).unwrap();
            let b = gibbs_predict(&g, Classifier::Sigmoid, agg, &p, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gibbs_symmetric_pair_has_equal_marginals() {
        // two linked nodes with identical features and a symmetric model
        let g = AttributedGraph::new(
            Adjacency::from_edges(2, [(0, 1)]).unwrap(),
            NodeFeatures::new(array![[0.3], [0.3]]).unwrap(),
            None,
        )
        .unwrap();
        let theta = array![[0.5, -0.5], [0.1, 0.0], [1.0, -0.4], [-0.4, 1.0]];
        let p = ParamMatrix::from_array(theta, 1).unwrap();
        for seed in 0..10 {
            let cfg = InferenceConfig { samples: 20_000, burn_in: 100, seed, ..Default::default() };
            let freq = gibbs_predict(&g, Classifier::Softmax { temperature: 1.0 }, Aggregator::Sum, &p, &cfg).unwrap();
            assert!((freq[[0, 0]] - freq[[1, 0]]).abs() < 0.02, "seed {seed}: {freq}");
        }
    }
}
