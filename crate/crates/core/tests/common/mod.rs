//! Reference implementations for integration tests: a dense, loop-based
//! forward pass and the full-matrix chain rule, written without the crate's
//! sparse machinery.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcc::graphdata::{Adjacency, AttributedGraph, GraphView, LabelVector, NodeFeatures};
use rcc::localclf::{Classifier, ParamMatrix};
use rcc::relfeat::Aggregator;

/// Erdos-Renyi graph with Gaussian features and uniform labels.
pub fn random_graph(n: usize, d: usize, k: usize, edge_prob: f64, seed: u64) -> AttributedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < edge_prob {
                edges.push((i, j));
            }
        }
    }
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let y = (0..n).map(|_| rng.random_range(0..k)).collect();
    AttributedGraph::new(
        Adjacency::from_edges(n, edges).unwrap(),
        NodeFeatures::new(x).unwrap(),
        Some(LabelVector::new(y, k).unwrap()),
    )
    .unwrap()
}

pub fn random_params(d: usize, k: usize, scale: f64, seed: u64) -> ParamMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = Array2::from_shape_fn((d + 1 + k, k), |_| rng.random_range(-scale..scale));
    ParamMatrix::from_array(theta, d).unwrap()
}

fn softmax(v: &[f64], tau: f64) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| ((x - m) / tau).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn activate(classifier: Classifier, scores: &[f64]) -> Vec<f64> {
    match classifier {
        Classifier::Sigmoid => scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect(),
        Classifier::Softmax { temperature } => softmax(scores, temperature),
    }
}

/// Dense relational features; rows of isolated nodes are zero.
pub fn dense_aggregate(aggregator: Aggregator, adj: &Adjacency, p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = p[0].len();
    (0..adj.n())
        .map(|i| {
            let nbrs: Vec<usize> = (0..adj.n()).filter(|&j| adj.has_edge(i, j)).collect();
            if nbrs.is_empty() {
                return vec![0.0; k];
            }
            let sum: Vec<f64> = (0..k).map(|c| nbrs.iter().map(|&j| p[j][c]).sum()).collect();
            match aggregator {
                Aggregator::Sum => sum,
                Aggregator::Proportion => sum.iter().map(|v| v / nbrs.len() as f64).collect(),
                Aggregator::Mode { temperature } => softmax(&sum, temperature),
            }
        })
        .collect()
}

pub struct DenseTrace {
    /// `P(0) .. P(T)`.
    pub p: Vec<Vec<Vec<f64>>>,
    /// `R(1) .. R(T)`.
    pub r: Vec<Vec<Vec<f64>>>,
}

/// Unrolled prediction from `P(0) = 0`.
pub fn dense_forward(
    graph: &AttributedGraph,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
    steps: usize,
) -> DenseTrace {
    let n = graph.n();
    let (d, k) = (params.d(), params.k());
    let theta = params.theta();
    let x = graph.features().matrix();
    let mut trace = DenseTrace { p: vec![vec![vec![0.0; k]; n]], r: Vec::new() };
    for _ in 0..steps {
        let r = dense_aggregate(aggregator, graph.adjacency(), trace.p.last().unwrap());
        let p = (0..n)
            .map(|i| {
                let scores: Vec<f64> = (0..k)
                    .map(|c| {
                        let mut s = theta[[d, c]];
                        for a in 0..d {
                            s += x[[i, a]] * theta[[a, c]];
                        }
                        for m in 0..k {
                            s += r[i][m] * theta[[d + 1 + m, c]];
                        }
                        s
                    })
                    .collect();
                activate(classifier, &scores)
            })
            .collect();
        trace.r.push(r);
        trace.p.push(p);
    }
    trace
}

/// Mean cross-entropy of the final predictions (no clamping).
pub fn dense_loss(classifier: Classifier, p: &[Vec<f64>], y: &[usize]) -> f64 {
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(row, &yi)| match classifier {
            Classifier::Softmax { .. } => -row[yi].ln(),
            Classifier::Sigmoid => row
                .iter()
                .enumerate()
                .map(|(c, &v)| if c == yi { -v.ln() } else { -(1.0 - v).ln() })
                .sum(),
        })
        .sum();
    total / p.len() as f64
}

fn loss_gradient(classifier: Classifier, p: &[Vec<f64>], y: &[usize]) -> Vec<f64> {
    let n = p.len();
    let k = p[0].len();
    let mut g = vec![0.0; n * k];
    for i in 0..n {
        for c in 0..k {
            g[i * k + c] = match classifier {
                Classifier::Softmax { .. } if c == y[i] => -1.0 / (n as f64 * p[i][c]),
                Classifier::Softmax { .. } => 0.0,
                Classifier::Sigmoid if c == y[i] => -1.0 / (n as f64 * p[i][c]),
                Classifier::Sigmoid => 1.0 / (n as f64 * (1.0 - p[i][c])),
            };
        }
    }
    g
}

/// `dp_i / ds_i` as a `k x k` matrix.
fn activation_jacobian(classifier: Classifier, p: &[f64]) -> Vec<Vec<f64>> {
    let k = p.len();
    (0..k)
        .map(|a| {
            (0..k)
                .map(|b| match classifier {
                    Classifier::Sigmoid => if a == b { p[a] * (1.0 - p[a]) } else { 0.0 },
                    Classifier::Softmax { temperature } => {
                        ((if a == b { p[a] } else { 0.0 }) - p[a] * p[b]) / temperature
                    }
                })
                .collect()
        })
        .collect()
}

/// Full `nk x nk` matrix `dP(t) / dP(t-1)`, indexed `[(i, c)][(j, c')]`.
pub fn dense_step_jacobian(
    graph: &AttributedGraph,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
    p_now: &[Vec<f64>],
    r_now: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = graph.n();
    let (d, k) = (params.d(), params.k());
    let theta = params.theta();
    let adj = graph.adjacency();
    let mut jac = vec![vec![0.0; n * k]; n * k];
    for i in 0..n {
        let act = activation_jacobian(classifier, &p_now[i]);
        // dp_i/dr_i [c][m] = sum_b act[c][b] * theta_r[m][b]
        let dp_dr: Vec<Vec<f64>> = (0..k)
            .map(|c| (0..k).map(|m| (0..k).map(|b| act[c][b] * theta[[d + 1 + m, b]]).sum()).collect())
            .collect();
        let deg = (0..n).filter(|&j| adj.has_edge(i, j)).count();
        for j in 0..n {
            if !adj.has_edge(i, j) {
                continue;
            }
            // dr_i/dp_j [m][c']
            let dr_dp: Vec<Vec<f64>> = (0..k)
                .map(|m| {
                    (0..k)
                        .map(|cp| match aggregator {
                            Aggregator::Sum => if m == cp { 1.0 } else { 0.0 },
                            Aggregator::Proportion => if m == cp { 1.0 / deg as f64 } else { 0.0 },
                            Aggregator::Mode { temperature } => {
                                let r = &r_now[i];
                                ((if m == cp { r[m] } else { 0.0 }) - r[m] * r[cp]) / temperature
                            }
                        })
                        .collect()
                })
                .collect();
            for c in 0..k {
                for cp in 0..k {
                    jac[i * k + c][j * k + cp] = (0..k).map(|m| dp_dr[c][m] * dr_dp[m][cp]).sum();
                }
            }
        }
    }
    jac
}

/// Flattened `dL/dP(T)` of the mean cross-entropy.
pub fn dense_loss_gradient(graph: &AttributedGraph, classifier: Classifier, trace: &DenseTrace) -> Vec<f64> {
    loss_gradient(classifier, trace.p.last().unwrap(), graph.labels().unwrap().as_slice())
}

/// `Delta(T) .. Delta(1)` in flattened form, by repeated dense
/// vector-Jacobian products starting from `delta_final`. Element `t - 1` is
/// `Delta(t)`.
pub fn dense_deltas(
    graph: &AttributedGraph,
    classifier: Classifier,
    aggregator: Aggregator,
    params: &ParamMatrix,
    trace: &DenseTrace,
    delta_final: &[f64],
) -> Vec<Vec<f64>> {
    let steps = trace.r.len();
    let mut deltas = vec![Vec::new(); steps];
    deltas[steps - 1] = delta_final.to_vec();
    for t in (2..=steps).rev() {
        let jac = dense_step_jacobian(graph, classifier, aggregator, params, &trace.p[t], &trace.r[t - 1]);
        let upstream = &deltas[t - 1];
        let nk = upstream.len();
        deltas[t - 2] = (0..nk).map(|col| (0..nk).map(|row| upstream[row] * jac[row][col]).sum()).collect();
    }
    deltas
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, c)| rows[i][c])
}

pub fn flat_to_matrix(flat: &[f64], k: usize) -> Array2<f64> {
    Array2::from_shape_vec((flat.len() / k, k), flat.to_vec()).unwrap()
}

pub fn classifiers() -> [Classifier; 2] {
    [Classifier::Sigmoid, Classifier::Softmax { temperature: 0.5 }]
}

pub fn aggregators() -> [Aggregator; 3] {
    [Aggregator::Sum, Aggregator::Proportion, Aggregator::Mode { temperature: 0.5 }]
}
