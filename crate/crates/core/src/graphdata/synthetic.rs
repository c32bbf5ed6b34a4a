use std::collections::HashSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Adjacency, AttributedGraph, LabelVector, NodeFeatures};
use crate::error::{arg_err, Result};

/// Distance of each class mean from the origin at `signal = 1`.
pub const CLASS_MEAN_SCALE: f64 = 4.0;

/// Parameters of the planted-homophily generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    /// Feature informativeness in `[0, 1]`; 0 makes features label-independent.
    pub signal: f64,
    pub avg_degree: f64,
    /// When positive, a same-class edge joins a node to one of its
    /// `locality` nearest same-class nodes on each side, in node-index order
    /// around a ring per class. Zero picks the partner uniformly in the class.
    pub locality: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 400,
            k: 3,
            d: 10,
            homophily: 0.9,
            signal: 1.0,
            avg_degree: 4.0,
            locality: 0,
            seed: 0,
        }
    }
}

/// Random graph with planted label homophily and class-conditional Gaussian
/// features.
///
/// Labels are uniform over `k`. Each of `floor(n * avg_degree / 2)` distinct
/// edges joins a same-class pair with probability `homophily` and a
/// different-class pair otherwise (see [`SyntheticConfig::locality`] for how
/// the same-class partner is chosen). Feature `j` of a class-`c` node is
/// `N(signal * CLASS_MEAN_SCALE * [j % k == c], 1)`, so the class means sit
/// on a scaled simplex.
pub fn generate_synthetic_homophily_graph(cfg: &SyntheticConfig) -> Result<AttributedGraph> {
    let SyntheticConfig {
        n,
        k,
        d,
        homophily,
        signal,
        avg_degree,
        locality,
        seed,
    } = *cfg;
    if k < 2 || n < k {
        return Err(arg_err(format!("need n >= k >= 2, got n = {n}, k = {k}")));
    }
    if !(0.0..=1.0).contains(&homophily) || !(0.0..=1.0).contains(&signal) {
        return Err(arg_err("homophily and signal must lie in [0, 1]"));
    }
    if !(avg_degree >= 0.0) {
        return Err(arg_err("avg_degree must be non-negative"));
    }
    let m = (n as f64 * avg_degree / 2.0).floor() as usize;
    if m > n * (n - 1) / 2 {
        return Err(arg_err(format!(
            "avg_degree {avg_degree} needs {m} edges but only {} pairs exist",
            n * (n - 1) / 2
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut rank = vec![0; n];
    for (i, &y) in labels.iter().enumerate() {
        rank[i] = members[y].len();
        members[y].push(i);
    }

    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    let budget = 100 * m + 1000;
    let mut attempts = 0;
    while edges.len() < m {
        attempts += 1;
        if attempts > budget {
            return Err(arg_err(format!(
                "could not place {m} distinct edges (avg_degree {avg_degree} too large for this label split)"
            )));
        }
        let u = rng.random_range(0..n);
        let same = rng.random::<f64>() < homophily;
        let v = if same {
            let class = &members[labels[u]];
            if class.len() < 2 {
                continue;
            }
            if locality == 0 {
                class[rng.random_range(0..class.len())]
            } else {
                let offset = rng.random_range(1..=locality) % class.len();
                let step = if rng.random::<bool>() { offset } else { class.len() - offset };
                class[(rank[u] + step) % class.len()]
            }
        } else {
            let v = rng.random_range(0..n);
            if labels[v] == labels[u] {
                continue;
            }
            v
        };
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }

    let mut x = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            let mean = if j % k == labels[i] {
                signal * CLASS_MEAN_SCALE
            } else {
                0.0
            };
            let z: f64 = rng.sample(StandardNormal);
            x[[i, j]] = mean + z;
        }
    }

    AttributedGraph::new(
        Adjacency::from_edges(n, edges)?,
        NodeFeatures::new(x)?,
        Some(LabelVector::new(labels, k)?),
    )
}
