use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttributedGraph, GraphView};
use crate::error::{arg_err, Result};

/// Train/test partition of a graph into two disjoint induced subgraphs.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: AttributedGraph,
    pub test: AttributedGraph,
    /// Original indices of the train nodes, ascending.
    pub train_nodes: Vec<usize>,
    /// Original indices of the test nodes, ascending.
    pub test_nodes: Vec<usize>,
}

fn test_count(n: usize, test_fraction: f64) -> Result<usize> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(arg_err(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if n < 2 {
        return Err(arg_err("cannot split a graph with fewer than 2 nodes"));
    }
    let count = (n as f64 * test_fraction - 1e-9).ceil() as usize;
    Ok(count.clamp(1, n - 1))
}

/// Snowball (breadth-first) sampling of `ceil(n * test_fraction)` test nodes
/// from a random start; the rest form the training graph. Cross-split edges
/// are dropped.
pub fn snowball_split(graph: &AttributedGraph, test_fraction: f64, seed: u64) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = test_count(graph.n(), test_fraction)?;
    let start = rng.random_range(0..graph.n());
    Ok(finish(graph, collect(graph, count, start, &mut rng)))
}

/// [`snowball_split`] with a fixed first start node; `seed` only drives
/// restarts when the frontier runs dry.
pub fn snowball_split_from(
    graph: &AttributedGraph,
    test_fraction: f64,
    start: usize,
    seed: u64,
) -> Result<Split> {
    if start >= graph.n() {
        return Err(arg_err(format!("start node {start} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = test_count(graph.n(), test_fraction)?;
    Ok(finish(graph, collect(graph, count, start, &mut rng)))
}

fn collect(graph: &AttributedGraph, count: usize, start: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let adj = graph.adjacency();
    let n = adj.n();
    let mut taken = vec![false; n];
    let mut collected = 0;
    let mut queue = VecDeque::new();
    taken[start] = true;
    collected += 1;
    queue.push_back(start);
    while collected < count {
        let Some(v) = queue.pop_front() else {
            // restart from a uniformly chosen unvisited node
            let unvisited: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            let next = unvisited[rng.random_range(0..unvisited.len())];
            taken[next] = true;
            collected += 1;
            queue.push_back(next);
            continue;
        };
        for &u in adj.neighbors(v) {
            if collected == count {
                break;
            }
            if !taken[u] {
                taken[u] = true;
                collected += 1;
                queue.push_back(u);
            }
        }
    }
    taken
}

fn finish(graph: &AttributedGraph, in_test: Vec<bool>) -> Split {
    let (test_nodes, train_nodes): (Vec<usize>, Vec<usize>) =
        (0..graph.n()).partition(|&i| in_test[i]);
    Split {
        train: graph.induced(&train_nodes),
        test: graph.induced(&test_nodes),
        train_nodes,
        test_nodes,
    }
}
