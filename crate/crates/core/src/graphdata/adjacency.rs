use crate::error::{arg_err, Result};

/// Undirected, unweighted graph stored in compressed sparse row form.
///
/// Every edge is stored in both directions, neighbor lists are sorted and
/// contain no duplicates or self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    /// A graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Adjacency {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
        }
    }

    /// Builds a symmetric adjacency from an edge list. Direction is
    /// discarded, duplicates collapse and self-loops are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(arg_err(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                continue;
            }
            lists[a].push(b);
            lists[b].push(a);
        }
        Ok(Self::from_lists(lists))
    }

    fn from_lists(mut lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in lists.iter_mut() {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Adjacency { offsets, targets }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n() && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Undirected edges as `(i, j)` pairs with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
    }

    /// Full scan of the structural invariants: symmetry, sorted unique
    /// neighbor lists, no self-loops and all indices in range.
    pub fn check_invariants(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| {
            let nb = self.neighbors(i);
            nb.windows(2).all(|w| w[0] < w[1])
                && nb.iter().all(|&j| j < n && j != i && self.has_edge(j, i))
        })
    }

    /// Induced subgraph on `nodes`; node `nodes[p]` becomes node `p`.
    pub fn induced(&self, nodes: &[usize]) -> Adjacency {
        let mut position = vec![usize::MAX; self.n()];
        for (p, &v) in nodes.iter().enumerate() {
            position[v] = p;
        }
        let lists = nodes
            .iter()
            .map(|&v| {
                self.neighbors(v)
                    .iter()
                    .filter_map(|&u| (position[u] != usize::MAX).then(|| position[u]))
                    .collect()
            })
            .collect();
        Self::from_lists(lists)
    }
}
