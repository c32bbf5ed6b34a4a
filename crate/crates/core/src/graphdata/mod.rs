//! Graph representation, dataset ingestion, synthetic data, splits and noise.

mod adjacency;
mod citation;
mod image;
mod noise;
mod split;
mod synthetic;

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, Axis};

use crate::error::{arg_err, dim_err, Result};

pub use adjacency::Adjacency;
pub use citation::{load_citation_dataset, write_citation_dataset, CitationDataset};
pub use image::{build_grid_graph, generate_synthetic_image, read_pbm, read_ppm, sinusoidal_expand, write_pbm, write_ppm, GridImage};
pub use noise::{delete_feature_columns, delete_feature_columns_with_kept, salt_pepper_noise};
pub use split::{snowball_split, snowball_split_from, Split};
pub use synthetic::{generate_synthetic_homophily_graph, SyntheticConfig};

/// Dense `n x d` local feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    values: Array2<f64>,
    column_names: Option<Vec<String>>,
}

impl NodeFeatures {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(arg_err("node features must be finite"));
        }
        Ok(NodeFeatures {
            values,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(dim_err(format!(
                "{} column names for {} columns",
                names.len(),
                self.d()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub(crate) fn select_rows(&self, rows: &[usize]) -> NodeFeatures {
        NodeFeatures {
            values: self.values.select(Axis(0), rows),
            column_names: self.column_names.clone(),
        }
    }

    pub(crate) fn select_columns(&self, cols: &[usize]) -> NodeFeatures {
        NodeFeatures {
            values: self.values.select(Axis(1), cols),
            column_names: self
                .column_names
                .as_ref()
                .map(|names| cols.iter().map(|&c| names[c].clone()).collect()),
        }
    }
}

/// Per-node class indices in `[0, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(arg_err(format!("need at least 2 classes, got {k}")));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(arg_err(format!("label {bad} out of range for k = {k}")));
        }
        Ok(LabelVector { labels, k })
    }

    pub(crate) fn from_parts(labels: Vec<usize>, k: usize) -> Self {
        debug_assert!(labels.iter().all(|&y| y < k));
        LabelVector { labels, k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// `n x k` indicator matrix of the labels.
    pub fn one_hot(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.labels.len(), self.k));
        for (i, &y) in self.labels.iter().enumerate() {
            out[[i, y]] = 1.0;
        }
        out
    }

    pub(crate) fn select(&self, rows: &[usize]) -> LabelVector {
        LabelVector {
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }
}

/// Read access to a graph's structure, features and (optionally) labels.
///
/// Prediction routines are generic over this trait so an auditing wrapper can
/// observe whether labels are consulted.
pub trait GraphView {
    fn adjacency(&self) -> &Adjacency;
    fn features(&self) -> &NodeFeatures;
    fn labels(&self) -> Option<&LabelVector>;

    fn n(&self) -> usize {
        self.adjacency().n()
    }
}

/// Graph with local features and, at training time, ground-truth labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    adjacency: Adjacency,
    features: NodeFeatures,
    labels: Option<LabelVector>,
}

impl AttributedGraph {
    pub fn new(
        adjacency: Adjacency,
        features: NodeFeatures,
        labels: Option<LabelVector>,
    ) -> Result<Self> {
        if features.n() != adjacency.n() {
            return Err(dim_err(format!(
                "{} feature rows for {} nodes",
                features.n(),
                adjacency.n()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != adjacency.n() {
                return Err(dim_err(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    adjacency.n()
                )));
            }
        }
        Ok(AttributedGraph {
            adjacency,
            features,
            labels,
        })
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    /// Copy of the graph without labels.
    pub fn unlabeled(&self) -> AttributedGraph {
        AttributedGraph {
            labels: None,
            ..self.clone()
        }
    }

    pub fn with_features(&self, features: NodeFeatures) -> Result<AttributedGraph> {
        AttributedGraph::new(self.adjacency.clone(), features, self.labels.clone())
    }

    /// Induced subgraph on `nodes` (in the given order).
    pub fn induced(&self, nodes: &[usize]) -> AttributedGraph {
        AttributedGraph {
            adjacency: self.adjacency.induced(nodes),
            features: self.features.select_rows(nodes),
            labels: self.labels.as_ref().map(|l| l.select(nodes)),
        }
    }
}

/// Places the graphs side by side as one graph with no edges between them.
/// All inputs must agree on feature width and on whether labels (and `k`) are present.
pub fn disjoint_union(graphs: &[AttributedGraph]) -> Result<AttributedGraph> {
    let first = graphs
        .first()
        .ok_or_else(|| arg_err("disjoint union of zero graphs"))?;
    let d = first.d();
    let k = first.labels.as_ref().map(LabelVector::k);
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    let mut offset = 0;
    for g in graphs {
        if g.d() != d || g.labels.as_ref().map(LabelVector::k) != k {
            return Err(dim_err("disjoint union of graphs with different shapes"));
        }
        edges.extend(g.adjacency.edges().map(|(i, j)| (i + offset, j + offset)));
        if let Some(l) = &g.labels {
            labels.extend_from_slice(l.as_slice());
        }
        offset += g.n();
    }
    let views: Vec<_> = graphs.iter().map(|g| g.features.matrix().view()).collect();
    let x = ndarray::concatenate(Axis(0), &views).map_err(|e| dim_err(e.to_string()))?;
    AttributedGraph::new(
        Adjacency::from_edges(offset, edges)?,
        NodeFeatures::new(x)?,
        k.map(|k| LabelVector::from_parts(labels, k)),
    )
}

impl GraphView for AttributedGraph {
    fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    fn features(&self) -> &NodeFeatures {
        &self.features
    }

    fn labels(&self) -> Option<&LabelVector> {
        self.labels.as_ref()
    }
}

/// Wraps a graph and counts every label read made through [`GraphView`].
pub struct AuditedGraph<'a, G: GraphView> {
    inner: &'a G,
    label_reads: AtomicUsize,
}

impl<'a, G: GraphView> AuditedGraph<'a, G> {
    pub fn new(inner: &'a G) -> Self {
        AuditedGraph {
            inner,
            label_reads: AtomicUsize::new(0),
        }
    }

    pub fn label_reads(&self) -> usize {
        self.label_reads.load(Ordering::SeqCst)
    }
}

impl<G: GraphView> GraphView for AuditedGraph<'_, G> {
    fn adjacency(&self) -> &Adjacency {
        self.inner.adjacency()
    }

    fn features(&self) -> &NodeFeatures {
        self.inner.features()
    }

    fn labels(&self) -> Option<&LabelVector> {
        self.label_reads.fetch_add(1, Ordering::SeqCst);
        self.inner.labels()
    }
}
