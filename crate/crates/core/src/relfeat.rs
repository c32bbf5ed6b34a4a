//! Neighbor aggregation of class estimates into relational features.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::graphdata::Adjacency;
use crate::localclf::tempered_softmax_inplace;

pub type RelationalMatrix = Array2<f64>;

/// Default soft-mode temperature.
pub const DEFAULT_MODE_TEMPERATURE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Aggregator {
    /// `r_i = sum_{j in N(i)} p_j`
    Sum,
    /// `r_i = mean_{j in N(i)} p_j`
    Proportion,
    /// `r_i = softmax(sum_{j in N(i)} p_j / temperature)`, a differentiable mode.
    Mode { temperature: f64 },
}

impl Aggregator {
    pub fn mode(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(arg_err(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Aggregator::Mode { temperature })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Aggregator::Sum => "sum",
            Aggregator::Proportion => "proportion",
            Aggregator::Mode { .. } => "mode",
        }
    }
}

impl fmt::Display for Aggregator {
    /// Inverse of the `FromStr` format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregator::Mode { temperature } => write!(f, "mode:{temperature}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    /// `sum`, `proportion`, `mode` (default temperature) or `mode:<temperature>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => match s {
                "sum" => Ok(Aggregator::Sum),
                "proportion" | "prop" => Ok(Aggregator::Proportion),
                "mode" => Aggregator::mode(DEFAULT_MODE_TEMPERATURE),
                _ => Err(arg_err(format!("unknown aggregator {s:?}"))),
            },
            Some(("mode", t)) => Aggregator::mode(
                t.parse()
                    .map_err(|_| arg_err(format!("bad temperature {t:?}")))?,
            ),
            _ => Err(arg_err(format!("unknown aggregator {s:?}"))),
        }
    }
}

/// Relational features for every node. Isolated nodes get an all-zero row
/// for every aggregator kind.
pub fn aggregate(
    aggregator: Aggregator,
    predictions: &Array2<f64>,
    adjacency: &Adjacency,
) -> Result<RelationalMatrix> {
    if predictions.nrows() != adjacency.n() {
        return Err(dim_err(format!(
            "{} prediction rows for {} nodes",
            predictions.nrows(),
            adjacency.n()
        )));
    }
    let mut out = Array2::zeros(predictions.dim());
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let neighbors = adjacency.neighbors(i);
        if neighbors.is_empty() {
            continue;
        }
        for &j in neighbors {
            row += &predictions.row(j);
        }
        match aggregator {
            Aggregator::Sum => {}
            Aggregator::Proportion => {
                let inv = 1.0 / neighbors.len() as f64;
                row.mapv_inplace(|v| v * inv);
            }
            Aggregator::Mode { temperature } => tempered_softmax_inplace(row, temperature),
        }
    }
    Ok(out)
}

/// `dr_i / dp_j` for a neighbor `j` of `i`, in one of two shapes.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Block {
    /// `scale * I_k`
    Scaled(f64),
    Dense(Array2<f64>),
}

impl Block {
    /// Row vector times block: `upstream * dr_i/dp_j`, accumulated into `acc`.
    pub(crate) fn accumulate(&self, upstream: ArrayView1<'_, f64>, mut acc: ndarray::ArrayViewMut1<'_, f64>) {
        match self {
            Block::Scaled(scale) => acc.scaled_add(*scale, &upstream),
            Block::Dense(m) => acc += &upstream.dot(m),
        }
    }

    fn to_dense(&self, k: usize) -> Array2<f64> {
        match self {
            Block::Scaled(scale) => Array2::eye(k) * *scale,
            Block::Dense(m) => m.clone(),
        }
    }
}

/// The Jacobian block shared by every neighbor of node `i` (all three
/// aggregators give the same block for each neighbor). `r_i` is node `i`'s
/// aggregate output.
pub(crate) fn node_block(
    aggregator: Aggregator,
    degree: usize,
    r_i: ArrayView1<'_, f64>,
) -> Block {
    match aggregator {
        Aggregator::Sum => Block::Scaled(1.0),
        Aggregator::Proportion => Block::Scaled(1.0 / degree.max(1) as f64),
        Aggregator::Mode { temperature } => {
            let k = r_i.len();
            Block::Dense(Array2::from_shape_fn((k, k), |(a, b)| {
                let diag = if a == b { r_i[a] } else { 0.0 };
                (diag - r_i[a] * r_i[b]) / temperature
            }))
        }
    }
}

/// `k x k` Jacobian `dr_i / dp_j`; entry `(a, b)` is the derivative of
/// relational feature `a` of node `i` with respect to class estimate `b` of
/// node `j`. Errors when `(i, j)` is not an edge, since such blocks are
/// structurally zero and asking for one means an indexing bug upstream.
pub fn aggregator_jacobian_block(
    aggregator: Aggregator,
    i: usize,
    j: usize,
    adjacency: &Adjacency,
    r_i: ArrayView1<'_, f64>,
) -> Result<Array2<f64>> {
    if !adjacency.has_edge(i, j) {
        return Err(Error::NotAnEdge { i, j });
    }
    Ok(node_block(aggregator, adjacency.degree(i), r_i).to_dense(r_i.len()))
}
