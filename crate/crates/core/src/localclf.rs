//! Linear local classifiers with sigmoid or tempered-softmax activation.
//!
//! A node's input row is `[x_i, 1, r_i]`: its `d` local features, a constant
//! bias input and its `k` relational features. Scores are that row times the
//! `(d + 1 + k) x k` parameter matrix.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{arg_err, dim_err, Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs
/// and divisions.
pub const PROB_FLOOR: f64 = 1e-12;

pub type PredictionMatrix = Array2<f64>;
pub type DeltaMatrix = Array2<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Classifier {
    /// Elementwise logistic sigmoid, one-vs-rest.
    Sigmoid,
    /// Row-wise softmax of `scores / temperature`.
    Softmax { temperature: f64 },
}

impl Classifier {
    pub fn softmax(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(arg_err(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Classifier::Softmax { temperature })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classifier::Sigmoid => "sigmoid",
            Classifier::Softmax { .. } => "softmax",
        }
    }
}

impl fmt::Display for Classifier {
    /// Inverse of the `FromStr` format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classifier::Sigmoid => f.write_str("sigmoid"),
            Classifier::Softmax { temperature } => write!(f, "softmax:{temperature}"),
        }
    }
}

/// Classifier weights, rows partitioned as local block, bias row, relational block.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamMatrix {
    theta: Array2<f64>,
    d: usize,
}

impl ParamMatrix {
    pub fn zeros(d: usize, k: usize) -> Self {
        ParamMatrix {
            theta: Array2::zeros((d + 1 + k, k)),
            d,
        }
    }

    pub fn from_array(theta: Array2<f64>, d: usize) -> Result<Self> {
        let k = theta.ncols();
        if theta.nrows() != d + 1 + k {
            return Err(dim_err(format!(
                "parameter matrix has {} rows, expected d + 1 + k = {}",
                theta.nrows(),
                d + 1 + k
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(arg_err("parameters must be finite"));
        }
        Ok(ParamMatrix { theta, d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.theta.ncols()
    }

    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut Array2<f64> {
        &mut self.theta
    }

    pub fn into_array(self) -> Array2<f64> {
        self.theta
    }

    /// First `d` rows.
    pub fn local_block(&self) -> ArrayView2<'_, f64> {
        self.theta.slice(s![..self.d, ..])
    }

    pub fn bias(&self) -> ArrayView1<'_, f64> {
        self.theta.row(self.d)
    }

    /// Last `k` rows; entry `(b, c)` weighs relational feature `b` into class `c`.
    pub fn relational_block(&self) -> ArrayView2<'_, f64> {
        self.theta.slice(s![self.d + 1.., ..])
    }

    /// `(lambda / 2) * ||theta||^2` over every row except the bias.
    pub fn l2_penalty(&self, lambda: f64) -> f64 {
        let total: f64 = self.theta.iter().map(|v| v * v).sum();
        let bias: f64 = self.bias().iter().map(|v| v * v).sum();
        0.5 * lambda * (total - bias)
    }

    /// Adds the gradient of [`Self::l2_penalty`] to `grad`.
    pub fn add_l2_gradient(&self, grad: &mut Array2<f64>, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        grad.scaled_add(lambda, &self.theta);
        let d = self.d;
        grad.row_mut(d).scaled_add(-lambda, &self.theta.row(d));
    }

    /// Plain-text serialization.
    ///
    /// ```text
    /// <d> <k> <kind>        kind: 0 = sigmoid, 1 = softmax
    /// <temperature>         1 for sigmoid
    /// <k values>            one line per row, d + 1 + k lines
    /// ```
    ///
    /// Values use the shortest decimal form that parses back to the same bits.
    pub fn write_text(&self, classifier: Classifier, mut out: impl Write) -> Result<()> {
        let (kind, tau) = match classifier {
            Classifier::Sigmoid => (0, 1.0),
            Classifier::Softmax { temperature } => (1, temperature),
        };
        writeln!(out, "{} {} {}", self.d, self.k(), kind)?;
        writeln!(out, "{tau}")?;
        for row in self.theta.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text(text: &str) -> Result<(ParamMatrix, Classifier)> {
        let err = |line: usize, message: &str| Error::Parse {
            source_name: "params".into(),
            line,
            message: message.into(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let header: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(1, "header must be three integers")))
            .collect::<Result<_>>()?;
        let [d, k, kind] = header[..] else {
            return Err(err(1, "header must be three integers"));
        };
        let (lineno, tau) = lines.next().ok_or_else(|| err(2, "missing temperature"))?;
        let tau: f64 = tau
            .trim()
            .parse()
            .map_err(|_| err(lineno + 1, "bad temperature"))?;
        let classifier = match kind {
            0 => Classifier::Sigmoid,
            1 => Classifier::softmax(tau)?,
            _ => return Err(err(1, "kind must be 0 (sigmoid) or 1 (softmax)")),
        };
        let mut values = Vec::with_capacity((d + 1 + k) * k);
        for (lineno, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(lineno + 1, "bad value")))
                .collect::<Result<_>>()?;
            if row.len() != k {
                return Err(err(lineno + 1, "wrong number of values in row"));
            }
            values.extend(row);
        }
        let theta = Array2::from_shape_vec((values.len() / k.max(1), k), values)
            .map_err(|e| arg_err(e.to_string()))?;
        Ok((ParamMatrix::from_array(theta, d)?, classifier))
    }

    pub fn save(&self, classifier: Classifier, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        self.write_text(classifier, &mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(ParamMatrix, Classifier)> {
        Self::read_text(&fs::read_to_string(path)?)
    }
}

impl FromStr for Classifier {
    type Err = Error;

    /// `sigmoid`, `softmax` (temperature 1) or `softmax:<temperature>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "sigmoid" => Ok(Classifier::Sigmoid),
            None if s == "softmax" => Classifier::softmax(1.0),
            Some(("softmax", t)) => Classifier::softmax(
                t.parse()
                    .map_err(|_| arg_err(format!("bad temperature {t:?}")))?,
            ),
            _ => Err(arg_err(format!("unknown classifier {s:?}"))),
        }
    }
}

fn check_shapes(
    features: &Array2<f64>,
    relational: &Array2<f64>,
    params: &ParamMatrix,
) -> Result<()> {
    if features.ncols() != params.d() {
        return Err(dim_err(format!(
            "{} local features but parameters expect {}",
            features.ncols(),
            params.d()
        )));
    }
    if relational.ncols() != params.k() || relational.nrows() != features.nrows() {
        return Err(dim_err(format!(
            "relational matrix is {:?}, expected ({}, {})",
            relational.dim(),
            features.nrows(),
            params.k()
        )));
    }
    Ok(())
}

/// `X * theta_x + bias`: the part of the scores that does not change across
/// iterations.
pub(crate) fn local_scores(features: &Array2<f64>, params: &ParamMatrix) -> Array2<f64> {
    let mut scores = features.dot(&params.local_block());
    scores += &params.bias();
    scores
}

/// Activation of `local + R * theta_r`. Every forward pass goes through here
/// so recomputation is bit-identical.
pub(crate) fn forward_from_local(
    classifier: Classifier,
    local: &Array2<f64>,
    relational: &Array2<f64>,
    params: &ParamMatrix,
) -> PredictionMatrix {
    let mut scores = relational.dot(&params.relational_block());
    scores += local;
    activate(classifier, &mut scores);
    scores
}

fn activate(classifier: Classifier, scores: &mut Array2<f64>) {
    match classifier {
        Classifier::Sigmoid => scores.mapv_inplace(|s| 1.0 / (1.0 + (-s).exp())),
        Classifier::Softmax { temperature } => {
            for row in scores.rows_mut() {
                tempered_softmax_inplace(row, temperature);
            }
        }
    }
}

pub(crate) fn tempered_softmax_inplace(mut row: ndarray::ArrayViewMut1<'_, f64>, temperature: f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = ((*v - max) / temperature).exp();
        total += *v;
    }
    row.mapv_inplace(|v| v / total);
}

/// Class estimates for every node.
pub fn classifier_forward(
    classifier: Classifier,
    features: &Array2<f64>,
    relational: &Array2<f64>,
    params: &ParamMatrix,
) -> Result<PredictionMatrix> {
    check_shapes(features, relational, params)?;
    Ok(forward_from_local(
        classifier,
        &local_scores(features, params),
        relational,
        params,
    ))
}

/// `k x k` activation Jacobian `dp_i / ds_i`.
pub fn activation_jacobian(classifier: Classifier, p: ArrayView1<'_, f64>) -> Array2<f64> {
    match classifier {
        Classifier::Sigmoid => Array2::from_diag(&p.mapv(|v| v * (1.0 - v))),
        Classifier::Softmax { temperature } => {
            let k = p.len();
            Array2::from_shape_fn((k, k), |(a, b)| {
                let diag = if a == b { p[a] } else { 0.0 };
                (diag - p[a] * p[b]) / temperature
            })
        }
    }
}

/// `dp_i / dr_i`: entry `(a, b)` is the derivative of class estimate `a`
/// with respect to relational feature `b`.
pub fn classifier_jacobian_relational(
    classifier: Classifier,
    p: ArrayView1<'_, f64>,
    params: &ParamMatrix,
) -> Array2<f64> {
    activation_jacobian(classifier, p).dot(&params.relational_block().t())
}

/// Back-propagates `dL/dP` through the activation to `dL/dS` row by row.
pub(crate) fn score_gradient(
    classifier: Classifier,
    predictions: &Array2<f64>,
    upstream: &Array2<f64>,
) -> Array2<f64> {
    match classifier {
        Classifier::Sigmoid => {
            let mut out = predictions.mapv(|p| p * (1.0 - p));
            out *= upstream;
            out
        }
        Classifier::Softmax { temperature } => {
            // (diag(p) - p p^T) u / tau, row-wise
            let dots = (predictions * upstream).sum_axis(Axis(1));
            let mut out = upstream.clone();
            for (mut row, dot) in out.rows_mut().into_iter().zip(dots.iter()) {
                row.mapv_inplace(|u| u - dot);
            }
            out *= predictions;
            out.mapv_inplace(|v| v / temperature);
            out
        }
    }
}

/// Parameter gradient from a score gradient: `[X, 1, R]^T * dS`.
pub(crate) fn param_gradient_from_scores(
    features: &Array2<f64>,
    relational: &Array2<f64>,
    dscores: &Array2<f64>,
) -> Array2<f64> {
    let d = features.ncols();
    let k = dscores.ncols();
    let mut grad = Array2::zeros((d + 1 + k, k));
    grad.slice_mut(s![..d, ..]).assign(&features.t().dot(dscores));
    grad.row_mut(d).assign(&dscores.sum_axis(Axis(0)));
    grad.slice_mut(s![d + 1.., ..]).assign(&relational.t().dot(dscores));
    grad
}

/// Gradient with respect to the parameters of one forward step, given the
/// loss gradient `upstream = dL/dP` at that step's output.
pub fn classifier_param_gradient(
    classifier: Classifier,
    features: &Array2<f64>,
    relational: &Array2<f64>,
    predictions: &Array2<f64>,
    upstream: &Array2<f64>,
) -> Result<Array2<f64>> {
    if predictions.dim() != upstream.dim() || predictions.nrows() != features.nrows() {
        return Err(dim_err("predictions, upstream and features disagree"));
    }
    if relational.dim() != predictions.dim() {
        return Err(dim_err("relational matrix must match predictions"));
    }
    let dscores = score_gradient(classifier, predictions, upstream);
    Ok(param_gradient_from_scores(features, relational, &dscores))
}

/// Mean cross-entropy over nodes and its gradient `dL/dP`.
///
/// Softmax pairs with the multinomial loss `-log q_i(y_i)`; sigmoid pairs
/// with one-vs-rest binary cross-entropy summed over classes.
pub fn cross_entropy_loss_and_grad(
    classifier: Classifier,
    predictions: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, DeltaMatrix)> {
    let (n, k) = predictions.dim();
    if labels.len() != n {
        return Err(dim_err(format!("{} labels for {n} prediction rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(dim_err(format!("label {bad} out of range for {k} columns")));
    }
    let scale = 1.0 / n.max(1) as f64;
    let clamp = |p: f64| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let mut delta = Array2::zeros((n, k));
    let mut loss = 0.0;
    match classifier {
        Classifier::Softmax { .. } => {
            for (i, &y) in labels.iter().enumerate() {
                let q = clamp(predictions[[i, y]]);
                loss -= q.ln();
                delta[[i, y]] = -scale / q;
            }
        }
        Classifier::Sigmoid => {
            for (i, &y) in labels.iter().enumerate() {
                for c in 0..k {
                    let p = clamp(predictions[[i, c]]);
                    if c == y {
                        loss -= p.ln();
                        delta[[i, c]] = -scale / p;
                    } else {
                        loss -= (1.0 - p).ln();
                        delta[[i, c]] = scale / (1.0 - p);
                    }
                }
            }
        }
    }
    Ok((loss * scale, delta))
}

/// Tempered softmax of a single vector.
pub fn tempered_softmax(scores: ArrayView1<'_, f64>, temperature: f64) -> Array1<f64> {
    let mut out = scores.to_owned();
    tempered_softmax_inplace(out.view_mut(), temperature);
    out
}
