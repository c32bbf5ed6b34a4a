use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{arg_err, Error, Result};
use crate::graphdata::SyntheticConfig;
use crate::localclf::Classifier;
use crate::relfeat::Aggregator;
use crate::train::{TrainConfig, LAMBDA_GRID};

/// Node classification approach under comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Local features only.
    Local,
    /// Trained on true-label relational features, predicted by iteration.
    Ica,
    /// Trained like `Ica`, predicted by Gibbs sampling.
    Gs,
    /// Trained through the unrolled prediction loop.
    Rcc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Local, Method::Ica, Method::Gs, Method::Rcc];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Local => "local",
            Method::Ica => "ica",
            Method::Gs => "gs",
            Method::Rcc => "rcc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| arg_err(format!("unknown method {s:?}")))
    }
}

/// How the per-split regularization strength is chosen for summaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Best test accuracy, as reported in the original experiments.
    Test,
    /// Best accuracy on a snowball validation set carved from the training graph.
    Validation,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Test => "test",
            Selection::Validation => "validation",
        })
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(Selection::Test),
            "validation" | "val" => Ok(Selection::Validation),
            _ => Err(arg_err(format!("unknown selection {s:?}"))),
        }
    }
}

/// Where the graph comes from.
///
/// Text form: `citation:<content>,<cites>`, `synthetic[:key=value,...]`
/// (keys `n k d homophily signal degree locality seed`), `images:<dir>` (pairs of
/// `<name>.ppm` and `<name>.pbm`), or `synthetic-images[:key=value,...]`
/// (keys `count height width seed`).
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Citation { content: PathBuf, cites: PathBuf },
    Synthetic(SyntheticConfig),
    Images { dir: PathBuf },
    SyntheticImages { count: usize, height: usize, width: usize, seed: u64 },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticConfig::default())
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| arg_err(format!("bad value {value:?} for {key}")))
}

fn key_values(body: &str) -> Result<Vec<(&str, &str)>> {
    body.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| arg_err(format!("expected key=value, got {p:?}")))
        })
        .collect()
}

impl FromStr for DatasetSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "citation" => {
                let (content, cites) = body
                    .split_once(',')
                    .ok_or_else(|| arg_err("citation dataset needs <content>,<cites>"))?;
                Ok(DatasetSource::Citation {
                    content: content.into(),
                    cites: cites.into(),
                })
            }
            "synthetic" => {
                let mut cfg = SyntheticConfig::default();
                for (key, value) in key_values(body)? {
                    match key {
                        "n" => cfg.n = parse_value(key, value)?,
                        "k" => cfg.k = parse_value(key, value)?,
                        "d" => cfg.d = parse_value(key, value)?,
                        "homophily" => cfg.homophily = parse_value(key, value)?,
                        "signal" => cfg.signal = parse_value(key, value)?,
                        "degree" => cfg.avg_degree = parse_value(key, value)?,
                        "locality" => cfg.locality = parse_value(key, value)?,
                        "seed" => cfg.seed = parse_value(key, value)?,
                        _ => return Err(arg_err(format!("unknown synthetic key {key:?}"))),
                    }
                }
                Ok(DatasetSource::Synthetic(cfg))
            }
            "images" if !body.is_empty() => Ok(DatasetSource::Images { dir: body.into() }),
            "synthetic-images" => {
                let (mut count, mut height, mut width, mut seed) = (20, 24, 24, 0);
                for (key, value) in key_values(body)? {
                    match key {
                        "count" => count = parse_value(key, value)?,
                        "height" => height = parse_value(key, value)?,
                        "width" => width = parse_value(key, value)?,
                        "seed" => seed = parse_value(key, value)?,
                        _ => return Err(arg_err(format!("unknown image key {key:?}"))),
                    }
                }
                Ok(DatasetSource::SyntheticImages { count, height, width, seed })
            }
            _ => Err(arg_err(format!("unrecognized dataset descriptor {s:?}"))),
        }
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::Citation { content, cites } => {
                write!(f, "citation:{},{}", content.display(), cites.display())
            }
            DatasetSource::Synthetic(c) => write!(
                f,
                "synthetic:n={},k={},d={},homophily={},signal={},degree={},locality={},seed={}",
                c.n, c.k, c.d, c.homophily, c.signal, c.avg_degree, c.locality, c.seed
            ),
            DatasetSource::Images { dir } => write!(f, "images:{}", dir.display()),
            DatasetSource::SyntheticImages { count, height, width, seed } => write!(
                f,
                "synthetic-images:count={count},height={height},width={width},seed={seed}"
            ),
        }
    }
}

/// Everything needed to reproduce one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    pub methods: Vec<Method>,
    pub classifier: Classifier,
    pub aggregator: Aggregator,
    /// Fraction of feature columns deleted, or salt-and-pepper amount for images.
    pub noise_levels: Vec<f64>,
    pub splits: usize,
    pub test_fraction: f64,
    pub train: TrainConfig,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
    pub selection: Selection,
    pub gibbs_burn_in: usize,
    pub gibbs_samples: usize,
    /// Record wall-clock seconds; off by default so outputs are byte-stable.
    pub record_timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: DatasetSource::default(),
            methods: Method::ALL.to_vec(),
            classifier: Classifier::Sigmoid,
            aggregator: Aggregator::Proportion,
            noise_levels: vec![0.0],
            splits: 10,
            test_fraction: 0.2,
            train: TrainConfig::default(),
            lambda_grid: LAMBDA_GRID.to_vec(),
            seed: 0,
            selection: Selection::Test,
            gibbs_burn_in: 100,
            gibbs_samples: 1000,
            record_timing: false,
        }
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse_value(key, v))
        .collect()
}

impl ExperimentSpec {
    /// Full-size settings: 2000 optimizer iterations and 20 splits.
    pub fn paper_scale(mut self) -> Self {
        self.train.iterations = 2000;
        self.splits = 20;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.methods.is_empty() {
            return Err(arg_err("no methods selected"));
        }
        if self.splits == 0 {
            return Err(arg_err("splits must be at least 1"));
        }
        if let Some(level) = self.noise_levels.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return Err(arg_err(format!("noise level {level} outside [0, 1)")));
        }
        if self.noise_levels.is_empty() || self.lambda_grid.is_empty() {
            return Err(arg_err("noise levels and lambda grid must be non-empty"));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(arg_err("lambda values must be non-negative"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(arg_err("test fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "dataset" => self.dataset = value.parse()?,
            "methods" | "method" => self.methods = parse_list(key, value)?,
            "classifier" => self.classifier = value.parse()?,
            "aggregator" => self.aggregator = value.parse()?,
            "noise_levels" => self.noise_levels = parse_list(key, value)?,
            "splits" => self.splits = parse_value(key, value)?,
            "test_fraction" => self.test_fraction = parse_value(key, value)?,
            "T" => self.train.unroll = parse_value(key, value)?,
            "eta" => self.train.eta = parse_value(key, value)?,
            "iterations" => self.train.iterations = parse_value(key, value)?,
            "epsilon" => self.train.epsilon = parse_value(key, value)?,
            "lambda_grid" => self.lambda_grid = parse_list(key, value)?,
            "seed" => {
                self.seed = parse_value(key, value)?;
                self.train.seed = self.seed;
            }
            "selection" => self.selection = value.parse()?,
            "gibbs_burn_in" => self.gibbs_burn_in = parse_value(key, value)?,
            "gibbs_samples" => self.gibbs_samples = parse_value(key, value)?,
            "timing" => self.record_timing = parse_value(key, value)?,
            _ => return Err(arg_err(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are ignored.
    pub fn apply_config_text(&mut self, text: &str, source_name: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got {line:?}")))?;
            self.set(key.trim(), value)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        self.apply_config_text(&text, &path.display().to_string())
    }

    /// Config-file text that reproduces this spec through [`Self::apply_config_text`].
    pub fn to_config_text(&self) -> String {
        let lines = [
            ("dataset", self.dataset.to_string()),
            ("methods", join(&self.methods)),
            ("classifier", self.classifier.to_string()),
            ("aggregator", self.aggregator.to_string()),
            ("noise_levels", join(&self.noise_levels)),
            ("splits", self.splits.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("T", self.train.unroll.to_string()),
            ("eta", self.train.eta.to_string()),
            ("iterations", self.train.iterations.to_string()),
            ("epsilon", self.train.epsilon.to_string()),
            ("lambda_grid", join(&self.lambda_grid)),
            ("seed", self.seed.to_string()),
            ("selection", self.selection.to_string()),
            ("gibbs_burn_in", self.gibbs_burn_in.to_string()),
            ("gibbs_samples", self.gibbs_samples.to_string()),
            ("timing", self.record_timing.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
