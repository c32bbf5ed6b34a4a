use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::compute_metrics;
use super::spec::{DatasetSource, ExperimentSpec, Method, Selection};
use crate::error::{arg_err, Result};
use crate::graphdata::{
    build_grid_graph, delete_feature_columns, disjoint_union, generate_synthetic_homophily_graph,
    generate_synthetic_image, load_citation_dataset, salt_pepper_noise, snowball_split,
    AttributedGraph, AuditedGraph, GraphView, GridImage,
};
use crate::inference::{gibbs_predict, hard_labels, ica_predict, local_predict, InferenceConfig};
use crate::localclf::{ParamMatrix, PredictionMatrix};
use crate::train::{train_ica_baseline, train_local, train_rcc, TrainConfig};

/// Outcome of training and evaluating one method on one split at one `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub method: Method,
    pub noise: f64,
    pub split: usize,
    pub lambda: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_f1: Option<f64>,
    pub test_f1: Option<f64>,
    pub validation_accuracy: Option<f64>,
    /// Zero unless timing was requested.
    pub wall_time_seconds: f64,
    /// Set when training failed; metrics are then NaN.
    pub failure: Option<String>,
    /// Label accesses observed while predicting on the train and test graphs.
    pub eval_label_reads: usize,
}

impl MetricsRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Mean over splits of the best-`lambda` record of each split.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRecord {
    pub method: Method,
    pub noise: f64,
    /// Splits that had at least one successful record.
    pub splits: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_f1: Option<f64>,
    pub test_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub records: Vec<MetricsRecord>,
    pub summaries: Vec<SummaryRecord>,
}

/// Loaded data before noise and splitting.
#[derive(Clone, Debug)]
pub enum Dataset {
    Graph(AttributedGraph),
    Images(Vec<GridImage>),
}

impl Dataset {
    pub fn load(source: &DatasetSource) -> Result<Dataset> {
        match source {
            DatasetSource::Citation { content, cites } => {
                Ok(Dataset::Graph(load_citation_dataset(content, cites)?.graph))
            }
            DatasetSource::Synthetic(cfg) => {
                Ok(Dataset::Graph(generate_synthetic_homophily_graph(cfg)?))
            }
            DatasetSource::Images { dir } => load_image_dir(dir).map(Dataset::Images),
            DatasetSource::SyntheticImages { count, height, width, seed } => (0..*count)
                .map(|i| generate_synthetic_image(*height, *width, derive_seed(*seed, &[i as u64])))
                .collect::<Result<Vec<_>>>()
                .map(Dataset::Images),
        }
    }
}

fn load_image_dir(dir: &Path) -> Result<Vec<GridImage>> {
    let mut stems: Vec<_> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ppm"))
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(arg_err(format!("no .ppm images in {}", dir.display())));
    }
    stems
        .iter()
        .map(|ppm| GridImage::load(ppm, ppm.with_extension("pbm")))
        .collect()
}

/// SplitMix64 over the base seed and a tag sequence.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    tags.iter().fold(mix(base), |acc, &t| mix(acc ^ mix(t)))
}

const TAG_NOISE: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_VALIDATION: u64 = 3;
const TAG_GIBBS: u64 = 4;

/// Graphs for one (noise level, split) cell.
struct Fold {
    noise: f64,
    split: usize,
    /// Graph the parameters are fitted on.
    fit: AttributedGraph,
    /// Graph on which training accuracy is reported (the whole training side).
    train: AttributedGraph,
    test: AttributedGraph,
    validation: Option<AttributedGraph>,
}

fn image_test_count(count: usize, fraction: f64) -> Result<usize> {
    if count < 2 {
        return Err(arg_err("need at least two images to split"));
    }
    Ok(((count as f64 * fraction - 1e-9).ceil() as usize).clamp(1, count - 1))
}

/// Train and test graphs for one (noise level, split) cell. Graph data is
/// noised by feature deletion and split by snowball sampling; images are
/// noised per image and split at the image level.
pub fn split_dataset(
    spec: &ExperimentSpec,
    data: &Dataset,
    noise: f64,
    split: usize,
) -> Result<(AttributedGraph, AttributedGraph)> {
    let s = split as u64;
    match data {
        Dataset::Graph(graph) => {
            let noisy = delete_feature_columns(graph, noise, derive_seed(spec.seed, &[TAG_NOISE, s]))?;
            let parts = snowball_split(&noisy, spec.test_fraction, derive_seed(spec.seed, &[TAG_SPLIT, s]))?;
            Ok((parts.train, parts.test))
        }
        Dataset::Images(images) => {
            let mut order: Vec<usize> = (0..images.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[TAG_SPLIT, s]));
            order.shuffle(&mut rng);
            let n_test = image_test_count(images.len(), spec.test_fraction)?;
            let graphs = |ids: &[usize]| -> Result<AttributedGraph> {
                let built = ids
                    .iter()
                    .map(|&i| {
                        let seed = derive_seed(spec.seed, &[TAG_NOISE, s, i as u64]);
                        build_grid_graph(&salt_pepper_noise(&images[i], noise, seed)?)
                    })
                    .collect::<Result<Vec<_>>>()?;
                disjoint_union(&built)
            };
            let (test_ids, train_ids) = order.split_at(n_test);
            Ok((graphs(train_ids)?, graphs(test_ids)?))
        }
    }
}

fn make_fold(spec: &ExperimentSpec, data: &Dataset, noise: f64, split: usize) -> Result<Fold> {
    let (train, test) = split_dataset(spec, data, noise, split)?;
    let (fit, validation) = match spec.selection {
        Selection::Test => (train.clone(), None),
        Selection::Validation => {
            let seed = derive_seed(spec.seed, &[TAG_VALIDATION, split as u64]);
            let parts = snowball_split(&train, spec.test_fraction, seed)?;
            (parts.train, Some(parts.test))
        }
    };
    Ok(Fold { noise, split, fit, train, test, validation })
}

/// Parameters for one method; `Gs` shares the true-label trainer with `Ica`.
pub fn train_method(
    method: Method,
    graph: &AttributedGraph,
    spec: &ExperimentSpec,
    config: &TrainConfig,
) -> Result<ParamMatrix> {
    let fit = match method {
        Method::Local => train_local(graph, spec.classifier, config)?,
        Method::Ica | Method::Gs => train_ica_baseline(graph, spec.classifier, spec.aggregator, config)?,
        Method::Rcc => train_rcc(graph, spec.classifier, spec.aggregator, config)?,
    };
    Ok(fit.params)
}

/// Prediction from local features and links only.
pub fn predict_method<G: GraphView>(
    method: Method,
    graph: &G,
    params: &ParamMatrix,
    spec: &ExperimentSpec,
    gibbs_seed: u64,
) -> Result<PredictionMatrix> {
    match method {
        Method::Local => local_predict(graph, spec.classifier, params),
        Method::Ica | Method::Rcc => {
            let config = InferenceConfig::unrolled(spec.train.unroll);
            Ok(ica_predict(graph, spec.classifier, spec.aggregator, params, &config)?.0)
        }
        Method::Gs => {
            let config = InferenceConfig {
                seed: gibbs_seed,
                burn_in: spec.gibbs_burn_in,
                samples: spec.gibbs_samples,
                ..Default::default()
            };
            gibbs_predict(graph, spec.classifier, spec.aggregator, params, &config)
        }
    }
}

/// Predicts on `graph` through an auditing wrapper, then scores against the
/// graph's own labels. Returns `(accuracy, f1, label reads during prediction)`.
fn evaluate(
    method: Method,
    graph: &AttributedGraph,
    params: &ParamMatrix,
    spec: &ExperimentSpec,
    gibbs_seed: u64,
) -> Result<(f64, Option<f64>, usize)> {
    let audited = AuditedGraph::new(graph);
    let predictions = predict_method(method, &audited, params, spec, gibbs_seed)?;
    let reads = audited.label_reads();
    let truth = graph
        .labels()
        .ok_or_else(|| arg_err("evaluation graph has no ground truth"))?;
    let (acc, f1) = compute_metrics(&hard_labels(&predictions), truth, truth.k())?;
    Ok((acc, f1, reads))
}

fn run_job(spec: &ExperimentSpec, fold: &Fold, lambda: f64, method: Method) -> MetricsRecord {
    let started = Instant::now();
    let config = TrainConfig { lambda, seed: spec.seed, ..spec.train.clone() };
    let gibbs_seed = derive_seed(spec.seed, &[TAG_GIBBS, fold.split as u64]);
    let outcome = (|| -> Result<_> {
        let params = train_method(method, &fold.fit, spec, &config)?;
        let train = evaluate(method, &fold.train, &params, spec, gibbs_seed)?;
        let test = evaluate(method, &fold.test, &params, spec, gibbs_seed)?;
        let validation = match &fold.validation {
            Some(v) => Some(evaluate(method, v, &params, spec, gibbs_seed)?),
            None => None,
        };
        Ok((train, test, validation))
    })();
    let seconds = if spec.record_timing { started.elapsed().as_secs_f64() } else { 0.0 };
    let base = MetricsRecord {
        method,
        noise: fold.noise,
        split: fold.split,
        lambda,
        train_accuracy: f64::NAN,
        test_accuracy: f64::NAN,
        train_f1: None,
        test_f1: None,
        validation_accuracy: None,
        wall_time_seconds: seconds,
        failure: None,
        eval_label_reads: 0,
    };
    match outcome {
        Ok((train, test, validation)) => MetricsRecord {
            train_accuracy: train.0,
            test_accuracy: test.0,
            train_f1: train.1,
            test_f1: test.1,
            validation_accuracy: validation.map(|v| v.0),
            eval_label_reads: train.2 + test.2 + validation.map_or(0, |v| v.2),
            ..base
        },
        Err(e) => {
            log::warn!("{method} noise={} split={} lambda={lambda}: {e}", fold.noise, fold.split);
            MetricsRecord { failure: Some(e.to_string()), ..base }
        }
    }
}

/// Trains and evaluates every method at every (noise level, split, lambda).
///
/// Records are ordered by noise level, split, lambda, then method, whatever
/// order the parallel jobs finish in. Failed trainings are kept as marked
/// records and excluded from the summaries.
pub fn run_noise_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let data = Dataset::load(&spec.dataset)?;
    run_noise_sweep_on(spec, &data)
}

/// [`run_noise_sweep`] on already loaded data.
pub fn run_noise_sweep_on(spec: &ExperimentSpec, data: &Dataset) -> Result<SweepResult> {
    spec.validate()?;
    let cells: Vec<(f64, usize)> = spec
        .noise_levels
        .iter()
        .flat_map(|&noise| (0..spec.splits).map(move |split| (noise, split)))
        .collect();
    let folds = cells
        .par_iter()
        .map(|&(noise, split)| make_fold(spec, data, noise, split))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(&Fold, f64, Method)> = folds
        .iter()
        .flat_map(|fold| {
            spec.lambda_grid
                .iter()
                .flat_map(move |&lambda| spec.methods.iter().map(move |&m| (fold, lambda, m)))
        })
        .collect();
    let records: Vec<MetricsRecord> = jobs
        .par_iter()
        .map(|&(fold, lambda, method)| run_job(spec, fold, lambda, method))
        .collect();
    let summaries = summarize(&records, spec.selection);
    Ok(SweepResult { records, summaries })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Per (method, noise) mean over splits of the record with the best selection
/// score; ties keep the earliest `lambda`.
pub fn summarize(records: &[MetricsRecord], selection: Selection) -> Vec<SummaryRecord> {
    let mut keys: Vec<(Method, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(m, n)| m == r.method && n == r.noise) {
            keys.push((r.method, r.noise));
        }
    }
    let score = |r: &MetricsRecord| match selection {
        Selection::Test => r.test_accuracy,
        Selection::Validation => r.validation_accuracy.unwrap_or(f64::NAN),
    };
    keys.into_iter()
        .map(|(method, noise)| {
            let cell: Vec<&MetricsRecord> = records
                .iter()
                .filter(|r| r.method == method && r.noise == noise && !r.failed())
                .collect();
            let mut splits: Vec<usize> = cell.iter().map(|r| r.split).collect();
            splits.sort_unstable();
            splits.dedup();
            let best: Vec<&MetricsRecord> = splits
                .iter()
                .filter_map(|&s| {
                    cell.iter()
                        .filter(|r| r.split == s)
                        .fold(None::<&MetricsRecord>, |acc, r| match acc {
                            Some(b) if !(score(r) > score(b)) => Some(b),
                            _ => Some(*r),
                        })
                })
                .collect();
            let f1_mean = |get: fn(&MetricsRecord) -> Option<f64>| {
                if best.iter().all(|r| get(r).is_some()) && !best.is_empty() {
                    Some(mean(best.iter().filter_map(|r| get(r))))
                } else {
                    None
                }
            };
            SummaryRecord {
                method,
                noise,
                splits: best.len(),
                train_accuracy: mean(best.iter().map(|r| r.train_accuracy)),
                test_accuracy: mean(best.iter().map(|r| r.test_accuracy)),
                train_f1: f1_mean(|r| r.train_f1),
                test_f1: f1_mean(|r| r.test_f1),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::SyntheticConfig;

    fn record(method: Method, split: usize, lambda: f64, test: f64) -> MetricsRecord {
        MetricsRecord {
            method,
            noise: 0.0,
            split,
            lambda,
            train_accuracy: test + 0.1,
            test_accuracy: test,
            train_f1: None,
            test_f1: None,
            validation_accuracy: Some(1.0 - test),
            wall_time_seconds: 0.0,
            failure: None,
            eval_label_reads: 0,
        }
    }

    #[test]
    fn summary_is_mean_of_per_split_best() {
        let mut failed = record(Method::Rcc, 1, 1.0, 0.99);
        failed.failure = Some("diverged".into());
        let records = vec![
            record(Method::Rcc, 0, 0.1, 0.6),
            record(Method::Rcc, 0, 1.0, 0.8),
            record(Method::Rcc, 1, 0.1, 0.5),
            failed,
            record(Method::Local, 0, 0.1, 0.3),
        ];
        let s = summarize(&records, Selection::Test);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].method, s[0].splits), (Method::Rcc, 2));
        assert!((s[0].test_accuracy - 0.65).abs() < 1e-12);
        assert!((s[0].train_accuracy - 0.75).abs() < 1e-12);
        let v = summarize(&records, Selection::Validation);
        assert!((v[0].test_accuracy - 0.55).abs() < 1e-12);
    }

    #[test]
    fn ties_keep_first_lambda() {
        let records = vec![record(Method::Ica, 0, 0.01, 0.7), record(Method::Ica, 0, 0.1, 0.7)];
        let mut a = records[0].clone();
        a.train_accuracy = 0.2;
        let s = summarize(&[a, records[1].clone()], Selection::Test);
        assert_eq!(s[0].train_accuracy, 0.2);
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        assert_ne!(derive_seed(0, &[1, 0]), derive_seed(0, &[0, 1]));
        assert_ne!(derive_seed(0, &[1]), derive_seed(1, &[1]));
        assert_eq!(derive_seed(5, &[2, 3]), derive_seed(5, &[2, 3]));
    }

    fn tiny_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec {
            dataset: DatasetSource::Synthetic(SyntheticConfig { n: 80, d: 6, ..Default::default() }),
            splits: 2,
            lambda_grid: vec![1e-3, 1e-1],
            noise_levels: vec![0.0, 0.5],
            gibbs_burn_in: 5,
            gibbs_samples: 20,
            ..Default::default()
        };
        spec.train.iterations = 30;
        spec.train.unroll = 3;
        spec
    }

    #[test]
    fn sweep_shape_order_and_purity() {
        let spec = tiny_spec();
        let out = run_noise_sweep(&spec).unwrap();
        assert_eq!(out.records.len(), 2 * 2 * 2 * 4);
        assert_eq!(out.summaries.len(), 2 * 4);
        let r = &out.records;
        assert_eq!((r[0].noise, r[0].split, r[0].lambda, r[0].method), (0.0, 0, 1e-3, Method::Local));
        assert_eq!(r[3].method, Method::Rcc);
        assert_eq!(r[4].lambda, 1e-1);
        assert!(r.iter().all(|r| !r.failed() && r.eval_label_reads == 0));
        assert!(r.iter().all(|r| (0.0..=1.0).contains(&r.test_accuracy)));
        assert_eq!(out, run_noise_sweep(&spec).unwrap());
    }

    #[test]
    fn validation_selection_reports_validation_accuracy() {
        let spec = ExperimentSpec {
            selection: Selection::Validation,
            methods: vec![Method::Rcc],
            noise_levels: vec![0.0],
            ..tiny_spec()
        };
        let out = run_noise_sweep(&spec).unwrap();
        assert!(out.records.iter().all(|r| r.validation_accuracy.is_some()));
    }

    #[test]
    fn image_sweep_reports_f1() {
        let spec = ExperimentSpec {
            dataset: DatasetSource::SyntheticImages { count: 4, height: 8, width: 8, seed: 1 },
            methods: vec![Method::Local, Method::Rcc],
            noise_levels: vec![0.1],
            splits: 1,
            test_fraction: 0.5,
            ..tiny_spec()
        };
        let out = run_noise_sweep(&spec).unwrap();
        assert!(out.records.iter().all(|r| r.test_f1.is_some() && r.train_f1.is_some()));
    }

    #[test]
    fn local_method_on_strong_signal_is_accurate() {
        let mut spec = ExperimentSpec {
            dataset: DatasetSource::Synthetic(SyntheticConfig { signal: 1.0, ..Default::default() }),
            methods: vec![Method::Local],
            splits: 3,
            ..Default::default()
        };
        spec.train.iterations = 200;
        let out = run_noise_sweep(&spec).unwrap();
        assert!(out.summaries[0].test_accuracy > 0.95, "{:?}", out.summaries[0]);
    }
}
