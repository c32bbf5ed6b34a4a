use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcc::experiment::{
    compute_metrics, emit_cross_section_csv, emit_loss_history_csv, emit_results_csv,
    emit_summary_csv, predict_method, run_noise_sweep, split_dataset, Dataset, DatasetSource,
    ExperimentSpec, Method,
};
use rcc::graphdata::{
    generate_synthetic_homophily_graph, write_citation_dataset, write_pbm, write_ppm,
    GraphView, SyntheticConfig,
};
use rcc::inference::hard_labels;
use rcc::localclf::{Classifier, ParamMatrix};
use rcc::relfeat::{Aggregator, DEFAULT_MODE_TEMPERATURE};
use rcc::train::{
    loss_cross_section, rcc_gradient_check, train_ica_baseline, train_local, train_rcc,
    FitResult, TrainConfig,
};
use rcc::{Error, Result};

#[derive(Parser)]
#[command(name = "rcc", version, about = "Recurrent collective classification on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one method on the training side of a split and save its parameters.
    Train(TrainArgs),
    /// Label every node of a dataset with saved parameters.
    Predict(PredictArgs),
    /// Compare the analytic gradient with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate methods over noise levels, splits and lambdas.
    Sweep(SweepArgs),
    /// Loss along the line from the recurrent solution to the true-label solution.
    CrossSection(CrossSectionArgs),
    /// Write a synthetic dataset in the citation or image file formats.
    GenSynthetic(GenArgs),
}

/// Flags shared by every subcommand. Precedence: defaults, then
/// `--paper-scale`, then `--config`, then individual flags.
#[derive(Args, Clone)]
struct Common {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `synthetic[:n=..,k=..,d=..,homophily=..,signal=..,degree=..,locality=..,seed=..]`,
    /// `citation:<content>,<cites>`, `images:<dir>` or
    /// `synthetic-images[:count=..,height=..,width=..,seed=..]`.
    #[arg(long)]
    dataset: Option<String>,
    /// `sigmoid` or `softmax`.
    #[arg(long)]
    classifier: Option<String>,
    /// `sum`, `proportion` or `mode`.
    #[arg(long)]
    aggregator: Option<String>,
    /// Temperature for the softmax classifier and the mode aggregator.
    #[arg(long)]
    tau: Option<f64>,
    /// Unroll length.
    #[arg(long = "T")]
    unroll: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Optimizer iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Comma-separated L2 strengths; single-model commands use the first.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// 2000 iterations and 20 splits.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "rcc")]
    method: String,
    /// Split index to train on.
    #[arg(long, default_value_t = 0)]
    split: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Parameter file written by `train`.
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value = "rcc")]
    method: String,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated subset of local,ica,gs,rcc.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated noise levels in [0, 1).
    #[arg(long)]
    noise_levels: Option<String>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// `test` or `validation`.
    #[arg(long)]
    selection: Option<String>,
    /// Record wall-clock seconds (makes outputs run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct CrossSectionArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = -0.2, allow_negative_numbers = true)]
    alpha_min: f64,
    #[arg(long, default_value_t = 1.2)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha_step: f64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
}

fn classifier_from(kind: &str, tau: Option<f64>) -> Result<Classifier> {
    match (kind, tau) {
        ("softmax", t) => Classifier::softmax(t.unwrap_or(DEFAULT_MODE_TEMPERATURE)),
        (other, None) => other.parse(),
        (other, Some(t)) => match other.parse()? {
            Classifier::Softmax { .. } => Classifier::softmax(t),
            c => Ok(c),
        },
    }
}

fn aggregator_from(kind: &str, tau: Option<f64>) -> Result<Aggregator> {
    match (kind.parse()?, tau) {
        (Aggregator::Mode { .. }, Some(t)) => Aggregator::mode(t),
        (a, _) => Ok(a),
    }
}

fn resolve(common: &Common) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    if common.paper_scale {
        spec = spec.paper_scale();
    }
    if let Some(path) = &common.config {
        spec.apply_config_file(path)?;
    }
    let mut set = |key: &str, value: Option<String>| match value {
        Some(v) => spec.set(key, &v),
        None => Ok(()),
    };
    set("dataset", common.dataset.clone())?;
    set("T", common.unroll.map(|v| v.to_string()))?;
    set("eta", common.eta.map(|v| v.to_string()))?;
    set("iterations", common.iters.map(|v| v.to_string()))?;
    set("lambda_grid", common.lambda_grid.clone())?;
    set("seed", common.seed.map(|v| v.to_string()))?;
    if let Some(kind) = &common.classifier {
        spec.classifier = classifier_from(kind, common.tau)?;
    } else if let (Some(t), Classifier::Softmax { .. }) = (common.tau, spec.classifier) {
        spec.classifier = Classifier::softmax(t)?;
    }
    if let Some(kind) = &common.aggregator {
        spec.aggregator = aggregator_from(kind, common.tau)?;
    } else if let (Some(t), Aggregator::Mode { .. }) = (common.tau, spec.aggregator) {
        spec.aggregator = Aggregator::mode(t)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn prepare_out(dir: &Path, spec: &ExperimentSpec, command: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut file = fs::File::create(dir.join("config.txt"))?;
    write!(file, "# rcc {command}\n{}", spec.to_config_text())?;
    Ok(())
}

fn train_config(spec: &ExperimentSpec) -> TrainConfig {
    TrainConfig {
        lambda: spec.lambda_grid[0],
        ..spec.train.clone()
    }
}

fn fit(method: Method, graph: &rcc::graphdata::AttributedGraph, spec: &ExperimentSpec) -> Result<FitResult> {
    let config = train_config(spec);
    match method {
        Method::Local => train_local(graph, spec.classifier, &config),
        Method::Ica | Method::Gs => train_ica_baseline(graph, spec.classifier, spec.aggregator, &config),
        Method::Rcc => train_rcc(graph, spec.classifier, spec.aggregator, &config),
    }
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let spec = resolve(&args.common)?;
    let method: Method = args.method.parse()?;
    let data = Dataset::load(&spec.dataset)?;
    let (train, test) = split_dataset(&spec, &data, spec.noise_levels[0], args.split)?;
    let out = &args.common.out;
    prepare_out(out, &spec, "train")?;
    let result = fit(method, &train, &spec)?;
    result.params.save(spec.classifier, out.join("params.txt"))?;
    emit_loss_history_csv(&result.loss_history, out.join("loss_history.csv"))?;
    for (name, graph) in [("train", &train), ("test", &test)] {
        let predictions = predict_method(method, &graph.unlabeled(), &result.params, &spec, spec.seed)?;
        let truth = graph.labels().expect("split graphs keep labels");
        let (acc, f1) = compute_metrics(&hard_labels(&predictions), truth, truth.k())?;
        match f1 {
            Some(f1) => println!("{name}_accuracy={acc:.6} {name}_f1={f1:.6}"),
            None => println!("{name}_accuracy={acc:.6}"),
        }
    }
    Ok(())
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let mut spec = resolve(&args.common)?;
    let method: Method = args.method.parse()?;
    let (params, classifier) = ParamMatrix::load(&args.params)?;
    spec.classifier = classifier;
    let graph = match Dataset::load(&spec.dataset)? {
        Dataset::Graph(g) => g,
        Dataset::Images(images) => {
            let graphs = images
                .iter()
                .map(rcc::graphdata::build_grid_graph)
                .collect::<Result<Vec<_>>>()?;
            rcc::graphdata::disjoint_union(&graphs)?
        }
    };
    let out = &args.common.out;
    prepare_out(out, &spec, "predict")?;
    let predictions = predict_method(method, &graph.unlabeled(), &params, &spec, spec.seed)?;
    let labels = hard_labels(&predictions);
    let mut file = std::io::BufWriter::new(fs::File::create(out.join("predictions.csv"))?);
    let prob_cols: Vec<String> = (0..params.k()).map(|c| format!("p{c}")).collect();
    writeln!(file, "node,label,{}", prob_cols.join(","))?;
    for (i, row) in predictions.rows().into_iter().enumerate() {
        let probs: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
        writeln!(file, "{i},{},{}", labels.as_slice()[i], probs.join(","))?;
    }
    file.flush()?;
    if let Some(truth) = graph.labels() {
        let (acc, _) = compute_metrics(&labels, truth, truth.k())?;
        println!("accuracy={acc:.6}");
    }
    Ok(())
}

fn run_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let mut spec = resolve(&args.common)?;
    if args.common.dataset.is_none() && args.common.config.is_none() {
        spec.dataset = DatasetSource::Synthetic(SyntheticConfig {
            n: 20,
            d: 5,
            k: 3,
            seed: spec.seed,
            ..Default::default()
        });
    }
    let graph = match Dataset::load(&spec.dataset)? {
        Dataset::Graph(g) => g,
        Dataset::Images(_) => return Err(Error::InvalidArgument("gradcheck needs a graph dataset".into())),
    };
    let k = graph.labels().map_or(2, |l| l.k());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta = Array2::from_shape_fn((graph.d() + 1 + k, k), |_| rng.random_range(-1.0..1.0));
    let params = ParamMatrix::from_array(theta, graph.d())?;
    let err = rcc_gradient_check(&graph, spec.classifier, spec.aggregator, &params, spec.train.unroll, args.step)?;
    println!("max_relative_error={err:e}");
    if err >= 1e-4 {
        return Err(Error::InvalidArgument(format!("gradient check failed: {err:e}")));
    }
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let mut spec = resolve(&args.common)?;
    let mut set = |key: &str, value: Option<String>| match value {
        Some(v) => spec.set(key, &v),
        None => Ok(()),
    };
    set("methods", args.method.clone())?;
    set("noise_levels", args.noise_levels.clone())?;
    set("splits", args.splits.map(|v| v.to_string()))?;
    set("test_fraction", args.test_fraction.map(|v| v.to_string()))?;
    set("selection", args.selection.clone())?;
    if args.timing {
        spec.record_timing = true;
    }
    spec.validate()?;
    let out = &args.common.out;
    prepare_out(out, &spec, "sweep")?;
    let result = run_noise_sweep(&spec)?;
    emit_results_csv(&result.records, out.join("results.csv"))?;
    emit_summary_csv(&result.summaries, out.join("summary.csv"))?;
    for s in &result.summaries {
        println!(
            "{:<6} noise={:.2} train_acc={:.4} test_acc={:.4}",
            s.method, s.noise, s.train_accuracy, s.test_accuracy
        );
    }
    let failed = result.records.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("{failed} training runs failed; see the log");
    }
    Ok(())
}

fn run_cross_section(args: &CrossSectionArgs) -> Result<()> {
    let spec = resolve(&args.common)?;
    if !(args.alpha_step > 0.0) || args.alpha_max < args.alpha_min {
        return Err(Error::InvalidArgument("need alpha_step > 0 and alpha_max >= alpha_min".into()));
    }
    let data = Dataset::load(&spec.dataset)?;
    let (train, _) = split_dataset(&spec, &data, spec.noise_levels[0], 0)?;
    let out = &args.common.out;
    prepare_out(out, &spec, "cross-section")?;
    let rcc_fit = fit(Method::Rcc, &train, &spec)?;
    let ica_fit = fit(Method::Ica, &train, &spec)?;
    rcc_fit.params.save(spec.classifier, out.join("params_rcc.txt"))?;
    ica_fit.params.save(spec.classifier, out.join("params_ica.txt"))?;
    let count = ((args.alpha_max - args.alpha_min) / args.alpha_step + 1e-9).floor() as usize + 1;
    let alphas: Vec<f64> = (0..count).map(|i| args.alpha_min + i as f64 * args.alpha_step).collect();
    let curve = loss_cross_section(
        &rcc_fit.params,
        &ica_fit.params,
        &alphas,
        &train,
        spec.classifier,
        spec.aggregator,
        spec.train.unroll,
        spec.lambda_grid[0],
    )?;
    emit_cross_section_csv(&curve, out.join("cross_section.csv"))?;
    Ok(())
}

fn run_gen(args: &GenArgs) -> Result<()> {
    let spec = resolve(&args.common)?;
    let out = &args.common.out;
    prepare_out(out, &spec, "gen-synthetic")?;
    match &spec.dataset {
        DatasetSource::Synthetic(cfg) => {
            let graph = generate_synthetic_homophily_graph(cfg)?;
            write_citation_dataset(&graph, None, out.join("graph.content"), out.join("graph.cites"))?;
            println!("wrote {} nodes, {} edges", graph.n(), graph.adjacency().num_edges());
        }
        source @ DatasetSource::SyntheticImages { .. } => {
            let Dataset::Images(images) = Dataset::load(source)? else {
                unreachable!("image source yields images")
            };
            for (i, image) in images.iter().enumerate() {
                write_ppm(image, out.join(format!("image{i:03}.ppm")))?;
                write_pbm(image, out.join(format!("image{i:03}.pbm")))?;
            }
            println!("wrote {} images", images.len());
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "gen-synthetic needs a synthetic dataset, got {other}"
            )))
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => run_train(a),
        Command::Predict(a) => run_predict(a),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::Sweep(a) => run_sweep(a),
        Command::CrossSection(a) => run_cross_section(a),
        Command::GenSynthetic(a) => run_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
