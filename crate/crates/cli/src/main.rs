//! `distreg`: experiment runner for distribution regression.
//!
//! Exit status is 0 on success, 1 on data, model or solver errors (reported
//! on stderr as `error: ...`), and 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distreg::experiment::{run_experiment, ExperimentConfig};
use distreg::regress::reference_sigmas;
use distreg::synth::{
    mean_task, multisource_task, two_sample, variance_task, GalleryParams, MultiSourceParams, Scenario, TaskParams,
};
use distreg::{
    load_bags, load_multisource, load_sample, load_unlabeled, median_heuristic, mmd_permutation_test, save_bags,
    save_instances, save_predictions, save_sample, save_targets, Dataset, Error, FittedModel, ModelKind, ModelSpec,
    RbfParams,
};

/// Environment variable holding the worker thread count (0 = one per core).
const THREADS_ENV: &str = "DISTREG_THREADS";

#[derive(Parser)]
#[command(name = "distreg", version, about = "Kernel distribution regression on bags of instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cross-validated evaluation protocol described by a config file.
    Run(RunArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Two-sample MMD permutation test between two headerless CSV samples.
    Mmd(MmdArgs),
    /// Fit one model with fixed hyperparameters and save it.
    Fit(FitArgs),
    /// Predict bag targets with a saved model.
    Predict(PredictArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Model kinds to run, replacing the config list.
    #[arg(long = "model", value_delimiter = ',')]
    models: Vec<ModelKind>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    VarianceTask,
    MeanTask,
    MultisourceTask,
    TwoSampleGallery,
}

#[derive(Args)]
struct SynthArgs {
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bags: Option<usize>,
    /// Instances per bag.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Gallery: only this scenario (a, b, c or d).
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Gallery: points per sample.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    variance_ratio: Option<f64>,
}

#[derive(Args)]
struct MmdArgs {
    sample_x: PathBuf,
    sample_y: PathBuf,
    /// Kernel bandwidth; defaults to the median heuristic on the pooled sample.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 200)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: ModelKind,
    /// Instances CSV; repeat once per source.
    #[arg(long = "instances", required = true)]
    instances: Vec<PathBuf>,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Bandwidth(s); one per source for MDR. Defaults to the median heuristic.
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Random Fourier feature count for RDR kinds.
    #[arg(long, default_value_t = 512)]
    features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_file: PathBuf,
    /// Instances CSV; repeat once per source.
    #[arg(long = "instances", required = true)]
    instances: Vec<PathBuf>,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), Error> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a non-negative integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.protocol.seed = seed;
    }
    if !args.models.is_empty() {
        config.models = args.models;
    }
    if let Some(f) = args.test_fraction {
        config.protocol.test_fraction = f;
    }
    if let Some(t) = args.trials {
        config.protocol.trials = t;
    }
    if let Some(k) = args.folds {
        config.protocol.folds = k;
    }
    if let Some(out) = args.out {
        config.out = out;
    }
    let (reports, outputs) = run_experiment(&config)?;
    print!("{}", distreg::eval::comparison_text(&reports));
    println!("wrote {}", outputs.table_csv.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let out = &args.out;
    match args.kind {
        SynthKind::VarianceTask | SynthKind::MeanTask => {
            let d = TaskParams::default();
            let params = TaskParams {
                bags: args.bags.unwrap_or(d.bags),
                instances: args.instances.unwrap_or(d.instances),
                dim: args.dim.unwrap_or(d.dim),
                noise: args.noise.unwrap_or(d.noise),
                ..d
            };
            let data = match args.kind {
                SynthKind::VarianceTask => variance_task(&params, args.seed)?,
                _ => mean_task(&params, args.seed)?,
            };
            save_bags(&data, out.join("instances.csv"), out.join("targets.csv"))?;
        }
        SynthKind::MultisourceTask => {
            let d = MultiSourceParams::default();
            let params = MultiSourceParams {
                bags: args.bags.unwrap_or(d.bags),
                noise: args.noise.unwrap_or(d.noise),
                ..d
            };
            let data = multisource_task(&params, args.seed)?;
            for (f, source) in data.sources().iter().enumerate() {
                save_instances(source.bags(), out.join(format!("source{}.csv", f + 1)))?;
            }
            let ids: Vec<&str> = data.ids().iter().map(String::as_str).collect();
            save_targets(&ids, data.targets(), out.join("targets.csv"))?;
        }
        SynthKind::TwoSampleGallery => {
            let d = GalleryParams::default();
            let params = GalleryParams {
                n: args.n.unwrap_or(d.n),
                shift: args.shift.unwrap_or(d.shift),
                variance_ratio: args.variance_ratio.unwrap_or(d.variance_ratio),
            };
            let scenarios = args.scenario.map(|s| vec![s]).unwrap_or_else(|| Scenario::ALL.to_vec());
            for s in scenarios {
                let (x, y) = two_sample(s, &params, args.seed)?;
                save_sample(&x, out.join(format!("{s}_x.csv")))?;
                save_sample(&y, out.join(format!("{s}_y.csv")))?;
            }
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_mmd(args: MmdArgs) -> Result<(), Error> {
    let x = load_sample(&args.sample_x)?;
    let y = load_sample(&args.sample_y)?;
    let sigma = args.sigma.unwrap_or_else(|| median_heuristic(x.rows().chain(y.rows())));
    let test = mmd_permutation_test(&x, &y, &RbfParams::new(sigma)?, args.permutations, args.seed)?;
    println!("mmd2 = {:.6e}", test.statistic);
    println!("null_p95 = {:.6e}", test.null_p95);
    println!("null_p99 = {:.6e}", test.null_p99);
    println!("p_value = {:.6}", test.p_value);
    println!("sigma = {sigma:.6}");
    println!("permutations = {}", test.permutations);
    Ok(())
}

fn load_labeled(instances: &[PathBuf], targets: &Path) -> Result<Dataset, Error> {
    Ok(match instances {
        [single] => Dataset::Single(load_bags(single, targets)?),
        many => Dataset::Multi(load_multisource(many, targets)?),
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let data = load_labeled(&args.instances, &args.targets)?;
    let sigma = if args.sigma.is_empty() && args.model.uses_sigma() {
        let normalized = data.as_ref().normalized(&data.as_ref().fit_normalizers()?)?;
        reference_sigmas(args.model, normalized.as_ref())?
    } else {
        args.sigma
    };
    let spec = ModelSpec {
        kind: args.model,
        lambda: args.lambda,
        sigma,
        features: Some(args.features),
        seed: args.seed,
    };
    let model = distreg::fit_model(&spec, data.as_ref())?;
    model.save(&args.out)?;
    println!("wrote {} ({} bags)", args.out.display(), data.len());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Error> {
    let model = FittedModel::load(&args.model_file)?;
    let data = load_unlabeled(&args.instances)?;
    let predictions = model.predict(data.as_ref())?;
    let ids = data.as_ref().ids();
    match &args.out {
        Some(path) => save_predictions(&ids, &predictions, path)?,
        None => {
            println!("bag_id,y_pred");
            for (id, p) in ids.iter().zip(&predictions) {
                println!("{id},{p:?}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Mmd(a) => cmd_mmd(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
