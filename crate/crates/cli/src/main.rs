//! `catalog`: build a scenario-category catalog and check its completeness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use catalog_core::checkpoint::Checkpoint;
use catalog_core::data::io::write_dataset;
use catalog_core::data::SplitTag;
use catalog_core::metrics::{CategoryDistribution, EntropyMode};
use catalog_core::pipeline::{
    self, DataSource, PipelineConfig, Recording, CHECKPOINT_FILE, COMPLETENESS_DIR, DATASET_FILE, DISTRIBUTION_FILE,
    TEST_FILE, TRAIN_FILE,
};
use catalog_core::ClassifierInput;

#[derive(Parser, Debug)]
#[command(name = "catalog", version, about = "Scenario-category catalog and completeness analysis")]
struct Cli {
    /// Output directory for every artifact [default: the config's out_dir, else ./out].
    #[arg(long, global = true, env = "CATALOG_OUT_DIR")]
    out: Option<PathBuf>,

    /// Pipeline config (TOML); command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log more (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Log warnings and errors only.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Convert highD recordings into a dataset.
    Ingest(IngestArgs),
    /// Balance, split and train one model per codebook size.
    Train(TrainArgs),
    /// Compute usage, purity, confusion, reconstruction and representatives.
    Evaluate(EvaluateArgs),
    /// Estimate the minimum complete dataset size.
    Completeness(CompletenessArgs),
    /// Summarize all results and write the checksum manifest.
    Report,
    /// Run the whole pipeline from the configured data source.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Scenarios per behavior class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Generate well-separated clusters instead of independent scenarios.
    #[arg(long)]
    clustered: bool,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    per_cluster: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset file to write [default: <out>/dataset.bin].
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// highD `*_tracks.csv`; repeat together with --meta.
    #[arg(long, required = true)]
    tracks: Vec<PathBuf>,
    /// highD `*_tracksMeta.csv`, one per --tracks.
    #[arg(long, required = true)]
    meta: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Unsplit dataset, or a train split [default: <out>/dataset.bin].
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Codebook size; repeat for several models.
    #[arg(long = "q")]
    q: Vec<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Disable codebook reinitialization (plain vector quantization).
    #[arg(long)]
    no_reinit: bool,
    #[arg(long, value_enum)]
    classifier_input: Option<ClassifierArg>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    no_balance: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClassifierArg {
    Latent,
    Quantized,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EntropyArg {
    Empirical,
    Predicted,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Checkpoint to evaluate; repeatable [default: every <out>/q*/checkpoint.bin].
    #[arg(long)]
    checkpoint: Vec<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum)]
    entropy_mode: Option<EntropyArg>,
}

#[derive(Args, Debug)]
struct CompletenessArgs {
    /// Category distribution (.json, .csv or a plain list of probabilities);
    /// repeatable [default: every <out>/q*/distribution.json].
    #[arg(long)]
    distribution: Vec<PathBuf>,
    /// Probability of the injected unseen category; repeatable.
    #[arg(long = "p-new")]
    p_new: Vec<f64>,
    /// Confidence level; repeatable.
    #[arg(long)]
    tau: Vec<f64>,
    #[arg(long)]
    pilot: Option<usize>,
    #[arg(long)]
    max_sims: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    e: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory [default: next to the distribution].
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Master seed for data, training and simulation.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    match &cli.config {
        Some(p) => Ok(PipelineConfig::read(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn out_dir(cli: &Cli, config: &PipelineConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn create(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn cmd_synth(args: &SynthArgs, mut config: PipelineConfig, out: &Path) -> Result<()> {
    if let Some(seed) = args.seed {
        config.data.seed = seed;
    }
    config.data.source = if args.clustered {
        DataSource::Clustered
    } else {
        DataSource::Synth
    };
    if let Some(n) = args.per_class {
        config.data.synth.per_class = [n; 3];
    }
    if let Some(k) = args.clusters {
        config.data.clustered.clusters = k;
    }
    if let Some(n) = args.per_cluster {
        config.data.clustered.per_cluster = n;
    }
    let dataset = pipeline::load_source(&config.data)?;
    let path = args.output.clone().unwrap_or_else(|| out.join(DATASET_FILE));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create(parent)?;
    }
    write_dataset(&path, &dataset)?;
    println!("wrote {} scenarios to {}", dataset.len(), path.display());
    Ok(())
}

fn cmd_ingest(args: &IngestArgs, out: &Path) -> Result<()> {
    if args.tracks.len() != args.meta.len() {
        bail!("--tracks and --meta must be given the same number of times");
    }
    for p in args.tracks.iter().chain(&args.meta) {
        if !p.is_file() {
            bail!("input file not found: {}", p.display());
        }
    }
    let recordings: Vec<Recording> = args
        .tracks
        .iter()
        .zip(&args.meta)
        .map(|(t, m)| Recording {
            tracks: t.clone(),
            meta: m.clone(),
        })
        .collect();
    let dataset = pipeline::ingest_recordings(&recordings)?;
    let path = args.output.clone().unwrap_or_else(|| out.join(DATASET_FILE));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create(parent)?;
    }
    write_dataset(&path, &dataset)?;
    println!(
        "wrote {} scenarios (class counts {:?}) to {}",
        dataset.len(),
        dataset.class_counts(),
        path.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs, mut config: PipelineConfig, out: &Path) -> Result<()> {
    let t = &mut config.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.lambda {
        t.lambda = v;
    }
    if let Some(v) = args.beta {
        t.beta = v;
    }
    if let Some(v) = args.latent_dim {
        t.latent_dim = v;
    }
    if let Some(v) = &args.hidden {
        t.hidden = v.clone();
    }
    if args.no_reinit {
        t.reinit_enabled = false;
    }
    if let Some(c) = args.classifier_input {
        t.classifier_input = match c {
            ClassifierArg::Latent => ClassifierInput::Latent,
            ClassifierArg::Quantized => ClassifierInput::Quantized,
        };
    }
    if let Some(seed) = args.seed {
        t.seed = seed;
        config.data.seed = seed;
    }
    if let Some(f) = args.train_fraction {
        config.data.train_fraction = f;
    }
    if args.no_balance {
        config.data.balance = false;
    }
    if !args.q.is_empty() {
        config.codebook_sizes = args.q.clone();
    }
    pipeline::validate_codebook_sizes(&config.codebook_sizes, &config.train)?;

    let path = args.dataset.clone().unwrap_or_else(|| out.join(DATASET_FILE));
    let dataset = pipeline::read_split(&path, None)?;
    create(out)?;
    let train = match dataset.split {
        SplitTag::Train => dataset,
        SplitTag::All => {
            let (train, test) = pipeline::prepare(&dataset, &config.data)?;
            write_dataset(&out.join(TRAIN_FILE), &train)?;
            write_dataset(&out.join(TEST_FILE), &test)?;
            train
        }
        SplitTag::Test => bail!("{} holds the test split; train on the unsplit or train file", path.display()),
    };
    for dir in pipeline::train_models(&train, &config.train, &config.codebook_sizes, out)? {
        println!("wrote {}", dir.join(CHECKPOINT_FILE).display());
    }
    Ok(())
}

/// `q*` subdirectories of `out` containing `file`, ordered by Q.
fn model_files(out: &Path, file: &str) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = std::fs::read_dir(out)
        .with_context(|| format!("cannot read {}", out.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let q: usize = p.file_name()?.to_str()?.strip_prefix('q')?.parse().ok()?;
            let f = p.join(file);
            f.is_file().then_some((q, f))
        })
        .collect();
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn cmd_evaluate(args: &EvaluateArgs, config: PipelineConfig, out: &Path) -> Result<()> {
    let checkpoints = if args.checkpoint.is_empty() {
        model_files(out, CHECKPOINT_FILE)?
    } else {
        args.checkpoint.clone()
    };
    if checkpoints.is_empty() {
        bail!("no checkpoints found in {}", out.display());
    }
    let train = pipeline::read_split(&args.train.clone().unwrap_or_else(|| out.join(TRAIN_FILE)), None)?;
    let test_path = args.test.clone().unwrap_or_else(|| out.join(TEST_FILE));
    let test = if args.test.is_some() || test_path.is_file() {
        Some(pipeline::read_split(&test_path, None)?)
    } else {
        None
    };
    let mode = match args.entropy_mode {
        Some(EntropyArg::Empirical) => EntropyMode::Empirical,
        Some(EntropyArg::Predicted) => EntropyMode::Predicted,
        None => config.evaluate.entropy_mode,
    };
    for path in checkpoints {
        let ckpt = Checkpoint::read(&path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = pipeline::evaluate_checkpoint(&ckpt, &train, test.as_ref(), mode, &dir)?;
        let s = &m.summary;
        println!(
            "Q={}: usage {}/{}  H_avg train {}  test {}  L_R train {:.5}  test {}",
            m.codebook_size,
            s.used_train,
            m.codebook_size,
            fmt_opt(s.h_avg_train),
            fmt_opt(s.h_avg_test),
            s.reconstruction_train,
            fmt_opt(s.reconstruction_test)
        );
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn cmd_completeness(args: &CompletenessArgs, mut config: PipelineConfig, out: &Path) -> Result<()> {
    let c = &mut config.completeness;
    if !args.p_new.is_empty() {
        c.p_new = args.p_new.clone();
    }
    if !args.tau.is_empty() {
        c.tau = args.tau.clone();
    }
    if let Some(v) = args.pilot {
        c.pilot = v;
    }
    if let Some(v) = args.max_sims {
        c.max_sims = v;
    }
    if let Some(v) = args.c {
        c.c = v;
    }
    if let Some(v) = args.e {
        c.e = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    c.validate()?;

    let inputs = if args.distribution.is_empty() {
        model_files(out, DISTRIBUTION_FILE)?
    } else {
        args.distribution.clone()
    };
    if inputs.is_empty() {
        bail!("no distribution given and none found in {}", out.display());
    }
    for input in inputs {
        if !input.is_file() {
            bail!("input file not found: {}", input.display());
        }
        let dist = CategoryDistribution::read(&input)?;
        let dir = match (&args.output_dir, args.distribution.is_empty()) {
            (Some(d), _) => d.clone(),
            (None, true) => input.parent().map(|p| p.join(COMPLETENESS_DIR)).unwrap_or_default(),
            (None, false) => out.join(COMPLETENESS_DIR),
        };
        let report = pipeline::run_completeness(&dist, &config.completeness, &dir)?;
        println!("{}: {} known categories", input.display(), report.known_categories);
        println!("{:>10} {:>6} {:>10} {:>10} {:>14} {:>10} {:>8}", "p_new", "tau", "mean", "std", "required", "executed", "S_min");
        for run in &report.runs {
            for t in &run.results {
                println!(
                    "{:>10e} {:>6} {:>10.2} {:>10.2} {:>14} {:>10} {:>8}{}",
                    run.p_new,
                    t.tau,
                    run.pilot_mean,
                    run.pilot_std,
                    run.required_sims,
                    run.executed_sims,
                    t.s_min,
                    if run.cap_applied { "  (capped)" } else { "" }
                );
            }
        }
    }
    Ok(())
}

fn cmd_report(out: &Path) -> Result<()> {
    let summary = pipeline::report(out)?;
    for m in &summary.models {
        for c in &m.completeness {
            println!(
                "Q={} p_new={:e} tau={}: S_min {} vs {} scenarios -> {}",
                m.codebook_size,
                c.p_new,
                c.tau,
                c.s_min,
                m.scenarios,
                if c.complete { "complete" } else { "collect more data" }
            );
        }
    }
    println!("wrote {}", out.join(pipeline::SUMMARY_FILE).display());
    Ok(())
}

fn cmd_run(args: &RunArgs, mut config: PipelineConfig, out: &Path) -> Result<()> {
    if let Some(seed) = args.seed {
        config.set_seed(seed);
    }
    pipeline::run_all(&config, out)?;
    cmd_report(out)
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    let out = out_dir(&cli, &config);
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, config, &out),
        Command::Ingest(a) => cmd_ingest(a, &out),
        Command::Train(a) => cmd_train(a, config, &out),
        Command::Evaluate(a) => cmd_evaluate(a, config, &out),
        Command::Completeness(a) => cmd_completeness(a, config, &out),
        Command::Report => cmd_report(&out),
        Command::Run(a) => cmd_run(a, config, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
