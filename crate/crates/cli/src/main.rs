use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use learned_deconfound::dataset::{load_mnist_dir, make_shift_suite, ColoredDataset};
use learned_deconfound::deconfound::{adjust_test, fit_and_adjust_train_named};
use learned_deconfound::diagnostics::{ci_report, CiReport, CiThresholds};
use learned_deconfound::harness::{run_experiment, summarize, ExperimentConfig};
use learned_deconfound::nn::Network;
use learned_deconfound::rng::derive_seed;

mod tables;

use tables::{write_matrix, write_meta, Table};

#[derive(Debug, Parser)]
#[command(name = "deconfound", version, about = "Counterfactual deconfounding of learned features on colored MNIST")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment configuration file in `key = value` format.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Color MNIST subsets: one training set and the six shifted test sets.
    Colorize(ColorizeArgs),
    /// Train a feature learner on a colored dataset and export features.
    Train(TrainArgs),
    /// Remove the confounder contribution from feature files.
    Adjust(AdjustArgs),
    /// Compute CI diagnostics from a predictions file.
    Diagnose(DiagnoseArgs),
    /// Run the full replicated experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Directory holding the four MNIST IDX files.
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Average-pool images 2×2 before coloring.
    #[arg(long)]
    downscale: bool,
}

#[derive(Debug, Args)]
struct ColorizeArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Colored training set written by `colorize`.
    #[arg(long)]
    data: PathBuf,
    /// Colored datasets to extract features for after training.
    #[arg(long = "extract")]
    extract: Vec<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct AdjustArgs {
    /// Training features, one column per feature.
    #[arg(long)]
    train_features: PathBuf,
    /// Training metadata: a `label` column plus one column per confounder.
    #[arg(long)]
    train_meta: PathBuf,
    /// Test feature files to adjust with the training coefficients.
    #[arg(long = "test-features")]
    test_features: Vec<PathBuf>,
    /// Confounder files paired with `--test-features`. A `label` column, if
    /// present, is ignored.
    #[arg(long = "test-meta")]
    test_meta: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// CSV with `probability`, `label` and `color` columns and optional
    /// `replication`, `shift` and `method` grouping columns.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    independence_threshold: Option<f64>,
    #[arg(long)]
    dependence_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    replications: Option<usize>,
    /// Also write per-example predictions.
    #[arg(long)]
    predictions: bool,
    /// Override any configuration key, e.g. `--set epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            let mut config = ExperimentConfig::default();
            config.apply_text(&text)?;
            config
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn apply_data_args(config: &mut ExperimentConfig, data: &DataArgs) {
    if let Some(dir) = &data.mnist_dir {
        config.mnist_dir = dir.clone();
    }
    if let Some(n) = data.n_train {
        config.n_train = n;
    }
    if let Some(n) = data.n_test {
        config.n_test = n;
    }
    if data.downscale {
        config.downscale = true;
    }
}

fn colorize(config: &ExperimentConfig) -> Result<()> {
    let (train, test) = load_mnist_dir(&config.mnist_dir)
        .with_context(|| format!("cannot load MNIST from {}", config.mnist_dir.display()))?;
    let mut train = train.subset(config.n_train, derive_seed(config.base_seed, 0))?;
    let mut test = test.subset(config.n_test, derive_seed(config.base_seed, 1))?;
    if config.downscale {
        train = train.downscale_2x2()?;
        test = test.downscale_2x2()?;
    }
    let suite = make_shift_suite(&train, &test, derive_seed(config.base_seed, 2))?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    suite.train.save(dir.join("train.cds"))?;
    for (level, data) in &suite.tests {
        data.save(dir.join(format!("test-{level}.cds")))?;
    }
    println!("wrote 7 colored datasets to {}", dir.display());
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
}

fn train(config: &ExperimentConfig, args: &TrainArgs) -> Result<()> {
    let data = ColoredDataset::load(&args.data).with_context(|| format!("cannot load {}", args.data.display()))?;
    let mut learner = config.learner.clone();
    if let Some(e) = args.epochs {
        learner.epochs = e;
    }
    let mut net = Network::new(learner.network(data.image_size(), config.base_seed)?)?;
    let report = net.train(&data, data.labels())?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let mut file = fs::File::create(dir.join("network.ckpt"))?;
    net.write_checkpoint(&mut file)?;
    println!(
        "final training loss {:.5}, training accuracy {:.4}",
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        net.accuracy(&data, data.labels())?
    );
    for path in std::iter::once(&args.data).chain(&args.extract) {
        let set = if path == &args.data {
            data.clone()
        } else {
            ColoredDataset::load(path).with_context(|| format!("cannot load {}", path.display()))?
        };
        let features = net.extract_features(&set)?;
        let name = stem(path);
        write_matrix(&dir.join(format!("{name}_features.csv")), "f", features.values())?;
        write_meta(&dir.join(format!("{name}_meta.csv")), set.labels(), set.colors())?;
    }
    Ok(())
}

fn confounder_names(meta: &Table) -> Vec<String> {
    meta.columns.iter().filter(|c| c.as_str() != "label").cloned().collect()
}

fn adjust(config: &ExperimentConfig, args: &AdjustArgs) -> Result<()> {
    if args.test_features.len() != args.test_meta.len() {
        bail!(
            "{} --test-features files but {} --test-meta files; they must be paired",
            args.test_features.len(),
            args.test_meta.len()
        );
    }
    let features = Table::read(&args.train_features)?;
    let meta = Table::read(&args.train_meta)?;
    if features.len() != meta.len() {
        bail!(
            "row count mismatch: {} has {} rows but {} has {} rows",
            args.train_features.display(),
            features.len(),
            args.train_meta.display(),
            meta.len()
        );
    }
    let names = confounder_names(&meta);
    if names.is_empty() {
        bail!("{} has no confounder columns besides 'label'", args.train_meta.display());
    }
    let x = features.full_matrix(&args.train_features)?;
    let y = ndarray::Array1::from(meta.numeric_column("label", &args.train_meta)?);
    let c = meta.matrix(&names, &args.train_meta)?;
    let (adjusted, fit) = fit_and_adjust_train_named(x.view(), y.view(), c.view(), Some(&names))?;

    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let mut coef = fs::File::create(dir.join("coefficients.tsv"))?;
    fit.write_table(&mut coef)?;
    write_matrix(&dir.join(format!("{}_adjusted.csv", stem(&args.train_features))), "f", &adjusted.values)?;

    for (fpath, mpath) in args.test_features.iter().zip(&args.test_meta) {
        let tf = Table::read(fpath)?;
        let tm = Table::read(mpath)?;
        if tf.len() != tm.len() {
            bail!(
                "row count mismatch: {} has {} rows but {} has {} rows",
                fpath.display(),
                tf.len(),
                mpath.display(),
                tm.len()
            );
        }
        if tf.columns.len() != features.columns.len() {
            bail!(
                "feature count mismatch: {} has {} columns but the training features have {}",
                fpath.display(),
                tf.columns.len(),
                features.columns.len()
            );
        }
        let tc = tm.matrix(&names, mpath)?;
        let out = adjust_test(tf.full_matrix(fpath)?.view(), tc.view(), &fit)?;
        write_matrix(&dir.join(format!("{}_adjusted.csv", stem(fpath))), "f", &out.values)?;
    }
    println!("adjusted {} feature file(s) into {}", 1 + args.test_features.len(), dir.display());
    Ok(())
}

type GroupKey = (String, String, String);

/// Writes `diagnostics.csv` into `out`, or to stdout when no directory is given.
fn diagnose(config: &ExperimentConfig, args: &DiagnoseArgs, out_dir: Option<&Path>) -> Result<()> {
    let table = Table::read(&args.predictions)?;
    let probs = table.numeric_column("probability", &args.predictions)?;
    let labels = table.numeric_column("label", &args.predictions)?;
    let colors = table.numeric_column("color", &args.predictions)?;
    let text = |name: &str, i: usize| table.position(name).map_or_else(String::new, |j| table.rows[i][j].clone());

    let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for i in 0..table.len() {
        groups
            .entry((text("replication", i), text("shift", i), text("method", i)))
            .or_default()
            .push(i);
    }
    let thresholds = CiThresholds {
        independence: args.independence_threshold.unwrap_or(config.thresholds.independence),
        dependence: args.dependence_threshold.unwrap_or(config.thresholds.dependence),
    };

    let mut out: Box<dyn std::io::Write> = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Box::new(fs::File::create(dir.join("diagnostics.csv"))?)
        }
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "replication,shift,method,{}", CiReport::csv_header())?;
    for ((rep, shift, method), idx) in groups {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let level = shift.parse().ok();
        let report = ci_report(&pick(&probs), &pick(&colors), &pick(&labels), &thresholds, level)
            .with_context(|| format!("group replication='{rep}' shift='{shift}' method='{method}'"))?;
        writeln!(out, "{rep},{shift},{method},{}", report.csv_fields())?;
    }
    Ok(())
}

fn experiment(mut config: ExperimentConfig, args: &ExperimentArgs) -> Result<()> {
    apply_data_args(&mut config, &args.data);
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if args.predictions {
        config.write_predictions = true;
    }
    for o in &args.overrides {
        let Some((k, v)) = o.split_once('=') else {
            bail!("--set expects KEY=VALUE, got '{o}'");
        };
        config.set(k, v)?;
    }
    config.validate()?;
    let result = run_experiment(&config)?;
    println!("{:<9} {:<7} {:>8} {:>12}", "shift", "method", "median", "|rRC.Y| med");
    for row in summarize(&result) {
        println!(
            "{:<9} {:<7} {:>8.4} {:>12.4}",
            row.shift.as_str(),
            row.method.as_str(),
            row.accuracy.median,
            row.partial_rc.median
        );
    }
    for w in &result.warnings {
        eprintln!("warning: replication {} skipped: {}", w.replication, w.message);
    }
    println!("results written to {}", config.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    match &cli.command {
        Command::Colorize(args) => {
            apply_data_args(&mut config, &args.data);
            config.validate()?;
            colorize(&config)
        }
        Command::Train(args) => train(&config, args),
        Command::Adjust(args) => adjust(&config, args),
        Command::Diagnose(args) => diagnose(&config, args, cli.out.as_deref()),
        Command::Experiment(args) => experiment(config, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
