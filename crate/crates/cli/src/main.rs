mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use qrobust_core::classifier::{build_qcnn, ClassificationPolicy, EncodedSample, Model};
use qrobust_core::data::{self, Split};
use qrobust_core::selftest::{self, Group, SelftestOptions};
use qrobust_core::training::{evaluate, train, write_history_csv, TrainConfig};
use qrobust_core::verifier::{
    verify_dataset, verify_dataset_sampled, verify_p0_values, DatasetReport, VerifierConfig,
    DEFAULT_DIGITS, FULL_DIGITS,
};

const DATA_ENV: &str = "QROBUST_DATA_DIR";
const DEFAULT_SEED: u64 = 7;
const DEFAULT_TRAIN_SIZE: usize = 500;
const DEFAULT_TEST_SIZE: usize = 200;
const DEFAULT_STAGES: usize = 3;
const QUBITS: usize = 8;

#[derive(Parser)]
#[command(
    name = "qrobust",
    version,
    about = "Train QCNN classifiers and certify robust bounds"
)]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an 8-qubit QCNN on MNIST 0/1.
    Train(TrainArgs),
    /// Certify robust bounds for a dataset or explicit probabilities.
    Verify(VerifyArgs),
    /// Run the property checks at reduced size.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct DataArgs {
    /// MNIST directory with IDX files, or a QRB1 cache file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch history CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    stages: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subset {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, conflicts_with = "p0")]
    model: Option<PathBuf>,
    /// Explicit measurement probabilities of outcome 0, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    p0: Vec<f64>,
    /// Qubit count for `--p0` mode.
    #[arg(long, default_value_t = QUBITS)]
    n: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Print 17 significant digits instead of 6.
    #[arg(long)]
    full_precision: bool,
    /// Estimate probabilities from this many shots (results are marked statistical).
    #[arg(long)]
    shots: Option<usize>,
    /// Which part of the seeded split to verify.
    #[arg(long, value_enum, default_value = "test")]
    subset: Subset,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Restrict to these groups (repeatable).
    #[arg(long, value_parser = parse_group)]
    group: Vec<Group>,
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Force every check to fail.
    #[arg(long, hide = true)]
    inject_violation: bool,
}

fn parse_group(s: &str) -> Result<Group, String> {
    s.parse().map_err(|e: qrobust_core::Error| e.to_string())
}

enum Failure {
    /// Bad input, missing files, I/O.
    Usage(String),
    /// A check or acceptance condition did not hold.
    Check(String),
}

impl From<qrobust_core::Error> for Failure {
    fn from(e: qrobust_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli
        .config
        .as_deref()
        .map(RunConfig::load)
        .transpose()
        .map_err(Failure::Usage)
        .and_then(|cfg| {
            let cfg = cfg.unwrap_or_default();
            match cli.command {
                Command::Train(a) => cmd_train(a, &cfg),
                Command::Verify(a) => cmd_verify(a, &cfg),
                Command::Selftest(a) => cmd_selftest(a, &cfg),
            }
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("qrobust: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("qrobust: {msg}");
            ExitCode::from(2)
        }
    }
}

fn data_path(args: &DataArgs, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    args.data
        .clone()
        .or_else(|| cfg.data_dir.clone())
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .ok_or_else(|| Failure::Usage(format!("no dataset given; pass --data or set {DATA_ENV}")))
}

fn load_split(args: &DataArgs, cfg: &RunConfig) -> Result<Split, Failure> {
    let path = data_path(args, cfg)?;
    if !path.exists() {
        return Err(Failure::Usage(format!(
            "{}: no such file or directory",
            path.display()
        )));
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let train = args
        .train_size
        .or(cfg.train.train_size)
        .unwrap_or(DEFAULT_TRAIN_SIZE);
    let test = args
        .test_size
        .or(cfg.train.test_size)
        .unwrap_or(DEFAULT_TEST_SIZE);
    let samples = if path.is_file() {
        data::load_cache(&path)?
    } else {
        data::preprocess(&data::load_dir(&path)?)
    };
    Ok(data::split(samples, train, test, seed)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn cmd_train(args: TrainArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let t = &cfg.train;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        learning_rate: args
            .learning_rate
            .or(t.learning_rate)
            .unwrap_or(defaults.learning_rate),
        beta1: t.beta1.unwrap_or(defaults.beta1),
        beta2: t.beta2.unwrap_or(defaults.beta2),
        adam_epsilon: t.adam_epsilon.unwrap_or(defaults.adam_epsilon),
        epochs: args.epochs.or(t.epochs).unwrap_or(defaults.epochs),
        batch_size: args
            .batch_size
            .or(t.batch_size)
            .unwrap_or(defaults.batch_size),
        seed: args.data.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
    };
    config.validate()?;
    let out = args
        .out
        .or_else(|| t.out.clone())
        .ok_or_else(|| Failure::Usage("train needs --out".into()))?;
    let history_path = args
        .history
        .or_else(|| t.history.clone())
        .unwrap_or_else(|| {
            let mut name = out.clone().into_os_string();
            name.push(".history.csv");
            PathBuf::from(name)
        });
    let split = load_split(&args.data, cfg)?;
    let arch = build_qcnn(QUBITS, args.stages.or(t.stages).unwrap_or(DEFAULT_STAGES))?;
    let outcome = train(&arch, &split.train, Some(&split.test), &config)?;
    let model = Model::new(arch, outcome.theta)?;
    model.save(&out)?;
    write_history_csv(&outcome.history, create(&history_path)?)?;

    let classifier = model.classifier()?;
    let policy = ClassificationPolicy::default();
    let train_eval = evaluate(&classifier, &split.train, &policy)?;
    let test_eval = evaluate(&classifier, &split.test, &policy)?;
    println!("initial loss {:.6}", outcome.initial_loss);
    if let Some(last) = outcome.history.last() {
        println!("final loss {:.6} after {} epochs", last.loss, last.epoch);
    }
    println!(
        "train accuracy {:.4} ({} samples)",
        train_eval.accuracy(),
        train_eval.total()
    );
    println!(
        "test accuracy {:.4} ({} samples)",
        test_eval.accuracy(),
        test_eval.total()
    );
    println!("model written to {}", out.display());
    println!("history written to {}", history_path.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let v = &cfg.verify;
    let epsilon = args.epsilon.or(v.epsilon).unwrap_or(0.0);
    let format = match (args.format, v.format.as_deref()) {
        (Some(f), _) => f,
        (None, None) => Format::Csv,
        (None, Some(s)) => Format::from_str(s, true).map_err(|_| {
            Failure::Usage(format!(
                "config: unknown format '{s}' (expected csv or json)"
            ))
        })?,
    };
    let digits = if args.full_precision || v.full_precision.unwrap_or(false) {
        FULL_DIGITS
    } else {
        DEFAULT_DIGITS
    };
    let shots = args.shots.or(v.shots);

    let report: DatasetReport = if !args.p0.is_empty() {
        verify_p0_values(&args.p0, &VerifierConfig::new(epsilon, args.n)?)?
    } else {
        let model_path = args
            .model
            .as_ref()
            .ok_or_else(|| Failure::Usage("verify needs --model with --data, or --p0".into()))?;
        let model = Model::load(model_path)?;
        let split = load_split(&args.data, cfg)?;
        let samples: Vec<EncodedSample> = match args.subset {
            Subset::Train => split.train,
            Subset::Test => split.test,
            Subset::All => split.train.into_iter().chain(split.test).collect(),
        };
        let config = VerifierConfig::new(epsilon, model.arch.n())?;
        let classifier = model.classifier()?;
        match shots {
            Some(s) => {
                let seed = args.data.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
                verify_dataset_sampled(&samples, &classifier, &config, s, seed)?
            }
            None => verify_dataset(&samples, &classifier, &config)?,
        }
    };

    let out_path = args.out.or_else(|| v.out.clone());
    let mut out: Box<dyn Write> = match &out_path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    match format {
        Format::Csv => report.write_csv(&mut out, digits)?,
        Format::Json => writeln!(out, "{}", report.to_json())?,
    }
    out.flush()?;

    let s = &report.summary;
    let min = s
        .min_delta
        .map(|d| qrobust_core::verifier::format_significant(d, digits))
        .unwrap_or_else(|| "none".into());
    eprintln!(
        "summary: {} samples, {} zero, {} one, {} unclassifiable, min delta {}",
        s.total, s.zero, s.one, s.unclassifiable, min
    );
    Ok(())
}

fn cmd_selftest(args: SelftestArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let groups = if args.group.is_empty() {
        Group::ALL.to_vec()
    } else {
        args.group
    };
    let options = SelftestOptions {
        seed: args
            .seed
            .or(cfg.seed)
            .unwrap_or(SelftestOptions::default().seed),
        cases: args.cases,
        inject_violation: args.inject_violation,
    };
    let results = selftest::run(&groups, &options);
    for r in &results {
        println!(
            "{} {}: {} (error {:.3e}, tolerance {:.1e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.group,
            r.name,
            r.error,
            r.tolerance
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Check(format!(
            "{failed} of {} checks failed",
            results.len()
        )));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}
