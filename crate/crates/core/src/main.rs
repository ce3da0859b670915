use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use fedrisk::dataset::{generate_synthetic_corpus, write_oulad, SyntheticCorpusConfig};
use fedrisk::experiment::{
    emit_reports, run_matrix, DataSource, ExperimentConfig, ExperimentError, ExperimentName,
    SyntheticSource,
};

/// Centralized versus federated at-risk student prediction on OULAD-shaped data.
#[derive(Debug, Parser)]
#[command(version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment matrix (the default).
    Run(RunArgs),
    /// Write a synthetic corpus as the five OULAD CSV files.
    GenerateSynthetic(GenerateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding the OULAD CSV files.
    #[arg(long, conflicts_with = "synthetic")]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Restrict to these experiments (repeatable).
    #[arg(long = "experiment", value_name = "NAME")]
    experiments: Vec<ExperimentName>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the default synthetic corpus.
    #[arg(long)]
    synthetic: bool,
    /// Run experiments concurrently.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    modules: usize,
    #[arg(long, default_value_t = 300)]
    students_per_module: usize,
    #[arg(long, default_value_t = 0.3)]
    fail_rate: f64,
    #[arg(long, default_value_t = 1.5)]
    signal_strength: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &args.data_dir {
        cfg.data = DataSource::OuladDir(dir.clone());
    }
    if args.synthetic {
        cfg.data = DataSource::Synthetic(SyntheticSource::default());
    }
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = dir.clone();
    }
    if !args.experiments.is_empty() {
        cfg.experiments = args.experiments.clone();
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    cfg.parallel_experiments |= args.parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<(), ExperimentError> {
    let cfg = resolve_config(args)?;
    let out = run_matrix(&cfg)?;
    let written = emit_reports(&out, &cfg.out_dir)?;
    println!(
        "{:<20} {:>8} {:>8} {:>9} {:>8} {:>8}",
        "experiment", "roc_auc", "accuracy", "precision", "recall", "f1"
    );
    for run in &out.runs {
        let m = &run.report.metrics;
        println!(
            "{:<20} {:>8.4} {:>8.4} {:>9.4} {:>8.4} {:>8.4}",
            run.report.name, m.roc_auc, m.accuracy, m.precision, m.recall, m.f1
        );
    }
    info!("wrote {} files to {}", written.len(), cfg.out_dir.display());
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<(), ExperimentError> {
    let cfg = SyntheticCorpusConfig {
        n_modules: args.modules,
        students_per_module: args.students_per_module,
        fail_rate: args.fail_rate,
        signal_strength: args.signal_strength,
        seed: args.seed,
    };
    let tables = generate_synthetic_corpus(&cfg)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|source| ExperimentError::Io {
        path: args.out_dir.display().to_string(),
        source,
    })?;
    write_oulad(&tables, &args.out_dir)?;
    info!(
        "wrote {} registrations to {}",
        tables.student_info.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Run(args)) => run(args),
        Some(Command::GenerateSynthetic(args)) => generate(args),
        None => run(&cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
