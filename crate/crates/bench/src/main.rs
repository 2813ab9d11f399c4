use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cobras_bench::commands;
use cobras_bench::{BenchResult, ExperimentConfig, OutputFormat, ResultManifest};

/// Covariance-balancing model reduction experiments.
#[derive(Debug, Parser)]
#[command(name = "cobras", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Every flag overrides the config key of the same name.
#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config. Without it a built-in preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in config to start from when `--config` is absent.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `seeds.training`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `seeds.test`.
    #[arg(long, global = true)]
    test_seed: Option<u64>,
    /// Overrides `output_format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Toy,
    Surrogate,
    SurrogateLti,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write training and test trajectories.
    Simulate,
    /// Build state and adjoint-gradient sample matrices.
    Sample,
    /// Fit CoBRAS projections at every configured rank.
    Cobras,
    /// Fit kernel CoBRAS feature maps.
    Kcobras,
    /// Fit POD bases.
    Pod,
    /// Fit balanced POD projections of the linearized model.
    Bpod,
    /// Run saved Galerkin ROMs on the test set.
    Rom,
    /// Fit learned K-CoBRAS and KPCA models.
    Learn,
    /// Error curves for every saved model.
    Evaluate,
    /// Full toy-model study.
    ReproduceToy,
    /// Full convective-chain comparison.
    Surrogate,
}

fn load_config(command: &Command, common: &Common) -> BenchResult<ExperimentConfig> {
    let mut cfg = match (&common.config, common.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(Preset::Toy)) => ExperimentConfig::toy_default(),
        (None, Some(Preset::Surrogate)) => ExperimentConfig::surrogate_default(),
        (None, Some(Preset::SurrogateLti)) => ExperimentConfig::surrogate_lti_default(),
        (None, None) if matches!(command, Command::Surrogate) => ExperimentConfig::surrogate_default(),
        (None, None) => ExperimentConfig::toy_default(),
    };
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seeds.training = seed;
    }
    if let Some(seed) = common.test_seed {
        cfg.seeds.test = seed;
    }
    if let Some(format) = common.format {
        cfg.output_format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(manifest: &ResultManifest) {
    for m in &manifest.methods {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4e}"));
        println!(
            "{:<12} r={:<3} mean={} median={} diverged={}",
            m.method,
            m.r,
            fmt(m.mean_error),
            fmt(m.median_error),
            m.divergences
        );
    }
    for (k, v) in &manifest.checks {
        println!("{k} = {v:.4e}");
    }
}

fn run(cli: &Cli) -> BenchResult<()> {
    let cfg = load_config(&cli.command, &cli.common)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml_string())?;
    match cli.command {
        Command::Simulate => println!("wrote {} trajectories", commands::simulate(&cfg)?.len()),
        Command::Sample => {
            let t = commands::sample(&cfg)?;
            println!("{} state samples, {} gradient columns", t.states.columns(), t.gradients.columns());
        }
        Command::Cobras => {
            for p in commands::fit_cobras(&cfg)? {
                println!("cobras r={} sigma={:?}", p.rank(), &p.spectrum()[..p.rank()]);
            }
        }
        Command::Kcobras => {
            for m in commands::fit_kcobras(&cfg)? {
                println!("kcobras r={} sigma={:?}", m.rank(), &m.spectrum()[..m.rank()]);
            }
        }
        Command::Pod => {
            for p in commands::fit_pod(&cfg)? {
                println!("pod r={} sigma={:?}", p.modes.ncols(), p.singular_values);
            }
        }
        Command::Bpod => {
            for p in commands::fit_bpod(&cfg)? {
                println!("bpod r={} sigma={:?}", p.rank(), &p.spectrum()[..p.rank()]);
            }
        }
        Command::Rom => println!("wrote {} ROM output files", commands::rom(&cfg)?.len()),
        Command::Learn => commands::learn(&cfg)?,
        Command::Evaluate => report(&commands::evaluate_saved(&cfg)?),
        Command::ReproduceToy => report(&commands::reproduce_toy(&cfg)?),
        Command::Surrogate => report(&commands::surrogate(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
