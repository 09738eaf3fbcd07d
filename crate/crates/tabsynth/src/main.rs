//! Thin command-line front end over [`tabsynth::pipeline`]; all behavior
//! lives in the library. Exit codes: 0 success, 2 config error, 3 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tabsynth::config::{ConfigError, RunConfig};
use tabsynth::pipeline::{self, PipelineError};

#[derive(Parser)]
#[command(name = "tabsynth", version, about = "GAN-based synthesis of relational tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator and write the synthetic table plus run artifacts.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Synthetic rows as a fraction of the training rows.
        #[arg(long)]
        ratio: Option<f64>,
        /// Override the training epoch count.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a synthetic table against the real one.
    Eval {
        /// Real table CSV.
        real: PathBuf,
        /// Synthetic table CSV.
        fake: PathBuf,
        /// Schema file for both tables (inferred from the real CSV when
        /// omitted, in which case no label is designated).
        schema: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run synth + eval over a grid of design choices.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Draw a simulated table and write it with its schema.
    Simdata {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, PipelineError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn apply_run_flags(cfg: &mut RunConfig, ratio: Option<f64>, epochs: Option<usize>) {
    if let Some(r) = ratio {
        cfg.ratio = r;
    }
    if epochs.is_some() {
        cfg.train.epochs = epochs;
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Synth { common, ratio, epochs } => {
            let mut cfg = load_config(&common)?;
            apply_run_flags(&mut cfg, ratio, epochs);
            let artifacts = pipeline::cmd_synth(&cfg)?;
            println!("wrote {}", artifacts.fake.display());
        }
        Command::Eval { real, fake, schema, common } => {
            // Eval works without a config: every metric on, inferred schema.
            let cfg = match &common.config {
                Some(_) => Some(load_config(&common)?),
                None => None,
            };
            let seed = common.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            let out = common
                .out
                .clone()
                .or(cfg.as_ref().map(|c| c.out.clone()))
                .unwrap_or_else(|| PathBuf::from("out"));
            let ecfg = cfg.as_ref().map(|c| c.eval.clone()).unwrap_or_default();
            let kinds = cfg
                .as_ref()
                .map(|c| c.classifier_kinds())
                .unwrap_or_else(tabsynth::eval::default_kinds);
            let schema = schema.or_else(|| cfg.as_ref().and_then(|c| c.data.schema.clone()));
            let label = cfg.as_ref().and_then(|c| c.data.label.clone());
            let report = pipeline::cmd_eval(
                &real,
                &fake,
                schema.as_deref(),
                label.as_deref(),
                &ecfg,
                &kinds,
                seed,
                &out,
            )?;
            print!("{}", report.summary());
            println!("wrote {}", out.join("report.json").display());
        }
        Command::Bench { common, ratio, epochs } => {
            let mut cfg = load_config(&common)?;
            apply_run_flags(&mut cfg, ratio, epochs);
            let (path, rows) = pipeline::cmd_bench(&cfg)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("wrote {} ({} cells, {failed} failed)", path.display(), rows.len());
        }
        Command::Simdata { common } => {
            let cfg = load_config(&common)?;
            let (csv, schema) = pipeline::cmd_simdata(&cfg)?;
            println!("wrote {} and {}", csv.display(), schema.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
