//! Command-line front end. Exit status: 0 on success, 2 when a config, sequence
//! file or dataset fails validation, 1 on any other failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use goldiprox::experiment::{cmd_compose, cmd_replay, cmd_run, cmd_spearman, ExperimentConfig};
use goldiprox::Error;

#[derive(Parser)]
#[command(
    name = "goldiprox",
    version,
    about = "Online batch selection by reducible holdout loss"
)]
struct Cli {
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with online selection and record the selected sequence.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `out/<config name>` beside the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the config's replay model on a recorded sequence.
    Replay {
        config: PathBuf,
        sequence: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step Spearman correlation of two score dumps.
    Spearman {
        dump_a: PathBuf,
        dump_b: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Corrupted and white-noise fractions of each batch in a sequence.
    Compose {
        sequence: PathBuf,
        dataset_config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn load(path: &Path, seed: Option<u64>) -> goldiprox::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> goldiprox::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config, cli.seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir());
            let run = cmd_run(&cfg, &out)?;
            let acc = run.result.final_accuracy().unwrap_or(f64::NAN);
            println!(
                "{}: {} steps, final test accuracy {acc:.4}, wrote {}",
                cfg.selection.kind,
                run.manifest.steps,
                out.display()
            );
        }
        Command::Replay {
            config,
            sequence,
            out,
        } => {
            let cfg = load(&config, cli.seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir());
            let run = cmd_replay(&cfg, &sequence, &out)?;
            let acc = run.result.final_accuracy().unwrap_or(f64::NAN);
            println!(
                "replay: {} steps, final test accuracy {acc:.4}, wrote {}",
                run.manifest.steps,
                out.display()
            );
        }
        Command::Spearman {
            dump_a,
            dump_b,
            output,
        } => {
            let rows = cmd_spearman(&dump_a, &dump_b, &output)?;
            let positive = rows.iter().filter(|(_, r)| *r > 0.0).count();
            println!(
                "{} steps, rho > 0 on {positive}, wrote {}",
                rows.len(),
                output.display()
            );
        }
        Command::Compose {
            sequence,
            dataset_config,
            output,
        } => {
            let cfg = load(&dataset_config, cli.seed)?;
            let rows = cmd_compose(&sequence, &cfg, &output)?;
            println!("{} steps, wrote {}", rows.len(), output.display());
        }
    }
    Ok(())
}

fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::FingerprintMismatch { .. }
            | Error::SequenceMismatch(_)
            | Error::Sequence(_)
            | Error::Idx(_)
            | Error::UnknownId(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_validation(&e) { 2 } else { 1 })
        }
    }
}
