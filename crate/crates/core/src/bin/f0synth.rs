use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use f0synth::cli::{self, config::parse_override, RunConfig};

#[derive(Parser)]
#[command(
    name = "f0synth",
    version,
    about = "Framewise F0 synthesis and speaker anonymization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with a known feature-to-F0 mapping
    Synthgen(Common),
    /// Train the F0 synthesizer
    Train(Common),
    /// Evaluate predictions against a reference manifest
    Eval(Common),
    /// Anonymize utterances (F0 synthesis or shift-and-scale)
    Anonymize(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `section.key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.lr=0.001` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut overrides = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        if let Some(dir) = &self.out_dir {
            overrides.push(("out_dir".into(), dir.display().to_string()));
        }
        Ok(RunConfig::load(self.config.as_deref(), &overrides)?)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synthgen(c) => {
            let s = cli::cmd_synthgen(&c.load()?).context("synthgen")?;
            println!("{}", s.manifest.display());
            eprintln!(
                "{} frames; train {} valid {} pool {}",
                s.frames,
                s.train_manifest.display(),
                s.valid_manifest.display(),
                s.pool.display()
            );
        }
        Command::Train(c) => {
            let s = cli::cmd_train(&c.load()?).context("train")?;
            match s.best_metric {
                Some(m) => println!("best validation accurately-processed: {m:.4} ({} epochs)", s.epochs),
                None => println!("no epochs run"),
            }
            eprintln!("checkpoint {}", s.checkpoint.display());
        }
        Command::Eval(c) => {
            let s = cli::cmd_eval(&c.load()?).context("eval")?;
            print!("{}", std::fs::read_to_string(&s.metrics)?);
        }
        Command::Anonymize(c) => {
            let s = cli::cmd_anonymize(&c.load()?).context("anonymize")?;
            println!(
                "{} utterances, {} frames, {:.0} frames/s, {} flagged (rho_f0)",
                s.utterances,
                s.frames,
                s.frames_per_second(),
                s.flagged.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
