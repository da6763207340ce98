use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gait_aae::pipeline::{self, EXIT_USAGE};
use gait_aae::{GaitError, RunConfig};

/// Gait abnormality scoring pipeline.
#[derive(Parser)]
#[command(name = "gaitidx", version)]
struct Cli {
    /// Flat `key = value` config file; defaults apply to missing keys.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set epochs=300`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for extract and score (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    hist_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic walking benchmark as point-cloud files.
    Synth,
    /// Convert point clouds to cylindrical histograms.
    Extract,
    /// Train the autoencoder on normal training sequences.
    Train {
        /// Continue from the newest checkpoint written with the same config.
        #[arg(long)]
        resume: bool,
    },
    /// Write per-frame measures for validation and test sequences.
    Score,
    /// Compute AUC / EER reports from the scores.
    Eval,
    /// Print the effective config.
    Config,
}

fn load_config(cli: &Cli) -> Result<RunConfig, GaitError> {
    let base = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_overrides(&cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(d) = &cli.hist_dir {
        cfg.hist_dir = d.clone();
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<u8, GaitError> {
    match cli.command {
        Command::Synth => {
            let s = pipeline::cmd_synth(cfg)?;
            println!("wrote {} sequences, {} frames to {}", s.sequences, s.frames, cfg.data_dir.display());
        }
        Command::Extract => {
            let s = pipeline::cmd_extract(cfg)?;
            println!("{} of {} frames extracted to {}", s.histograms, s.frames, cfg.hist_dir.display());
            for r in &s.rejected {
                eprintln!("rejected {} frame {}: {}", r.sequence, r.frame, r.reason);
            }
            if !s.rejected.is_empty() {
                return Ok(pipeline::EXIT_DATA as u8);
            }
        }
        Command::Train { resume } => {
            let s = pipeline::cmd_train(cfg, resume)?;
            println!(
                "trained {} epochs on {} frames; stable window {}..={}; {} checkpoints",
                s.epochs_run,
                s.training_frames,
                s.stable_window.start(),
                s.stable_window.end(),
                s.checkpoints.len()
            );
        }
        Command::Score => {
            let s = pipeline::cmd_score(cfg)?;
            println!("scored epochs {:?}: {} files", s.epochs, s.files);
        }
        Command::Eval => {
            let s = pipeline::cmd_eval(cfg)?;
            println!("{:<8} {:<9} {:<16} {:>5} {:>7} {:>7}", "channel", "level", "mode", "delta", "auc", "eer");
            for ch in &s.channels {
                for r in &ch.levels {
                    println!(
                        "{:<8} {:<9} {:<16} {:>5} {:>7.4} {:>7.4}",
                        ch.channel.label(),
                        r.level.name(),
                        r.level.mode_name(),
                        r.level.delta(),
                        r.mean_auc,
                        r.mean_eer
                    );
                }
            }
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let result = load_config(&cli).and_then(|cfg| run(&cli, &cfg));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
