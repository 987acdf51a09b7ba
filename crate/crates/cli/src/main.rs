use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use chaodiff_cli::commands::{self, LOSS_HEADER};
use chaodiff_cli::config::ExperimentConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chaodiff", version, about = "Chaotic quantum diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward diffusion metrics per step -> forward.csv
    Forward(Common),
    /// Layerwise training -> bundle.json, losses.csv
    Train(Common),
    /// Samples from a trained bundle -> samples.json
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Distances and moment metrics between two bundles -> evaluate.csv
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Bundle holding the first ensemble.
        #[arg(long)]
        left: PathBuf,
        /// Bundle holding the second ensemble.
        #[arg(long)]
        right: PathBuf,
        /// Ensemble name in the left bundle.
        #[arg(long)]
        left_name: Option<String>,
        /// Ensemble name in the right bundle.
        #[arg(long)]
        right_name: Option<String>,
    },
    /// Trained D_wass over a grid of noise levels -> noise_sweep.csv
    NoiseSweep(Common),
    /// Autoencoder plus latent-versus-full comparison -> qae.csv, qae_loss.csv, qae_bundle.json
    Qae(Common),
    /// Prints an example config.
    ExampleConfig,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
        }
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate().context("invalid config")?;
        fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
        Ok(cfg)
    }
}

fn report(path: &std::path::Path) {
    eprintln!("wrote {}", path.display());
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Forward(c) => {
            let cfg = c.load()?;
            let path = cfg.out_dir.join("forward.csv");
            commands::write_csv(&path, commands::FORWARD_HEADER, &commands::forward(&cfg)?)?;
            report(&path);
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let out = commands::train(&cfg)?;
            let bundle = cfg.out_dir.join("bundle.json");
            commands::save_bundle(&bundle, &out.bundle)?;
            report(&bundle);
            let losses = cfg.out_dir.join("losses.csv");
            commands::write_csv(&losses, LOSS_HEADER, &out.losses)?;
            report(&losses);
        }
        Command::Sample { common, bundle } => {
            let cfg = common.load()?;
            let out = commands::sample(&cfg, &commands::load_bundle(&bundle)?)?;
            let path = cfg.out_dir.join("samples.json");
            commands::save_bundle(&path, &out)?;
            report(&path);
        }
        Command::Evaluate { common, left, right, left_name, right_name } => {
            let cfg = common.load()?;
            let l = commands::pick_ensemble(&commands::load_bundle(&left)?, left_name.as_deref())?;
            let r = commands::pick_ensemble(&commands::load_bundle(&right)?, right_name.as_deref())?;
            let path = cfg.out_dir.join("evaluate.csv");
            commands::write_csv(&path, commands::METRIC_HEADER, &commands::evaluate(&cfg, &l, &r)?)?;
            report(&path);
        }
        Command::NoiseSweep(c) => {
            let cfg = c.load()?;
            let path = cfg.out_dir.join("noise_sweep.csv");
            commands::write_csv(&path, commands::NOISE_HEADER, &commands::noise_sweep(&cfg)?)?;
            report(&path);
        }
        Command::Qae(c) => {
            let cfg = c.load()?;
            let out = commands::qae(&cfg)?;
            let rows = cfg.out_dir.join("qae.csv");
            commands::write_csv(&rows, commands::QAE_HEADER, &out.rows)?;
            report(&rows);
            let losses = cfg.out_dir.join("qae_loss.csv");
            commands::write_csv(&losses, commands::QAE_LOSS_HEADER, &out.losses)?;
            report(&losses);
            let bundle = cfg.out_dir.join("qae_bundle.json");
            commands::save_bundle(&bundle, &out.bundle)?;
            report(&bundle);
        }
        Command::ExampleConfig => {
            println!("{}", serde_json::to_string_pretty(&ExperimentConfig::example())?);
        }
    }
    Ok(())
}
