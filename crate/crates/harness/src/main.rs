use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gmgan_harness::config::{Experiment, ExperimentConfig};
use gmgan_harness::experiments::{
    run_cluster, run_gen_toy, run_score, run_sigma_sweep, run_toy_convergence, run_train, Outputs,
};
use gmgan_harness::Result;

#[derive(Parser)]
#[command(name = "gmgan", about = "Train and evaluate GANs with Gaussian-mixture latent priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key=value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train one model and write losses, epochs and a checkpoint.
    Train,
    /// Per-epoch NLL of the four model families on the toy data.
    ToyConvergence,
    /// Quality and diversity across a grid of sigma scales.
    SigmaSweep,
    /// Score one model at `sigma_scale`.
    Score,
    /// Cluster the training set with a trained mixture GAN.
    Cluster,
    /// Write the toy dataset as CSV.
    GenToy,
    /// Print the effective configuration.
    ShowConfig,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_assignment(o)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.experiment = match cli.command {
        Command::Train | Command::ShowConfig => Experiment::Train,
        Command::ToyConvergence => Experiment::ToyConvergence,
        Command::SigmaSweep => Experiment::SigmaSweep,
        Command::Score => Experiment::Score,
        Command::Cluster => Experiment::Cluster,
        Command::GenToy => Experiment::GenToy,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let outputs: Outputs = match cli.command {
        Command::ShowConfig => {
            print!("{}", cfg.render());
            return Ok(());
        }
        Command::Train => {
            let snapshots = (cfg.snapshot_every > 0).then(|| cfg.out.join("snapshots"));
            if let Some(dir) = &snapshots {
                std::fs::create_dir_all(dir)?;
            }
            run_train(&cfg, snapshots.as_deref())?.1
        }
        Command::ToyConvergence => run_toy_convergence(&cfg)?.1,
        Command::SigmaSweep => run_sigma_sweep(&cfg)?.1,
        Command::Score => run_score(&cfg)?.1,
        Command::Cluster => run_cluster(&cfg)?.1,
        Command::GenToy => run_gen_toy(&cfg)?,
    };
    outputs.write_to(&cfg.out)?;
    std::fs::write(cfg.out.join("config.txt"), cfg.render())?;
    for a in &outputs.0 {
        println!("{}", cfg.out.join(&a.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::FAILURE
        }
    }
}
