//! `dpfilter`: differentially private filtering experiments from the
//! command line. Every subcommand loads a TOML or JSON config (or a pinned
//! default), runs fully seeded, and writes `summary.json` plus trace tables
//! into the output directory.

mod bundle;
mod config;
mod scenarios;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::load_config;
use scenarios::reproduce::Suite;

#[derive(Parser)]
#[command(name = "dpfilter", version, about = "Differentially private filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML or JSON); the pinned default is used when
    /// omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's Monte Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory; defaults to out/<subcommand>.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn out_dir(&self, name: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(name))
    }

    /// Loads the config or falls back to `pinned`, then applies the seed and
    /// trial overrides through `common`.
    fn resolve<T: serde::de::DeserializeOwned>(
        &self,
        pinned: T,
        common: impl FnOnce(&mut T) -> &mut config::CommonConfig,
    ) -> Result<T> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => pinned,
        };
        let c = common(&mut cfg);
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Moving-average aggregation: input versus output noise placement.
    Aggregate(RunArgs),
    /// Vehicle-speed aggregation with Kalman-based releases.
    Traffic(RunArgs),
    /// Integer event streams through the equalized release mechanisms.
    Events(RunArgs),
    /// Privacy-aware estimator synthesis on the vehicle scenario.
    Synth(RunArgs),
    /// Closed-form norm and calibration numbers.
    Norms(RunArgs),
    /// Reruns the pinned scenarios against their reference targets.
    Reproduce {
        #[command(flatten)]
        args: RunArgs,
        /// Which checks to run: norms, traffic, synth, events, or all.
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Aggregate(a) => {
            let cfg = a.resolve(config::AggregateConfig::pinned(), |c| &mut c.common)?;
            scenarios::aggregate::run(&cfg, &a.out_dir("aggregate"))
        }
        Command::Traffic(a) => {
            let cfg = a.resolve(config::TrafficConfig::pinned(), |c| &mut c.common)?;
            scenarios::traffic::run(&cfg, &a.out_dir("traffic"))
        }
        Command::Events(a) => {
            let cfg = a.resolve(config::EventsConfig::pinned(), |c| &mut c.common)?;
            scenarios::events::run(&cfg, &a.out_dir("events"))
        }
        Command::Synth(a) => {
            let cfg = a.resolve(config::SynthConfig::pinned(), |c| &mut c.common)?;
            scenarios::synth::run(&cfg, &a.out_dir("synth"))
        }
        Command::Norms(a) => {
            let cfg = a.resolve(config::NormsConfig::pinned(), |c| &mut c.common)?;
            scenarios::norms::run(&cfg, &a.out_dir("norms"))
        }
        Command::Reproduce { args, suite } => {
            scenarios::reproduce::run(suite, args.seed, args.trials, &args.out_dir("reproduce"))
        }
    }
}
