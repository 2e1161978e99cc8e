//! Command-line front end for the mixture model pipeline:
//! simulate → fit → summarize, plus ari/diversity utilities.
//!
//! Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "dsdm3",
    version,
    about = "Sparse Dirichlet-multinomial mixture clustering for zero-inflated count data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat JSON config file; keys default to the application-study values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set theta=0.5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// RNG seed (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> dsdm3::Result<RunConfig> {
        let mut config = RunConfig::load(self.config.as_deref(), &self.set)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark data set (counts, labels, manifest).
    Simulate {
        /// Scenario id: 1..=5 or dtm.
        #[arg(long)]
        scenario: Option<String>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the MCMC sampler on a counts CSV.
    Fit {
        /// Counts CSV (header of taxon ids, first column sample id).
        #[arg(long)]
        counts: PathBuf,
        /// Output directory for draws and the fit manifest.
        #[arg(long)]
        out: PathBuf,
        /// Number of independent chains (RNG streams 0..M).
        #[arg(long)]
        chains: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Post-process a fit: point partition, co-clustering, K+ table,
    /// diversity, and abundance estimates when xi traces exist.
    Summarize {
        /// Directory written by fit.
        #[arg(long)]
        fit: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Counts CSV override (defaults to the path in the fit manifest).
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Drop this many retained draws per chain before summarizing.
        #[arg(long)]
        burn_in: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Adjusted Rand index between two labels CSVs (joined on sample id).
    Ari {
        labels_a: PathBuf,
        labels_b: PathBuf,
    },
    /// Per-sample richness and Shannon diversity of a counts CSV.
    Diversity {
        #[arg(long)]
        counts: PathBuf,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> dsdm3::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            common,
        } => {
            let mut config = common.load()?;
            if let Some(scenario) = scenario {
                config.scenario = Some(scenario);
            }
            commands::cmd_simulate(&config, &out)
        }
        Command::Fit {
            counts,
            out,
            chains,
            common,
        } => {
            let mut config = common.load()?;
            if let Some(chains) = chains {
                config.chains = chains;
            }
            config.validate()?;
            commands::cmd_fit(&config, &counts, &out)
        }
        Command::Summarize {
            fit,
            out,
            counts,
            burn_in,
            common,
        } => {
            let mut config = common.load()?;
            if let Some(b) = burn_in {
                config.summarize_burn_in = b;
            }
            commands::cmd_summarize(&config, &fit, &out, counts.as_deref())
        }
        Command::Ari { labels_a, labels_b } => commands::cmd_ari(&labels_a, &labels_b).map(|_| ()),
        Command::Diversity { counts, out } => commands::cmd_diversity(&counts, out.as_deref()),
    }
}

fn exit_code(err: &dsdm3::Error) -> u8 {
    use dsdm3::Error;
    match err {
        Error::Io { .. } => 3,
        Error::Numerical(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
