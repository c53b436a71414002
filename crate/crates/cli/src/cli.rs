//! Command-line surface.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Command;
use crate::error::Result;
use crate::scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "prodisp", version, about = "Productivity dispersion: equilibrium, dynamics, superstatistics and tail fits")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, env = "PRODISP_SEED")]
    pub seed: Option<u64>,
    /// Output directory, replaced atomically on success.
    #[arg(long, global = true, env = "PRODISP_OUT")]
    pub out: Option<PathBuf>,
    /// Scenario TOML; without it the built-in scenario is used.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Most productive firms removed from each year of a panel.
    #[arg(long, global = true)]
    pub trim_top: Option<usize>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Solve the macro-equilibrium for a demand level or inverse temperature.
    Equilibrium {
        #[arg(long, conflicts_with = "beta")]
        demand: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Exact stationary firm counts of the jump process.
    Stationary,
    /// Event-driven simulation compared with the stationary solution.
    Simulate {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Averaged Boltzmann factor and the worker-level tail.
    Superstat {
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Hill, fit-range and GB2 fits of a panel year or synthetic GB2 data.
    Fit {
        /// Panel CSV with columns firm_id,year,output,workers,sector.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Panel year to fit; defaults to the latest.
        #[arg(long)]
        year: Option<i32>,
    },
    /// Marginal versus average productivity tails.
    Mcarlo {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Generate a synthetic firm panel.
    Gen,
    /// Generate (or ingest), trim, fit every year and estimate delta.
    Pipeline {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl Sub {
    pub fn command(&self) -> Command {
        match self {
            Sub::Equilibrium { demand, beta } => Command::Equilibrium {
                demand: *demand,
                beta: *beta,
            },
            Sub::Stationary => Command::Stationary,
            Sub::Simulate { horizon, replicas } => Command::Simulate {
                horizon: *horizon,
                replicas: *replicas,
            },
            Sub::Superstat { gamma } => Command::Superstat { gamma: *gamma },
            Sub::Fit { input, year } => Command::Fit {
                input: input.clone(),
                year: *year,
            },
            Sub::Mcarlo { samples } => Command::Mcarlo { samples: *samples },
            Sub::Gen => Command::Gen,
            Sub::Pipeline { input } => Command::Pipeline {
                input: input.clone(),
            },
        }
    }
}

impl Cli {
    /// The scenario after applying flags (and their environment fallbacks)
    /// over the file or built-in defaults.
    pub fn scenario(&self, command: &Command) -> Result<Scenario> {
        let mut scn = match &self.config {
            Some(path) => Scenario::load(path)?,
            None => Scenario::builtin(),
        };
        if let Some(s) = self.seed {
            scn.seed = Some(s);
        }
        if let Some(o) = &self.out {
            scn.out = Some(o.clone());
        }
        if let Some(t) = self.trim_top {
            scn.trim_top = Some(t);
        }
        command.apply_overrides(&mut scn);
        Ok(scn)
    }

    pub fn run(&self) -> Result<PathBuf> {
        let command = self.sub_command();
        let scn = self.scenario(&command)?;
        crate::commands::execute(&command, &scn)
    }

    fn sub_command(&self) -> Command {
        self.command.command()
    }
}
