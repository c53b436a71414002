//! Scenario files: one TOML table per model block.

use std::path::{Path, PathBuf};

use prodisp::fitting::{Gb2Params, DEFAULT_TAIL_FRACTION};
use prodisp::margsim::LaborShareLaw;
use prodisp::markov::MarkovConfig;
use prodisp::superstats::{DemandLaw, SuperstatConfig};
use prodisp::FirmDistribution;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIM_TOP: usize = 10;
pub const DEFAULT_OUT: &str = "prodisp-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trim_top: Option<usize>,
    pub firms: Option<FirmDistribution>,
    pub equilibrium: Option<EquilibriumBlock>,
    pub markov: Option<MarkovConfig>,
    pub simulation: Option<SimulationBlock>,
    pub superstat: Option<SuperstatBlock>,
    pub demand: Option<DemandBlock>,
    pub labor_share: Option<LaborShareLaw>,
    pub economy: Option<EconomyBlock>,
    pub fit: Option<FitBlock>,
    pub mcarlo: Option<McarloBlock>,
    pub panel: Option<PanelBlock>,
}

/// Either the aggregate demand or the inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumBlock {
    pub demand: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub horizon: f64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

/// `gamma` may be given directly; otherwise it follows from the demand block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperstatBlock {
    pub gamma: Option<f64>,
    pub beta_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandBlock {
    pub delta: f64,
    /// Width of the demand interval below `<c>_0`; defaults to 95% of the
    /// distance from `<c>_0` down to the firm support infimum.
    pub width: Option<f64>,
    /// Fixes the demand instead of drawing it, giving a single-beta economy.
    pub fixed: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorRule {
    Random,
    SizeStratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyBlock {
    pub years: u32,
    #[serde(default = "default_first_year")]
    pub first_year: i32,
    pub firms: usize,
    pub workers: u64,
    #[serde(default = "default_subperiods")]
    pub subperiods: usize,
    #[serde(default = "default_sectors")]
    pub sectors: usize,
    #[serde(default = "default_sector_rule")]
    pub sector_rule: SectorRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticGb2 {
    pub params: Gb2Params,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// GB2 fit in the `fit` command.
    #[serde(default = "yes")]
    pub gb2: bool,
    /// GB2 fit of every panel year in the pipeline. Off by default: on
    /// pure power-law data the GB2 likelihood has no interior maximum.
    #[serde(default)]
    pub panel_gb2: bool,
    /// Data for `fit` when no panel is given.
    pub synthetic: Option<SyntheticGb2>,
}

impl Default for FitBlock {
    fn default() -> Self {
        FitBlock {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            gb2: true,
            panel_gb2: false,
            synthetic: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McarloBlock {
    pub samples: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelBlock {
    #[serde(default = "default_rejection_ceiling")]
    pub rejection_ceiling: usize,
    /// Weight firms by their worker counts at the worker level.
    #[serde(default = "yes")]
    pub worker_weighting: bool,
}

impl Default for PanelBlock {
    fn default() -> Self {
        PanelBlock {
            rejection_ceiling: default_rejection_ceiling(),
            worker_weighting: true,
        }
    }
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_warmup() -> f64 {
    0.2
}
fn default_batches() -> usize {
    32
}
fn default_first_year() -> i32 {
    1980
}
fn default_subperiods() -> usize {
    64
}
fn default_sectors() -> usize {
    33
}
fn default_sector_rule() -> SectorRule {
    SectorRule::Random
}
fn default_tail_fraction() -> f64 {
    DEFAULT_TAIL_FRACTION
}
fn default_replicates() -> usize {
    10
}
fn default_rejection_ceiling() -> usize {
    100
}

/// Blocks a subcommand needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Firms,
    Equilibrium,
    Markov,
    Simulation,
    Demand,
    LaborShare,
    Economy,
    Fit,
    Mcarlo,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Firms => "firms",
            Block::Equilibrium => "equilibrium",
            Block::Markov => "markov",
            Block::Simulation => "simulation",
            Block::Demand => "demand",
            Block::LaborShare => "labor_share",
            Block::Economy => "economy",
            Block::Fit => "fit",
            Block::Mcarlo => "mcarlo",
        }
    }
}

impl Scenario {
    /// The scenario used when no file is given.
    pub fn builtin() -> Self {
        Scenario {
            seed: Some(DEFAULT_SEED),
            out: Some(PathBuf::from(DEFAULT_OUT)),
            trim_top: Some(DEFAULT_TRIM_TOP),
            firms: Some(FirmDistribution::Pareto {
                index: 1.5,
                scale: 1.0,
            }),
            equilibrium: Some(EquilibriumBlock {
                demand: Some(2.0),
                beta: None,
            }),
            markov: Some(MarkovConfig::with_cutoff_ratio(2.0, 1e-2)),
            simulation: Some(SimulationBlock {
                horizon: 2000.0,
                replicas: 2,
                warmup_fraction: default_warmup(),
                batches: default_batches(),
            }),
            superstat: Some(SuperstatBlock::default()),
            demand: Some(DemandBlock {
                delta: -1.0,
                width: None,
                fixed: None,
            }),
            labor_share: Some(LaborShareLaw::UniformInterval { lo: 0.5, hi: 1.0 }),
            economy: Some(EconomyBlock {
                years: 20,
                first_year: default_first_year(),
                firms: 2000,
                workers: 1_000_000,
                subperiods: default_subperiods(),
                sectors: default_sectors(),
                sector_rule: SectorRule::Random,
            }),
            fit: Some(FitBlock {
                synthetic: Some(SyntheticGb2 {
                    params: Gb2Params {
                        a: 2.0,
                        b: 50.0,
                        p: 1.2,
                        q: 0.75,
                    },
                    samples: 20_000,
                }),
                ..FitBlock::default()
            }),
            mcarlo: Some(McarloBlock {
                samples: 100_000,
                replicates: default_replicates(),
            }),
            panel: Some(PanelBlock::default()),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| CliError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Scenario::from_toml(&text, path)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn trim_top(&self) -> usize {
        self.trim_top.unwrap_or(DEFAULT_TRIM_TOP)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn present(&self, block: Block) -> bool {
        match block {
            Block::Firms => self.firms.is_some(),
            Block::Equilibrium => self.equilibrium.is_some(),
            Block::Markov => self.markov.is_some(),
            Block::Simulation => self.simulation.is_some(),
            Block::Demand => self.demand.is_some(),
            Block::LaborShare => self.labor_share.is_some(),
            Block::Economy => self.economy.is_some(),
            Block::Fit => self.fit.is_some(),
            Block::Mcarlo => self.mcarlo.is_some(),
        }
    }

    /// Lists every missing block at once.
    pub fn require(&self, command: &str, blocks: &[Block]) -> Result<()> {
        let missing: Vec<String> = blocks
            .iter()
            .filter(|b| !self.present(**b))
            .map(|b| b.name().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::MissingBlocks {
                command: command.to_string(),
                missing,
            })
        }
    }

    /// Validates every present block under its module's rules.
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = &self.firms {
            f.validate()?;
        }
        if let Some(m) = &self.markov {
            m.validate()?;
        }
        if let Some(l) = &self.labor_share {
            l.validate()?;
        }
        if let Some(e) = &self.equilibrium {
            if e.demand.is_some() == e.beta.is_some() {
                return Err(CliError::Invalid(
                    "equilibrium: give exactly one of `demand` and `beta`".into(),
                ));
            }
        }
        if let Some(s) = &self.simulation {
            if !(s.horizon > 0.0) || s.replicas == 0 || s.batches == 0 {
                return Err(CliError::Invalid(
                    "simulation: horizon, replicas and batches must be positive".into(),
                ));
            }
        }
        if let Some(e) = &self.economy {
            if e.years == 0 || e.firms < 2 || e.workers == 0 || e.subperiods == 0 || e.sectors == 0 {
                return Err(CliError::Invalid(
                    "economy: years, firms (>= 2), workers, subperiods and sectors must be positive"
                        .into(),
                ));
            }
        }
        if let Some(f) = &self.fit {
            if !(f.tail_fraction > 0.0 && f.tail_fraction < 1.0) {
                return Err(CliError::Invalid("fit: tail_fraction must lie in (0, 1)".into()));
            }
            if let Some(s) = &f.synthetic {
                s.params.validate()?;
            }
        }
        if let (Some(_), Some(_)) = (&self.firms, &self.demand) {
            self.demand_law()?;
        }
        Ok(())
    }

    /// Demand law for the configured firms.
    pub fn demand_law(&self) -> Result<DemandLaw> {
        let firms = self.firms.as_ref().ok_or_else(|| missing("demand", "firms"))?;
        let block = self.demand.ok_or_else(|| missing("demand", "demand"))?;
        let ceiling = firms.mean()?;
        let width = block
            .width
            .unwrap_or(0.95 * (ceiling - firms.support_lower()));
        if !(ceiling - width > firms.support_lower()) {
            return Err(CliError::Invalid(format!(
                "demand: interval [{}, {ceiling}] reaches below the firm support",
                ceiling - width
            )));
        }
        Ok(DemandLaw::for_firms(block.delta, firms, width)?)
    }

    /// Superstatistics configuration; `gamma` from the demand law when
    /// not given directly.
    pub fn superstat_config(&self) -> Result<SuperstatConfig> {
        let firms = self
            .firms
            .clone()
            .ok_or_else(|| missing("superstat", "firms"))?;
        let block = self.superstat.unwrap_or_default();
        let gamma = match block.gamma {
            Some(g) => g,
            None => self.demand_law()?.gamma()?,
        };
        Ok(match block.beta_max {
            Some(b) => SuperstatConfig::new(gamma, b, firms)?,
            None => SuperstatConfig::with_default_beta_max(gamma, firms)?,
        })
    }
}

fn missing(command: &str, block: &str) -> CliError {
    CliError::MissingBlocks {
        command: command.to_string(),
        missing: vec![block.to_string()],
    }
}
