use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    ChainRuleChoice, ClosureChoice, ModeChoice, ParticleCount, ProblemKind, RunConfig, SolverChoice,
};
use crate::error::ConfigError;

/// Global random walk solvers for Stefan-type moving-boundary problems.
#[derive(Debug, Parser)]
#[command(name = "stefan-grw", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Error and convergence-order table over halved grids.
    Convergence,
    /// Rubber penetration front by GRW and by the reference solver.
    Forecast,
    /// Seeded binomial run with few particles; writes raw counts.
    SmallN,
}

/// Flags override the config file, which overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with run settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub problem: Option<ProblemKind>,
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverChoice>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(long, global = true)]
    pub dx0: Option<f64>,
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    #[arg(long, global = true)]
    pub courant_r: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Particles per unit concentration, e.g. 1e24.
    #[arg(long, global = true)]
    pub particles: Option<ParticleCount>,
    #[arg(long, global = true, env = "STEFAN_GRW_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub boundary_closure: Option<ClosureChoice>,
    #[arg(long, global = true, value_enum)]
    pub chain_rule: Option<ChainRuleChoice>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub t_final: Option<f64>,
    #[arg(long, global = true)]
    pub reference_dy: Option<f64>,
    #[arg(long, global = true)]
    pub forecast_points: Option<usize>,
    /// Comma-separated output times for small-n.
    #[arg(long, global = true, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
}

impl Overrides {
    /// Loads the config file (or defaults), applies the flags and validates.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(value) = &self.$field {
                    config.$field = value.clone();
                })*
            };
        }
        apply!(problem, solver, mode, levels, courant_r, particles, output_dir, boundary_closure, chain_rule, mu, reference_dy, forecast_points, snapshots);
        if self.dx0.is_some() {
            config.dx0 = self.dx0;
        }
        if self.seed.is_some() {
            config.seed = self.seed;
        }
        if self.t_final.is_some() {
            config.t_final = self.t_final;
        }
        config.validate()?;
        Ok(config)
    }
}
