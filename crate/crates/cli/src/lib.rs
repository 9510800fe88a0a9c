//! Command-line experiments: convergence tables, the rubber penetration
//! forecast and small-particle-number runs.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use args::{Cli, Command, Overrides};
pub use commands::{convergence, forecast, small_n};
pub use config::{ParticleCount, ProblemKind, RunConfig};
pub use error::{CliError, ConfigError};

/// Runs one parsed command line and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<std::path::PathBuf>, CliError> {
    let config = cli.overrides.resolve()?;
    Ok(match cli.command {
        Command::Convergence => vec![convergence(&config)?.path],
        Command::Forecast => {
            let outcome = forecast(&config)?;
            vec![outcome.front_path, outcome.profile_path]
        }
        Command::SmallN => vec![small_n(&config)?.path],
    })
}
