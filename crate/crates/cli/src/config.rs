//! Run configuration: TOML file, command-line overrides and validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use stefan_grw::{BoundaryClosure, ChainRule, RunMode, SolverKind, DEFAULT_PARTICLES};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    #[default]
    Classical,
    Kinetic,
    Rubber,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Classical => "classical",
            ProblemKind::Kinetic => "kinetic",
            ProblemKind::Rubber => "rubber",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    #[default]
    Grw,
    Reference,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Grw => "grw",
            SolverChoice::Reference => "reference",
        }
    }
}

impl From<SolverChoice> for SolverKind {
    fn from(choice: SolverChoice) -> Self {
        match choice {
            SolverChoice::Grw => SolverKind::Grw,
            SolverChoice::Reference => SolverKind::Reference,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    #[default]
    Plain,
    Benchmark,
}

impl From<ModeChoice> for RunMode {
    fn from(choice: ModeChoice) -> Self {
        match choice {
            ModeChoice::Plain => RunMode::Plain,
            ModeChoice::Benchmark => RunMode::Benchmark,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClosureChoice {
    #[default]
    Node,
    Extrapolate,
}

impl From<ClosureChoice> for BoundaryClosure {
    fn from(choice: ClosureChoice) -> Self {
        match choice {
            ClosureChoice::Node => BoundaryClosure::Node,
            ClosureChoice::Extrapolate => BoundaryClosure::Extrapolate,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ChainRuleChoice {
    #[default]
    AsPrinted,
    Strict,
}

impl From<ChainRuleChoice> for ChainRule {
    fn from(choice: ChainRuleChoice) -> Self {
        match choice {
            ChainRuleChoice::AsPrinted => ChainRule::AsPrinted,
            ChainRuleChoice::Strict => ChainRule::Strict,
        }
    }
}

/// Number of particles per unit concentration, written as an integer or in
/// exact scientific notation such as `1e24` or `6.7e5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParticleCount(pub u128);

impl Default for ParticleCount {
    fn default() -> Self {
        ParticleCount(DEFAULT_PARTICLES)
    }
}

impl FromStr for ParticleCount {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let text = text.trim().replace('_', "");
        let bad = || format!("`{text}` is not a whole number of particles");
        let (mantissa, exponent) = match text.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
            None => (text.as_str(), 0),
        };
        let (whole, fraction) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if whole.is_empty() && fraction.is_empty() || !(whole.chars().chain(fraction.chars())).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{whole}{fraction}");
        let fraction = fraction.trim_end_matches('0');
        let shift = exponent - fraction.len() as i32;
        let digits = &digits[..whole.len() + fraction.len()];
        let mut value: u128 = digits.parse().map_err(|_| bad())?;
        if shift < 0 {
            return Err(bad());
        }
        for _ in 0..shift {
            value = value.checked_mul(10).ok_or_else(|| format!("`{text}` is too large"))?;
        }
        Ok(ParticleCount(value))
    }
}

impl fmt::Display for ParticleCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut mantissa = self.0;
        let mut exponent = 0;
        while mantissa >= 10 && mantissa.is_multiple_of(10) {
            mantissa /= 10;
            exponent += 1;
        }
        if exponent >= 3 {
            write!(f, "{mantissa}e{exponent}")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ParticleCount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ParticleCount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Int(n) if n < 0 => Err(format!("{n} is negative")),
            Raw::Int(n) => Ok(ParticleCount(n as u128)),
            // Floats such as 1e24 print back in their shortest exact-decimal form.
            Raw::Float(x) => format!("{x:e}").parse(),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Everything a subcommand needs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub solver: SolverChoice,
    pub mode: ModeChoice,
    /// Coarsest spacing; each subcommand has its own default per problem.
    pub dx0: Option<f64>,
    pub levels: usize,
    pub courant_r: f64,
    /// Switches the lattice to seeded binomial splitting.
    pub seed: Option<u64>,
    pub particles: ParticleCount,
    pub output_dir: PathBuf,
    pub boundary_closure: ClosureChoice,
    pub chain_rule: ChainRuleChoice,
    /// Latent-heat number of the classical problem.
    pub mu: f64,
    /// Overrides the final time of the chosen problem.
    pub t_final: Option<f64>,
    /// Transformed-grid spacing of the reference solver in `forecast`.
    pub reference_dy: f64,
    /// Number of time intervals written to `front.csv`.
    pub forecast_points: usize,
    /// Output times of `small-n`; empty means quarters of the final time.
    pub snapshots: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Classical,
            solver: SolverChoice::Grw,
            mode: ModeChoice::Plain,
            dx0: None,
            levels: 5,
            courant_r: 1.0,
            seed: None,
            particles: ParticleCount::default(),
            output_dir: PathBuf::from("results"),
            boundary_closure: ClosureChoice::Node,
            chain_rule: ChainRuleChoice::AsPrinted,
            mu: 1.0,
            t_final: None,
            reference_dy: 0.01,
            forecast_points: 310,
            snapshots: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.courant_r > 0.0 && self.courant_r <= 1.0) {
            return Err(ConfigError::invalid(
                "courant_r",
                format!(
                    "{} is outside (0, 1]; the explicit scheme needs r = 2 D dt / dx^2 <= 1",
                    self.courant_r
                ),
            ));
        }
        if self.particles.0 == 0 {
            return Err(ConfigError::invalid("particles", "must be positive"));
        }
        if self.levels == 0 {
            return Err(ConfigError::invalid("levels", "must be positive"));
        }
        if let Some(dx0) = self.dx0 {
            if !(dx0.is_finite() && dx0 > 0.0) {
                return Err(ConfigError::invalid("dx0", format!("{dx0} is not a positive spacing")));
            }
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(ConfigError::invalid("mu", format!("{} is not positive", self.mu)));
        }
        if let Some(t) = self.t_final {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ConfigError::invalid("t_final", format!("{t} is not a non-negative time")));
            }
        }
        if !(self.reference_dy > 0.0 && self.reference_dy <= 0.25) {
            return Err(ConfigError::invalid(
                "reference_dy",
                format!("{} is outside (0, 0.25]; the transformed grid needs at least 4 cells", self.reference_dy),
            ));
        }
        if self.forecast_points == 0 {
            return Err(ConfigError::invalid("forecast_points", "must be positive"));
        }
        if let Some(&t) = self.snapshots.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(ConfigError::invalid("snapshots", format!("{t} is not a non-negative time")));
        }
        Ok(())
    }

    /// One-line record of the resolved configuration for output headers.
    pub fn stamp(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        let fields: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        format!("# {}", fields.join("; "))
    }
}
