//! The three experiment subcommands and their CSV output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use stefan_grw::{
    canonical, convergence_study, run_problem, run_reference, ClassicalStefanParams, ConvergenceReport,
    ProblemSpec, ReferenceOptions, RunMode, RunOptions, SolutionRecord, SplitMode,
};

use crate::config::{ModeChoice, ProblemKind, RunConfig, SolverChoice};
use crate::error::{CliError, ConfigError};

/// Largest particle number the `small-n` command accepts.
pub const SMALL_N_LIMIT: u128 = 1_000_000;

// Binomial splitting samples counts as u64; this leaves room for dense sites.
const BINOMIAL_LIMIT: u128 = 1_000_000_000_000;

/// Six significant digits in scientific notation.
pub fn sci(value: f64) -> String {
    format!("{value:.5e}")
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::create_dir_all(dir)
        .and_then(|()| std::fs::write(&path, text))
        .map_err(|source| CliError::Output { path: path.clone(), source })?;
    Ok(path)
}

fn problem_spec(config: &RunConfig, forecast: bool) -> Result<ProblemSpec, CliError> {
    let spec = match config.problem {
        ProblemKind::Classical => {
            let base = match canonical("classical-benchmark")? {
                ProblemSpec::Classical(p) => p,
                _ => unreachable!("the classical catalog entry is classical"),
            };
            ProblemSpec::Classical(ClassicalStefanParams::dimensionless(
                base.alpha_l(),
                config.mu,
                base.m_l(),
                base.s0(),
                base.t_final(),
            )?)
        }
        ProblemKind::Kinetic => canonical("kinetic-benchmark")?,
        ProblemKind::Rubber if forecast => canonical("rubber-forecast")?,
        ProblemKind::Rubber => canonical("rubber-benchmark")?,
    };
    Ok(match config.t_final {
        Some(t) => spec.with_t_final(t)?,
        None => spec,
    })
}

fn run_options(config: &RunConfig) -> Result<RunOptions, ConfigError> {
    let split = match config.seed {
        Some(seed) => {
            if config.particles.0 > BINOMIAL_LIMIT {
                return Err(ConfigError::invalid(
                    "particles",
                    format!("seeded binomial splitting needs at most {BINOMIAL_LIMIT} particles"),
                ));
            }
            SplitMode::Binomial { seed }
        }
        None => SplitMode::ReducedFluctuations,
    };
    Ok(RunOptions {
        mode: config.mode.into(),
        closure: config.boundary_closure.into(),
        particles: config.particles.0,
        split,
        chain_rule: config.chain_rule.into(),
        snapshot_times: Vec::new(),
    })
}

fn default_dx0(problem: ProblemKind) -> f64 {
    match problem {
        ProblemKind::Classical => 0.04,
        ProblemKind::Kinetic | ProblemKind::Rubber => 0.01,
    }
}

/// CSV text of a convergence report, EOC cells blank where undefined.
pub fn convergence_csv(config: &RunConfig, report: &ConvergenceReport) -> String {
    let mut out = format!("{}\ndx,err_m,eoc_m,err_s,eoc_s,ct_sec\n", config.stamp());
    let cell = |v: Option<f64>| v.map(sci).unwrap_or_default();
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sci(row.dx),
            sci(row.err_m),
            cell(row.eoc_m),
            sci(row.err_s),
            cell(row.eoc_s),
            sci(row.ct_seconds)
        );
    }
    out
}

pub struct ConvergenceOutcome {
    pub report: ConvergenceReport,
    pub path: PathBuf,
}

/// Grid-convergence study against the exact or manufactured solution.
pub fn convergence(config: &RunConfig) -> Result<ConvergenceOutcome, CliError> {
    config.validate()?;
    if config.levels < 2 {
        return Err(ConfigError::invalid("levels", "a convergence order needs at least 2 levels").into());
    }
    if config.problem != ProblemKind::Classical && config.mode != ModeChoice::Benchmark {
        return Err(ConfigError::invalid(
            "mode",
            format!("the {} problem is only scored against its manufactured solution; use mode = benchmark", config.problem.name()),
        )
        .into());
    }
    let spec = problem_spec(config, false)?;
    let options = run_options(config)?;
    let dx0 = config.dx0.unwrap_or_else(|| default_dx0(config.problem));
    let report = convergence_study(&spec, config.solver.into(), dx0, config.levels, config.courant_r, &options)?;
    let name = format!("{}_{}_convergence.csv", config.problem.name(), config.solver.name());
    let path = write_file(&config.output_dir, &name, &convergence_csv(config, &report))?;
    Ok(ConvergenceOutcome { report, path })
}

/// Front position at `t` by linear interpolation in the recorded series.
pub fn front_at(record: &SolutionRecord, t: f64) -> f64 {
    let k = record.times.partition_point(|&tk| tk < t);
    if k == 0 {
        return record.fronts[0];
    }
    if k >= record.times.len() {
        return *record.fronts.last().expect("a record holds the initial front");
    }
    let (t0, t1) = (record.times[k - 1], record.times[k]);
    let w = (t - t0) / (t1 - t0);
    record.fronts[k - 1] + w * (record.fronts[k] - record.fronts[k - 1])
}

pub struct ForecastOutcome {
    pub grw: SolutionRecord,
    pub reference: SolutionRecord,
    pub front_path: PathBuf,
    pub profile_path: PathBuf,
}

impl ForecastOutcome {
    pub fn relative_difference(&self) -> f64 {
        let (a, b) = (self.grw.final_front(), self.reference.final_front());
        (a - b).abs() / b
    }
}

/// Penetration forecast with the typical rubber parameters, by GRW and by the
/// reference solver.
pub fn forecast(config: &RunConfig) -> Result<ForecastOutcome, CliError> {
    config.validate()?;
    if config.problem != ProblemKind::Rubber {
        return Err(ConfigError::invalid("problem", "forecast needs problem = rubber").into());
    }
    if config.mode != ModeChoice::Plain {
        return Err(ConfigError::invalid("mode", "forecast runs without manufactured sources; use mode = plain").into());
    }
    let spec = problem_spec(config, true)?;
    let options = run_options(config)?;
    let dx = config.dx0.unwrap_or(2e-3);
    let grw = run_problem(&spec, dx, config.courant_r, &options)?;
    let reference = run_reference(
        &spec,
        config.reference_dy,
        &ReferenceOptions { mode: RunMode::Plain, chain_rule: options.chain_rule, ..ReferenceOptions::default() },
    )?;

    let t_final = spec.t_final();
    let points = if t_final > 0.0 { config.forecast_points } else { 0 };
    let mut front = format!("{}\nt,s_grw,s_reference\n", config.stamp());
    for k in 0..=points {
        let t = if points == 0 { 0.0 } else { t_final * k as f64 / points as f64 };
        let _ = writeln!(front, "{},{},{}", sci(t), sci(front_at(&grw, t)), sci(front_at(&reference, t)));
    }
    let mut profile = format!("{}\nx,m\n", config.stamp());
    for (x, m) in grw.positions.iter().zip(&grw.profile) {
        let _ = writeln!(profile, "{},{}", sci(*x), sci(*m));
    }
    let front_path = write_file(&config.output_dir, "front.csv", &front)?;
    let profile_path = write_file(&config.output_dir, "profile.csv", &profile)?;
    let outcome = ForecastOutcome { grw, reference, front_path, profile_path };
    log::info!(
        "front at t = {t_final}: GRW {:.6}, reference {:.6} ({:.3}% apart)",
        outcome.grw.final_front(),
        outcome.reference.final_front(),
        100.0 * outcome.relative_difference()
    );
    Ok(outcome)
}

pub struct SmallNOutcome {
    pub record: SolutionRecord,
    pub path: PathBuf,
}

/// Seeded binomial run with few particles, writing raw lattice counts.
pub fn small_n(config: &RunConfig) -> Result<SmallNOutcome, CliError> {
    config.validate()?;
    if config.particles.0 > SMALL_N_LIMIT {
        return Err(ConfigError::invalid(
            "particles",
            format!("small-n runs take at most {SMALL_N_LIMIT} particles; use forecast for the many-particle limit"),
        )
        .into());
    }
    if config.seed.is_none() {
        return Err(ConfigError::invalid("seed", "small-n runs sample binomially and need a seed").into());
    }
    if config.solver != SolverChoice::Grw {
        return Err(ConfigError::invalid("solver", "small-n runs count particles; use solver = grw").into());
    }
    let spec = problem_spec(config, true)?;
    let mut options = run_options(config)?;
    let t_final = spec.t_final();
    options.snapshot_times = if config.snapshots.is_empty() {
        (1..=4).map(|k| t_final * f64::from(k) / 4.0).collect()
    } else {
        config.snapshots.clone()
    };
    let dx = config.dx0.unwrap_or(match config.problem {
        ProblemKind::Rubber => 4e-3,
        other => default_dx0(other),
    });
    let record = run_problem(&spec, dx, config.courant_r, &options)?;

    let mut out = format!("{}\ntime,front,site,x,count\n", config.stamp());
    for snap in &record.snapshots {
        for (site, count) in snap.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{site},{},{count}", sci(snap.time), sci(snap.front), sci(site as f64 * dx));
        }
    }
    let name = format!("{}_small_n_counts.csv", config.problem.name());
    let path = write_file(&config.output_dir, &name, &out)?;
    Ok(SmallNOutcome { record, path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_six_significant_digits() {
        assert_eq!(sci(1.84e-3), "1.84000e-3");
        assert_eq!(sci(0.04), "4.00000e-2");
        assert_eq!(sci(2.0), "2.00000e0");
    }

    #[test]
    fn fronts_interpolate_between_steps() {
        let record = SolutionRecord {
            times: vec![0.0, 1.0, 3.0],
            fronts: vec![1.0, 2.0, 6.0],
            positions: vec![],
            profile: vec![],
            spacing: 1.0,
            ledger: None,
            snapshots: vec![],
        };
        assert_eq!(front_at(&record, 0.0), 1.0);
        assert_eq!(front_at(&record, 0.5), 1.5);
        assert_eq!(front_at(&record, 2.0), 4.0);
        assert_eq!(front_at(&record, 5.0), 6.0);
    }
}
