//! Error norms, convergence orders and grid-convergence studies.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::landau::{run_reference, ReferenceOptions};
use crate::problems::{reference_solution, ExactSolution, ProblemSpec};
use crate::solvers::{run_problem, RunOptions, SolutionRecord};

/// `sqrt(h) * ||u - v||_2`.
pub fn discrete_l2(u: &[f64], v: &[f64], h: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let sum: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((h * sum).sqrt())
}

/// `log2(e_l / e_{l+1})` for consecutive errors on halved grids.
pub fn eoc(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, e)| e.is_nan() || **e <= 0.0) {
        return Err(Error::NonPositiveError { index, value });
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorPair {
    /// Concentration error at the final time over `[0, min(s, s_exact)]`.
    pub err_m: f64,
    /// Front error over `[0, T]`, each step weighted by its length.
    pub err_s: f64,
}

/// Scores a run against an exact solution.
///
/// The exact profile is sampled at the run's own nodes up to the nearer of the
/// computed and exact fronts; the front error is `sqrt(sum dt_k (s_k - s(t_k))^2)`.
pub fn solution_errors(record: &SolutionRecord, exact: &dyn ExactSolution) -> Result<ErrorPair> {
    let t = record.final_time();
    let exact_front = exact.front(t);
    let limit = record.final_front().min(exact_front) * (1.0 + 1e-12);
    let (mut computed, mut expected) = (Vec::new(), Vec::new());
    for (&x, &m) in record.positions.iter().zip(&record.profile) {
        if x <= limit {
            computed.push(m);
            expected.push(exact.concentration(x.min(exact_front), t)?);
        }
    }
    let err_m = discrete_l2(&computed, &expected, record.spacing)?;

    let mut sum = 0.0;
    for k in 1..record.times.len() {
        let dt = record.times[k] - record.times[k - 1];
        let e = record.fronts[k] - exact.front(record.times[k]);
        sum += dt * e * e;
    }
    let err_s = sum.sqrt();
    if !(err_m.is_finite() && err_s.is_finite()) {
        return Err(Error::NonFiniteValue("solution error".into()));
    }
    Ok(ErrorPair { err_m, err_s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub err_m: f64,
    pub eoc_m: Option<f64>,
    pub err_s: f64,
    pub eoc_s: Option<f64>,
    pub ct_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn eoc_m(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc_m).collect()
    }

    pub fn eoc_s(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc_s).collect()
    }

    pub fn row_at(&self, dx: f64) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| (r.dx - dx).abs() <= 1e-9 * dx)
    }

    pub fn total_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.ct_seconds).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Grw,
    Reference,
}

/// Runs `solver` on `dx0, dx0/2, ...` and scores every level.
pub fn convergence_study(
    spec: &ProblemSpec,
    solver: SolverKind,
    dx0: f64,
    levels: usize,
    courant_r: f64,
    options: &RunOptions,
) -> Result<ConvergenceReport> {
    if levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "a convergence study needs at least 2 levels, got {levels}"
        )));
    }
    let exact = reference_solution(spec, options.chain_rule)?;
    let reference = ReferenceOptions {
        mode: options.mode,
        chain_rule: options.chain_rule,
        ..ReferenceOptions::default()
    };
    let mut report = ConvergenceReport::default();
    let mut previous: Option<ErrorPair> = None;
    for level in 0..levels {
        let dx = dx0 / f64::from(1u32 << level);
        let started = Instant::now();
        let record = match solver {
            SolverKind::Grw => run_problem(spec, dx, courant_r, options)?,
            SolverKind::Reference => run_reference(spec, dx, &reference)?,
        };
        let ct_seconds = started.elapsed().as_secs_f64();
        let errors = solution_errors(&record, exact.as_ref())?;
        log::info!(
            "{} {:?} dx = {dx:.3e}: err_m = {:.3e}, err_s = {:.3e} ({ct_seconds:.2} s)",
            spec.kind(),
            solver,
            errors.err_m,
            errors.err_s
        );
        let order = |coarse: f64, fine: f64| eoc(&[coarse, fine]).ok().map(|v| v[0]);
        report.rows.push(ConvergenceRow {
            dx,
            err_m: errors.err_m,
            eoc_m: previous.and_then(|p| order(p.err_m, errors.err_m)),
            err_s: errors.err_s,
            eoc_s: previous.and_then(|p| order(p.err_s, errors.err_s)),
            ct_seconds,
        });
        previous = Some(errors);
    }
    Ok(report)
}
