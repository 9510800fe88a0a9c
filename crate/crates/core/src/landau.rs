//! Fixed-domain reference solver.
//!
//! With `y = x / s(t)` the moving interval `(0, s)` becomes `(0, 1)` and the
//! diffusion equation turns into
//!
//! ```text
//! u_t - (y s' / s) u_y - (D / s^2) u_yy = f
//! ```
//!
//! Each step treats diffusion and upwind advection implicitly, then moves the
//! front with the same front laws as the GRW drivers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::{
    ChainRule, ExactSolution, KineticManufactured, ProblemSpec,
    RubberManufactured,
};
use crate::solvers::{RunMode, SolutionRecord};

/// Tridiagonal system `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x` for the stored matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

/// Thomas algorithm.
pub fn tridiagonal_solve(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    if sys.rhs.len() != n {
        return Err(Error::LengthMismatch { left: n, right: sys.rhs.len() });
    }
    let off = n.saturating_sub(1);
    if sys.lower.len() != off || sys.upper.len() != off {
        return Err(Error::LengthMismatch {
            left: sys.lower.len().max(sys.upper.len()),
            right: off,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = sys.diag[0];
    if pivot.abs() < 1e-30 {
        return Err(Error::SingularPivot { row: 0, pivot });
    }
    if n > 1 {
        c[0] = sys.upper[0] / pivot;
    }
    d[0] = sys.rhs[0] / pivot;
    for i in 1..n {
        let a = sys.lower[i - 1];
        pivot = sys.diag[i] - a * c[i - 1];
        if pivot.abs() < 1e-30 {
            return Err(Error::SingularPivot { row: i, pivot });
        }
        if i + 1 < n {
            c[i] = sys.upper[i] / pivot;
        }
        d[i] = (sys.rhs[i] - a * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Uniform grid on `[0, 1]` with `cells` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformedGrid {
    cells: usize,
}

impl TransformedGrid {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 4 {
            return Err(Error::TooFewSites { index: cells });
        }
        Ok(Self { cells })
    }

    /// Grid whose spacing is closest to `dy`.
    pub fn with_spacing(dy: f64) -> Result<Self> {
        if !(dy.is_finite() && dy > 0.0) {
            return Err(Error::InvalidParameter(format!("dy must be positive, got {dy}")));
        }
        Self::new((1.0 / dy).round() as usize)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|j| self.node(j)).collect()
    }
}

/// End condition for one side of the transformed problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReferenceBoundary {
    Dirichlet(f64),
    /// `-D m_x = constant + slope * m`, with `m` taken implicitly.
    Flux { constant: f64, slope: f64 },
}

impl ReferenceBoundary {
    pub fn flux(value: f64) -> Self {
        ReferenceBoundary::Flux { constant: value, slope: 0.0 }
    }
}

/// Inputs of one implicit step besides the profile.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub s: f64,
    pub s_rate: f64,
    pub diffusivity: f64,
    pub dt: f64,
    pub left: ReferenceBoundary,
    pub right: ReferenceBoundary,
    /// Bulk source at the nodes, if any.
    pub source: Option<&'a [f64]>,
}

/// One implicit step of diffusion and upwind advection on the fixed grid.
pub fn reference_step(profile: &[f64], grid: &TransformedGrid, inputs: &StepInputs) -> Result<Vec<f64>> {
    let m = grid.cells();
    if profile.len() != m + 1 {
        return Err(Error::LengthMismatch { left: profile.len(), right: m + 1 });
    }
    let StepInputs { s, s_rate, diffusivity, dt, left, right, source } = *inputs;
    if !(s > 0.0 && dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reference step needs s > 0 and dt > 0, got s = {s}, dt = {dt}"
        )));
    }
    let dy = grid.dy();
    let kappa = diffusivity * dt / (s * s * dy * dy);

    let mut sys = TridiagonalSystem {
        lower: vec![-kappa; m],
        diag: vec![1.0 + 2.0 * kappa; m + 1],
        upper: vec![-kappa; m],
        rhs: vec![0.0; m + 1],
    };
    for j in 0..=m {
        sys.rhs[j] = profile[j] + dt * source.map_or(0.0, |f| f[j]);
    }

    match left {
        ReferenceBoundary::Dirichlet(v) => {
            sys.diag[0] = 1.0;
            sys.upper[0] = 0.0;
            sys.rhs[0] = v;
        }
        ReferenceBoundary::Flux { constant, slope } => {
            // Ghost node u_{-1} = u_1 + 2 dy s (constant + slope u_0) / D.
            let g = 2.0 * kappa * dy * s / diffusivity;
            sys.upper[0] = -2.0 * kappa;
            sys.diag[0] -= g * slope;
            sys.rhs[0] += g * constant;
        }
    }
    match right {
        ReferenceBoundary::Dirichlet(v) => {
            sys.diag[m] = 1.0;
            sys.lower[m - 1] = 0.0;
            sys.rhs[m] = v;
        }
        ReferenceBoundary::Flux { constant, slope } => {
            // Ghost node u_{M+1} = u_{M-1} - 2 dy s (constant + slope u_M) / D.
            let g = 2.0 * kappa * dy * s / diffusivity;
            sys.lower[m - 1] = -2.0 * kappa;
            sys.diag[m] += g * slope;
            sys.rhs[m] -= g * constant;
        }
    }

    // Upwind advection -(y s'/s) u_y at the new level; at a flux end with an
    // advancing front the gradient comes from the boundary condition.
    let right_is_flux = matches!(right, ReferenceBoundary::Flux { .. });
    for j in 1..=m {
        if j == m && !right_is_flux {
            break;
        }
        let a = dt * grid.node(j) * s_rate / (s * dy);
        if s_rate > 0.0 {
            if j < m {
                sys.diag[j] += a;
                sys.upper[j] -= a;
            } else if let ReferenceBoundary::Flux { constant, slope } = right {
                let c = dt * s_rate / diffusivity;
                sys.diag[m] += c * slope;
                sys.rhs[m] -= c * constant;
            }
        } else {
            sys.diag[j] -= a;
            sys.lower[j - 1] += a;
        }
    }
    let next = tridiagonal_solve(&sys)?;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("reference profile".into()));
    }
    Ok(next)
}

/// Time-step rule of the reference march.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DtRule {
    /// `dt = factor dy^2 s^2 / (2 D)`, growing with the front.
    Diffusive { factor: f64 },
    Fixed(f64),
}

impl Default for DtRule {
    fn default() -> Self {
        DtRule::Diffusive { factor: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ReferenceOptions {
    pub mode: RunMode,
    pub chain_rule: ChainRule,
    pub dt_rule: DtRule,
}

// Problem-specific pieces of the reference march.
// Solves `rate = speed(step(rate))` by regula falsi with the Illinois
// weighting. The residual falls as the rate grows because a faster front drains
// the end node.
fn implicit_rate(
    step: &impl Fn(f64, f64) -> Result<Vec<f64>>,
    speed: &impl Fn(&[f64], f64, f64) -> Result<f64>,
    guess: f64,
    s: f64,
    t: f64,
    dt: f64,
) -> Result<(Vec<f64>, f64)> {
    let residual = |rate: f64| -> Result<(f64, Vec<f64>)> {
        let next = step(rate, dt)?;
        Ok((speed(&next, s, t + dt)? - rate, next))
    };
    let mut width = guess.abs().max(1e-9);
    let (mut lo, mut hi) = (guess - width, guess + width);
    let (mut g_lo, mut g_hi) = (residual(lo)?.0, residual(hi)?.0);
    let mut tries = 0;
    while g_lo < 0.0 || g_hi > 0.0 {
        tries += 1;
        if tries > 100 {
            return Err(Error::NoBracket { lo, hi });
        }
        width *= 2.0;
        if g_lo < 0.0 {
            lo -= width;
            g_lo = residual(lo)?.0;
        }
        if g_hi > 0.0 {
            hi += width;
            g_hi = residual(hi)?.0;
        }
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let rate = if g_lo > g_hi { lo + g_lo * (hi - lo) / (g_lo - g_hi) } else { 0.5 * (lo + hi) };
        let (g, next) = residual(rate)?;
        if g.abs() <= 1e-13 * (1.0 + rate.abs()) || hi - lo <= 1e-15 * (1.0 + rate.abs()) {
            return Ok((next, rate));
        }
        if g > 0.0 {
            lo = rate;
            g_lo = g;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = rate;
            g_hi = g;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    let rate = 0.5 * (lo + hi);
    Ok((step(rate, dt)?, rate))
}

enum Setup {
    Classical { mu: f64, m_l: f64 },
    Kinetic { alpha: f64, exact: Option<KineticManufactured>, spec: crate::problems::KineticStefanParams },
    Rubber { exact: Option<RubberManufactured>, spec: crate::problems::RubberParams },
}

/// Marches `spec` on the transformed grid of spacing `dy` and maps the final
/// profile back to `x = y s(T)`.
pub fn run_reference(spec: &ProblemSpec, dy: f64, options: &ReferenceOptions) -> Result<SolutionRecord> {
    spec.validate()?;
    let grid = TransformedGrid::with_spacing(dy)?;
    let dy = grid.dy();
    let diffusivity = spec.diffusivity();
    let t_final = spec.t_final();
    let benchmark = options.mode == RunMode::Benchmark;

    let (setup, s0, t0, mut u) = match spec {
        ProblemSpec::Classical(p) => {
            let u = grid.nodes().iter().map(|&y| p.m_l() * (1.0 - y)).collect();
            let setup = Setup::Classical { mu: p.mu(), m_l: p.m_l() };
            if p.s0() > 0.0 {
                (setup, p.s0(), 0.0, u)
            } else {
                // The map needs s > 0: start from a melt layer one cell thick with
                // a linear profile, at the time a quasi-steady layer reaches it,
                // s^2 = 2 alpha m_L t / mu.
                let t0 = dy * dy * p.mu() / (2.0 * p.alpha_l() * p.m_l());
                (setup, dy, t0.min(t_final), u)
            }
        }
        ProblemSpec::Kinetic(p) => {
            let exact = if benchmark { Some(KineticManufactured::new(p)?) } else { None };
            let mut u = vec![0.0; grid.cells() + 1];
            u[0] = p.boundary_value(0.0);
            (Setup::Kinetic { alpha: p.alpha, exact, spec: p.clone() }, p.s0, 0.0, u)
        }
        ProblemSpec::Rubber(p) => {
            let exact = if benchmark {
                Some(RubberManufactured::new(p, options.chain_rule)?)
            } else {
                None
            };
            let u = grid.nodes().iter().map(|&y| p.initial.value(y * p.s0, p.s0)).collect();
            (Setup::Rubber { exact, spec: p.clone() }, p.s0, 0.0, u)
        }
    };

    let mut s = s0;
    let mut t = t0;
    let mut times = vec![t0];
    let mut fronts = vec![s];
    let m = grid.cells();

    // Front speed from the current profile with sources evaluated at `at`.
    let speed = |u: &[f64], s: f64, at: f64| -> Result<f64> {
        Ok(match &setup {
            Setup::Classical { mu, .. } => -diffusivity / mu * (u[m] - u[m - 1]) / (dy * s),
            Setup::Kinetic { alpha, exact, .. } => {
                let f = exact.as_ref().map(|e| e.front_law_source(at)).transpose()?.unwrap_or(0.0);
                diffusivity * alpha * (u[m] - alpha * s) + f
            }
            Setup::Rubber { exact, spec } => {
                let f = exact.as_ref().map_or(0.0, |e| e.front_law_source(at));
                spec.a0 * (u[m] - spec.swell.sigma(s)) + f
            }
        })
    };

    while t < t_final * (1.0 - 1e-12) {
        let nominal = match options.dt_rule {
            DtRule::Diffusive { factor } => factor * dy * dy * s * s / (2.0 * diffusivity),
            DtRule::Fixed(dt) => dt,
        };
        let mut dt = nominal.min(t_final - t);
        let mut rate = speed(&u, s, t + dt)?;
        if rate.abs() * dt > s * dy {
            dt = s * dy / rate.abs();
            rate = speed(&u, s, t + dt)?;
        }
        if !(dt > 0.0 && rate.is_finite()) {
            return Err(Error::NonFiniteValue(format!("reference step at t = {t}")));
        }
        let step = |rate: f64, dt: f64| -> Result<Vec<f64>> {
            let t_next = t + dt;
            let (left, right, source) = match &setup {
                Setup::Classical { m_l, .. } => {
                    (ReferenceBoundary::Dirichlet(*m_l), ReferenceBoundary::Dirichlet(0.0), None)
                }
                Setup::Kinetic { exact, spec, .. } => {
                    let right = match exact {
                        Some(e) => {
                            let front = e.front(t_next);
                            ReferenceBoundary::flux(
                                e.front_rate(t_next)? * e.concentration(front, t_next)? + e.front_flux_source(t_next)?,
                            )
                        }
                        None => ReferenceBoundary::Flux { constant: 0.0, slope: rate },
                    };
                    let source = match exact {
                        Some(e) => Some(
                            grid.nodes()
                                .iter()
                                .map(|&y| e.bulk_source(y * s, t_next))
                                .collect::<Result<Vec<_>>>()?,
                        ),
                        None => None,
                    };
                    (ReferenceBoundary::Dirichlet(spec.boundary_value(t_next)), right, source)
                }
                Setup::Rubber { exact, spec } => {
                    let inflow = exact.as_ref().map_or(0.0, |e| e.inflow_source(t_next));
                    let left = ReferenceBoundary::Flux {
                        constant: spec.beta * spec.b + inflow,
                        slope: -spec.beta * spec.henry,
                    };
                    let right = match exact {
                        Some(e) => ReferenceBoundary::flux(e.front_flux_source(t_next)),
                        None => ReferenceBoundary::Flux { constant: 0.0, slope: rate },
                    };
                    let source = exact
                        .as_ref()
                        .map(|e| grid.nodes().iter().map(|&y| e.bulk_source(y * s, t_next)).collect());
                    (left, right, source)
                }
            };
            reference_step(
                &u,
                &grid,
                &StepInputs {
                    s,
                    s_rate: rate,
                    diffusivity,
                    dt,
                    left,
                    right,
                    source: source.as_deref(),
                },
            )
        };

        let (next, rate) = match &setup {
            // The swelling law is stiff in the front value, so the rubber rate
            // is taken at the new level.
            Setup::Rubber { .. } => {
                let mut solved = implicit_rate(&step, &speed, rate, s, t, dt)?;
                while solved.1.abs() * dt > s * dy * (1.0 + 1e-9) {
                    dt = s * dy / solved.1.abs();
                    solved = implicit_rate(&step, &speed, solved.1, s, t, dt)?;
                }
                solved
            }
            _ => (step(rate, dt)?, rate),
        };
        u = next;
        let t_next = t + dt;
        s += dt * rate;
        t = t_next;
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NonFiniteValue(format!("reference front at t = {t}")));
        }
        times.push(t);
        fronts.push(s);
    }

    let positions = grid.nodes().iter().map(|&y| y * s).collect();
    Ok(SolutionRecord {
        times,
        fronts,
        positions,
        profile: u,
        spacing: dy * s,
        ledger: None,
        snapshots: Vec::new(),
    })
}
