//! Moving-boundary drivers that couple the GRW lattice to the three problems.
//!
//! The front `s(t)` is a continuous scalar. The lattice node nearest to it,
//! `round(s / dx)`, carries the front boundary condition; sites beyond it hold
//! no particles. Every particle that enters or leaves the lattice is booked in
//! a [`MassLedger`], and the books are checked exactly after every step.

use serde::Serialize;

use crate::engine::{
    Boundary, GrwStepper, InjectionAccumulator, JumpParameter, ParticleField, Redistributor,
    StepLedger, DEFAULT_PARTICLES,
};
use crate::error::{Error, Result};
use crate::problems::{
    ChainRule, ClassicalStefanParams, ExactSolution, KineticBoundary, KineticManufactured,
    KineticStefanParams, ProblemSpec, RubberManufactured, RubberParams, SwellLaw,
};

/// Whether the manufactured source terms and exact front data are switched on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Plain,
    Benchmark,
}

/// How the concentration at the front is read off the lattice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryClosure {
    /// Value of the front node.
    #[default]
    Node,
    /// Linear extrapolation from the last two nodes to `s`.
    Extrapolate,
}

/// Group-splitting mode of the lattice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    #[default]
    ReducedFluctuations,
    Binomial { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub mode: RunMode,
    pub closure: BoundaryClosure,
    pub particles: u128,
    pub split: SplitMode,
    pub chain_rule: ChainRule,
    /// Times at which raw lattice counts are captured.
    pub snapshot_times: Vec<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: RunMode::Plain,
            closure: BoundaryClosure::Node,
            particles: DEFAULT_PARTICLES,
            split: SplitMode::ReducedFluctuations,
            chain_rule: ChainRule::AsPrinted,
            snapshot_times: Vec::new(),
        }
    }
}

impl RunOptions {
    pub fn benchmark() -> Self {
        Self {
            mode: RunMode::Benchmark,
            ..Self::default()
        }
    }
}

/// Front position and the data the explicit front laws need from the last step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryState {
    pub s: f64,
    pub s_prev: f64,
    /// Concentration at the front after the previous step.
    pub m_boundary_prev: f64,
    pub dx: f64,
}

impl BoundaryState {
    pub fn new(s: f64, dx: f64) -> Self {
        Self {
            s,
            s_prev: s,
            m_boundary_prev: 0.0,
            dx,
        }
    }

    /// Last lattice line at or behind the front, `floor(s / dx)`.
    pub fn active_index(&self) -> usize {
        (self.s / self.dx).max(0.0).floor() as usize
    }

    /// Lattice node that carries the front condition, `round(s / dx)`, at least 1.
    pub fn front_node(&self) -> usize {
        front_node(self.s, self.dx)
    }

    pub fn rate(&self, dt: f64) -> f64 {
        (self.s - self.s_prev) / dt
    }

    fn moved_to(&self, s: f64) -> Self {
        Self {
            s,
            s_prev: self.s,
            ..*self
        }
    }
}

fn front_node(s: f64, dx: f64) -> usize {
    ((s / dx + 0.5).floor().max(0.0) as usize).max(1)
}

/// One-sided difference `(m_F - m_{F-1}) / dx` at the front node.
pub fn boundary_flux_estimate(field: &ParticleField, state: &BoundaryState) -> Result<f64> {
    let node = state.front_node();
    node_gradient(field, node)
}

fn node_gradient(field: &ParticleField, node: usize) -> Result<f64> {
    if node < 1 {
        return Err(Error::TooFewSites { index: node });
    }
    Ok((field.concentration(node) - field.concentration(node - 1)) / field.dx())
}

// Forward Euler for the front ODE, split into substeps whenever one step
// would carry the front further than half a cell.
fn integrate_front(s: f64, dt: f64, dx: f64, rate: impl Fn(f64) -> f64) -> Result<f64> {
    let first = rate(s);
    if !first.is_finite() {
        return Err(Error::NonFiniteValue("front speed".into()));
    }
    let travel = first.abs() * dt;
    let pieces = if travel > 0.5 * dx {
        ((travel / (0.5 * dx)).ceil() as usize).min(1 << 20)
    } else {
        1
    };
    let h = dt / pieces as f64;
    let mut s = s + h * first;
    for _ in 1..pieces {
        s += h * rate(s);
    }
    if !s.is_finite() {
        return Err(Error::NonFiniteValue("front position".into()));
    }
    Ok(s)
}

/// Stefan condition `mu s' = -alpha m_x`, explicit in time.
pub fn advance_front_classical(
    state: &BoundaryState,
    flux: f64,
    mu: f64,
    alpha_l: f64,
    dt: f64,
) -> Result<BoundaryState> {
    let speed = -alpha_l / mu * flux;
    let s = integrate_front(state.s, dt, state.dx, |_| speed)?;
    if s < state.s {
        log::warn!("front retreats from {} to {}", state.s, s);
    }
    Ok(state.moved_to(s))
}

/// Kinetic law `s' = D alpha (m_prev - alpha s) + f`.
pub fn advance_front_kinetic(
    state: &BoundaryState,
    diffusivity: f64,
    alpha: f64,
    dt: f64,
    source: Option<f64>,
) -> Result<BoundaryState> {
    let (m, f) = (state.m_boundary_prev, source.unwrap_or(0.0));
    let s = integrate_front(state.s, dt, state.dx, |s| {
        diffusivity * alpha * (m - alpha * s) + f
    })?;
    Ok(state.moved_to(s))
}

/// Swelling law `s' = a0 (m_prev - sigma(s)) + f`.
pub fn advance_front_rubber(
    state: &BoundaryState,
    a0: f64,
    swell: &SwellLaw,
    dt: f64,
    source: Option<f64>,
) -> Result<BoundaryState> {
    let (m, f) = (state.m_boundary_prev, source.unwrap_or(0.0));
    let s = integrate_front(state.s, dt, state.dx, |s| a0 * (m - swell.sigma(s)) + f)?;
    Ok(state.moved_to(s))
}

/// Front concentration `m` solving `m = m_star - c a0 (m - sigma) m`, the front
/// node after an outflow `c s' m` with the swelling law `s' = a0 (m - sigma)`
/// taken at the new level. `c` is the outflow weight times `dt / dx`.
pub fn implicit_front_concentration(m_star: f64, a0: f64, sigma: f64, c: f64) -> f64 {
    if m_star.is_nan() || m_star <= 0.0 {
        return 0.0;
    }
    let a = c * a0;
    let b = 1.0 - a * sigma;
    let root = (b * b + 4.0 * a * m_star).sqrt();
    if b >= 0.0 {
        2.0 * m_star / (b + root)
    } else {
        (root - b) / (2.0 * a)
    }
}

/// Robin inflow `-D m_x(0) = beta (b - H m(0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinInflow {
    pub beta: f64,
    pub b: f64,
    pub henry: f64,
}

impl RobinInflow {
    pub fn flux(&self, m0: f64) -> f64 {
        self.beta * (self.b - self.henry * m0)
    }
}

/// Injects `weight * N dt / dx * (beta (b - H m_0) + f)` particles at site 0 and
/// returns the change applied. With a mirrored left end the weight is 2, which
/// is the centred ghost-node form of the Robin condition; with a reflecting end
/// it is 1.
///
/// The boundary value `m0` is passed in so that the flux can be taken from the
/// state before the diffusion step.
pub fn robin_inflow_adapter(
    field: &mut ParticleField,
    acc: &mut InjectionAccumulator,
    inflow: &RobinInflow,
    m0: f64,
    dt: f64,
    source: Option<f64>,
    weight: f64,
) -> Result<i128> {
    let g = inflow.flux(m0) + source.unwrap_or(0.0);
    let amount = weight * field.total() as f64 * dt / field.dx() * g;
    acc.inject(field, 0, amount)
}

/// Removes `weight * N dt / dx * q` particles at the front node, where `q` is
/// the outward flux `-D m_x`; returns the (non-positive) change applied.
pub fn flux_conservation_adapter(
    field: &mut ParticleField,
    acc: &mut InjectionAccumulator,
    node: usize,
    dt: f64,
    outward_flux: f64,
    weight: f64,
) -> Result<i128> {
    let amount = -weight * field.total() as f64 * dt / field.dx() * outward_flux;
    acc.inject(field, node, amount)
}

/// Running particle books of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MassLedger {
    pub initial: u128,
    pub injected: u128,
    pub removed: u128,
    pub steps_checked: usize,
}

impl MassLedger {
    pub fn expected(&self) -> i128 {
        self.initial as i128 + self.injected as i128 - self.removed as i128
    }

    fn book(&mut self, delta: i128) {
        if delta >= 0 {
            self.injected += delta as u128;
        } else {
            self.removed += delta.unsigned_abs();
        }
    }

    fn book_step(&mut self, step: &StepLedger) {
        self.removed += step.left_absorbed + step.right_absorbed;
        self.injected += step.left_mirrored + step.right_mirrored;
    }
}

/// Raw lattice counts captured during a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub front: f64,
    pub counts: Vec<u128>,
}

/// Front history and final profile of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionRecord {
    pub times: Vec<f64>,
    pub fronts: Vec<f64>,
    /// Node positions of the final profile, all within `[0, s(T)]`.
    pub positions: Vec<f64>,
    pub profile: Vec<f64>,
    /// Spacing of the final profile nodes.
    pub spacing: f64,
    pub ledger: Option<MassLedger>,
    pub snapshots: Vec<Snapshot>,
}

impl SolutionRecord {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("record holds the initial time")
    }

    pub fn final_front(&self) -> f64 {
        *self.fronts.last().expect("record holds the initial front")
    }
}

// Lattice plus the books and accumulators every driver needs.
struct Lattice {
    field: ParticleField,
    stepper: GrwStepper,
    ledger: MassLedger,
    bulk: InjectionAccumulator,
    inflow: InjectionAccumulator,
    outflow: InjectionAccumulator,
}

impl Lattice {
    fn new(values: &[f64], jump: JumpParameter, options: &RunOptions) -> Result<Self> {
        let field = ParticleField::from_concentrations(values, jump.dx(), options.particles)?;
        let redistributor = match options.split {
            SplitMode::ReducedFluctuations => Redistributor::ReducedFluctuations,
            SplitMode::Binomial { seed } => Redistributor::binomial(seed),
        };
        let ledger = MassLedger {
            initial: field.sum(),
            ..MassLedger::default()
        };
        Ok(Self {
            field,
            stepper: GrwStepper::new(jump, redistributor),
            ledger,
            bulk: InjectionAccumulator::new(),
            inflow: InjectionAccumulator::new(),
            outflow: InjectionAccumulator::new(),
        })
    }

    fn m(&self, site: usize) -> f64 {
        self.field.concentration(site)
    }

    fn diffuse(&mut self, last: usize, left: Boundary, right: Boundary) -> Result<()> {
        let step = self.stepper.step(&mut self.field, 0..=last, left, right)?;
        self.ledger.book_step(&step);
        Ok(())
    }

    fn set_concentration(&mut self, site: usize, m: f64) -> Result<()> {
        let delta = self.field.set_concentration(site, m)?;
        self.ledger.book(delta);
        Ok(())
    }

    fn copy_count(&mut self, from: usize, to: std::ops::RangeInclusive<usize>) -> Result<()> {
        let n = self.field.count(from);
        for site in to {
            let delta = self.field.set_count(site, n)?;
            self.ledger.book(delta);
        }
        Ok(())
    }

    fn clear_beyond(&mut self, last: usize) {
        self.ledger.removed += self.field.clear_beyond(last);
    }

    fn inject_bulk(&mut self, last: usize, dt: f64, source: impl Fn(f64) -> Result<f64>) -> Result<()> {
        let scale = self.field.total() as f64 * dt;
        for site in 0..=last {
            let f = source(self.field.position(site))?;
            let delta = self.bulk.inject(&mut self.field, site, scale * f)?;
            self.ledger.book(delta);
        }
        Ok(())
    }

    fn robin(&mut self, inflow: &RobinInflow, m0: f64, dt: f64, source: Option<f64>) -> Result<()> {
        let delta = robin_inflow_adapter(&mut self.field, &mut self.inflow, inflow, m0, dt, source, 2.0)?;
        self.ledger.book(delta);
        Ok(())
    }

    fn front_outflow(&mut self, node: usize, dt: f64, flux: f64) -> Result<()> {
        let delta = flux_conservation_adapter(&mut self.field, &mut self.outflow, node, dt, flux, 2.0)?;
        self.ledger.book(delta);
        Ok(())
    }

    fn audit(&mut self) -> Result<()> {
        let actual = self.field.sum();
        let expected = self.ledger.expected();
        if expected != actual as i128 {
            return Err(Error::LedgerMismatch { expected, actual });
        }
        self.ledger.steps_checked += 1;
        Ok(())
    }

    fn closure_value(&self, node: usize, s: f64, closure: BoundaryClosure) -> f64 {
        match closure {
            BoundaryClosure::Node => self.m(node),
            BoundaryClosure::Extrapolate => {
                let slope = (self.m(node) - self.m(node - 1)) / self.field.dx();
                (self.m(node) + slope * (s - self.field.position(node))).max(0.0)
            }
        }
    }

    fn record(&self, front: f64) -> (Vec<f64>, Vec<f64>) {
        let last = front_node(front, self.field.dx());
        (0..=last)
            .map(|i| (self.field.position(i), self.m(i)))
            .filter(|&(x, _)| x <= front * (1.0 + 1e-12))
            .unzip()
    }
}

// Time grid: whole steps that land exactly on the final time.
struct Clock {
    dt: f64,
    steps: usize,
}

impl Clock {
    fn new(t_final: f64, courant_r: f64, diffusivity: f64, dx: f64) -> Result<(Self, JumpParameter)> {
        let nominal = JumpParameter::from_courant(courant_r, diffusivity, dx)?;
        let steps = (t_final / nominal.dt() - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            return Ok((Self { dt: nominal.dt(), steps }, nominal));
        }
        let dt = t_final / steps as f64;
        Ok((Self { dt, steps }, JumpParameter::new(diffusivity, dt, dx)?))
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

struct History {
    times: Vec<f64>,
    fronts: Vec<f64>,
    snapshots: Vec<Snapshot>,
    pending: std::vec::IntoIter<f64>,
    next: Option<f64>,
}

impl History {
    fn new(s0: f64, snapshot_times: &[f64]) -> Self {
        let mut wanted = snapshot_times.to_vec();
        wanted.sort_by(f64::total_cmp);
        let mut pending = wanted.into_iter();
        let next = pending.next();
        Self {
            times: vec![0.0],
            fronts: vec![s0],
            snapshots: Vec::new(),
            pending,
            next,
        }
    }

    fn push(&mut self, t: f64, s: f64, lattice: &Lattice, dt: f64) -> Result<()> {
        if !s.is_finite() {
            return Err(Error::NonFiniteValue(format!("front at t = {t}")));
        }
        if self.times.len() > 1 || t > 0.0 {
            self.times.push(t);
            self.fronts.push(s);
        }
        while let Some(wanted) = self.next {
            if t + 0.5 * dt < wanted {
                break;
            }
            let last = front_node(s, lattice.field.dx());
            self.snapshots.push(Snapshot {
                time: t,
                front: s,
                counts: (0..=last).map(|i| lattice.field.count(i)).collect(),
            });
            self.next = self.pending.next();
        }
        Ok(())
    }

    fn finish(self, lattice: &Lattice) -> SolutionRecord {
        let front = *self.fronts.last().expect("initial front recorded");
        let (positions, profile) = lattice.record(front);
        SolutionRecord {
            times: self.times,
            fronts: self.fronts,
            positions,
            profile,
            spacing: lattice.field.dx(),
            ledger: Some(lattice.ledger),
            snapshots: self.snapshots,
        }
    }
}

/// Marches one problem to its final time on a lattice of spacing `dx` with
/// time step `courant_r dx^2 / (2 D)` (shortened to land on the final time).
pub fn run_problem(
    spec: &ProblemSpec,
    dx: f64,
    courant_r: f64,
    options: &RunOptions,
) -> Result<SolutionRecord> {
    spec.validate()?;
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::InvalidParameter(format!("dx must be positive, got {dx}")));
    }
    if courant_r.is_nan() || courant_r <= 0.0 {
        return Err(Error::InvalidParameter(format!("courant_r must be positive, got {courant_r}")));
    }
    if courant_r > 1.0 {
        return Err(Error::StabilityViolation { r: courant_r });
    }
    match spec {
        ProblemSpec::Classical(p) => run_classical(p, dx, courant_r, options),
        ProblemSpec::Kinetic(p) => run_kinetic(p, dx, courant_r, options),
        ProblemSpec::Rubber(p) => run_rubber(p, dx, courant_r, options),
    }
}

/// Largest jump ratio not above `courant_r` that keeps the stay weight of a
/// Robin boundary site, `1 - r (1 + beta H dx / D)`, non-negative.
pub fn robin_courant(courant_r: f64, inflow: &RobinInflow, diffusivity: f64, dx: f64) -> f64 {
    courant_r.min(1.0 / (1.0 + inflow.beta * inflow.henry * dx / diffusivity))
}

fn initial_front_node(s0: f64, dx: f64) -> Result<usize> {
    let node = front_node(s0, dx);
    if node < 3 {
        return Err(Error::TooFewSites { index: node });
    }
    Ok(node)
}

// Dirichlet value on the left, front node held empty. Each step empties the
// sites at and beyond the front node, moves the front with the one-sided
// gradient and then diffuses.
fn run_classical(
    p: &ClassicalStefanParams,
    dx: f64,
    courant_r: f64,
    options: &RunOptions,
) -> Result<SolutionRecord> {
    let (clock, jump) = Clock::new(p.t_final(), courant_r, p.alpha_l(), dx)?;
    let mut state = BoundaryState::new(p.s0(), dx);
    let mut initial = vec![0.0; state.front_node() + 1];
    initial[0] = p.m_l();
    let mut lattice = Lattice::new(&initial, jump, options)?;
    let mut history = History::new(state.s, &options.snapshot_times);
    history.push(0.0, state.s, &lattice, clock.dt)?;

    for k in 0..clock.steps {
        let node = state.front_node();
        lattice.clear_beyond(node - 1);
        let gradient = boundary_flux_estimate(&lattice.field, &state)?;
        state = advance_front_classical(&state, gradient, p.mu(), p.alpha_l(), clock.dt)?;
        lattice.diffuse(node, Boundary::Absorbing, Boundary::Absorbing)?;
        lattice.set_concentration(0, p.m_l())?;
        lattice.audit()?;
        history.push(clock.time(k + 1), state.s, &lattice, clock.dt)?;
    }
    lattice.clear_beyond(state.front_node() - 1);
    Ok(history.finish(&lattice))
}

fn run_kinetic(
    p: &KineticStefanParams,
    dx: f64,
    courant_r: f64,
    options: &RunOptions,
) -> Result<SolutionRecord> {
    let exact = match options.mode {
        RunMode::Benchmark => {
            if p.boundary != KineticBoundary::SqrtRamp {
                return Err(Error::InvalidParameter(
                    "benchmark mode needs the manufactured square-root boundary value".into(),
                ));
            }
            Some(KineticManufactured::new(p)?)
        }
        RunMode::Plain => None,
    };
    let (clock, jump) = Clock::new(p.t_final, courant_r, p.diffusivity, dx)?;
    let mut state = BoundaryState::new(p.s0, dx);
    let first = initial_front_node(p.s0, dx)?;
    let mut initial = vec![0.0; first + 1];
    initial[0] = p.boundary_value(0.0);
    let mut lattice = Lattice::new(&initial, jump, options)?;
    state.m_boundary_prev = lattice.closure_value(first, state.s, options.closure);
    let mut history = History::new(state.s, &options.snapshot_times);
    history.push(0.0, state.s, &lattice, clock.dt)?;

    for k in 0..clock.steps {
        let t = clock.time(k + 1);
        let node = state.front_node();
        let law_source = exact.as_ref().map(|e| e.front_law_source(t)).transpose()?;
        let advanced = advance_front_kinetic(&state, p.diffusivity, p.alpha, clock.dt, law_source)?;
        let outward = match &exact {
            Some(e) => {
                let front = e.front(t);
                e.front_rate(t)? * e.concentration(front, t)? + e.front_flux_source(t)?
            }
            None => advanced.rate(clock.dt) * state.m_boundary_prev,
        };

        lattice.diffuse(node, Boundary::Absorbing, Boundary::Mirror)?;
        lattice.front_outflow(node, clock.dt, outward)?;
        if let Some(e) = &exact {
            lattice.inject_bulk(node, clock.dt, |x| e.bulk_source(x, t))?;
        }
        lattice.set_concentration(0, p.boundary_value(t))?;

        state = advanced;
        let next = state.front_node();
        if next > node {
            lattice.copy_count(node, node + 1..=next)?;
        } else if next < node {
            lattice.clear_beyond(next);
        }
        state.m_boundary_prev = lattice.closure_value(next, state.s, options.closure);
        lattice.audit()?;
        history.push(t, state.s, &lattice, clock.dt)?;
    }
    Ok(history.finish(&lattice))
}

fn run_rubber(
    p: &RubberParams,
    dx: f64,
    courant_r: f64,
    options: &RunOptions,
) -> Result<SolutionRecord> {
    let exact = match options.mode {
        RunMode::Benchmark => Some(RubberManufactured::new(p, options.chain_rule)?),
        RunMode::Plain => None,
    };
    let inflow = RobinInflow {
        beta: p.beta,
        b: p.b,
        henry: p.henry,
    };
    let (clock, jump) = Clock::new(p.t_final, robin_courant(courant_r, &inflow, p.diffusivity, dx), p.diffusivity, dx)?;
    let mut state = BoundaryState::new(p.s0, dx);
    let first = initial_front_node(p.s0, dx)?;
    let initial: Vec<f64> = (0..=first)
        .map(|i| p.initial.value((i as f64 * dx).min(p.s0), p.s0))
        .collect();
    let mut lattice = Lattice::new(&initial, jump, options)?;
    state.m_boundary_prev = lattice.closure_value(first, state.s, options.closure);
    let mut history = History::new(state.s, &options.snapshot_times);
    history.push(0.0, state.s, &lattice, clock.dt)?;

    for k in 0..clock.steps {
        let t = clock.time(k + 1);
        let node = state.front_node();
        let inflow_source = exact.as_ref().map(|e| e.inflow_source(t));
        let m0 = lattice.m(0);
        lattice.diffuse(node, Boundary::Mirror, Boundary::Mirror)?;
        lattice.robin(&inflow, m0, clock.dt, inflow_source)?;

        state = match &exact {
            Some(e) => {
                let advanced =
                    advance_front_rubber(&state, p.a0, &p.swell, clock.dt, Some(e.front_law_source(t)))?;
                let front = e.front(t);
                let outward = e.front_rate(t)? * e.concentration(front, t)? + e.front_flux_source(t);
                lattice.front_outflow(node, clock.dt, outward)?;
                lattice.inject_bulk(node, clock.dt, |x| Ok(e.bulk_source(x, t)))?;
                advanced
            }
            None => {
                let sigma = p.swell.sigma(state.s);
                let c = 2.0 * clock.dt / dx;
                let m = implicit_front_concentration(lattice.m(node), p.a0, sigma, c);
                lattice.front_outflow(node, clock.dt, p.a0 * (m - sigma) * m)?;
                state.m_boundary_prev = m;
                advance_front_rubber(&state, p.a0, &p.swell, clock.dt, None)?
            }
        };
        let next = state.front_node();
        if next > node {
            lattice.copy_count(node, node + 1..=next)?;
        } else if next < node {
            lattice.clear_beyond(next);
        }
        state.m_boundary_prev = lattice.closure_value(next, state.s, options.closure);
        lattice.audit()?;
        history.push(t, state.s, &lattice, clock.dt)?;
    }
    Ok(history.finish(&lattice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::canonical;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field(values: &[f64], dx: f64) -> ParticleField {
        ParticleField::from_concentrations(values, dx, DEFAULT_PARTICLES).unwrap()
    }

    #[test]
    fn flux_estimate_examples() {
        let state = BoundaryState::new(0.3, 0.1);
        let g = boundary_flux_estimate(&field(&[0.5, 0.4, 0.2, 0.0], 0.1), &state).unwrap();
        assert_relative_eq!(g, -2.0, max_relative = 1e-12);
        assert_eq!(boundary_flux_estimate(&field(&[0.7; 6], 0.1), &state).unwrap(), 0.0);
        let linear: Vec<f64> = (0..8).map(|i| 1.5 * i as f64 * 0.05).collect();
        for s in [0.05, 0.12, 0.2, 0.33] {
            let g = boundary_flux_estimate(&field(&linear, 0.05), &BoundaryState::new(s, 0.05)).unwrap();
            assert_relative_eq!(g, 1.5, max_relative = 1e-10);
        }
        assert!(matches!(node_gradient(&field(&[1.0, 0.0], 0.1), 0), Err(Error::TooFewSites { index: 0 })));
    }

    #[test]
    fn indices_bracket_the_front() {
        for s in [0.1, 0.149, 0.151, 0.2999, 1.0] {
            let state = BoundaryState::new(s, 0.1);
            let i = state.active_index() as f64;
            assert!(i * 0.1 <= s + 1e-12 && s < (i + 1.0) * 0.1);
            assert!((state.front_node() as f64 * 0.1 - s).abs() <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn classical_front_examples() {
        let state = BoundaryState::new(0.5, 0.1);
        let moved = advance_front_classical(&state, -2.0, 1.0, 1.0, 0.01).unwrap();
        assert_relative_eq!(moved.s - state.s, 0.02, max_relative = 1e-12);
        assert_eq!(moved.s_prev, 0.5);
        assert_eq!(advance_front_classical(&state, 0.0, 1.0, 1.0, 0.01).unwrap().s, 0.5);
    }

    #[test]
    fn kinetic_front_examples() {
        let mut state = BoundaryState::new(0.1, 0.01);
        state.m_boundary_prev = 0.5;
        let moved = advance_front_kinetic(&state, 1.0, 0.1, 0.01, None).unwrap();
        assert_relative_eq!(moved.s, 0.10049, max_relative = 1e-12);
        assert_relative_eq!(moved.rate(0.01), 0.049, max_relative = 1e-9);
        state.m_boundary_prev = 0.1 * 0.1;
        assert_eq!(advance_front_kinetic(&state, 1.0, 0.1, 0.01, None).unwrap().s, 0.1);
    }

    #[test]
    fn rubber_front_examples() {
        let unit = SwellLaw::Linear { varrho: 1.0 };
        let mut state = BoundaryState::new(0.1, 0.01);
        state.m_boundary_prev = 0.5;
        let moved = advance_front_rubber(&state, 1.0, &unit, 1e-3, None).unwrap();
        assert_relative_eq!(moved.rate(1e-3), 0.4, max_relative = 1e-9);
        state.m_boundary_prev = 0.1;
        assert_eq!(advance_front_rubber(&state, 1.0, &unit, 1e-3, None).unwrap().s, 0.1);

        let half = SwellLaw::Linear { varrho: 0.5 };
        let mut state = BoundaryState::new(0.01, 0.01);
        state.m_boundary_prev = 0.5;
        let moved = advance_front_rubber(&state, 50.0, &half, 1e-6, None).unwrap();
        assert_relative_eq!(moved.rate(1e-6), 24.75, max_relative = 1e-9);
    }

    #[test]
    fn fast_fronts_are_substepped() {
        // s' = a0 (m - varrho s) has s(t) = m/varrho + (s0 - m/varrho) exp(-a0 varrho t).
        let (a0, varrho, m, s0, dt): (f64, f64, f64, f64, f64) = (50.0, 0.5, 0.5, 0.01, 0.05);
        let exact = m / varrho + (s0 - m / varrho) * (-a0 * varrho * dt).exp();
        let mut state = BoundaryState::new(s0, 1e-3);
        state.m_boundary_prev = m;
        let split = advance_front_rubber(&state, a0, &SwellLaw::Linear { varrho }, dt, None).unwrap();
        let single = s0 + dt * a0 * (m - varrho * s0);
        assert!((split.s - exact).abs() < 0.01 * (single - exact).abs());
        assert!((split.s - exact).abs() < 1e-3);
    }

    #[test]
    fn robin_adapter_examples() {
        let dx = 0.1;
        let dt = 1e-3;
        let unit = RobinInflow { beta: 1.0, b: 1.0, henry: 1.0 };
        let mut f = ParticleField::new(4, dx, 1_000_000_000).unwrap();
        let mut acc = InjectionAccumulator::new();
        let added = robin_inflow_adapter(&mut f, &mut acc, &unit, 0.0, dt, None, 1.0).unwrap();
        assert_eq!(added, 10_000_000);
        assert_eq!(f.count(0), 10_000_000);

        let mut f = field(&[1.0, 1.0], dx);
        let mut acc = InjectionAccumulator::new();
        assert_eq!(robin_inflow_adapter(&mut f, &mut acc, &unit, 1.0, dt, None, 2.0).unwrap(), 0);

        let drain = RobinInflow { beta: 1.0, b: 0.0, henry: 1.0 };
        let mut acc = InjectionAccumulator::new();
        assert!(robin_inflow_adapter(&mut f, &mut acc, &drain, 1.0, dt, None, 2.0).unwrap() < 0);
        assert!(f.concentration(0) < 1.0);
    }

    #[test]
    fn still_front_keeps_particles() {
        let mut f = field(&[0.3, 0.2, 0.1], 0.1);
        let before = f.sum();
        let mut acc = InjectionAccumulator::new();
        assert_eq!(flux_conservation_adapter(&mut f, &mut acc, 2, 1e-3, 0.0, 2.0).unwrap(), 0);
        assert_eq!(f.sum(), before);
    }

    #[test]
    fn robin_gate_keeps_stay_weight_non_negative() {
        let inflow = RobinInflow { beta: 0.564, b: 10.0, henry: 2.5 };
        for dx in [1e-3, 2e-3, 1e-2, 0.1] {
            let r = robin_courant(1.0, &inflow, 0.01, dx);
            assert!(r <= 1.0);
            assert!(1.0 - r * (1.0 + inflow.beta * inflow.henry * dx / 0.01) >= -1e-15);
        }
        assert_eq!(robin_courant(0.5, &RobinInflow { beta: 1.0, b: 1.0, henry: 1.0 }, 1.0, 0.01), 0.5);
    }

    #[test]
    fn unstable_ratio_is_rejected() {
        let spec = canonical("classical-benchmark").unwrap();
        let err = run_problem(&spec, 0.04, 1.2, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::StabilityViolation { .. }));
        assert!(run_problem(&spec, 0.04, 0.0, &RunOptions::default()).is_err());
        assert!(run_problem(&spec, -0.04, 0.5, &RunOptions::default()).is_err());
    }

    #[test]
    fn coarse_kinetic_lattice_is_rejected() {
        let spec = canonical("kinetic-benchmark").unwrap();
        let err = run_problem(&spec, 0.05, 1.0, &RunOptions::benchmark()).unwrap_err();
        assert!(matches!(err, Error::TooFewSites { .. }));
    }

    #[test]
    fn classical_run_is_physically_ordered() {
        let spec = canonical("classical-benchmark").unwrap();
        let record = run_problem(&spec, 0.02, 1.0, &RunOptions::default()).unwrap();
        assert!(record.fronts.windows(2).all(|w| w[1] >= w[0]));
        assert!(record.profile.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(record.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(record.times.len(), record.fronts.len());
        assert!((record.final_time() - spec.t_final()).abs() < 1e-12);
        assert!(record.positions.iter().all(|&x| x <= record.final_front() + 1e-12));
    }

    #[test]
    fn ledgers_balance_on_every_problem() {
        for name in ["classical-benchmark", "kinetic-benchmark", "rubber-benchmark"] {
            let spec = canonical(name).unwrap();
            let spec = spec.with_t_final(spec.t_final().min(0.02)).unwrap();
            let options = if name == "classical-benchmark" { RunOptions::default() } else { RunOptions::benchmark() };
            let record = run_problem(&spec, 0.02, 1.0, &options).unwrap();
            let ledger = record.ledger.unwrap();
            assert_eq!(ledger.steps_checked as usize, record.times.len() - 1, "{name}");
            assert!(ledger.expected() > 0);
        }
    }

    #[test]
    fn zero_final_time_takes_no_steps() {
        let spec = canonical("rubber-forecast").unwrap().with_t_final(0.0).unwrap();
        let record = run_problem(&spec, 2e-3, 1.0, &RunOptions::default()).unwrap();
        assert_eq!(record.times, vec![0.0]);
        assert_eq!(record.fronts, vec![0.01]);
        let reference = crate::landau::run_reference(&spec, 0.05, &Default::default()).unwrap();
        assert_eq!(reference.times, vec![0.0]);
    }

    #[test]
    fn front_laws_reproduce_the_manufactured_speed() {
        let kinetic = match canonical("kinetic-benchmark").unwrap() {
            ProblemSpec::Kinetic(p) => p,
            _ => unreachable!(),
        };
        let exact = KineticManufactured::new(&kinetic).unwrap();
        for t in [0.05, 0.3, 0.9] {
            let mut state = BoundaryState::new(exact.front(t), 1e-3);
            state.m_boundary_prev = exact.concentration(exact.front(t), t).unwrap();
            let rate = kinetic.diffusivity * kinetic.alpha * (state.m_boundary_prev - kinetic.alpha * state.s)
                + exact.front_law_source(t).unwrap();
            assert!((rate - exact.front_rate(t).unwrap()).abs() < 1e-10);
        }

        let rubber = match canonical("rubber-benchmark").unwrap() {
            ProblemSpec::Rubber(p) => p,
            _ => unreachable!(),
        };
        let exact = RubberManufactured::new(&rubber, ChainRule::AsPrinted).unwrap();
        for t in [1e-4, 5e-4, 1e-3] {
            let s = exact.front(t);
            let m = exact.concentration(s, t).unwrap();
            let rate = rubber.a0 * (m - rubber.swell.sigma(s)) + exact.front_law_source(t);
            assert!((rate - exact.front_rate(t).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn front_integrator_is_first_order_with_exact_data() {
        let kinetic = match canonical("kinetic-benchmark").unwrap() {
            ProblemSpec::Kinetic(p) => p,
            _ => unreachable!(),
        };
        let exact = KineticManufactured::new(&kinetic).unwrap();
        let (t0, t1) = (0.2, 1.0);
        let error = |steps: usize| {
            let dt = (t1 - t0) / steps as f64;
            let mut state = BoundaryState::new(exact.front(t0), 1.0);
            for k in 0..steps {
                let t = t0 + k as f64 * dt;
                state.m_boundary_prev = exact.concentration(exact.front(t), t).unwrap();
                let f = exact.front_law_source(t + dt).unwrap();
                state = advance_front_kinetic(&state, kinetic.diffusivity, kinetic.alpha, dt, Some(f)).unwrap();
            }
            (state.s - exact.front(t1)).abs()
        };
        let (coarse, fine) = (error(100), error(200));
        let order = (coarse / fine).log2();
        assert!((order - 1.0).abs() < 0.1, "order {order}");
    }

    proptest! {
        #[test]
        fn implicit_front_value_solves_its_balance(
            m_star in 0.0f64..5.0,
            a0 in 0.1f64..100.0,
            sigma in 0.0f64..2.0,
            c in 0.0f64..0.5,
        ) {
            let m = implicit_front_concentration(m_star, a0, sigma, c);
            prop_assert!(m >= 0.0);
            let residual = m - m_star + c * a0 * (m - sigma) * m;
            prop_assert!(residual.abs() < 1e-12 * (1.0 + m_star));
        }

        #[test]
        fn robin_injection_is_exact_over_many_steps(
            m0 in 0.0f64..1.0,
            steps in 1usize..200,
        ) {
            let inflow = RobinInflow { beta: 1.0, b: 1.0, henry: 1.0 };
            let mut f = ParticleField::new(3, 0.1, 1_000_000).unwrap();
            let mut acc = InjectionAccumulator::new();
            let mut total = 0i128;
            for _ in 0..steps {
                total += robin_inflow_adapter(&mut f, &mut acc, &inflow, m0, 1e-3, None, 2.0).unwrap();
            }
            let ideal = 2.0 * 1e6 * 1e-3 / 0.1 * (1.0 - m0) * steps as f64;
            prop_assert!((total as f64 - ideal).abs() <= 1.0);
        }
    }
}
