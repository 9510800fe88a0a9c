//! Problem definitions, exact and manufactured solutions, and the canonical
//! parameter catalog.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::erf;

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

fn nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be non-negative and finite, got {value}"
        )))
    }
}

fn time_after_start(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::SingularTime { t })
    }
}

/// Melting problem with a Dirichlet temperature on the left and the Stefan
/// condition `mu s' = -alpha m_x` at the interface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalStefanParams {
    alpha_l: f64,
    k_l: f64,
    rho_l: f64,
    c_l: f64,
    ell: f64,
    mu: f64,
    m_l: f64,
    s0: f64,
    t_final: f64,
}

impl ClassicalStefanParams {
    /// Material form: diffusivity `k / (rho c)` and Stefan number `ell / c` are derived.
    #[allow(clippy::too_many_arguments)]
    pub fn from_material(
        k_l: f64,
        rho_l: f64,
        c_l: f64,
        ell: f64,
        m_l: f64,
        s0: f64,
        t_final: f64,
    ) -> Result<Self> {
        positive("k_l", k_l)?;
        positive("rho_l", rho_l)?;
        positive("c_l", c_l)?;
        positive("ell", ell)?;
        positive("m_l", m_l)?;
        nonnegative("s0", s0)?;
        positive("t_final", t_final)?;
        Ok(Self {
            alpha_l: k_l / (rho_l * c_l),
            k_l,
            rho_l,
            c_l,
            ell,
            mu: ell / c_l,
            m_l,
            s0,
            t_final,
        })
    }

    /// Dimensionless form with unit density and heat capacity.
    pub fn dimensionless(alpha_l: f64, mu: f64, m_l: f64, s0: f64, t_final: f64) -> Result<Self> {
        Self::from_material(alpha_l, 1.0, 1.0, mu, m_l, s0, t_final)
    }

    pub fn alpha_l(&self) -> f64 {
        self.alpha_l
    }
    pub fn k_l(&self) -> f64 {
        self.k_l
    }
    pub fn rho_l(&self) -> f64 {
        self.rho_l
    }
    pub fn c_l(&self) -> f64 {
        self.c_l
    }
    pub fn ell(&self) -> f64 {
        self.ell
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn m_l(&self) -> f64 {
        self.m_l
    }
    pub fn s0(&self) -> f64 {
        self.s0
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
}

/// Left boundary value `m(0, t)` of the kinetic problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KineticBoundary {
    /// `sqrt(t / T)`, fixed by the manufactured solution.
    SqrtRamp,
    Constant(f64),
}

/// Stefan problem whose front obeys `s' = D alpha (m(s) - alpha s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KineticStefanParams {
    pub diffusivity: f64,
    pub alpha: f64,
    pub s0: f64,
    pub t_final: f64,
    pub boundary: KineticBoundary,
}

impl KineticStefanParams {
    pub fn validate(&self) -> Result<()> {
        positive("diffusivity", self.diffusivity)?;
        positive("alpha", self.alpha)?;
        positive("s0", self.s0)?;
        nonnegative("t_final", self.t_final)?;
        if let KineticBoundary::Constant(v) = self.boundary {
            nonnegative("boundary value", v)?;
        }
        Ok(())
    }

    pub fn boundary_value(&self, t: f64) -> f64 {
        match self.boundary {
            KineticBoundary::SqrtRamp => (t.max(0.0) / self.t_final).sqrt(),
            KineticBoundary::Constant(v) => v,
        }
    }
}

/// Swelling law `sigma(s)` of the rubber front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SwellLaw {
    Linear { varrho: f64 },
}

impl SwellLaw {
    pub fn sigma(&self, s: f64) -> f64 {
        match *self {
            SwellLaw::Linear { varrho } => varrho * s,
        }
    }

    pub fn slope(&self) -> f64 {
        match *self {
            SwellLaw::Linear { varrho } => varrho,
        }
    }
}

/// Initial diffusant profile on `[0, s0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InitialProfile {
    Uniform(f64),
    /// `(1 - x / s0)^3`, the manufactured profile at `t = 0`.
    Cubic,
}

impl InitialProfile {
    pub fn value(&self, x: f64, s0: f64) -> f64 {
        match *self {
            InitialProfile::Uniform(v) => v,
            InitialProfile::Cubic => (1.0 - x / s0).max(0.0).powi(3),
        }
    }
}

/// Diffusant penetration into rubber: Robin inflow on the left, mass balance at
/// the front and a kinetic front law `s' = a0 (m(s) - sigma(s))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RubberParams {
    pub diffusivity: f64,
    pub beta: f64,
    pub b: f64,
    pub henry: f64,
    pub a0: f64,
    pub swell: SwellLaw,
    pub initial: InitialProfile,
    pub s0: f64,
    pub t_final: f64,
}

impl RubberParams {
    pub fn validate(&self) -> Result<()> {
        positive("diffusivity", self.diffusivity)?;
        positive("beta", self.beta)?;
        nonnegative("b", self.b)?;
        positive("henry", self.henry)?;
        positive("a0", self.a0)?;
        positive("s0", self.s0)?;
        nonnegative("t_final", self.t_final)?;
        let SwellLaw::Linear { varrho } = self.swell;
        positive("varrho", varrho)?;
        if let InitialProfile::Uniform(v) = self.initial {
            nonnegative("initial concentration", v)?;
        }
        Ok(())
    }
}

/// One of the three moving-boundary problems.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Classical(ClassicalStefanParams),
    Kinetic(KineticStefanParams),
    Rubber(RubberParams),
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::Classical(_) => "classical",
            ProblemSpec::Kinetic(_) => "kinetic",
            ProblemSpec::Rubber(_) => "rubber",
        }
    }

    pub fn diffusivity(&self) -> f64 {
        match self {
            ProblemSpec::Classical(p) => p.alpha_l(),
            ProblemSpec::Kinetic(p) => p.diffusivity,
            ProblemSpec::Rubber(p) => p.diffusivity,
        }
    }

    pub fn s0(&self) -> f64 {
        match self {
            ProblemSpec::Classical(p) => p.s0(),
            ProblemSpec::Kinetic(p) => p.s0,
            ProblemSpec::Rubber(p) => p.s0,
        }
    }

    pub fn t_final(&self) -> f64 {
        match self {
            ProblemSpec::Classical(p) => p.t_final(),
            ProblemSpec::Kinetic(p) => p.t_final,
            ProblemSpec::Rubber(p) => p.t_final,
        }
    }

    /// Copy with a different final time; the manufactured solutions scale with
    /// the final time, so only plain runs should use this.
    pub fn with_t_final(&self, t_final: f64) -> Result<Self> {
        nonnegative("t_final", t_final)?;
        let mut spec = self.clone();
        match &mut spec {
            ProblemSpec::Classical(p) => {
                positive("t_final", t_final)?;
                p.t_final = t_final;
            }
            ProblemSpec::Kinetic(p) => p.t_final = t_final,
            ProblemSpec::Rubber(p) => p.t_final = t_final,
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemSpec::Classical(_) => Ok(()),
            ProblemSpec::Kinetic(p) => p.validate(),
            ProblemSpec::Rubber(p) => p.validate(),
        }
    }
}

/// Names accepted by [`canonical`].
pub const CANONICAL_NAMES: [&str; 4] = [
    "classical-benchmark",
    "kinetic-benchmark",
    "rubber-benchmark",
    "rubber-forecast",
];

/// Looks up a named parameter set.
pub fn canonical(name: &str) -> Result<ProblemSpec> {
    match name {
        "classical-benchmark" => Ok(ProblemSpec::Classical(ClassicalStefanParams::dimensionless(
            1.0, 1.0, 1.0, 0.0, 0.5,
        )?)),
        "kinetic-benchmark" => Ok(ProblemSpec::Kinetic(KineticStefanParams {
            diffusivity: 1.0,
            alpha: 0.1,
            s0: 0.1,
            t_final: 1.0,
            boundary: KineticBoundary::SqrtRamp,
        })),
        "rubber-benchmark" => Ok(ProblemSpec::Rubber(RubberParams {
            diffusivity: 1.0,
            beta: 1.0,
            b: 1.0,
            henry: 1.0,
            a0: 1.0,
            swell: SwellLaw::Linear { varrho: 1.0 },
            initial: InitialProfile::Cubic,
            s0: 0.1,
            t_final: 0.001,
        })),
        // Units: mm, min, g/mm^3.
        "rubber-forecast" => Ok(ProblemSpec::Rubber(RubberParams {
            diffusivity: 0.01,
            beta: 0.564,
            b: 10.0,
            henry: 2.5,
            a0: 50.0,
            swell: SwellLaw::Linear { varrho: 0.5 },
            initial: InitialProfile::Uniform(0.5),
            s0: 0.01,
            t_final: 31.0,
        })),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

/// Every named parameter set with its name.
pub fn canonical_parameter_sets() -> Vec<(&'static str, ProblemSpec)> {
    CANONICAL_NAMES
        .iter()
        .map(|&name| (name, canonical(name).expect("catalog names resolve")))
        .collect()
}

/// Closed-form or manufactured solution of a moving-boundary problem.
pub trait ExactSolution {
    fn concentration(&self, x: f64, t: f64) -> Result<f64>;
    fn front(&self, t: f64) -> f64;
    fn front_rate(&self, t: f64) -> Result<f64>;
}

/// Root `lambda > 0` of `mu sqrt(pi) lambda e^{lambda^2} erf(lambda) = m_l`.
pub fn classical_lambda(mu: f64, m_l: f64) -> Result<f64> {
    positive("mu", mu)?;
    positive("m_l", m_l)?;
    let g = |l: f64| mu * SQRT_PI * l * (l * l).exp() * erf(l) - m_l;
    let (mut lo, mut hi) = (1e-9, 10.0);
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut l = 0.5 * (lo + hi);
    let slope = mu
        * SQRT_PI
        * ((l * l).exp() * erf(l) * (1.0 + 2.0 * l * l) + 2.0 * l / SQRT_PI);
    let polished = l - g(l) / slope;
    if polished.is_finite() && polished > 0.0 && g(polished).abs() <= g(l).abs() {
        l = polished;
    }
    Ok(l)
}

/// Similarity solution of the classical melting problem started from `s = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSolution {
    params: ClassicalStefanParams,
    lambda: f64,
}

impl ClassicalSolution {
    pub fn new(params: &ClassicalStefanParams) -> Result<Self> {
        Ok(Self {
            lambda: classical_lambda(params.mu(), params.m_l())?,
            params: params.clone(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl ExactSolution for ClassicalSolution {
    fn concentration(&self, x: f64, t: f64) -> Result<f64> {
        time_after_start(t)?;
        let s = self.front(t);
        if x < 0.0 || x > s * (1.0 + 1e-12) {
            return Err(Error::DomainError { x, s });
        }
        let z = x / (2.0 * (self.params.alpha_l() * t).sqrt());
        Ok(self.params.m_l() * (1.0 - erf(z) / erf(self.lambda)))
    }

    fn front(&self, t: f64) -> f64 {
        2.0 * self.lambda * (self.params.alpha_l() * t.max(0.0)).sqrt()
    }

    fn front_rate(&self, t: f64) -> Result<f64> {
        time_after_start(t)?;
        Ok(self.lambda * (self.params.alpha_l() / t).sqrt())
    }
}

/// Exact temperature and front of the classical problem at `(x, t)`.
pub fn classical_exact(params: &ClassicalStefanParams, x: f64, t: f64) -> Result<(f64, f64)> {
    let sol = ClassicalSolution::new(params)?;
    Ok((sol.concentration(x, t)?, sol.front(t)))
}

/// Manufactured solution `m = sqrt(t/T) e^{-alpha x}`, `s = s0 + 2 D alpha sqrt(t/T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticManufactured {
    pub params: KineticStefanParams,
}

impl KineticManufactured {
    pub fn new(params: &KineticStefanParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params: params.clone(),
        })
    }

    fn ramp(&self, t: f64) -> f64 {
        (t.max(0.0) / self.params.t_final).sqrt()
    }

    /// Bulk source added to the diffusion equation.
    pub fn bulk_source(&self, x: f64, t: f64) -> Result<f64> {
        time_after_start(t)?;
        let p = &self.params;
        let decay = (-p.alpha * x).exp();
        Ok(decay / (2.0 * (t * p.t_final).sqrt())
            - p.diffusivity * p.alpha * p.alpha * self.ramp(t) * decay)
    }

    /// Source added to the front mass balance `-D m_x = s' m`.
    pub fn front_flux_source(&self, t: f64) -> Result<f64> {
        let p = &self.params;
        let front = self.front(t);
        Ok((p.diffusivity * p.alpha - self.front_rate(t)?) * self.concentration(front, t)?)
    }

    /// Source added to the front law `s' = D alpha (m - alpha s)`.
    pub fn front_law_source(&self, t: f64) -> Result<f64> {
        time_after_start(t)?;
        let p = &self.params;
        let front = self.front(t);
        Ok(p.diffusivity
            * p.alpha
            * (1.0 / (t * p.t_final).sqrt() - self.concentration(front, t)? + p.alpha * front))
    }

    pub fn boundary_value(&self, t: f64) -> f64 {
        self.ramp(t)
    }
}

impl ExactSolution for KineticManufactured {
    fn concentration(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.ramp(t) * (-self.params.alpha * x).exp())
    }

    fn front(&self, t: f64) -> f64 {
        let p = &self.params;
        p.s0 + 2.0 * p.diffusivity * p.alpha * self.ramp(t)
    }

    fn front_rate(&self, t: f64) -> Result<f64> {
        time_after_start(t)?;
        let p = &self.params;
        Ok(p.diffusivity * p.alpha / (t * p.t_final).sqrt())
    }
}

/// Sign convention for the left-boundary derivative helper of the rubber case.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainRule {
    /// `m_x(0, t) = 3 / s cos(t / T)`.
    #[default]
    AsPrinted,
    /// `m_x(0, t) = -3 / s cos(t / T)`.
    Strict,
}

/// Manufactured solution `m = (1 - x/s)^3 cos(t/T)` with a cubic-in-time front.
#[derive(Debug, Clone, PartialEq)]
pub struct RubberManufactured {
    pub params: RubberParams,
    pub chain_rule: ChainRule,
}

impl RubberManufactured {
    pub fn new(params: &RubberParams, chain_rule: ChainRule) -> Result<Self> {
        params.validate()?;
        positive("t_final", params.t_final)?;
        Ok(Self {
            params: params.clone(),
            chain_rule,
        })
    }

    fn phase(&self, t: f64) -> f64 {
        t / self.params.t_final
    }

    /// Bulk source added to the diffusion equation.
    pub fn bulk_source(&self, x: f64, t: f64) -> f64 {
        let p = &self.params;
        let (s, ds) = (self.front(t), self.front_rate_unchecked(t));
        let (sin, cos) = self.phase(t).sin_cos();
        let u = x / s - 1.0;
        sin / p.t_final * u.powi(3)
            + 3.0 * x * cos / (s * s) * u * u * ds
            + 6.0 * p.diffusivity * cos / (s * s) * u
    }

    /// Source added to the Robin inflow condition.
    pub fn inflow_source(&self, t: f64) -> f64 {
        let p = &self.params;
        -p.beta * p.b + (p.beta * p.henry + 3.0 * p.diffusivity / self.front(t)) * self.phase(t).cos()
    }

    /// Source added to the front mass balance; identically zero.
    pub fn front_flux_source(&self, _t: f64) -> f64 {
        0.0
    }

    /// Source added to the front law.
    pub fn front_law_source(&self, t: f64) -> f64 {
        let p = &self.params;
        self.front_rate_unchecked(t) + p.a0 / p.swell.slope() * self.front(t)
    }

    pub fn value_at_origin(&self, t: f64) -> f64 {
        self.phase(t).cos()
    }

    pub fn dm_dx_at_origin(&self, t: f64) -> f64 {
        let magnitude = 3.0 / self.front(t) * self.phase(t).cos();
        match self.chain_rule {
            ChainRule::AsPrinted => magnitude,
            ChainRule::Strict => -magnitude,
        }
    }

    fn front_rate_unchecked(&self, t: f64) -> f64 {
        let (s0, tf) = (self.params.s0, self.params.t_final);
        s0 * (1.0 / (10.0 * tf) - t / (5.0 * tf * tf) + t * t / (10.0 * tf * tf * tf))
    }
}

impl ExactSolution for RubberManufactured {
    fn concentration(&self, x: f64, t: f64) -> Result<f64> {
        let s = self.front(t);
        if x < 0.0 || x > s * (1.0 + 1e-12) {
            return Err(Error::DomainError { x, s });
        }
        Ok((1.0 - x / s).max(0.0).powi(3) * self.phase(t).cos())
    }

    fn front(&self, t: f64) -> f64 {
        let tau = self.phase(t);
        self.params.s0 * (tau / 10.0 - tau * tau / 10.0 + tau.powi(3) / 30.0 + 1.0)
    }

    fn front_rate(&self, t: f64) -> Result<f64> {
        Ok(self.front_rate_unchecked(t))
    }
}

/// A manufactured benchmark with its source terms.
#[derive(Debug, Clone, PartialEq)]
pub enum ManufacturedCase {
    Kinetic(KineticManufactured),
    Rubber(RubberManufactured),
}

impl ExactSolution for ManufacturedCase {
    fn concentration(&self, x: f64, t: f64) -> Result<f64> {
        match self {
            ManufacturedCase::Kinetic(c) => c.concentration(x, t),
            ManufacturedCase::Rubber(c) => c.concentration(x, t),
        }
    }

    fn front(&self, t: f64) -> f64 {
        match self {
            ManufacturedCase::Kinetic(c) => c.front(t),
            ManufacturedCase::Rubber(c) => c.front(t),
        }
    }

    fn front_rate(&self, t: f64) -> Result<f64> {
        match self {
            ManufacturedCase::Kinetic(c) => c.front_rate(t),
            ManufacturedCase::Rubber(c) => c.front_rate(t),
        }
    }
}

pub fn kinetic_manufactured(params: &KineticStefanParams) -> Result<ManufacturedCase> {
    Ok(ManufacturedCase::Kinetic(KineticManufactured::new(params)?))
}

pub fn rubber_manufactured(params: &RubberParams, chain_rule: ChainRule) -> Result<ManufacturedCase> {
    Ok(ManufacturedCase::Rubber(RubberManufactured::new(params, chain_rule)?))
}

/// The exact solution used to score a run of `spec`, if it has one.
pub fn reference_solution(spec: &ProblemSpec, chain_rule: ChainRule) -> Result<Box<dyn ExactSolution>> {
    Ok(match spec {
        ProblemSpec::Classical(p) => Box::new(ClassicalSolution::new(p)?),
        ProblemSpec::Kinetic(p) => Box::new(KineticManufactured::new(p)?),
        ProblemSpec::Rubber(p) => Box::new(RubberManufactured::new(p, chain_rule)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn classical() -> ClassicalStefanParams {
        match canonical("classical-benchmark").unwrap() {
            ProblemSpec::Classical(p) => p,
            _ => unreachable!(),
        }
    }

    fn kinetic() -> KineticManufactured {
        match canonical("kinetic-benchmark").unwrap() {
            ProblemSpec::Kinetic(p) => KineticManufactured::new(&p).unwrap(),
            _ => unreachable!(),
        }
    }

    fn rubber(chain_rule: ChainRule) -> RubberManufactured {
        match canonical("rubber-benchmark").unwrap() {
            ProblemSpec::Rubber(p) => RubberManufactured::new(&p, chain_rule).unwrap(),
            _ => unreachable!(),
        }
    }

    fn lambda_residual(mu: f64, m_l: f64, l: f64) -> f64 {
        mu * SQRT_PI * l * (l * l).exp() * erf(l) - m_l
    }

    // Plain bisection on a wide bracket, run to exhaustion.
    fn bisect(mu: f64, m_l: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 5.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lambda_residual(mu, m_l, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn lambda_examples() {
        let l = classical_lambda(1.0, 1.0).unwrap();
        assert!((l - 0.620063).abs() < 1e-6);
        assert!((l - bisect(1.0, 1.0)).abs() < 1e-13);
        assert!(classical_lambda(1.0, 2e-6).unwrap() < 1e-3);
        let l = classical_lambda(1.0, 0.1).unwrap();
        assert!((l - 0.2200).abs() < 1e-4);
        assert!((l - bisect(1.0, 0.1)).abs() < 1e-13);
    }

    #[test]
    fn lambda_rejects_unbracketed_inputs() {
        assert!(matches!(classical_lambda(1.0, 1e300), Err(Error::NoBracket { .. })));
        assert!(classical_lambda(-1.0, 1.0).is_err());
    }

    #[test]
    fn classical_exact_examples() {
        let p = classical();
        let sol = ClassicalSolution::new(&p).unwrap();
        let (m, s) = classical_exact(&p, 0.0, 0.5).unwrap();
        assert_eq!(m, 1.0);
        assert!((s - 2.0 * 0.620063 * 0.5f64.sqrt()).abs() < 1e-6);
        assert!((s - 0.87690).abs() < 1e-5);
        assert!(sol.concentration(s, 0.5).unwrap().abs() < 1e-15);
        assert!(matches!(
            classical_exact(&p, s + 0.1, 0.5),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn material_form_keeps_groupings() {
        let p = ClassicalStefanParams::from_material(2.0, 4.0, 0.5, 3.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(p.alpha_l(), 1.0);
        assert_eq!(p.mu(), 6.0);
    }

    #[test]
    fn kinetic_examples() {
        let k = kinetic();
        assert_eq!(k.concentration(0.3, 0.0).unwrap(), 0.0);
        assert!((k.front(1.0) - 0.3).abs() < 1e-15);
        assert!((k.bulk_source(0.0, 1.0).unwrap() - 0.49).abs() < 1e-15);
        assert!(matches!(k.bulk_source(0.0, 0.0), Err(Error::SingularTime { .. })));
        assert!(matches!(k.front_law_source(0.0), Err(Error::SingularTime { .. })));
        assert!(k.concentration(k.front(0.3), 0.3).unwrap() > 0.0);
    }

    #[test]
    fn rubber_examples() {
        let r = rubber(ChainRule::AsPrinted);
        assert_eq!(r.concentration(0.0, 0.0).unwrap(), 1.0);
        assert!((r.front(0.001) - 0.1 * 31.0 / 30.0).abs() < 1e-15);
        for t in [0.0, 2e-4, 7e-4, 1e-3] {
            assert_eq!(r.concentration(r.front(t), t).unwrap(), 0.0);
        }
        assert_eq!(r.dm_dx_at_origin(0.0), 30.0);
        assert_eq!(rubber(ChainRule::Strict).dm_dx_at_origin(0.0), -30.0);
    }

    #[test]
    fn rubber_inflow_source_matches_robin_residual() {
        // -D m_x(0) - beta (b - H m(0)) with the chain-rule derivative.
        let r = rubber(ChainRule::Strict);
        let p = &r.params;
        for t in [0.0, 3e-4, 1e-3] {
            let residual = -p.diffusivity * r.dm_dx_at_origin(t)
                - p.beta * (p.b - p.henry * r.value_at_origin(t));
            assert_relative_eq!(residual, r.inflow_source(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn catalog_resolves_every_name() {
        let sets = canonical_parameter_sets();
        assert_eq!(sets.len(), 4);
        match canonical("rubber-forecast").unwrap() {
            ProblemSpec::Rubber(p) => {
                assert_eq!((p.diffusivity, p.beta, p.a0, p.s0), (0.01, 0.564, 50.0, 0.01));
                assert_eq!((p.b, p.henry, p.t_final), (10.0, 2.5, 31.0));
                assert_eq!(p.swell.sigma(2.0), 1.0);
                assert_eq!(p.initial, InitialProfile::Uniform(0.5));
            }
            _ => unreachable!(),
        }
        assert!(matches!(canonical("two-phase"), Err(Error::UnknownCase(_))));
    }

    // Fourth-order central differences in both variables.
    fn fd_heat_residual(
        m: impl Fn(f64, f64) -> f64,
        d: f64,
        x: f64,
        t: f64,
        hx: f64,
        ht: f64,
    ) -> f64 {
        let mt = (-m(x, t + 2.0 * ht) + 8.0 * m(x, t + ht) - 8.0 * m(x, t - ht) + m(x, t - 2.0 * ht))
            / (12.0 * ht);
        let mxx = (-m(x + 2.0 * hx, t) + 16.0 * m(x + hx, t) - 30.0 * m(x, t) + 16.0 * m(x - hx, t)
            - m(x - 2.0 * hx, t))
            / (12.0 * hx * hx);
        mt - d * mxx
    }

    proptest! {
        #[test]
        fn lambda_brackets_a_sign_change(mu in 0.05f64..5.0, m_l in 0.01f64..5.0) {
            let l = classical_lambda(mu, m_l).unwrap();
            prop_assert!(lambda_residual(mu, m_l, l).abs() < 1e-12 * m_l.max(1.0));
            prop_assert!(lambda_residual(mu, m_l, l * (1.0 - 1e-9)) < 0.0);
            prop_assert!(lambda_residual(mu, m_l, l * (1.0 + 1e-9)) > 0.0);
        }

        #[test]
        fn classical_solves_heat_equation(fx in 0.05f64..0.95, t in 0.05f64..0.5) {
            let sol = ClassicalSolution::new(&classical()).unwrap();
            let x = 0.01 + fx * sol.front(t - 1e-3);
            let r = fd_heat_residual(|x, t| sol.concentration(x, t).unwrap(), 1.0, x, t, 1e-3, 1e-5);
            prop_assert!(r.abs() < 1e-6);
        }

        #[test]
        fn kinetic_bulk_residual(x in 0.01f64..0.3, t in 0.05f64..1.0) {
            let k = kinetic();
            let r = fd_heat_residual(|x, t| k.concentration(x, t).unwrap(), 1.0, x, t, 1e-3, 1e-4)
                - k.bulk_source(x, t).unwrap();
            prop_assert!(r.abs() < 1e-8);
        }

        #[test]
        fn kinetic_front_sources_close_the_conditions(t in 0.01f64..1.0) {
            let k = kinetic();
            let p = &k.params;
            let s = k.front(t);
            let h = 1e-5;
            let mx = (k.concentration(s + h, t).unwrap() - k.concentration(s - h, t).unwrap()) / (2.0 * h);
            let ds = (k.front(t + 1e-6) - k.front(t - 1e-6)) / 2e-6;
            let m_s = k.concentration(s, t).unwrap();
            let flux = -p.diffusivity * mx - ds * m_s - k.front_flux_source(t).unwrap();
            let law = ds - p.diffusivity * p.alpha * (m_s - p.alpha * s) - k.front_law_source(t).unwrap();
            prop_assert!(flux.abs() < 1e-8);
            prop_assert!(law.abs() < 1e-8 * (1.0 + ds.abs()));
        }

        #[test]
        fn rubber_bulk_residual(fx in 0.0f64..1.0, ft in 0.05f64..0.95) {
            let r = rubber(ChainRule::AsPrinted);
            let t = ft * 1e-3;
            let x = 4e-3 + fx * 0.85 * r.front(0.0);
            let res = fd_heat_residual(|x, t| r.concentration(x, t).unwrap(), 1.0, x, t, 2e-3, 1e-6)
                - r.bulk_source(x, t);
            prop_assert!(res.abs() < 1e-8);
        }

        #[test]
        fn rubber_front_law_residual(ft in 0.0f64..1.0) {
            let r = rubber(ChainRule::AsPrinted);
            let t = ft * 1e-3;
            let p = &r.params;
            let s = r.front(t);
            let m_s = r.concentration(s, t).unwrap();
            let residual = r.front_rate(t).unwrap() - p.a0 * (m_s - p.swell.sigma(s)) - r.front_law_source(t);
            prop_assert!(residual.abs() < 1e-12);
        }
    }
}
