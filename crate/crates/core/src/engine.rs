//! Global random walk (GRW) lattice engine.
//!
//! Each lattice site holds an exact count of indistinguishable particles.
//! One time step moves whole groups at once: of the `n` particles at a site,
//! a fraction `1 - r` stays and `r / 2` jumps to each neighbour, with
//! `r = 2 D dt / dx^2`. In the default reduced-fluctuations mode the three
//! group sizes are floored and the leftover fractional particles are handed
//! out through a [`FractionAccumulator`], which keeps the update deterministic
//! and conserves particles exactly. The binomial mode samples the group sizes
//! instead and is meant for small particle numbers.
//!
//! The jump ratio is stored as a dyadic rational `k / 2^48`, so every floor and
//! every fractional part in the split is computed in exact integer arithmetic.

use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Particle normalization used for all concentration runs: `m = n / N`.
pub const DEFAULT_PARTICLES: u128 = 1_000_000_000_000_000_000_000_000;

const RATIO_BITS: u32 = 48;
const RATIO_ONE: u64 = 1 << RATIO_BITS;
// Fractional parts are exact multiples of 2^-49 particles.
const FRACTION_BITS: u32 = RATIO_BITS + 1;
const FRACTION_SCALE: u128 = 1 << FRACTION_BITS;
/// Largest count a single site may hold.
pub const MAX_SITE_COUNT: u128 = 1 << 120;

/// The jump probability `r = 2 D dt / dx^2` of the explicit scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpParameter {
    r: f64,
    dt: f64,
    dx: f64,
    diffusivity: f64,
    ratio: u64,
}

impl JumpParameter {
    /// Builds the jump parameter, rejecting steps that break `r <= 1`.
    pub fn new(diffusivity: f64, dt: f64, dx: f64) -> Result<Self> {
        check_positive("diffusivity", diffusivity)?;
        check_positive("dt", dt)?;
        check_positive("dx", dx)?;
        let r = 2.0 * diffusivity * dt / (dx * dx);
        Self::build(r, dt, dx, diffusivity)
    }

    /// Builds the jump parameter for a prescribed `r`, deriving `dt = r dx^2 / (2 D)`.
    pub fn from_courant(r: f64, diffusivity: f64, dx: f64) -> Result<Self> {
        check_positive("r", r)?;
        check_positive("diffusivity", diffusivity)?;
        check_positive("dx", dx)?;
        let dt = r * dx * dx / (2.0 * diffusivity);
        Self::build(r, dt, dx, diffusivity)
    }

    fn build(r: f64, dt: f64, dx: f64, diffusivity: f64) -> Result<Self> {
        // Allow the last-ulp excess produced by dt = dx^2 / (2 D) round trips.
        if r.is_nan() || r > 1.0 + 1e-12 {
            return Err(Error::StabilityViolation { r });
        }
        let r = r.min(1.0);
        let ratio = ((r * RATIO_ONE as f64).round() as u64).clamp(1, RATIO_ONE);
        Ok(Self {
            r,
            dt,
            dx,
            diffusivity,
            ratio,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// The ratio actually used by the integer split, `k / 2^48`.
    pub fn effective_r(&self) -> f64 {
        self.ratio as f64 / RATIO_ONE as f64
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Running sum of fractional particles, in units of `2^-49` particles.
///
/// Within one site the fractional parts of the three groups add up to a whole
/// number, so the carry leaves every site with the value it entered with. Reset
/// at the start of each step, it is therefore zero at every site boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FractionAccumulator {
    units: u128,
}

impl FractionAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an accumulator holding `carry` in `[0, 1)`, rounded to the internal grid.
    pub fn with_carry(carry: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&carry) {
            return Err(Error::InvalidParameter(format!(
                "carry must lie in [0, 1), got {carry}"
            )));
        }
        Ok(Self {
            units: (carry * FRACTION_SCALE as f64) as u128,
        })
    }

    pub fn carry(&self) -> f64 {
        self.units as f64 / FRACTION_SCALE as f64
    }

    pub fn reset(&mut self) {
        self.units = 0;
    }

    fn offer(&mut self, fraction_units: u128) -> u128 {
        self.units += fraction_units;
        if self.units >= FRACTION_SCALE {
            self.units -= FRACTION_SCALE;
            1
        } else {
            0
        }
    }
}

/// How the particles of one site are split for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Redistribution {
    pub stay: u128,
    pub left: u128,
    pub right: u128,
}

impl Redistribution {
    pub fn total(&self) -> u128 {
        self.stay + self.left + self.right
    }
}

/// `floor(n * p / 2^shift)` and the remainder, exact for `n < 2^120`, `p <= 2^49`.
fn scaled_floor(n: u128, p: u64, shift: u32) -> (u128, u128) {
    let p = p as u128;
    let lo = n & u64::MAX as u128;
    let hi = n >> 64;
    let lo_product = p * lo;
    let hi_product = p * hi;
    let quotient = (hi_product << (64 - shift)) + (lo_product >> shift);
    let remainder = lo_product & ((1u128 << shift) - 1);
    (quotient, remainder)
}

/// Reduced-fluctuations split of `n` particles.
///
/// The group sizes are `floor((1 - r) n)`, `floor(r n / 2)` and `floor(r n / 2)`;
/// the fractional parts are fed to `acc` in the order stay, left, right and a
/// particle is placed in the category where the running sum reaches one.
pub fn redistribute(n: u128, jump: &JumpParameter, acc: &mut FractionAccumulator) -> Redistribution {
    debug_assert!(n <= MAX_SITE_COUNT);
    let (mut stay, stay_rem) = scaled_floor(n, RATIO_ONE - jump.ratio, RATIO_BITS);
    let (half, half_rem) = scaled_floor(n, jump.ratio, FRACTION_BITS);
    let (mut left, mut right) = (half, half);
    stay += acc.offer(stay_rem << 1);
    left += acc.offer(half_rem);
    right += acc.offer(half_rem);
    Redistribution { stay, left, right }
}

/// Samples the split from binomial laws: `stay ~ B(n, 1 - r)` and the movers
/// are divided by `left ~ B(n - stay, 1/2)`.
pub fn sample_binomial_mode(
    n: u128,
    jump: &JumpParameter,
    rng: &mut ChaCha8Rng,
) -> Result<Redistribution> {
    if n == 0 {
        return Ok(Redistribution::default());
    }
    let n64 = u64::try_from(n).map_err(|_| Error::CountOverflow(n))?;
    let stay = Binomial::new(n64, 1.0 - jump.r())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng);
    let movers = n64 - stay;
    let left = Binomial::new(movers, 0.5)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng);
    Ok(Redistribution {
        stay: stay as u128,
        left: left as u128,
        right: (movers - left) as u128,
    })
}

/// Convenience wrapper over [`sample_binomial_mode`] with a fresh seeded generator.
pub fn sample_binomial_seeded(n: u128, jump: &JumpParameter, seed: u64) -> Result<Redistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_binomial_mode(n, jump, &mut rng)
}

/// Selects how group sizes are computed.
#[derive(Debug, Clone)]
pub enum Redistributor {
    ReducedFluctuations,
    Binomial(Box<ChaCha8Rng>),
}

impl Redistributor {
    pub fn binomial(seed: u64) -> Self {
        Redistributor::Binomial(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    fn split(
        &mut self,
        n: u128,
        jump: &JumpParameter,
        acc: &mut FractionAccumulator,
    ) -> Result<Redistribution> {
        match self {
            Redistributor::ReducedFluctuations => Ok(redistribute(n, jump, acc)),
            Redistributor::Binomial(rng) => sample_binomial_mode(n, jump, rng),
        }
    }
}

/// Treatment of particles that jump past an end of the active range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Particles bounce back onto the end site.
    Reflecting,
    /// Particles leave the lattice.
    Absorbing,
    /// Symmetric ghost site: outgoing particles leave, and the end site receives
    /// a copy of the particles its inner neighbour sends towards it. This is the
    /// zero-gradient condition of a centred ghost node.
    Mirror,
}

/// Particles that crossed the ends of the active range during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepLedger {
    pub left_absorbed: u128,
    pub right_absorbed: u128,
    pub left_mirrored: u128,
    pub right_mirrored: u128,
}

impl StepLedger {
    /// Signed change of the particle total caused by the boundaries.
    pub fn net(&self) -> i128 {
        (self.left_mirrored + self.right_mirrored) as i128
            - (self.left_absorbed + self.right_absorbed) as i128
    }
}

/// Lattice of exact particle counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleField {
    counts: Vec<u128>,
    dx: f64,
    total: u128,
    origin: f64,
}

impl ParticleField {
    /// Empty lattice of `len` sites; `total` is the particle number per unit concentration.
    pub fn new(len: usize, dx: f64, total: u128) -> Result<Self> {
        check_positive("dx", dx)?;
        if total == 0 {
            return Err(Error::InvalidParameter("particle total must be positive".into()));
        }
        Ok(Self {
            counts: vec![0; len],
            dx,
            total,
            origin: 0.0,
        })
    }

    pub fn from_counts(counts: Vec<u128>, dx: f64, total: u128) -> Result<Self> {
        let mut field = Self::new(0, dx, total)?;
        if let Some(&bad) = counts.iter().find(|&&c| c > MAX_SITE_COUNT) {
            return Err(Error::CountOverflow(bad));
        }
        field.counts = counts;
        Ok(field)
    }

    pub fn from_concentrations(values: &[f64], dx: f64, total: u128) -> Result<Self> {
        let mut field = Self::new(values.len(), dx, total)?;
        for (i, &m) in values.iter().enumerate() {
            field.set_concentration(i, m)?;
        }
        Ok(field)
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    pub fn counts(&self) -> &[u128] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn position(&self, site: usize) -> f64 {
        self.origin + site as f64 * self.dx
    }

    pub fn count(&self, site: usize) -> u128 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    pub fn concentration(&self, site: usize) -> f64 {
        self.count(site) as f64 / self.total as f64
    }

    pub fn concentrations(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.concentration(i)).collect()
    }

    pub fn sum(&self) -> u128 {
        self.counts.iter().sum()
    }

    /// Grows the lattice with empty sites so that `len` sites exist.
    pub fn ensure_len(&mut self, len: usize) {
        if self.counts.len() < len {
            self.counts.resize(len, 0);
        }
    }

    /// Particle count representing concentration `m`.
    pub fn count_for(&self, m: f64) -> Result<u128> {
        if !m.is_finite() {
            return Err(Error::NonFiniteValue("concentration".into()));
        }
        let n = (m.max(0.0) * self.total as f64).round();
        if n > MAX_SITE_COUNT as f64 {
            return Err(Error::CountOverflow(n as u128));
        }
        Ok(n as u128)
    }

    /// Overwrites a site and returns the signed change of the particle total.
    pub fn set_count(&mut self, site: usize, n: u128) -> Result<i128> {
        if n > MAX_SITE_COUNT {
            return Err(Error::CountOverflow(n));
        }
        self.ensure_len(site + 1);
        let old = self.counts[site];
        self.counts[site] = n;
        Ok(n as i128 - old as i128)
    }

    pub fn set_concentration(&mut self, site: usize, m: f64) -> Result<i128> {
        let n = self.count_for(m)?;
        self.set_count(site, n)
    }

    /// Adds `delta` particles at a site; removals stop at an empty site.
    /// Returns the change actually applied.
    pub fn add_signed(&mut self, site: usize, delta: i128) -> Result<i128> {
        self.ensure_len(site + 1);
        let old = self.counts[site];
        let new = if delta >= 0 {
            old.checked_add(delta as u128)
                .filter(|&n| n <= MAX_SITE_COUNT)
                .ok_or(Error::CountOverflow(old.saturating_add(delta as u128)))?
        } else {
            old.saturating_sub(delta.unsigned_abs())
        };
        self.counts[site] = new;
        Ok(new as i128 - old as i128)
    }

    /// Empties every site after `last` and returns the number of particles removed.
    pub fn clear_beyond(&mut self, last: usize) -> u128 {
        let mut removed = 0;
        for c in self.counts.iter_mut().skip(last + 1) {
            removed += *c;
            *c = 0;
        }
        removed
    }
}

/// Stateful stepper that owns the jump parameter, the split mode and scratch space.
#[derive(Debug, Clone)]
pub struct GrwStepper {
    jump: JumpParameter,
    redistributor: Redistributor,
    scratch: Vec<u128>,
}

impl GrwStepper {
    pub fn new(jump: JumpParameter, redistributor: Redistributor) -> Self {
        Self {
            jump,
            redistributor,
            scratch: Vec::new(),
        }
    }

    pub fn jump(&self) -> &JumpParameter {
        &self.jump
    }

    /// Advances the sites in `active` by one step; sites outside the range are untouched.
    pub fn step(
        &mut self,
        field: &mut ParticleField,
        active: RangeInclusive<usize>,
        left: Boundary,
        right: Boundary,
    ) -> Result<StepLedger> {
        let jump = self.jump;
        if jump.r().is_nan() || jump.r() > 1.0 {
            return Err(Error::StabilityViolation { r: jump.r() });
        }
        if ((field.dx() - jump.dx()) / jump.dx()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "field spacing {} does not match jump spacing {}",
                field.dx(),
                jump.dx()
            )));
        }
        let (lo, hi) = (*active.start(), *active.end());
        if lo > hi {
            return Ok(StepLedger::default());
        }
        field.ensure_len(hi + 1);
        let width = hi - lo + 1;
        self.scratch.clear();
        self.scratch.resize(width, 0);

        let mut ledger = StepLedger::default();
        let mut acc = FractionAccumulator::new();
        let (mut from_second, mut from_penultimate) = (0u128, 0u128);

        for i in lo..=hi {
            let n = field.counts[i];
            if n == 0 {
                continue;
            }
            let split = self.redistributor.split(n, &jump, &mut acc)?;
            let k = i - lo;
            self.scratch[k] += split.stay;

            if k > 0 {
                self.scratch[k - 1] += split.left;
            } else {
                match left {
                    Boundary::Reflecting => self.scratch[0] += split.left,
                    Boundary::Absorbing | Boundary::Mirror => ledger.left_absorbed += split.left,
                }
            }
            if k + 1 < width {
                self.scratch[k + 1] += split.right;
            } else {
                match right {
                    Boundary::Reflecting => self.scratch[k] += split.right,
                    Boundary::Absorbing | Boundary::Mirror => ledger.right_absorbed += split.right,
                }
            }
            if k == 1 {
                from_second = split.left;
            }
            if width >= 2 && k == width - 2 {
                from_penultimate = split.right;
            }
        }

        if width == 1 {
            // No neighbour to mirror: a lone site reflects.
            if left == Boundary::Mirror {
                self.scratch[0] += ledger.left_absorbed;
                ledger.left_absorbed = 0;
            }
            if right == Boundary::Mirror {
                self.scratch[0] += ledger.right_absorbed;
                ledger.right_absorbed = 0;
            }
        } else {
            if left == Boundary::Mirror {
                self.scratch[0] += from_second;
                ledger.left_mirrored = from_second;
            }
            if right == Boundary::Mirror {
                self.scratch[width - 1] += from_penultimate;
                ledger.right_mirrored = from_penultimate;
            }
        }
        debug_assert!(
            matches!(self.redistributor, Redistributor::Binomial(_)) || acc.carry() == 0.0
        );

        field.counts[lo..=hi].copy_from_slice(&self.scratch);
        Ok(ledger)
    }
}

/// One reduced-fluctuations step over the whole lattice.
pub fn diffusion_step(
    field: &ParticleField,
    jump: &JumpParameter,
    left: Boundary,
    right: Boundary,
) -> Result<(ParticleField, StepLedger)> {
    let mut next = field.clone();
    if next.is_empty() {
        return Ok((next, StepLedger::default()));
    }
    let last = next.len() - 1;
    let mut stepper = GrwStepper::new(*jump, Redistributor::ReducedFluctuations);
    let ledger = stepper.step(&mut next, 0..=last, left, right)?;
    Ok((next, ledger))
}

/// Converts real-valued particle amounts into whole particles, carrying the
/// fractional remainder to the next call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InjectionAccumulator {
    carry: f64,
}

impl InjectionAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn carry(&self) -> f64 {
        self.carry
    }

    /// Whole-particle part of `amount` plus the carried remainder.
    pub fn take(&mut self, amount: f64) -> Result<i128> {
        if !amount.is_finite() {
            return Err(Error::NonFiniteValue("particle injection".into()));
        }
        let total = amount + self.carry;
        let whole = total.floor();
        if whole.abs() > MAX_SITE_COUNT as f64 {
            return Err(Error::CountOverflow(whole.abs() as u128));
        }
        self.carry = (total - whole).clamp(0.0, 1.0 - f64::EPSILON);
        Ok(whole as i128)
    }

    /// Injects `amount` particles (negative removes) at `site` and returns the applied change.
    pub fn inject(&mut self, field: &mut ParticleField, site: usize, amount: f64) -> Result<i128> {
        let whole = self.take(amount)?;
        field.add_signed(site, whole)
    }
}
