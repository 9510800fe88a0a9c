use proptest::prelude::*;
use stefan_grw::{
    diffusion_step, Boundary, GrwStepper, JumpParameter, ParticleField, Redistributor, DEFAULT_PARTICLES,
};

// Explicit FTCS iteration with ghost values chosen by the end condition.
fn ftcs(values: &[f64], r: f64, steps: usize, reflecting: bool) -> Vec<f64> {
    let mut u = values.to_vec();
    let n = u.len();
    for _ in 0..steps {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let ghost = if reflecting { u[i] } else { 0.0 };
                let left = if i > 0 { u[i - 1] } else { ghost };
                let right = if i + 1 < n { u[i + 1] } else { ghost };
                (1.0 - r) * u[i] + 0.5 * r * (left + right)
            })
            .collect();
        u = next;
    }
    u
}

#[test]
fn grw_matches_ftcs_in_the_many_particle_limit() {
    let dx = 0.02;
    let values: Vec<f64> = (0..50).map(|i| 1.0 + 0.5 * (i as f64 * 0.37).sin() + 0.01 * i as f64).collect();
    let jump = JumpParameter::from_courant(0.8, 1.0, dx).unwrap();
    let mut field = ParticleField::from_concentrations(&values, dx, DEFAULT_PARTICLES).unwrap();
    let start: Vec<f64> = field.concentrations();
    for _ in 0..200 {
        field = diffusion_step(&field, &jump, Boundary::Reflecting, Boundary::Reflecting).unwrap().0;
    }
    let oracle = ftcs(&start, jump.r(), 200, true);
    for (i, (a, b)) in field.concentrations().iter().zip(&oracle).enumerate() {
        assert!(((a - b) / b).abs() < 1e-12, "site {i}: {a} vs {b}");
    }
}

#[test]
fn delta_initial_condition_tracks_ftcs_to_within_rounding() {
    let (sites, centre, n0) = (201usize, 100usize, 999_983u128);
    let mut counts = vec![0u128; sites];
    counts[centre] = n0;
    let mut field = ParticleField::from_counts(counts, 0.1, n0).unwrap();
    let jump = JumpParameter::from_courant(0.5, 1.0, 0.1).unwrap();
    let mut start = vec![0.0; sites];
    start[centre] = n0 as f64;
    for k in 1..=60 {
        let before: Vec<f64> = field.counts().iter().map(|&n| n as f64).collect();
        field = diffusion_step(&field, &jump, Boundary::Absorbing, Boundary::Absorbing).unwrap().0;
        let one_step = ftcs(&before, jump.r(), 1, false);
        let oracle = ftcs(&start, jump.r(), k, false);
        for (i, &n) in field.counts().iter().enumerate() {
            let n = n as f64;
            // A site collects three rounded groups, each within one particle of its share.
            assert!((n - one_step[i]).abs() < 3.0, "step {k}, site {i}: {n} vs {}", one_step[i]);
            // FTCS does not expand the max norm, so the rounding errors at most add up.
            assert!((n - oracle[i]).abs() < 3.0 * k as f64, "step {k}, site {i}: {n} vs {}", oracle[i]);
        }
    }
}

#[test]
fn binomial_runs_average_toward_reduced_fluctuations() {
    let dx = 0.1;
    let counts: Vec<u128> = (0..20).map(|i| if (5..15).contains(&i) { 1000 } else { 0 }).collect();
    let jump = JumpParameter::from_courant(0.6, 1.0, dx).unwrap();
    let steps = 10;

    let mut reduced = ParticleField::from_counts(counts.clone(), dx, 1000).unwrap();
    for _ in 0..steps {
        reduced = diffusion_step(&reduced, &jump, Boundary::Reflecting, Boundary::Reflecting).unwrap().0;
    }
    let run = |seed: u64| -> Vec<f64> {
        let mut field = ParticleField::from_counts(counts.clone(), dx, 1000).unwrap();
        let mut stepper = GrwStepper::new(jump, Redistributor::binomial(seed));
        for _ in 0..steps {
            stepper.step(&mut field, 0..=19, Boundary::Reflecting, Boundary::Reflecting).unwrap();
        }
        field.counts().iter().map(|&n| n as f64).collect()
    };
    let rms_deviation = |runs: u64| -> f64 {
        let mut mean = vec![0.0; counts.len()];
        for seed in 0..runs {
            for (m, v) in mean.iter_mut().zip(run(seed)) {
                *m += v / runs as f64;
            }
        }
        let sq: f64 = mean.iter().zip(reduced.counts()).map(|(m, &r)| (m - r as f64).powi(2)).sum();
        (sq / counts.len() as f64).sqrt()
    };
    let few = rms_deviation(16);
    let many = rms_deviation(1024);
    // Eight times the ensemble size shrinks the standard error by sqrt(64) = 8.
    assert!(many < 0.35 * few, "rms deviation {few} -> {many}");
    assert!(many < 2.0, "rms deviation {many} particles");
}

fn random_field() -> impl Strategy<Value = Vec<u128>> {
    prop::collection::vec(
        prop_oneof![Just(0u128), 0u128..1000, any::<u64>().prop_map(u128::from), (0u128..1 << 100)],
        2..30,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reflecting_lattice_conserves_particles(
        counts in random_field(),
        r in 0.01f64..=1.0,
        binomial_seed in prop::option::of(any::<u64>()),
    ) {
        let total: u128 = counts.iter().sum();
        let dx = 0.05;
        let jump = JumpParameter::from_courant(r, 1.0, dx).unwrap();
        let mut field = ParticleField::from_counts(counts.clone(), dx, total.max(1)).unwrap();
        let redistributor = match binomial_seed {
            Some(seed) if counts.iter().all(|&n| n <= u128::from(u64::MAX)) => Redistributor::binomial(seed),
            _ => Redistributor::ReducedFluctuations,
        };
        let mut stepper = GrwStepper::new(jump, redistributor);
        let last = counts.len() - 1;
        for _ in 0..1000 {
            let ledger = stepper.step(&mut field, 0..=last, Boundary::Reflecting, Boundary::Reflecting).unwrap();
            prop_assert_eq!(ledger.net(), 0);
        }
        prop_assert_eq!(field.sum(), total);
    }

    #[test]
    fn open_ends_balance_the_ledger(
        counts in random_field(),
        r in 0.01f64..=1.0,
        left in prop_oneof![Just(Boundary::Absorbing), Just(Boundary::Mirror), Just(Boundary::Reflecting)],
        right in prop_oneof![Just(Boundary::Absorbing), Just(Boundary::Mirror), Just(Boundary::Reflecting)],
    ) {
        let dx = 0.05;
        let jump = JumpParameter::from_courant(r, 1.0, dx).unwrap();
        let mut field = ParticleField::from_counts(counts.clone(), dx, 1).unwrap();
        let mut before = field.sum() as i128;
        for _ in 0..50 {
            let (next, ledger) = diffusion_step(&field, &jump, left, right).unwrap();
            prop_assert_eq!(next.sum() as i128, before + ledger.net());
            before = next.sum() as i128;
            field = next;
        }
    }
}
