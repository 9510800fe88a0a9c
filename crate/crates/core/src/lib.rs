//! Global random walk (GRW) solvers for one-dimensional one-phase Stefan-type
//! moving-boundary problems, with exact and manufactured solutions, a
//! fixed-domain reference solver and a grid-convergence harness.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod landau;
pub mod problems;
pub mod solvers;
pub mod special;

pub use analysis::{
    convergence_study, discrete_l2, eoc, solution_errors, ConvergenceReport, ConvergenceRow,
    ErrorPair, SolverKind,
};
pub use engine::{
    diffusion_step, redistribute, sample_binomial_mode, Boundary, FractionAccumulator,
    GrwStepper, JumpParameter, ParticleField, Redistribution, Redistributor, StepLedger,
    DEFAULT_PARTICLES,
};
pub use error::{Error, Result};
pub use landau::{
    run_reference, tridiagonal_solve, DtRule, ReferenceBoundary, ReferenceOptions, TransformedGrid,
    TridiagonalSystem,
};
pub use problems::{
    canonical, canonical_parameter_sets, classical_exact, classical_lambda, ChainRule,
    reference_solution, ClassicalStefanParams, ExactSolution, InitialProfile, KineticBoundary,
    KineticStefanParams, ProblemSpec, RubberParams, SwellLaw,
};
pub use solvers::{
    run_problem, BoundaryClosure, BoundaryState, MassLedger, RunMode, RunOptions, Snapshot,
    SolutionRecord, SplitMode,
};
