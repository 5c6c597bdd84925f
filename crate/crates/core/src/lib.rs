//! Relaxed shape optimization for the semilinear Dirichlet energy
//! `J_ρ(Ω) = ½∫|∇u|² - ∫gu`, `-Δu + ρf(u) = g` in `Ω`, and the spectral
//! stability of the ball.
//!
//! The density half works on a box `[-L, L]²` with a fictitious-domain
//! penalization `M(1-a)u`; the radial half diagonalizes the shape Hessian at
//! the ball into Fourier modes.

pub mod config;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod io;
pub mod objective;
pub mod optimizer;
pub mod problem;
pub mod radial;
pub mod validation;

pub use config::Config;
pub use elliptic::{
    solve_linear, solve_semilinear, solve_semilinear_with, LinearSolveOptions, PicardRecord,
    SemilinearOptions, SemilinearSolution,
};
pub use error::{Error, Result};
pub use grid::{
    disk_indicator, integrate, project_density, DensityField, Grid2D, Integrable, ScalarField,
};
pub use objective::{
    directional_derivative, evaluate_objective, gradient_check, GradientCheckOptions,
    GradientCheckReport, ObjectiveBundle, RelaxedProblem,
};
pub use optimizer::{
    m_continuation_probe, monotonicity_probe, optimize, topological_sign_field, OptimizerOptions,
    OptimizerState,
};
pub use problem::{
    check_hypotheses, HypothesisReport, Nonlinearity, NonlinearitySpec, Source, SourceSpec,
};
pub use radial::{
    instability_demo, perturbation_slope, solve_modes, solve_radial_state_adjoint,
    stability_verdict, ModeSolution, PerturbationBundle, RadialGrid, RadialSolution,
    StabilityReport, Verdict, XiSource,
};

/// Version string embedded in every exported artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
