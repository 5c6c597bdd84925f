//! Shared fixtures for the benchmarks.

use shapeopt_core::{
    disk_indicator, DensityField, Grid2D, NonlinearitySpec, RadialGrid, RelaxedProblem,
    SourceSpec,
};

/// Relaxed problem with `f(x) = 1 - 2x`, `g = 1` on `[-2, 2]²`.
pub fn relaxed_problem(n: usize, rho: f64) -> RelaxedProblem {
    let grid = Grid2D::new(2.0, n).expect("grid");
    RelaxedProblem::new(
        grid,
        1e4,
        rho,
        NonlinearitySpec::one_minus_two_x(1.0),
        SourceSpec::constant(1.0),
    )
}

pub fn unit_disk(problem: &RelaxedProblem) -> DensityField {
    disk_indicator(&problem.grid, 1.0).expect("disk")
}

pub fn unit_ball(points: usize) -> RadialGrid {
    RadialGrid::new(1.0, points).expect("radial grid")
}
