use shapeopt_core::grid::{disk_indicator, Grid2D};
use shapeopt_core::objective::RelaxedProblem;
use shapeopt_core::optimizer::{optimize, OptimizerOptions};
use shapeopt_core::problem::{NonlinearitySpec, Source, SourceSpec};

#[test]
fn ball_is_recovered_for_radial_decreasing_source() {
    let grid = Grid2D::new(2.0, 64).unwrap();
    let g = SourceSpec::new(Source::RadialGaussian {
        offset: 0.5,
        amplitude: 1.5,
        width: 1.5,
    });
    let disk = disk_indicator(&grid, 1.0).unwrap();
    let m = disk.mass();
    let p = RelaxedProblem::new(grid, 1e2, 0.0, NonlinearitySpec::zero(), g);
    let state = optimize(&p, m, &OptimizerOptions::default(), None).unwrap();
    let j_disk = p.with_penalty(1e4).value(&disk, None).unwrap();
    assert_eq!(state.stages.last().unwrap().penalty, 1e4);
    assert!(state.value <= j_disk + 1e-2 * j_disk.abs(), "{} vs {j_disk}", state.value);
    assert!(state.density.is_admissible(m, 1e-9));
    assert!(!state.stalled);
}

#[test]
fn identical_inputs_give_identical_runs() {
    let grid = Grid2D::new(1.0, 16).unwrap();
    let p = RelaxedProblem::new(
        grid,
        1e2,
        0.1,
        NonlinearitySpec::one_minus_two_x(1.0),
        SourceSpec::constant(1.0),
    );
    let opts = OptimizerOptions {
        schedule: vec![1e2, 1e3],
        max_iter: 50,
        ..OptimizerOptions::default()
    };
    let a = optimize(&p, 1.0, &opts, None).unwrap();
    let b = optimize(&p, 1.0, &opts, None).unwrap();
    assert_eq!(a, b);
}
