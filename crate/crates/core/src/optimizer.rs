//! Projected-gradient minimization of `Ĵ_{M,ρ}` over densities with
//! `0 ≤ a ≤ 1`, `∫a ≤ m`, plus the monotonicity and topological probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{disk_indicator, project_density, DensityField, Grid2D, ScalarField};
use crate::objective::{evaluate_objective_with, ObjectiveBundle, RelaxedProblem};
use crate::problem::check_hypotheses;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Increasing penalization values, each warm-started from the previous one.
    pub schedule: Vec<f64>,
    pub max_iter: usize,
    /// Stop when `‖a_{k+1} - a_k‖₂/√|D|` falls below this.
    pub tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            schedule: vec![1e2, 1e3, 1e4],
            max_iter: 500,
            tol: 1e-6,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
        }
    }
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub penalty: f64,
    pub iteration: usize,
    pub value: f64,
    pub mass: f64,
    /// `∫a(1-a)/|D|`.
    pub binariness: f64,
    pub step: f64,
    /// `‖a_{k+1} - a_k‖₂/√|D|`.
    pub increment: f64,
    /// Armijo slack `Ĵ_k - (c/s)‖Δa‖² - Ĵ_{k+1} ≥ 0`.
    pub armijo_slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub penalty: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stalled: bool,
    pub value: f64,
    pub binariness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub density: DensityField,
    pub value: f64,
    pub step: f64,
    pub history: Vec<HistoryEntry>,
    pub schedule: Vec<f64>,
    pub stages: Vec<StageSummary>,
    pub stalled: bool,
    /// Binariness never grew by more than 10% between consecutive stages.
    pub binariness_tracked: bool,
}

fn l2_distance(a: &DensityField, b: &DensityField) -> f64 {
    let sq: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (sq * a.grid().cell_area()).sqrt()
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::invalid("M_schedule", "schedule is empty"));
    }
    if schedule.iter().any(|m| !(*m >= 0.0)) || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "M_schedule",
            "penalization values must be non-negative and strictly increasing",
        ));
    }
    Ok(())
}

/// Runs the schedule from `initial`, or from the uniform density `m/|D|`.
pub fn optimize(
    problem: &RelaxedProblem,
    mass_bound: f64,
    opts: &OptimizerOptions,
    initial: Option<DensityField>,
) -> Result<OptimizerState> {
    validate_schedule(&opts.schedule)?;
    let grid = problem.grid;
    if !(mass_bound > 0.0) || mass_bound > grid.area() {
        return Err(Error::invalid(
            "m",
            format!("need 0 < m <= |D| = {}, got {mass_bound}", grid.area()),
        ));
    }
    let mut a = match initial {
        Some(a0) => {
            if a0.grid() != &grid {
                return Err(Error::DimensionMismatch {
                    expected: grid.num_cells(),
                    got: a0.values().len(),
                });
            }
            project_density(a0.values(), mass_bound, &grid)?
        }
        None => DensityField::constant(grid, mass_bound / grid.area()),
    };
    let scale = grid.area().sqrt();

    let mut history = Vec::new();
    let mut stages = Vec::new();
    let mut warm: Option<ScalarField> = None;
    let mut value = f64::NAN;
    let mut step = f64::NAN;
    for &penalty in &opts.schedule {
        let stage_problem = problem.with_penalty(penalty);
        let mut bundle = evaluate_objective_with(&stage_problem, &a, warm.as_ref())?;
        let gmax = bundle
            .cell_gradient()
            .iter()
            .fold(0.0f64, |m, g| m.max(g.abs()));
        step = if gmax > 0.0 { 1.0 / gmax } else { 1.0 };
        let mut converged = false;
        let mut stalled = false;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            let grad = bundle.cell_gradient();
            let mut accepted: Option<(DensityField, ObjectiveBundle, f64, f64)> = None;
            let mut s = step;
            for _ in 0..=opts.max_backtracks {
                let raw: Vec<f64> = a.values().iter().zip(&grad).map(|(x, g)| x - s * g).collect();
                let trial = project_density(&raw, mass_bound, &grid)?;
                let dist = l2_distance(&a, &trial);
                if dist == 0.0 {
                    converged = true;
                    break;
                }
                let tb = evaluate_objective_with(&stage_problem, &trial, Some(&bundle.u))?;
                let slack = bundle.value - opts.armijo / s * dist * dist - tb.value;
                if slack >= 0.0 {
                    accepted = Some((trial, tb, dist, slack));
                    break;
                }
                s *= opts.backtrack;
            }
            if converged {
                break;
            }
            let Some((trial, tb, dist, slack)) = accepted else {
                stalled = true;
                break;
            };
            a = trial;
            bundle = tb;
            let increment = dist / scale;
            history.push(HistoryEntry {
                penalty,
                iteration: iterations,
                value: bundle.value,
                mass: a.mass(),
                binariness: a.binariness(),
                step: s,
                increment,
                armijo_slack: slack,
            });
            step = 2.0 * s;
            if increment <= opts.tol {
                converged = true;
                break;
            }
        }
        value = bundle.value;
        warm = Some(bundle.u);
        stages.push(StageSummary {
            penalty,
            iterations,
            converged,
            stalled,
            value,
            binariness: a.binariness(),
        });
    }
    let binariness_tracked = stages
        .windows(2)
        .all(|w| w[1].binariness <= 1.1 * w[0].binariness + 1e-12);
    Ok(OptimizerState {
        density: a,
        value,
        step,
        history,
        schedule: opts.schedule.clone(),
        stalled: stages.iter().any(|s| s.stalled),
        stages,
        binariness_tracked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRow {
    pub penalty: f64,
    pub value: f64,
    /// `∫(1-a)u²`, the state mass left outside the support of `a`.
    pub outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub rows: Vec<ContinuationRow>,
    /// `|Ĵ_{M_{i+1}} - Ĵ_{M_i}|`.
    pub increments: Vec<f64>,
    pub increments_decreasing: bool,
    pub outside_decreasing: bool,
}

/// `Ĵ_{M,ρ}(a)` along an increasing list of penalizations.
pub fn m_continuation_probe(
    problem: &RelaxedProblem,
    a: &DensityField,
    penalties: &[f64],
) -> Result<ContinuationReport> {
    validate_schedule(penalties)?;
    let a_nodes = a.to_nodes();
    let area = problem.grid.cell_area();
    let mut rows = Vec::with_capacity(penalties.len());
    let mut warm: Option<ScalarField> = None;
    for &penalty in penalties {
        let b = problem.with_penalty(penalty).value_and_state(a, warm.as_ref())?;
        let outside: f64 = b
            .1
            .values()
            .iter()
            .zip(&a_nodes)
            .map(|(u, an)| (1.0 - an) * u * u)
            .sum::<f64>()
            * area;
        rows.push(ContinuationRow {
            penalty,
            value: b.0,
            outside,
        });
        warm = Some(b.1);
    }
    let increments: Vec<f64> = rows.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect();
    Ok(ContinuationReport {
        increments_decreasing: increments.windows(2).all(|w| w[1] < w[0]),
        outside_decreasing: rows.windows(2).all(|w| w[1].outside < w[0].outside),
        increments,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityTrial {
    pub trial: usize,
    pub smaller: f64,
    pub larger: f64,
    /// `Ĵ(a₁) - Ĵ(a₂)`; should be non-negative.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub seed: u64,
    pub tolerance: f64,
    pub trials: Vec<MonotonicityTrial>,
    pub violations: Vec<usize>,
    pub min_gap: f64,
}

pub const MONOTONICITY_TOL: f64 = 1e-10;

/// Random nested pair `a₁ ≤ a₂` with `∫a₂ ≤ m`.
pub fn nested_pair(
    grid: &Grid2D,
    mass_bound: f64,
    rng: &mut impl Rng,
) -> Result<(DensityField, DensityField)> {
    let n = grid.num_cells();
    let fill = mass_bound / grid.area();
    let mut draw = || -> Vec<f64> { (0..n).map(|_| fill + rng.gen_range(-0.5..0.5)).collect() };
    let r1 = draw();
    let r2 = draw();
    let upper: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| x.max(*y)).collect();
    let lower: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| x.min(*y)).collect();
    let a2 = project_density(&upper, mass_bound, grid)?;
    let p1 = project_density(&lower, mass_bound, grid)?;
    let a1 = DensityField::from_values(
        *grid,
        p1.values().iter().zip(a2.values()).map(|(x, y)| x.min(*y)).collect(),
    )?;
    Ok((a1, a2))
}

/// Checks `Ĵ(a₁) ≥ Ĵ(a₂)` on random nested pairs; trials run in parallel.
pub fn monotonicity_probe(
    problem: &RelaxedProblem,
    mass_bound: f64,
    trials: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if problem.rho > 0.0 {
        let report = check_hypotheses(&problem.f, &problem.g, mass_bound, &problem.grid)?;
        if !report.h1.holds && !report.h2.holds {
            return Err(Error::HypothesisNotCertified(format!(
                "neither H1 ({}) nor H2 ({})",
                report.h1.witness, report.h2.witness
            )));
        }
        if let Some(rho_1) = report.rho_1 {
            if problem.rho >= rho_1 {
                return Err(Error::RhoAboveThreshold {
                    rho: problem.rho,
                    threshold: rho_1,
                });
            }
        }
    }
    let grid = problem.grid;
    let results: Vec<MonotonicityTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let (a1, a2) = nested_pair(&grid, mass_bound, &mut rng)?;
            let smaller = problem.value(&a1, None)?;
            let larger = problem.value(&a2, None)?;
            Ok(MonotonicityTrial {
                trial: t,
                smaller,
                larger,
                gap: smaller - larger,
            })
        })
        .collect::<Result<_>>()?;
    let violations = results
        .iter()
        .filter(|t| t.gap < -MONOTONICITY_TOL)
        .map(|t| t.trial)
        .collect();
    Ok(MonotonicityReport {
        seed,
        tolerance: MONOTONICITY_TOL,
        min_gap: results.iter().map(|t| t.gap).fold(f64::INFINITY, f64::min),
        trials: results,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologicalReport {
    /// Nodal `u·U`.
    pub field: ScalarField,
    /// Fraction of interior nodes strictly inside the disk where `u·U < 0`.
    pub negative_fraction: f64,
    pub nodes_inside: usize,
}

/// Nodal `u·U` at the disk indicator of radius `radius`; requires H4.
pub fn topological_sign_field(
    problem: &RelaxedProblem,
    radius: f64,
) -> Result<TopologicalReport> {
    let grid = problem.grid;
    let disk_mass = disk_indicator(&grid, radius)?.mass().max(grid.cell_area());
    let report = check_hypotheses(&problem.f, &problem.g, disk_mass.min(grid.area()), &grid)?;
    if !report.h4.holds {
        return Err(Error::HypothesisNotCertified(report.h4.witness));
    }
    let a = disk_indicator(&grid, radius)?;
    let b = problem.evaluate(&a)?;
    let values: Vec<f64> = b
        .u
        .values()
        .iter()
        .zip(b.combined.values())
        .map(|(u, c)| u * c)
        .collect();
    let mut inside = 0;
    let mut negative = 0;
    for ((x, y), v) in grid.interior_coords().zip(&values) {
        if x.hypot(y) < radius {
            inside += 1;
            if *v < 0.0 {
                negative += 1;
            }
        }
    }
    Ok(TopologicalReport {
        field: ScalarField::from_values(grid, values)?,
        negative_fraction: if inside > 0 {
            negative as f64 / inside as f64
        } else {
            0.0
        },
        nodes_inside: inside,
    })
}

/// `Ĵ(a with a hole) - Ĵ(a)`, the hole being the cells centered within
/// `hole_radius` of the origin.
pub fn hole_perturbation(problem: &RelaxedProblem, a: &DensityField, hole_radius: f64) -> Result<f64> {
    let grid = problem.grid;
    let n = grid.n();
    let mut holed = a.values().to_vec();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = grid.cell_center(i, j);
            if x.hypot(y) < hole_radius {
                holed[grid.cell_index(i, j)] = 0.0;
            }
        }
    }
    let holed = DensityField::from_values(grid, holed)?;
    let base = problem.value(a, None)?;
    Ok(problem.value(&holed, None)? - base)
}
