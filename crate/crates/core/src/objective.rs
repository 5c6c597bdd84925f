//! Relaxed energy `Ĵ_{M,ρ}(a)`, its adjoint, and the switching function.
//!
//! With the discrete state equation `(K + M(1-ā) + ρf(·))u = g`, the discrete
//! energy `½h²uᵀKu + (M/2)h²Σ(1-ā)u² - h²Σgu` has the exact nodal gradient
//! `h²Ψ`, `Ψ = -M(v + u/2)u`, where `v` solves the adjoint
//! `(K + M(1-ā) + ρf'(u))v = ρf(u)`. Cell derivatives follow from the
//! four-cell averaging `ā`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::{
    dirichlet_energy, penalization_coefficient, solve_linear_with, solve_semilinear_with,
    SemilinearOptions,
};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid2D, ScalarField};
use crate::problem::{NonlinearitySpec, SourceSpec};

/// Relaxed problem data shared by every evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedProblem {
    pub grid: Grid2D,
    pub penalty: f64,
    pub rho: f64,
    pub f: NonlinearitySpec,
    pub g: SourceSpec,
    pub solver: SemilinearOptions,
}

impl RelaxedProblem {
    pub fn new(grid: Grid2D, penalty: f64, rho: f64, f: NonlinearitySpec, g: SourceSpec) -> Self {
        Self {
            grid,
            penalty,
            rho,
            f,
            g,
            solver: SemilinearOptions::default(),
        }
    }

    pub fn with_solver(mut self, solver: SemilinearOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_penalty(&self, penalty: f64) -> Self {
        Self {
            penalty,
            ..self.clone()
        }
    }

    pub fn evaluate(&self, a: &DensityField) -> Result<ObjectiveBundle> {
        evaluate_objective_with(self, a, None)
    }

    /// `Ĵ(a)` only, skipping the adjoint solve.
    pub fn value(&self, a: &DensityField, warm: Option<&ScalarField>) -> Result<f64> {
        self.value_and_state(a, warm).map(|(v, _)| v)
    }

    pub fn value_and_state(
        &self,
        a: &DensityField,
        warm: Option<&ScalarField>,
    ) -> Result<(f64, ScalarField)> {
        let u = solve_semilinear_with(
            &self.grid,
            a,
            self.penalty,
            self.rho,
            &self.f,
            &self.g,
            &self.solver,
            warm,
        )?
        .u;
        Ok((energy(self, a, &u), u))
    }
}

/// State, adjoint and switching function at one density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBundle {
    pub value: f64,
    pub u: ScalarField,
    pub v: ScalarField,
    /// `U = u/2 + v`.
    pub combined: ScalarField,
    /// `Ψ = -M(v + u/2)u` at the nodes.
    pub switching: ScalarField,
    pub penalty: f64,
    pub picard_iterations: usize,
}

impl ObjectiveBundle {
    /// Cell gradient `G_c`, so that `⟨dĴ, h⟩ = h²·Σ_c h_c G_c`.
    pub fn cell_gradient(&self) -> Vec<f64> {
        let grid = *self.switching.grid();
        let n = grid.n();
        let mut out = vec![0.0; grid.num_cells()];
        for j in 0..n {
            for i in 0..n {
                out[grid.cell_index(i, j)] = 0.25
                    * (self.switching.at(i, j)
                        + self.switching.at(i + 1, j)
                        + self.switching.at(i, j + 1)
                        + self.switching.at(i + 1, j + 1));
            }
        }
        out
    }
}

/// `½∫|∇u|² + (M/2)∫(1-a)u² - ∫gu` with the stencil-consistent gradient term.
fn energy(problem: &RelaxedProblem, a: &DensityField, u: &ScalarField) -> f64 {
    let grid = &problem.grid;
    let area = grid.cell_area();
    let a_nodes = a.to_nodes();
    let grad = 0.5 * dirichlet_energy(grid, u.values());
    let pen: f64 = u
        .values()
        .iter()
        .zip(&a_nodes)
        .map(|(uk, ak)| (1.0 - ak) * uk * uk)
        .sum::<f64>()
        * area;
    let src: f64 = grid
        .interior_coords()
        .zip(u.values())
        .map(|((x, y), uk)| problem.g.eval(x, y) * uk)
        .sum::<f64>()
        * area;
    grad + 0.5 * problem.penalty * pen - src
}

/// Recomputes `Ĵ` from a stored state.
pub fn value_from_state(problem: &RelaxedProblem, a: &DensityField, u: &ScalarField) -> f64 {
    energy(problem, a, u)
}

/// Right-hand side of the energy identity `Ĵ = -½∫gu - (ρ/2)∫u f(u)`.
pub fn energy_identity_value(problem: &RelaxedProblem, u: &ScalarField) -> f64 {
    let grid = &problem.grid;
    let area = grid.cell_area();
    let mut src = 0.0;
    let mut nl = 0.0;
    for ((x, y), &uk) in grid.interior_coords().zip(u.values()) {
        src += problem.g.eval(x, y) * uk;
        nl += uk * problem.f.f(uk);
    }
    -0.5 * src * area - 0.5 * problem.rho * nl * area
}

pub fn evaluate_objective(
    grid: &Grid2D,
    a: &DensityField,
    penalty: f64,
    rho: f64,
    f: &NonlinearitySpec,
    g: &SourceSpec,
) -> Result<ObjectiveBundle> {
    let problem = RelaxedProblem::new(*grid, penalty, rho, f.clone(), g.clone());
    evaluate_objective_with(&problem, a, None)
}

/// Full evaluation with an optional warm start for the state.
pub fn evaluate_objective_with(
    problem: &RelaxedProblem,
    a: &DensityField,
    warm: Option<&ScalarField>,
) -> Result<ObjectiveBundle> {
    let grid = &problem.grid;
    let sol = solve_semilinear_with(
        grid,
        a,
        problem.penalty,
        problem.rho,
        &problem.f,
        &problem.g,
        &problem.solver,
        warm,
    )?;
    let u = sol.u;
    let rho = problem.rho;

    let mut coeff = penalization_coefficient(a, problem.penalty);
    for (c, &uk) in coeff.iter_mut().zip(u.values()) {
        *c += rho * problem.f.df(uk);
    }
    let rhs = ScalarField::from_values(
        *grid,
        u.values().iter().map(|&uk| rho * problem.f.f(uk)).collect(),
    )?;
    let (v, _) = solve_linear_with(grid, &coeff, &rhs, None, &problem.solver.linear)?;

    let combined: Vec<f64> = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(uk, vk)| 0.5 * uk + vk)
        .collect();
    let switching: Vec<f64> = combined
        .iter()
        .zip(u.values())
        .map(|(ck, uk)| -problem.penalty * ck * uk)
        .collect();
    let value = energy(problem, a, &u);
    Ok(ObjectiveBundle {
        value,
        combined: ScalarField::from_values(*grid, combined)?,
        switching: ScalarField::from_values(*grid, switching)?,
        u,
        v,
        penalty: problem.penalty,
        picard_iterations: sol.log.len(),
    })
}

/// `⟨dĴ(a), h⟩ = ∫_D h Ψ` for a cell perturbation `h`.
pub fn directional_derivative(bundle: &ObjectiveBundle, h: &[f64]) -> Result<f64> {
    let grid = bundle.switching.grid();
    if h.len() != grid.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: grid.num_cells(),
            got: h.len(),
        });
    }
    Ok(bundle
        .cell_gradient()
        .iter()
        .zip(h)
        .map(|(gc, hc)| gc * hc)
        .sum::<f64>()
        * grid.cell_area())
}

/// How the finite difference of one trial was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceKind {
    Central,
    /// Second-order forward difference, used when `a - εh` leaves `[0, 1]`.
    OneSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientTrial {
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
    pub kind: DifferenceKind,
    /// Relative errors over the step sweep, in the order of `GradientCheckOptions::steps`.
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub trials: Vec<GradientTrial>,
    pub max_rel_error: f64,
    pub one_sided_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckOptions {
    /// The first entry is the reference step.
    pub steps: Vec<f64>,
    pub seed: u64,
}

impl Default for GradientCheckOptions {
    fn default() -> Self {
        Self {
            steps: vec![1e-5, 1e-4, 1e-6],
            seed: 2024,
        }
    }
}

/// Random zero-mean direction admissible at `a`: cells at a bound only move inward.
pub fn admissible_direction(a: &DensityField, rng: &mut impl Rng) -> Vec<f64> {
    let vals = a.values();
    let mut h: Vec<f64> = vals.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let free: Vec<bool> = vals.iter().map(|&x| x > 0.0 && x < 1.0).collect();
    for (hc, &x) in h.iter_mut().zip(vals) {
        if x <= 0.0 {
            *hc = hc.abs();
        } else if x >= 1.0 {
            *hc = -hc.abs();
        }
    }
    // Remove the mean on free cells so that ∫h = 0 whenever possible.
    let n_free = free.iter().filter(|&&b| b).count();
    let total: f64 = h.iter().sum();
    if n_free > 0 {
        let shift = total / n_free as f64;
        for (hc, &is_free) in h.iter_mut().zip(&free) {
            if is_free {
                *hc -= shift;
            }
        }
    }
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        h.iter_mut().for_each(|v| *v /= scale);
    }
    h
}

fn shifted(a: &DensityField, h: &[f64], t: f64) -> Result<DensityField> {
    DensityField::from_values(
        *a.grid(),
        a.values().iter().zip(h).map(|(x, d)| x + t * d).collect(),
    )
}

fn fits_box(a: &DensityField, h: &[f64], t: f64) -> bool {
    a.values()
        .iter()
        .zip(h)
        .all(|(x, d)| (0.0..=1.0).contains(&(x + t * d)))
}

/// Compares `∫hΨ` against finite differences of `Ĵ` along `h`.
pub fn check_direction(
    problem: &RelaxedProblem,
    a: &DensityField,
    bundle: &ObjectiveBundle,
    h: &[f64],
    steps: &[f64],
) -> Result<GradientTrial> {
    let analytic = directional_derivative(bundle, h)?;
    let warm = Some(&bundle.u);
    let central = steps.iter().all(|&eps| fits_box(a, h, -eps) && fits_box(a, h, eps));
    let kind = if central {
        DifferenceKind::Central
    } else {
        DifferenceKind::OneSided
    };
    let mut sweep = Vec::with_capacity(steps.len());
    let mut fds = Vec::with_capacity(steps.len());
    for &eps in steps {
        let fd = match kind {
            DifferenceKind::Central => {
                let jp = problem.value(&shifted(a, h, eps)?, warm)?;
                let jm = problem.value(&shifted(a, h, -eps)?, warm)?;
                (jp - jm) / (2.0 * eps)
            }
            DifferenceKind::OneSided => {
                let j1 = problem.value(&shifted(a, h, eps)?, warm)?;
                let j2 = problem.value(&shifted(a, h, 2.0 * eps)?, warm)?;
                (-3.0 * bundle.value + 4.0 * j1 - j2) / (2.0 * eps)
            }
        };
        fds.push(fd);
        sweep.push((fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE));
    }
    Ok(GradientTrial {
        analytic,
        finite_difference: fds[0],
        rel_error: sweep[0],
        kind,
        sweep,
    })
}

/// Random-direction audit of the switching-function gradient at `a`.
pub fn gradient_check(
    problem: &RelaxedProblem,
    a: &DensityField,
    trials: usize,
    opts: &GradientCheckOptions,
) -> Result<GradientCheckReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    if opts.steps.is_empty() {
        return Err(Error::invalid("steps", "need at least one step"));
    }
    let bundle = problem.evaluate(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let h = admissible_direction(a, &mut rng);
        out.push(check_direction(problem, a, &bundle, &h, &opts.steps)?);
    }
    Ok(summarize(out))
}

fn summarize(trials: Vec<GradientTrial>) -> GradientCheckReport {
    GradientCheckReport {
        max_rel_error: trials.iter().map(|t| t.rel_error).fold(0.0, f64::max),
        one_sided_trials: trials
            .iter()
            .filter(|t| t.kind == DifferenceKind::OneSided)
            .count(),
        trials,
    }
}

/// Gradient audit over independent random `(a, h)` pairs, `a` uniform in
/// `[0.1, 0.9]` per cell.
pub fn random_pair_gradient_check(
    problem: &RelaxedProblem,
    trials: usize,
    opts: &GradientCheckOptions,
) -> Result<GradientCheckReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let grid = problem.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let a = DensityField::from_values(
            grid,
            (0..grid.num_cells()).map(|_| rng.gen_range(0.1..0.9)).collect(),
        )?;
        let h = admissible_direction(&a, &mut rng);
        let bundle = problem.evaluate(&a)?;
        out.push(check_direction(problem, &a, &bundle, &h, &opts.steps)?);
    }
    Ok(summarize(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::disk_indicator;
    use crate::problem::{check_hypotheses, Source};
    use std::f64::consts::PI;

    fn problem(n: usize, penalty: f64, rho: f64) -> RelaxedProblem {
        RelaxedProblem::new(
            Grid2D::new(1.0, n).unwrap(),
            penalty,
            rho,
            NonlinearitySpec::one_minus_two_x(1.0),
            SourceSpec::constant(1.0),
        )
    }

    #[test]
    fn rho_zero_has_zero_adjoint() {
        let p = problem(16, 50.0, 0.0);
        let a = disk_indicator(&p.grid, 0.5).unwrap();
        let b = p.evaluate(&a).unwrap();
        assert!(b.v.values().iter().all(|&v| v == 0.0));
        for ((c, u), s) in b.combined.values().iter().zip(b.u.values()).zip(b.switching.values()) {
            assert_eq!(*c, 0.5 * u);
            assert!(*s <= 0.0);
            assert!((s + 50.0 * u * u / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn value_reproducible_from_state_and_identity() {
        let p = problem(32, 100.0, 0.3);
        let a = disk_indicator(&p.grid, 0.7).unwrap();
        let b = p.evaluate(&a).unwrap();
        assert!((value_from_state(&p, &a, &b.u) - b.value).abs() <= 1e-12 * b.value.abs());
        let id = energy_identity_value(&p, &b.u);
        assert!((id - b.value).abs() <= 5e-9 * b.value.abs(), "{id} vs {}", b.value);
    }

    #[test]
    fn h1_regime_signs() {
        let grid = Grid2D::new(1.0, 32).unwrap();
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = SourceSpec::new(Source::RadialLinear {
            intercept: 2.0,
            slope: 1.0 / 2f64.sqrt(),
        });
        let report = check_hypotheses(&f, &g, 2.0, &grid).unwrap();
        assert!(report.h1.holds);
        let rho = 0.9 * report.rho_1.unwrap();
        let p = RelaxedProblem::new(grid, 200.0, rho, f, g);
        let a = DensityField::constant(grid, 0.4);
        let b = p.evaluate(&a).unwrap();
        assert!(b.u.min() >= -1e-10);
        assert!(b.combined.min() >= -1e-10);
        assert!(b.switching.max() <= 1e-10);
        let h = vec![1.0; grid.num_cells()];
        assert!(directional_derivative(&b, &h).unwrap() <= 0.0);
    }

    #[test]
    fn zero_direction_and_shape_mismatch() {
        let p = problem(16, 10.0, 0.1);
        let a = DensityField::constant(p.grid, 0.5);
        let b = p.evaluate(&a).unwrap();
        assert_eq!(directional_derivative(&b, &vec![0.0; p.grid.num_cells()]).unwrap(), 0.0);
        assert!(directional_derivative(&b, &[1.0; 3]).is_err());
    }

    #[test]
    fn rho_zero_derivative_is_quadratic_in_state() {
        // ⟨dĴ, h⟩ = -(M/2)∫h u² when ρ = 0.
        let p = problem(32, 80.0, 0.0).with_solver(SemilinearOptions::tight());
        let a = disk_indicator(&p.grid, 0.6).unwrap();
        let report = gradient_check(&p, &a, 3, &GradientCheckOptions::default()).unwrap();
        assert!(report.max_rel_error <= 1e-6, "{}", report.max_rel_error);
        let b = p.evaluate(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = admissible_direction(&a, &mut rng);
        let u2: Vec<f64> = b.u.values().iter().map(|u| u * u).collect();
        let u2 = ScalarField::from_values(p.grid, u2).unwrap();
        let mut manual = 0.0;
        let n = p.grid.n();
        for j in 0..n {
            for i in 0..n {
                let avg = 0.25 * (u2.at(i, j) + u2.at(i + 1, j) + u2.at(i, j + 1) + u2.at(i + 1, j + 1));
                manual += h[p.grid.cell_index(i, j)] * avg;
            }
        }
        manual *= -0.5 * 80.0 * p.grid.cell_area();
        let d = directional_derivative(&b, &h).unwrap();
        assert!((d - manual).abs() <= 1e-12 * manual.abs());
    }

    #[test]
    fn finite_difference_agreement_on_random_pairs() {
        let p = problem(32, 100.0, 0.05).with_solver(SemilinearOptions::tight());
        let r = random_pair_gradient_check(&p, 4, &GradientCheckOptions::default()).unwrap();
        assert!(r.max_rel_error <= 1e-4, "{}", r.max_rel_error);
        assert_eq!(r.one_sided_trials, 0);
    }

    #[test]
    fn degenerate_density_uses_one_sided_differences() {
        let p = problem(16, 50.0, 0.05).with_solver(SemilinearOptions::tight());
        let a = disk_indicator(&p.grid, 0.5).unwrap();
        let r = gradient_check(&p, &a, 3, &GradientCheckOptions::default()).unwrap();
        assert_eq!(r.one_sided_trials, 3);
        assert!(r.max_rel_error <= 1e-4, "{}", r.max_rel_error);
        for t in &r.trials {
            // inward directions at the bounds
            assert_eq!(t.kind, DifferenceKind::OneSided);
        }
    }

    #[test]
    fn value_formula_on_disk_oracle() {
        let grid = Grid2D::new(2.0, 256).unwrap();
        let p = RelaxedProblem::new(grid, 1e3, 0.0, NonlinearitySpec::zero(), SourceSpec::constant(1.0));
        let u = ScalarField::from_fn(grid, |x, y| (1.0 - x * x - y * y).max(0.0) / 4.0);
        let a = DensityField::constant(grid, 1.0);
        let j = value_from_state(&p, &a, &u);
        assert!((j + PI / 16.0).abs() < 2e-3, "{j}");
    }

    #[test]
    fn disk_energy_matches_radial_closed_form() {
        // -Δu = 1 on the unit disk: J = -½∫u = -π/16.
        let grid = Grid2D::new(2.0, 128).unwrap();
        let p = RelaxedProblem::new(
            grid,
            1e5,
            0.0,
            NonlinearitySpec::zero(),
            SourceSpec::constant(1.0),
        );
        let a = disk_indicator(&grid, 1.0).unwrap();
        let b = p.evaluate(&a).unwrap();
        assert!((b.value + PI / 16.0).abs() < 3e-2, "{}", b.value);
    }
}
