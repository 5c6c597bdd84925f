//! Five-point finite differences for `-Δu + c·u = rhs` with zero Dirichlet
//! data, and the Picard iteration for the semilinear state equation
//! `-Δu + M(1-a)u + ρ f(u) = g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid2D, ScalarField};
use crate::problem::{
    contraction_threshold, lambda1_lower_bound, NonlinearitySpec, SourceSpec, DEFAULT_RHO_CEILING,
};

/// Coefficients must stay above `-(1 - COEFF_MARGIN)·λ₁(D)`.
pub const COEFF_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveOptions {
    /// Stop when `‖r‖₂/‖rhs‖₂` drops below this.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// `y = (-Δ_h + diag(c)) x` on the interior nodes.
pub fn apply_operator(grid: &Grid2D, coeff: &[f64], x: &[f64], y: &mut [f64]) {
    let m = grid.interior_per_side();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    for j in 0..m {
        for i in 0..m {
            let k = j * m + i;
            let mut nb = 0.0;
            if i > 0 {
                nb += x[k - 1];
            }
            if i + 1 < m {
                nb += x[k + 1];
            }
            if j > 0 {
                nb += x[k - m];
            }
            if j + 1 < m {
                nb += x[k + m];
            }
            y[k] = (4.0 * x[k] - nb) * inv_h2 + coeff[k] * x[k];
        }
    }
}

/// Discrete Dirichlet form `h²·uᵀ(-Δ_h u)`, the stencil-consistent `∫|∇u|²`.
pub fn dirichlet_energy(grid: &Grid2D, u: &[f64]) -> f64 {
    let zero = vec![0.0; u.len()];
    let mut lu = vec![0.0; u.len()];
    apply_operator(grid, &zero, u, &mut lu);
    u.iter().zip(&lu).map(|(a, b)| a * b).sum::<f64>() * grid.cell_area()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_coefficient(grid: &Grid2D, coeff: &[f64]) -> Result<()> {
    let bound = -(1.0 - COEFF_MARGIN) * lambda1_lower_bound(grid);
    for (node, &value) in coeff.iter().enumerate() {
        if !(value >= bound) {
            return Err(Error::CoefficientBelowBound { node, value, bound });
        }
    }
    Ok(())
}

/// Jacobi-preconditioned conjugate gradients, starting from `x`.
fn pcg(
    grid: &Grid2D,
    coeff: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    opts: &LinearSolveOptions,
) -> Result<LinearSolveStats> {
    let n = rhs.len();
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(LinearSolveStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let diag_lap = 4.0 / (grid.h() * grid.h());
    let inv_diag: Vec<f64> = coeff.iter().map(|c| 1.0 / (diag_lap + c)).collect();

    let mut r = vec![0.0; n];
    apply_operator(grid, coeff, x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / rhs_norm;
    for it in 0..opts.max_iter {
        if res <= opts.rel_tol {
            return Ok(LinearSolveStats {
                iterations: it,
                rel_residual: res,
            });
        }
        apply_operator(grid, coeff, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                solver: "conjugate gradient (operator not positive definite)",
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        res = dot(&r, &r).sqrt() / rhs_norm;
    }
    if res <= opts.rel_tol {
        return Ok(LinearSolveStats {
            iterations: opts.max_iter,
            rel_residual: res,
        });
    }
    Err(Error::NonConvergence {
        solver: "conjugate gradient",
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Solves `-Δu + c·u = rhs` on the interior nodes.
pub fn solve_linear(grid: &Grid2D, coeff: &[f64], rhs: &ScalarField) -> Result<ScalarField> {
    solve_linear_with(grid, coeff, rhs, None, &LinearSolveOptions::default()).map(|(u, _)| u)
}

/// [`solve_linear`] with an optional initial guess and explicit options.
pub fn solve_linear_with(
    grid: &Grid2D,
    coeff: &[f64],
    rhs: &ScalarField,
    initial: Option<&[f64]>,
    opts: &LinearSolveOptions,
) -> Result<(ScalarField, LinearSolveStats)> {
    let n = grid.num_interior();
    if rhs.grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.values().len(),
        });
    }
    if coeff.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: coeff.len(),
        });
    }
    check_coefficient(grid, coeff)?;
    let mut x = match initial {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.len(),
            })
        }
        None => vec![0.0; n],
    };
    let stats = pcg(grid, coeff, rhs.values(), &mut x, opts)?;
    Ok((ScalarField::from_values(*grid, x)?, stats))
}

/// Smallest eigenvalue of the discrete Dirichlet Laplacian by inverse power
/// iteration.
pub fn discrete_lambda1(grid: &Grid2D, iterations: usize) -> Result<f64> {
    let n = grid.num_interior();
    let zero = vec![0.0; n];
    let opts = LinearSolveOptions::default();
    // Positive start vector has a component along the ground state.
    let mut v = ScalarField::from_fn(*grid, |x, y| {
        let l = grid.half_width();
        (l * l - x * x) * (l * l - y * y) + 0.1
    });
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let norm = dot(v.values(), v.values()).sqrt();
        let vn = ScalarField::from_values(*grid, v.values().iter().map(|x| x / norm).collect())?;
        let (w, _) = solve_linear_with(grid, &zero, &vn, None, &opts)?;
        lambda = dot(vn.values(), vn.values()) / dot(vn.values(), w.values());
        v = w;
    }
    Ok(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemilinearOptions {
    /// Sup-norm tolerance on successive Picard iterates.
    pub picard_tol: f64,
    pub max_picard: usize,
    pub linear: LinearSolveOptions,
    pub rho_ceiling: f64,
}

impl Default for SemilinearOptions {
    fn default() -> Self {
        Self {
            picard_tol: 1e-10,
            max_picard: 500,
            linear: LinearSolveOptions::default(),
            rho_ceiling: DEFAULT_RHO_CEILING,
        }
    }
}

impl SemilinearOptions {
    /// Tolerances tight enough for finite-difference checks of `Ĵ`.
    pub fn tight() -> Self {
        Self {
            picard_tol: 1e-13,
            linear: LinearSolveOptions {
                rel_tol: 1e-14,
                max_iter: 50_000,
            },
            ..Self::default()
        }
    }
}

/// One Picard step of the convergence log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardRecord {
    pub iter: usize,
    /// `‖u_{k+1} - u_k‖_∞`.
    pub increment: f64,
    /// Relative residual of the inner linear solve.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemilinearSolution {
    pub u: ScalarField,
    pub log: Vec<PicardRecord>,
}

impl SemilinearSolution {
    /// Ratios of successive Picard increments.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.log
            .windows(2)
            .map(|w| w[1].increment / w[0].increment)
            .collect()
    }
}

/// Discrete penalization coefficient `M(1 - ā)` at the interior nodes.
pub fn penalization_coefficient(a: &DensityField, penalty: f64) -> Vec<f64> {
    a.to_nodes().into_iter().map(|an| penalty * (1.0 - an)).collect()
}

/// Relaxed state `u_{M,ρ,a}`.
pub fn solve_semilinear(
    grid: &Grid2D,
    a: &DensityField,
    penalty: f64,
    rho: f64,
    f: &NonlinearitySpec,
    g: &SourceSpec,
) -> Result<ScalarField> {
    solve_semilinear_with(grid, a, penalty, rho, f, g, &SemilinearOptions::default(), None)
        .map(|s| s.u)
}

/// [`solve_semilinear`] with options, an optional warm start, and the
/// Picard log.
#[allow(clippy::too_many_arguments)]
pub fn solve_semilinear_with(
    grid: &Grid2D,
    a: &DensityField,
    penalty: f64,
    rho: f64,
    f: &NonlinearitySpec,
    g: &SourceSpec,
    opts: &SemilinearOptions,
    initial: Option<&ScalarField>,
) -> Result<SemilinearSolution> {
    if a.grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: grid.num_cells(),
            got: a.values().len(),
        });
    }
    if !(penalty >= 0.0) {
        return Err(Error::invalid("M", format!("penalty must be >= 0, got {penalty}")));
    }
    if !(rho >= 0.0) {
        return Err(Error::invalid("rho", format!("rho must be >= 0, got {rho}")));
    }
    let rho_bar = contraction_threshold(lambda1_lower_bound(grid), f, opts.rho_ceiling);
    if rho >= rho_bar {
        return Err(Error::RhoAboveThreshold {
            rho,
            threshold: rho_bar,
        });
    }
    let coeff = penalization_coefficient(a, penalty);
    let g_nodes: Vec<f64> = grid.interior_coords().map(|(x, y)| g.eval(x, y)).collect();

    let mut u: Vec<f64> = match initial {
        Some(u0) => u0.values().to_vec(),
        None => vec![0.0; grid.num_interior()],
    };
    let mut log = Vec::new();
    for iter in 0..opts.max_picard {
        let rhs: Vec<f64> = g_nodes
            .iter()
            .zip(&u)
            .map(|(gk, uk)| gk - rho * f.f(*uk))
            .collect();
        let rhs = ScalarField::from_values(*grid, rhs)?;
        let (next, stats) = solve_linear_with(grid, &coeff, &rhs, Some(&u), &opts.linear)?;
        let increment = next
            .values()
            .iter()
            .zip(&u)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        log.push(PicardRecord {
            iter,
            increment,
            residual: stats.rel_residual,
        });
        u = next.into_values();
        // With ρ = 0 the fixed-point map does not depend on u.
        if rho == 0.0 || increment <= opts.picard_tol {
            return Ok(SemilinearSolution {
                u: ScalarField::from_values(*grid, u)?,
                log,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "Picard iteration",
        iterations: opts.max_picard,
        residual: log.last().map_or(f64::NAN, |r| r.increment),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::disk_indicator;
    use crate::problem::{check_hypotheses, Source};
    use std::f64::consts::PI;

    fn sine_mode(grid: &Grid2D) -> impl Fn(f64, f64) -> f64 + '_ {
        let l = grid.half_width();
        move |x, y| (PI * (x + l) / (2.0 * l)).sin() * (PI * (y + l) / (2.0 * l)).sin()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let grid = Grid2D::new(1.0, 16).unwrap();
        let c = vec![0.0; grid.num_interior()];
        let u = solve_linear(&grid, &c, &ScalarField::zeros(grid)).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manufactured_eigenfunction_converges_second_order() {
        let mut errors = Vec::new();
        for n in [16, 32, 64] {
            let grid = Grid2D::new(1.0, n).unwrap();
            let lam = 2.0 * (PI / 2.0).powi(2);
            let exact = sine_mode(&grid);
            let rhs = ScalarField::from_fn(grid, |x, y| lam * exact(x, y));
            let c = vec![0.0; grid.num_interior()];
            let u = solve_linear(&grid, &c, &rhs).unwrap();
            let err = grid
                .interior_coords()
                .zip(u.values())
                .fold(0.0f64, |m, ((x, y), v)| m.max((v - exact(x, y)).abs()));
            errors.push(err);
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() <= 0.4, "ratio {ratio}");
        }
    }

    #[test]
    fn maximum_principle_with_constant_supersolution() {
        let grid = Grid2D::new(1.0, 32).unwrap();
        let c = vec![1.0; grid.num_interior()];
        let rhs = ScalarField::from_fn(grid, |_, _| 1.0);
        let u = solve_linear(&grid, &c, &rhs).unwrap();
        assert!(u.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn coefficient_bound_enforced() {
        let grid = Grid2D::new(1.0, 16).unwrap();
        let c = vec![-lambda1_lower_bound(&grid); grid.num_interior()];
        let rhs = ScalarField::from_fn(grid, |_, _| 1.0);
        assert!(matches!(
            solve_linear(&grid, &c, &rhs),
            Err(Error::CoefficientBelowBound { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let grid = Grid2D::new(1.0, 32).unwrap();
        let c = vec![0.0; grid.num_interior()];
        let rhs = ScalarField::from_fn(grid, |x, _| x.exp());
        let opts = LinearSolveOptions {
            rel_tol: 1e-14,
            max_iter: 3,
        };
        let err = solve_linear_with(&grid, &c, &rhs, None, &opts).unwrap_err();
        assert!(err.is_non_convergence());
    }

    #[test]
    fn discrete_eigenvalue_close_to_exact() {
        let grid = Grid2D::new(1.0, 64).unwrap();
        let lam = discrete_lambda1(&grid, 30).unwrap();
        let exact = lambda1_lower_bound(&grid);
        assert!((lam - exact).abs() / exact < 1e-2, "{lam} vs {exact}");
        // closed-form discrete eigenvalue (8/h²)·sin²(πh/(4L))
        let h = grid.h();
        let discrete = 8.0 / (h * h) * (PI * h / 4.0).sin().powi(2);
        assert!((lam - discrete).abs() / discrete < 1e-8);
    }

    #[test]
    fn rho_zero_full_density_is_bitwise_linear_solve() {
        let grid = Grid2D::new(1.0, 32).unwrap();
        let a = DensityField::constant(grid, 1.0);
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = SourceSpec::new(Source::RadialLinear {
            intercept: 2.0,
            slope: 0.5,
        });
        let u = solve_semilinear(&grid, &a, 1e3, 0.0, &f, &g).unwrap();
        let rhs = ScalarField::from_fn(grid, |x, y| g.eval(x, y));
        let lin = solve_linear(&grid, &vec![0.0; grid.num_interior()], &rhs).unwrap();
        assert_eq!(u.values(), lin.values());
    }

    #[test]
    fn state_bounded_by_torsion_estimate() {
        let grid = Grid2D::new(2.0, 32).unwrap();
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = SourceSpec::constant(1.0);
        let report = check_hypotheses(&f, &g, PI, &grid).unwrap();
        let rho = 0.5 * report.rho_1.unwrap();
        for a in [
            DensityField::constant(grid, 1.0),
            disk_indicator(&grid, 1.0).unwrap(),
            DensityField::constant(grid, 0.3),
        ] {
            for m_pen in [0.0, 10.0, 1e3] {
                let u = solve_semilinear(&grid, &a, m_pen, rho, &f, &g).unwrap();
                assert!(u.min() >= -1e-10);
                assert!(u.max() <= report.n_mg, "{} > {}", u.max(), report.n_mg);
            }
        }
    }

    #[test]
    fn picard_contraction_rate() {
        let grid = Grid2D::new(1.0, 32).unwrap();
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = SourceSpec::constant(1.0);
        let a = disk_indicator(&grid, 0.6).unwrap();
        let lam = lambda1_lower_bound(&grid);
        for rho in [0.1, 0.5, 1.0] {
            let sol = solve_semilinear_with(
                &grid,
                &a,
                10.0,
                rho,
                &f,
                &g,
                &SemilinearOptions::default(),
                None,
            )
            .unwrap();
            let bound = rho * f.w1inf_norm() / lam + 0.05;
            for (k, r) in sol.contraction_ratios().into_iter().enumerate() {
                if sol.log[k + 1].increment > 1e-8 {
                    assert!(r <= bound, "rho {rho}: ratio {r} > {bound}");
                }
            }
        }
    }

    #[test]
    fn rho_at_threshold_rejected() {
        let grid = Grid2D::new(1.0, 16).unwrap();
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = SourceSpec::constant(1.0);
        let a = DensityField::constant(grid, 1.0);
        let rho_bar = contraction_threshold(lambda1_lower_bound(&grid), &f, DEFAULT_RHO_CEILING);
        assert!(matches!(
            solve_semilinear(&grid, &a, 1.0, rho_bar, &f, &g),
            Err(Error::RhoAboveThreshold { .. })
        ));
    }

    #[test]
    fn penalization_decays_outside_disk() {
        let grid = Grid2D::new(2.0, 64).unwrap();
        let a = disk_indicator(&grid, 1.0).unwrap();
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = SourceSpec::constant(1.0);
        let a_nodes = a.to_nodes();
        let mut prev = f64::INFINITY;
        for m_pen in [1e2, 1e3, 1e4, 1e5] {
            let u = solve_semilinear(&grid, &a, m_pen, 0.05, &f, &g).unwrap();
            let outside: f64 = u
                .values()
                .iter()
                .zip(&a_nodes)
                .map(|(v, an)| (1.0 - an) * v * v)
                .sum::<f64>()
                * grid.cell_area();
            assert!(outside < prev);
            prev = outside;
        }
    }
}
