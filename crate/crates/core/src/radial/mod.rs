//! Radial reduction on the ball `B* = B(0, R)`: state, adjoint, per-mode
//! profiles, the spectrum `ω_{k,ρ}` and the small-`ρ` expansion of `ω_{1,ρ}`.

mod modes;
mod perturbation;
mod tridiag;
mod verdict;

pub use modes::{solve_modes, ModeSolution, XiSource};
pub use perturbation::{
    certify_destabilizing, instability_demo, perturbation_slope, InstabilityEntry,
    InstabilityReport, PerturbationBundle,
};
pub use tridiag::Tridiagonal;
pub use verdict::{
    linear_fit, spectrum, stability_verdict, stability_verdict_with, LinearFit, StabilityReport,
    Verdict, VerdictOptions,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{contraction_threshold, lambda1_disk, NonlinearitySpec, SourceSpec, DEFAULT_RHO_CEILING};

/// Smallest admissible number of radial intervals.
pub const MIN_RADIAL_POINTS: usize = 64;

/// Uniform nodes `r_i = i·R/n_r`, `i = 0..=n_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radius: f64,
    points: usize,
}

impl RadialGrid {
    pub fn new(radius: f64, points: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("R", format!("radius must be positive, got {radius}")));
        }
        if points < MIN_RADIAL_POINTS {
            return Err(Error::invalid(
                "n_r",
                format!("need at least {MIN_RADIAL_POINTS} radial intervals, got {points}"),
            ));
        }
        Ok(Self { radius, points })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of intervals; there are `points() + 1` nodes.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn h(&self) -> f64 {
        self.radius / self.points as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        self.h() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.points).map(|i| self.r(i)).collect()
    }

    /// Second-order one-sided derivative at `r = R`.
    pub fn boundary_derivative(&self, y: &[f64]) -> f64 {
        let n = self.points;
        (3.0 * y[n] - 4.0 * y[n - 1] + y[n - 2]) / (2.0 * self.h())
    }

    /// Nodal derivative: central inside, one-sided three-point at both ends.
    pub fn derivative(&self, y: &[f64]) -> Vec<f64> {
        let n = self.points;
        let h = self.h();
        let mut d = vec![0.0; n + 1];
        d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
        for i in 1..n {
            d[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
        }
        d[n] = self.boundary_derivative(y);
        d
    }

    /// `∫₀^R v(r) dr`: composite Simpson for even `n_r`, trapezoid otherwise.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        let n = self.points;
        let h = self.h();
        if n.is_multiple_of(2) {
            let mut s = v[0] + v[n];
            for (i, vi) in v.iter().enumerate().take(n).skip(1) {
                s += if i % 2 == 1 { 4.0 * vi } else { 2.0 * vi };
            }
            s * h / 3.0
        } else {
            h * (0.5 * (v[0] + v[n]) + v[1..n].iter().sum::<f64>())
        }
    }

    /// `∫_{B*} v(|x|) dx = 2π∫₀^R v(r) r dr`.
    pub fn disk_integral(&self, v: &[f64]) -> f64 {
        let weighted: Vec<f64> = v.iter().enumerate().map(|(i, vi)| vi * self.r(i)).collect();
        2.0 * PI * self.integrate(&weighted)
    }
}

/// Behaviour of a profile at the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    /// `y'(0) = 0`, with the row `-(4/h²)(y₁ - y₀)` from `-(1/r)(ry')' → -2y''(0)`.
    Regular,
    /// `y(0) = 0`.
    Vanishing,
}

/// Solves `-(1/r)(ry')' + q y = s` on `(0, R)` with `y(R) = boundary`.
pub(crate) fn solve_bvp(
    grid: &RadialGrid,
    q: &[f64],
    s: &[f64],
    axis: Axis,
    boundary: f64,
) -> Result<Vec<f64>> {
    let n = grid.points();
    let h2 = grid.h() * grid.h();
    let first = match axis {
        Axis::Regular => 0,
        Axis::Vanishing => 1,
    };
    let m = n - first;
    let mut t = Tridiagonal::zeros(m);
    let mut rhs = vec![0.0; m];
    for i in first..n {
        let row = i - first;
        if i == 0 {
            t.diag[row] = 4.0 / h2 + q[0];
            t.upper[row] = -4.0 / h2;
        } else {
            let r = grid.r(i);
            let rm = r - 0.5 * grid.h();
            let rp = r + 0.5 * grid.h();
            t.lower[row] = -rm / (r * h2);
            t.diag[row] = (rm + rp) / (r * h2) + q[i];
            t.upper[row] = -rp / (r * h2);
        }
        rhs[row] = s[i];
    }
    rhs[m - 1] -= t.upper[m - 1] * boundary;
    t.upper[m - 1] = 0.0;
    let inner = t.solve(&rhs)?;
    let mut y = vec![0.0; n + 1];
    y[first..n].copy_from_slice(&inner);
    y[n] = boundary;
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialOptions {
    /// Sup-norm tolerance between Picard iterates.
    pub picard_tol: f64,
    pub max_picard: usize,
    pub rho_ceiling: f64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            picard_tol: 1e-12,
            max_picard: 1000,
            rho_ceiling: DEFAULT_RHO_CEILING,
        }
    }
}

/// Radial state `φ_ρ`, adjoint `ϕ_ρ` and the multiplier `Λ_ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub grid: RadialGrid,
    pub rho: f64,
    pub f: NonlinearitySpec,
    /// `g(r_i)`.
    pub source: Vec<f64>,
    pub state: Vec<f64>,
    pub adjoint: Vec<f64>,
    /// `φ'(R)`.
    pub state_slope: f64,
    /// `φ''(R)`, read off the equation at `r = R`.
    pub state_curvature: f64,
    /// `ϕ'(R)`.
    pub adjoint_slope: f64,
    /// `Λ_ρ = ϕ'(R)φ'(R) - ½φ'(R)²`.
    pub lagrange: f64,
    pub picard_iterations: usize,
}

impl RadialSolution {
    pub fn radius(&self) -> f64 {
        self.grid.radius()
    }

    /// `g(R)`.
    pub fn source_at_boundary(&self) -> f64 {
        self.source[self.grid.points()]
    }

    /// `J_ρ(B*) = ∫ ½|∇u|² - g u`, gradient term by the midpoint rule.
    pub fn energy(&self) -> f64 {
        let h = self.grid.h();
        let n = self.grid.points();
        let grad: f64 = (0..n)
            .map(|i| {
                let rm = self.grid.r(i) + 0.5 * h;
                let d = (self.state[i + 1] - self.state[i]) / h;
                rm * d * d
            })
            .sum::<f64>()
            * h;
        let gu: Vec<f64> = self.source.iter().zip(&self.state).map(|(g, u)| g * u).collect();
        PI * grad - self.grid.disk_integral(&gu)
    }

    /// `(1/(πR²))∫_{B*} g - g(R)`.
    pub fn mean_excess(&self) -> f64 {
        let r = self.radius();
        self.grid.disk_integral(&self.source) / (PI * r * r) - self.source_at_boundary()
    }
}

/// Contraction threshold on the ball, `0.99·λ₁(B*)/‖f‖_{W^{1,∞}}`.
pub fn radial_rho_bar(grid: &RadialGrid, f: &NonlinearitySpec, ceiling: f64) -> f64 {
    contraction_threshold(lambda1_disk(grid.radius()), f, ceiling)
}

pub(crate) fn sample_source(grid: &RadialGrid, g: &SourceSpec) -> Result<Vec<f64>> {
    grid.nodes()
        .into_iter()
        .map(|r| {
            g.radial(r)
                .ok_or_else(|| Error::invalid("g", "source is not radially symmetric"))
        })
        .collect()
}

pub fn solve_radial_state_adjoint(
    grid: &RadialGrid,
    rho: f64,
    f: &NonlinearitySpec,
    g: &SourceSpec,
) -> Result<RadialSolution> {
    solve_radial_state_adjoint_with(grid, rho, f, g, &RadialOptions::default())
}

pub fn solve_radial_state_adjoint_with(
    grid: &RadialGrid,
    rho: f64,
    f: &NonlinearitySpec,
    g: &SourceSpec,
    opts: &RadialOptions,
) -> Result<RadialSolution> {
    if !(rho >= 0.0) {
        return Err(Error::invalid("rho", format!("rho must be >= 0, got {rho}")));
    }
    let rho_bar = radial_rho_bar(grid, f, opts.rho_ceiling);
    if rho >= rho_bar {
        return Err(Error::RhoAboveThreshold {
            rho,
            threshold: rho_bar,
        });
    }
    let source = sample_source(grid, g)?;
    let n = grid.points();
    let zeros = vec![0.0; n + 1];

    let mut state = solve_bvp(grid, &zeros, &source, Axis::Regular, 0.0)?;
    let mut iterations = 1;
    if rho > 0.0 {
        loop {
            let rhs: Vec<f64> = source
                .iter()
                .zip(&state)
                .map(|(gi, ui)| gi - rho * f.f(*ui))
                .collect();
            let next = solve_bvp(grid, &zeros, &rhs, Axis::Regular, 0.0)?;
            let inc = next
                .iter()
                .zip(&state)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            state = next;
            iterations += 1;
            if inc <= opts.picard_tol {
                break;
            }
            if iterations > opts.max_picard {
                return Err(Error::NonConvergence {
                    solver: "radial Picard",
                    iterations,
                    residual: inc,
                });
            }
        }
    }

    let adjoint = if rho > 0.0 {
        let q: Vec<f64> = state.iter().map(|u| rho * f.df(*u)).collect();
        let s: Vec<f64> = state.iter().map(|u| -rho * f.f(*u)).collect();
        solve_bvp(grid, &q, &s, Axis::Regular, 0.0)?
    } else {
        zeros
    };

    let r = grid.radius();
    let state_slope = grid.boundary_derivative(&state);
    let adjoint_slope = grid.boundary_derivative(&adjoint);
    let state_curvature = rho * f.f(0.0) - source[n] - state_slope / r;
    Ok(RadialSolution {
        grid: *grid,
        rho,
        f: f.clone(),
        source,
        state,
        adjoint,
        state_slope,
        state_curvature,
        adjoint_slope,
        lagrange: adjoint_slope * state_slope - 0.5 * state_slope * state_slope,
        picard_iterations: iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Source;

    fn ball(n: usize) -> RadialGrid {
        RadialGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::new(1.0, 63).is_err());
        assert!(RadialGrid::new(0.0, 64).is_err());
        let g = ball(64);
        assert_eq!(g.nodes().len(), 65);
        assert_eq!(g.r(64), 1.0);
    }

    #[test]
    fn quadrature_exact_on_cubics() {
        let g = ball(64);
        let v: Vec<f64> = g.nodes().iter().map(|r| r * r * r - r).collect();
        assert!((g.integrate(&v) - (0.25 - 0.5)).abs() < 1e-14);
        let one = vec![1.0; 65];
        assert!((g.disk_integral(&one) - PI).abs() < 1e-13);
    }

    #[test]
    fn poisson_ball_closed_form() {
        let g = ball(4096);
        let s = solve_radial_state_adjoint(&g, 0.0, &NonlinearitySpec::zero(), &SourceSpec::constant(1.0)).unwrap();
        let err = g
            .nodes()
            .iter()
            .zip(&s.state)
            .fold(0.0f64, |m, (r, u)| m.max((u - (1.0 - r * r) / 4.0).abs()));
        assert!(err <= 1e-6, "{err}");
        assert!((s.state_slope + 0.5).abs() <= 1e-5);
        assert!(s.adjoint.iter().all(|&p| p == 0.0));
        assert!((s.lagrange + 0.125).abs() <= 1e-5);
        assert!((s.energy() + PI / 16.0).abs() < 1e-6);
    }

    #[test]
    fn linear_source_flux_identity() {
        let g = ball(2048);
        let src = SourceSpec::new(Source::RadialLinear {
            intercept: 2.0,
            slope: 1.0,
        });
        let s = solve_radial_state_adjoint(&g, 0.0, &NonlinearitySpec::zero(), &src).unwrap();
        assert!((s.state_slope + 2.0 / 3.0).abs() <= 1e-5);
        assert!((s.mean_excess() - 1.0 / 3.0).abs() <= 1e-10);
        assert!(s.state.windows(2).all(|w| w[1] <= w[0]));
        assert!(-s.state_slope >= 0.5 * s.source_at_boundary());
    }

    #[test]
    fn nonlinear_flux_identity() {
        // -φ'(1) = ½ - ρ∫₀¹ t f(φ) dt for g ≡ 1.
        let g = ball(2048);
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let rho = 0.3;
        let s = solve_radial_state_adjoint(&g, rho, &f, &SourceSpec::constant(1.0)).unwrap();
        let tf: Vec<f64> = g.nodes().iter().zip(&s.state).map(|(t, u)| t * f.f(*u)).collect();
        let expect = 0.5 - rho * g.integrate(&tf);
        assert!((-s.state_slope - expect).abs() < 1e-5);
        assert!(s.adjoint[g.points()] == 0.0);
        assert!((s.adjoint[1] - s.adjoint[0]).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_radial_and_large_rho() {
        let g = ball(64);
        let bump = SourceSpec::new(Source::Bump {
            low: 0.0,
            high: 1.0,
            half_width: 0.2,
        });
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        assert!(solve_radial_state_adjoint(&g, 0.0, &f, &bump).is_err());
        let err = solve_radial_state_adjoint(&g, 10.0, &f, &SourceSpec::constant(1.0)).unwrap_err();
        assert!(matches!(err, Error::RhoAboveThreshold { .. }));
    }

    #[test]
    fn second_order_self_convergence() {
        let f = NonlinearitySpec::neg_exp_square(1.0);
        let src = SourceSpec::new(Source::RadialGaussian {
            offset: 1.0,
            amplitude: 1.0,
            width: 0.5,
        });
        let rho = 0.2;
        let sol: Vec<RadialSolution> = [512, 1024, 2048]
            .iter()
            .map(|&n| solve_radial_state_adjoint(&ball(n), rho, &f, &src).unwrap())
            .collect();
        let diff = |a: &RadialSolution, b: &RadialSolution, pick: fn(&RadialSolution) -> &Vec<f64>| {
            let (fa, fb) = (pick(a), pick(b));
            (0..=a.grid.points()).fold(0.0f64, |m, i| m.max((fa[i] - fb[2 * i]).abs()))
        };
        for pick in [
            (|s: &RadialSolution| &s.state) as fn(&RadialSolution) -> &Vec<f64>,
            |s: &RadialSolution| &s.adjoint,
        ] {
            let ratio = diff(&sol[0], &sol[1], pick) / diff(&sol[1], &sol[2], pick);
            assert!((ratio - 4.0).abs() <= 0.6, "{ratio}");
        }
        let slope_ratio = (sol[0].adjoint_slope - sol[1].adjoint_slope)
            / (sol[1].adjoint_slope - sol[2].adjoint_slope);
        assert!((slope_ratio - 4.0).abs() <= 0.6, "{slope_ratio}");
    }
}
