use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    radial_rho_bar, solve_bvp, solve_modes, solve_radial_state_adjoint, Axis, RadialGrid,
    XiSource,
};
use crate::error::{Error, Result};
use crate::problem::{NonlinearitySpec, Source, SourceSpec, AUDIT_SAMPLES, DEFAULT_RHO_CEILING};

/// First-order expansion of `ω_{1,ρ}` around `ρ = 0` for `g ≡ 1`, `R = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBundle {
    pub grid: RadialGrid,
    pub phi0: Vec<f64>,
    /// `-(1/r)(rφ₁')' = -f(φ₀)`, `φ₁(1) = 0`.
    pub phi1: Vec<f64>,
    /// First-order part of `ψ_{1,ρ}`.
    pub y1: Vec<f64>,
    /// First-order part of `ξ_{1,ρ}` for the literal `ξ` source.
    pub z1: Vec<f64>,
    /// First-order part of `ξ_{1,ρ}` for the `f'`-weighted `ξ` source.
    pub z1_weighted: Vec<f64>,
    /// `y₁ + z₁`.
    pub w1: Vec<f64>,
    /// `w₁` solved directly from its own equation.
    pub w1_direct: Vec<f64>,
    /// `∫₀¹ t f(φ₀(t)) dt`.
    pub flux_integral: f64,
    pub w1_boundary: f64,
    pub w1_slope: f64,
    /// `σ = (w₁ + w₁')(1)/4`.
    pub sigma: f64,
    /// `max |w₁ - (y₁ + z₁)|`.
    pub superposition_error: f64,
    /// `lim ω_{1,ρ}/ρ` for the literal `ξ` source: `(π/2)(w₁ + w₁')(1)`.
    pub slope_literal: f64,
    /// `lim ω_{1,ρ}/ρ` for the weighted `ξ` source.
    pub slope_weighted: f64,
}

impl PerturbationBundle {
    /// Limit of `ω_{1,ρ}/ρ` as `ρ → 0` under the given `ξ` source.
    pub fn hessian_slope(&self, xi_source: XiSource) -> f64 {
        match xi_source {
            XiSource::Literal => self.slope_literal,
            XiSource::Weighted => self.slope_weighted,
        }
    }
}

fn is_unit_constant(g: &SourceSpec) -> bool {
    matches!(g.source, Source::Constant { value } if value == 1.0)
}

pub fn perturbation_slope(
    f: &NonlinearitySpec,
    g: &SourceSpec,
    points: usize,
) -> Result<PerturbationBundle> {
    if !is_unit_constant(g) {
        return Err(Error::invalid("g", "the expansion is set up for g ≡ 1"));
    }
    let grid = RadialGrid::new(1.0, points)?;
    let n = grid.points();
    let nodes = grid.nodes();
    let base = solve_radial_state_adjoint(&grid, 0.0, &NonlinearitySpec::zero(), g)?;
    let phi0 = base.state;
    let slope0 = base.state_slope;

    let f0: Vec<f64> = phi0.iter().map(|u| f.f(*u)).collect();
    let df0: Vec<f64> = phi0.iter().map(|u| f.df(*u)).collect();
    let tf: Vec<f64> = nodes.iter().zip(&f0).map(|(t, v)| t * v).collect();
    let flux_integral = grid.integrate(&tf);

    let zeros = vec![0.0; n + 1];
    let phi1 = solve_bvp(
        &grid,
        &zeros,
        &f0.iter().map(|v| -v).collect::<Vec<_>>(),
        Axis::Regular,
        0.0,
    )?;

    // Each equation -(ry')' = -y/r + r²s is solved as -(1/r)(ry')' + y/r² = r·s.
    let mut q = vec![0.0; n + 1];
    for (i, qi) in q.iter_mut().enumerate().skip(1) {
        *qi = 1.0 / (nodes[i] * nodes[i]);
    }
    let rs = |s: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..=n).map(|i| nodes[i] * s(i)).collect() };

    let y1 = solve_bvp(&grid, &q, &rs(&|i| slope0 * df0[i]), Axis::Vanishing, -flux_integral)?;
    let z1 = solve_bvp(&grid, &q, &rs(&|_| slope0), Axis::Vanishing, 0.0)?;
    let z1_weighted = solve_bvp(&grid, &q, &rs(&|i| slope0 * df0[i]), Axis::Vanishing, 0.0)?;
    let w1: Vec<f64> = y1.iter().zip(&z1).map(|(a, b)| a + b).collect();
    let w1_direct = solve_bvp(
        &grid,
        &q,
        &rs(&|i| -0.5 * df0[i] - 0.5),
        Axis::Vanishing,
        -flux_integral,
    )?;
    let superposition_error = w1
        .iter()
        .zip(&w1_direct)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let w1_slope = grid.boundary_derivative(&w1);
    let w1_boundary = w1[n];
    let weighted_slope = grid.boundary_derivative(&y1) + grid.boundary_derivative(&z1_weighted);
    Ok(PerturbationBundle {
        grid,
        phi0,
        phi1,
        y1,
        z1,
        z1_weighted,
        w1,
        w1_direct,
        flux_integral,
        w1_boundary,
        w1_slope,
        sigma: (w1_boundary + w1_slope) / 4.0,
        superposition_error,
        slope_literal: 0.5 * PI * (w1_boundary + w1_slope),
        slope_weighted: 0.5 * PI * (w1_boundary + weighted_slope),
    })
}

/// Checks `f ≥ 0` and `f' < -1` on `[0, sup)`.
pub fn certify_destabilizing(f: &NonlinearitySpec, sup: f64) -> Result<()> {
    for i in 0..AUDIT_SAMPLES {
        let x = sup * i as f64 / AUDIT_SAMPLES as f64;
        if f.f(x) < 0.0 {
            return Err(Error::HypothesisNotCertified(format!("f({x}) < 0")));
        }
        if !(f.df(x) < -1.0) {
            return Err(Error::HypothesisNotCertified(format!(
                "f'({x}) = {} is not below -1",
                f.df(x)
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityEntry {
    pub rho: f64,
    pub omega1: f64,
    /// `ω_{1,ρ}/ρ`, absent at `ρ = 0`.
    pub ratio: Option<f64>,
    pub marginal: bool,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub entries: Vec<InstabilityEntry>,
    pub threshold: f64,
    pub sigma: f64,
    pub predicted_slope: f64,
    pub xi_source: XiSource,
    /// Every positive `ρ` below the threshold gives `ω_{1,ρ} < 0`.
    pub all_unstable: bool,
    pub mode: usize,
    /// Normal displacement of the destabilizing mode.
    pub boundary_perturbation: String,
}

/// `ω_{1,ρ}` for `g ≡ 1` on the unit ball over a list of `ρ`.
pub fn instability_demo(
    f: &NonlinearitySpec,
    rho_list: &[f64],
    points: usize,
    xi_source: XiSource,
) -> Result<InstabilityReport> {
    let g = SourceSpec::constant(1.0);
    let bundle = perturbation_slope(f, &g, points)?;
    let sup0 = bundle.phi0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    certify_destabilizing(f, 2.0 * sup0)?;
    let grid = bundle.grid;
    let threshold = radial_rho_bar(&grid, f, DEFAULT_RHO_CEILING);

    let mut entries = Vec::with_capacity(rho_list.len());
    for &rho in rho_list {
        let rs = solve_radial_state_adjoint(&grid, rho, f, &g)?;
        let omega1 = solve_modes(&rs, 1, xi_source)?.omega;
        let tol = 1e-8 * PI * rs.state_slope.powi(2).max(1.0);
        entries.push(InstabilityEntry {
            rho,
            omega1,
            ratio: (rho > 0.0).then(|| omega1 / rho),
            marginal: omega1.abs() <= tol,
            unstable: omega1 < -tol,
        });
    }
    let all_unstable = entries
        .iter()
        .filter(|e| e.rho > 0.0 && e.rho <= threshold)
        .all(|e| e.unstable);
    Ok(InstabilityReport {
        entries,
        threshold,
        sigma: bundle.sigma,
        predicted_slope: bundle.hessian_slope(xi_source),
        xi_source,
        all_unstable,
        mode: 1,
        boundary_perturbation: "cos(theta)".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_w1() {
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let b = perturbation_slope(&f, &SourceSpec::constant(1.0), 4096).unwrap();
        assert!((b.flux_integral - 0.375).abs() < 1e-10);
        assert!((b.w1_boundary + 0.375).abs() < 1e-10);
        assert!((b.w1_slope + 0.5).abs() < 1e-5);
        assert!((b.sigma + 7.0 / 32.0).abs() < 1e-4);
        assert!(b.superposition_error < 1e-10);
        assert_eq!(b.w1[0], 0.0);
        for (r, w) in b.grid.nodes().iter().zip(&b.w1) {
            let exact = -5.0 / 16.0 * r - r.powi(3) / 16.0;
            assert!((w - exact).abs() < 1e-6);
        }
        assert!((b.slope_literal + 7.0 * PI / 16.0).abs() < 1e-4);
        assert!((b.slope_weighted + 5.0 * PI / 8.0).abs() < 1e-4);
    }

    #[test]
    fn zero_nonlinearity_superposition() {
        let b = perturbation_slope(&NonlinearitySpec::zero(), &SourceSpec::constant(1.0), 512).unwrap();
        assert_eq!(b.w1_boundary, 0.0);
        assert!(b.superposition_error < 1e-10);
        assert!(b.y1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn requires_unit_source() {
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        assert!(perturbation_slope(&f, &SourceSpec::constant(2.0), 512).is_err());
    }

    #[test]
    fn omega_over_rho_tends_to_expansion_slope() {
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        for xi in [XiSource::Literal, XiSource::Weighted] {
            let rep = instability_demo(&f, &[1e-2, 1e-3], 4096, xi).unwrap();
            let target = rep.predicted_slope;
            let errs: Vec<f64> = rep
                .entries
                .iter()
                .map(|e| (e.ratio.unwrap() - target).abs() / target.abs())
                .collect();
            assert!(errs[0] < 0.05 && errs[1] < 0.01, "{xi:?}: {errs:?}");
            assert!(errs[1] < errs[0]);
            assert!(rep.all_unstable);
        }
    }

    #[test]
    fn demo_edge_cases() {
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let rep = instability_demo(&f, &[0.0], 1024, XiSource::Weighted).unwrap();
        assert!(rep.entries[0].marginal && !rep.entries[0].unstable);
        assert!(rep.entries[0].ratio.is_none());
        let err = instability_demo(&NonlinearitySpec::zero(), &[1e-3], 1024, XiSource::Weighted);
        assert!(matches!(err, Err(Error::HypothesisNotCertified(_))));
    }
}
