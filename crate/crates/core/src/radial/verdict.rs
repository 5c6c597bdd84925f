use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_modes, ModeSolution, RadialSolution, XiSource};
use crate::error::{Error, Result};

pub const MIN_MODES: usize = 8;
pub const DEFAULT_MODES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    MarginallyStable,
    Unstable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::MarginallyStable => "marginally-stable",
            Verdict::Unstable => "unstable",
        })
    }
}

/// Least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("fit", "need at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit", "abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Modes `1..=modes`, computed in parallel.
pub fn spectrum(rs: &RadialSolution, modes: usize, xi_source: XiSource) -> Result<Vec<ModeSolution>> {
    (1..=modes)
        .into_par_iter()
        .map(|k| solve_modes(rs, k, xi_source))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictOptions {
    pub modes: usize,
    pub xi_source: XiSource,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self {
            modes: DEFAULT_MODES,
            xi_source: XiSource::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rho: f64,
    pub radius: f64,
    pub lagrange: f64,
    pub state_slope: f64,
    pub adjoint_slope: f64,
    /// `ω_{k,ρ}` for `k = 1..=K`.
    pub omega: Vec<f64>,
    pub psi_slopes: Vec<f64>,
    pub xi_slopes: Vec<f64>,
    pub zeta_slopes: Vec<f64>,
    /// `c₁ = (1/(πR²))∫g - g(R)`.
    pub mean_excess: f64,
    pub source_integral: f64,
    /// `2πR²g(R) ≤ ∫g`.
    pub sufficient_condition: bool,
    pub growth_fit: LinearFit,
    pub fit_modes: (usize, usize),
    pub tolerance: f64,
    pub min_omega: f64,
    pub verdict: Verdict,
    pub xi_source: XiSource,
}

pub fn stability_verdict(rs: &RadialSolution, modes: usize) -> Result<StabilityReport> {
    stability_verdict_with(
        rs,
        &VerdictOptions {
            modes,
            ..VerdictOptions::default()
        },
    )
}

pub fn stability_verdict_with(rs: &RadialSolution, opts: &VerdictOptions) -> Result<StabilityReport> {
    let k_max = opts.modes;
    if k_max < MIN_MODES {
        return Err(Error::invalid(
            "modes",
            format!("need at least {MIN_MODES} modes, got {k_max}"),
        ));
    }
    let modes = spectrum(rs, k_max, opts.xi_source)?;
    let omega: Vec<f64> = modes.iter().map(|m| m.omega).collect();

    let k_lo = k_max / 2;
    let ks: Vec<f64> = (k_lo..=k_max).map(|k| k as f64).collect();
    let growth_fit = linear_fit(&ks, &omega[k_lo - 1..])?;

    let r = rs.radius();
    let tolerance = 1e-8 * PI * r * rs.state_slope.powi(2).max(1.0);
    let min_omega = omega.iter().copied().fold(f64::INFINITY, f64::min);
    let verdict = if min_omega < -tolerance {
        Verdict::Unstable
    } else if min_omega <= tolerance {
        Verdict::MarginallyStable
    } else {
        Verdict::Stable
    };
    let source_integral = rs.grid.disk_integral(&rs.source);
    Ok(StabilityReport {
        rho: rs.rho,
        radius: r,
        lagrange: rs.lagrange,
        state_slope: rs.state_slope,
        adjoint_slope: rs.adjoint_slope,
        psi_slopes: modes.iter().map(|m| m.psi_slope).collect(),
        xi_slopes: modes.iter().map(|m| m.xi_slope).collect(),
        zeta_slopes: modes.iter().map(|m| m.zeta_slope).collect(),
        omega,
        mean_excess: rs.mean_excess(),
        source_integral,
        sufficient_condition: 2.0 * PI * r * r * rs.source_at_boundary() <= source_integral,
        growth_fit,
        fit_modes: (k_lo, k_max),
        tolerance,
        min_omega,
        verdict,
        xi_source: opts.xi_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{NonlinearitySpec, Source, SourceSpec};
    use crate::radial::{solve_radial_state_adjoint, RadialGrid};

    fn solve(g: SourceSpec, rho: f64, f: NonlinearitySpec) -> RadialSolution {
        solve_radial_state_adjoint(&RadialGrid::new(1.0, 4096).unwrap(), rho, &f, &g).unwrap()
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-14 && (fit.intercept + 1.0).abs() < 1e-13);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn constant_source_is_marginal() {
        let rs = solve(SourceSpec::constant(1.0), 0.0, NonlinearitySpec::zero());
        let rep = stability_verdict(&rs, 20).unwrap();
        assert_eq!(rep.verdict, Verdict::MarginallyStable);
        assert!(rep.omega[1..].iter().all(|&w| w > 0.0));
        assert!((rep.growth_fit.slope - PI / 4.0).abs() <= 0.02 * PI / 4.0);
        assert_eq!(rep.fit_modes, (10, 20));
        assert!(stability_verdict(&rs, 7).is_err());
    }

    #[test]
    fn decreasing_source_is_stable() {
        let g = SourceSpec::new(Source::RadialLinear {
            intercept: 2.0,
            slope: 1.0,
        });
        let rep = stability_verdict(&solve(g, 0.0, NonlinearitySpec::zero()), 12).unwrap();
        assert_eq!(rep.verdict, Verdict::Stable);
        assert!((rep.mean_excess - 1.0 / 3.0).abs() < 1e-4);
        assert!((rep.source_integral - 4.0 * PI / 3.0).abs() < 1e-10);
        assert!(!rep.sufficient_condition);
    }

    #[test]
    fn destabilizing_nonlinearity() {
        let rs = solve(SourceSpec::constant(1.0), 0.01, NonlinearitySpec::one_minus_two_x(1.0));
        let rep = stability_verdict(&rs, 8).unwrap();
        assert_eq!(rep.verdict, Verdict::Unstable);
        assert!(rep.omega[0] < 0.0);
    }

    #[test]
    fn parallel_spectrum_matches_sequential() {
        let rs = solve(SourceSpec::constant(1.0), 0.05, NonlinearitySpec::neg_exp_square(1.0));
        let par = spectrum(&rs, 10, XiSource::Weighted).unwrap();
        for (k, m) in (1..=10).zip(&par) {
            let seq = solve_modes(&rs, k, XiSource::Weighted).unwrap();
            assert_eq!(seq.omega.to_bits(), m.omega.to_bits());
        }
    }
}
