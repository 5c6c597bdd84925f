use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{solve_bvp, Axis, RadialSolution};
use crate::error::{Error, Result};

/// Source term of the `ξ_k` equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiSource {
    /// `-ρ f'(u) ψ_k`, as inherited from the equation for `η_k`.
    #[default]
    Weighted,
    /// `-ρ ψ_k`.
    Literal,
}

/// Profiles of Fourier mode `k` and its coefficient `ω_{k,ρ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub k: usize,
    pub psi: Vec<f64>,
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub psi_slope: f64,
    pub xi_slope: f64,
    pub zeta_slope: f64,
    pub omega: f64,
}

pub fn solve_modes(rs: &RadialSolution, k: usize, xi_source: XiSource) -> Result<ModeSolution> {
    if k < 1 {
        return Err(Error::invalid("k", "mode index must be >= 1"));
    }
    let grid = &rs.grid;
    let rho = rs.rho;
    let f = &rs.f;
    let n = grid.points();
    let kk = (k * k) as f64;

    let df: Vec<f64> = rs.state.iter().map(|u| f.df(*u)).collect();
    let mut q = vec![0.0; n + 1];
    for i in 1..=n {
        let r = grid.r(i);
        q[i] = kk / (r * r) + rho * df[i];
    }
    let zeros = vec![0.0; n + 1];

    let psi = solve_bvp(grid, &q, &zeros, Axis::Vanishing, -rs.state_slope)?;
    let xi_rhs: Vec<f64> = match xi_source {
        XiSource::Weighted => psi.iter().zip(&df).map(|(p, d)| -rho * d * p).collect(),
        XiSource::Literal => psi.iter().map(|p| -rho * p).collect(),
    };
    let xi = solve_bvp(grid, &q, &xi_rhs, Axis::Vanishing, 0.0)?;
    let zeta_rhs: Vec<f64> = (0..=n)
        .map(|i| -rho * psi[i] * rs.adjoint[i] * f.d2f(rs.state[i]))
        .collect();
    let zeta = solve_bvp(grid, &q, &zeta_rhs, Axis::Vanishing, 0.0)?;

    let psi_slope = grid.boundary_derivative(&psi);
    let xi_slope = grid.boundary_derivative(&xi);
    let zeta_slope = grid.boundary_derivative(&zeta);

    let r = grid.radius();
    let dphi = rs.state_slope;
    let dadj = rs.adjoint_slope;
    let bracket = -2.0 * psi_slope * dadj - dphi * zeta_slope - rs.state_curvature * dadj
        - xi_slope * dphi
        - rs.lagrange / r
        + dphi * dphi / (2.0 * r)
        + rs.source_at_boundary() * dphi
        - dphi * psi_slope;
    Ok(ModeSolution {
        k,
        psi,
        xi,
        zeta,
        psi_slope,
        xi_slope,
        zeta_slope,
        omega: PI * r * bracket,
    })
}
