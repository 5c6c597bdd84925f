//! Discretized box `D = [-L, L]²`, cell-centered densities and node-centered
//! scalar fields.
//!
//! Nodes are indexed `(i, j)` with `0 <= i, j <= n`; only the `(n-1)²`
//! interior nodes carry unknowns, the boundary trace is identically zero.
//! Cells are indexed `(i, j)` with `0 <= i, j < n`, cell `(i, j)` spanning
//! nodes `i..=i+1` and `j..=j+1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform square grid over `[-L, L]²` with `n` cells per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    half_width: f64,
    cells_per_side: usize,
    spacing: f64,
}

impl Grid2D {
    pub const MIN_CELLS: usize = 8;

    pub fn new(half_width: f64, cells_per_side: usize) -> Result<Self> {
        if cells_per_side < Self::MIN_CELLS {
            return Err(Error::GridTooCoarse(cells_per_side));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(
                "L",
                format!("half width must be positive, got {half_width}"),
            ));
        }
        Ok(Self {
            half_width,
            cells_per_side,
            spacing: 2.0 * half_width / cells_per_side as f64,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.cells_per_side
    }

    pub fn h(&self) -> f64 {
        self.spacing
    }

    /// Area of a single cell.
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// `|D|`.
    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }

    /// Number of interior nodes per side, `n - 1`.
    pub fn interior_per_side(&self) -> usize {
        self.cells_per_side - 1
    }

    pub fn num_interior(&self) -> usize {
        let m = self.interior_per_side();
        m * m
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    /// Flat index of interior node `(i, j)`, `1 <= i, j <= n-1`.
    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && j >= 1 && i < self.cells_per_side && j < self.cells_per_side);
        (j - 1) * self.interior_per_side() + (i - 1)
    }

    /// Inverse of [`Grid2D::node_index`].
    #[inline]
    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        let m = self.interior_per_side();
        (k % m + 1, k / m + 1)
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.cells_per_side + i
    }

    #[inline]
    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.cells_per_side, c / self.cells_per_side)
    }

    /// Coordinates of node `(i, j)` (boundary nodes included).
    #[inline]
    pub fn node_xy(&self, i: usize, j: usize) -> (f64, f64) {
        (
            -self.half_width + i as f64 * self.spacing,
            -self.half_width + j as f64 * self.spacing,
        )
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            -self.half_width + (i as f64 + 0.5) * self.spacing,
            -self.half_width + (j as f64 + 0.5) * self.spacing,
        )
    }

    /// True for nodes on `∂D` (homogeneous Dirichlet).
    pub fn is_boundary_node(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.cells_per_side || j == self.cells_per_side
    }

    /// Coordinates of every interior node in flat order.
    pub fn interior_coords(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.num_interior()).map(move |k| {
            let (i, j) = self.node_ij(k);
            self.node_xy(i, j)
        })
    }
}

/// Relaxed density, one value per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl DensityField {
    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.num_cells()],
        }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫_D a`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// `∫_D a(1-a) / |D|`; zero for an indicator.
    pub fn binariness(&self) -> f64 {
        self.values.iter().map(|a| a * (1.0 - a)).sum::<f64>() * self.grid.cell_area()
            / self.grid.area()
    }

    pub fn is_admissible(&self, mass_bound: f64, tol: f64) -> bool {
        self.values.iter().all(|&a| (0.0..=1.0).contains(&a)) && self.mass() <= mass_bound + tol
    }

    /// Density averaged to interior nodes (mean of the four adjacent cells).
    pub fn to_nodes(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.num_interior())
            .map(|k| {
                let (i, j) = g.node_ij(k);
                0.25 * (self.values[g.cell_index(i - 1, j - 1)]
                    + self.values[g.cell_index(i, j - 1)]
                    + self.values[g.cell_index(i - 1, j)]
                    + self.values[g.cell_index(i, j)])
            })
            .collect()
    }
}

/// Node-centered field on the interior nodes; zero on `∂D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_interior() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_interior(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "field",
                format!("non-finite value at interior node {k}"),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.num_interior()],
        }
    }

    /// Samples `f` at every interior node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.interior_coords().map(|(x, y)| f(x, y)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at node `(i, j)`, including zero boundary values.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        if self.grid.is_boundary_node(i, j) {
            0.0
        } else {
            self.values[self.grid.node_index(i, j)]
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Anything that can be integrated over `D` on its grid.
pub trait Integrable {
    fn grid(&self) -> &Grid2D;
    fn quadrature(&self) -> f64;
}

impl Integrable for DensityField {
    fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Midpoint rule over cells.
    fn quadrature(&self) -> f64 {
        self.mass()
    }
}

impl Integrable for ScalarField {
    fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Nodal (trapezoidal) rule; boundary nodes contribute zero.
    fn quadrature(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }
}

/// `∫_D field`, checking that the field lives on `grid`.
pub fn integrate<F: Integrable>(field: &F, grid: &Grid2D) -> Result<f64> {
    if field.grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: grid.n(),
            got: field.grid().n(),
        });
    }
    Ok(field.quadrature())
}

/// Bisection tolerance on the shift `μ`.
pub const PROJECTION_TOL: f64 = 1e-12;
pub const PROJECTION_MAX_ITER: usize = 200;

/// Euclidean projection onto `{0 <= a <= 1, ∫a <= m}`.
///
/// The result is `clip(a_raw - μ, 0, 1)` where `μ = 0` if the plain clip is
/// already feasible and otherwise the smallest bracketed shift whose mass does
/// not exceed `m`.
pub fn project_density(a_raw: &[f64], mass_bound: f64, grid: &Grid2D) -> Result<DensityField> {
    let (field, _) = project_density_with_shift(a_raw, mass_bound, grid)?;
    Ok(field)
}

/// Same as [`project_density`], also returning the multiplier `μ`.
pub fn project_density_with_shift(
    a_raw: &[f64],
    mass_bound: f64,
    grid: &Grid2D,
) -> Result<(DensityField, f64)> {
    if !(mass_bound > 0.0) {
        return Err(Error::invalid(
            "m",
            format!("mass bound must be positive, got {mass_bound}"),
        ));
    }
    if a_raw.len() != grid.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: grid.num_cells(),
            got: a_raw.len(),
        });
    }
    if a_raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("a_raw", "non-finite density value"));
    }
    let area = grid.cell_area();
    let shifted_mass = |mu: f64| a_raw.iter().map(|&a| (a - mu).clamp(0.0, 1.0)).sum::<f64>() * area;
    let shifted = |mu: f64| a_raw.iter().map(|&a| (a - mu).clamp(0.0, 1.0)).collect::<Vec<_>>();

    if shifted_mass(0.0) <= mass_bound {
        return Ok((DensityField::from_values(*grid, shifted(0.0))?, 0.0));
    }
    // mass(μ) is non-increasing; at μ = max(a_raw) every cell clips to zero.
    let mut lo = 0.0;
    let mut hi = a_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..PROJECTION_MAX_ITER {
        if hi - lo <= PROJECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if shifted_mass(mid) > mass_bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((DensityField::from_values(*grid, shifted(hi))?, hi))
}

/// Cell indicator of the centered disk of radius `radius`.
pub fn disk_indicator(grid: &Grid2D, radius: f64) -> Result<DensityField> {
    if !(radius >= 0.0) || radius >= grid.half_width() {
        return Err(Error::invalid(
            "R",
            format!(
                "disk radius must satisfy 0 <= R < L = {}, got {radius}",
                grid.half_width()
            ),
        ));
    }
    let n = grid.n();
    let mut values = vec![0.0; grid.num_cells()];
    for j in 0..n {
        for i in 0..n {
            let (x, y) = grid.cell_center(i, j);
            if x.hypot(y) < radius {
                values[grid.cell_index(i, j)] = 1.0;
            }
        }
    }
    DensityField::from_values(*grid, values)
}
