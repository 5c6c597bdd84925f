use crate::error::{Error, Result};

/// Tridiagonal system with sub-diagonal `lower[i]` (row `i`, column `i-1`),
/// diagonal `diag[i]` and super-diagonal `upper[i]` (row `i`, column `i+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

const PIVOT_FLOOR: f64 = 1e-300;

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Thomas algorithm without pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let sub = if i > 0 { self.lower[i] } else { 0.0 };
            let prev_c = if i > 0 { c[i - 1] } else { 0.0 };
            let prev_d = if i > 0 { d[i - 1] } else { 0.0 };
            let pivot = self.diag[i] - sub * prev_c;
            if !(pivot.abs() > PIVOT_FLOOR) {
                return Err(Error::TridiagonalBreakdown(i));
            }
            c[i] = if i + 1 < n { self.upper[i] / pivot } else { 0.0 };
            d[i] = (rhs[i] - sub * prev_d) / pivot;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }
}
