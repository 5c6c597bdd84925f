//! Nonlinearity `f`, source `g`, and the thresholds on `ρ` under which the
//! solvers are certified.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Dense sampling resolution used for sup-norms and monotonicity audits.
pub const AUDIT_SAMPLES: usize = 10_000;

/// Contraction safety factor applied to `λ₁/‖f‖_{W^{1,∞}}`.
pub const CONTRACTION_SAFETY: f64 = 0.99;

/// Value reported for `ρ̄` when `f ≡ 0` makes the threshold infinite.
pub const DEFAULT_RHO_CEILING: f64 = 1e6;

/// Built-in nonlinearities. Every kind is evaluated with its argument clamped
/// to the truncation window `[-X, X]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Zero,
    /// `f(x) = intercept + slope·x`.
    Affine { intercept: f64, slope: f64 },
    /// `f(x) = 1 - 2x`.
    OneMinusTwoX,
    /// `f(x) = -exp(x²)`.
    NegExpSquare,
    /// Piecewise-linear interpolation of tabulated `f`, `f'`, `f''`.
    Tabulated {
        x: Vec<f64>,
        f: Vec<f64>,
        df: Vec<f64>,
        d2f: Vec<f64>,
    },
}

/// A nonlinearity together with its truncation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub law: Nonlinearity,
    /// `X`: beyond `[-X, X]` the function is constant.
    pub window: f64,
}

fn lerp_table(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

impl NonlinearitySpec {
    pub fn new(law: Nonlinearity, window: f64) -> Result<Self> {
        if !(window > 0.0) || !window.is_finite() {
            return Err(Error::invalid(
                "f.window",
                format!("truncation window must be positive and finite, got {window}"),
            ));
        }
        if let Nonlinearity::Tabulated { x, f, df, d2f } = &law {
            if x.len() < 2 || f.len() != x.len() || df.len() != x.len() || d2f.len() != x.len() {
                return Err(Error::invalid(
                    "f.params",
                    "tabulated nonlinearity needs >= 2 points and equal-length columns",
                ));
            }
            if x.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid("f.params", "tabulated x must be increasing"));
            }
            if x[0] > -window || x[x.len() - 1] < window {
                return Err(Error::invalid(
                    "f.params",
                    "tabulated range must cover the truncation window",
                ));
            }
        }
        Ok(Self { law, window })
    }

    pub fn zero() -> Self {
        Self {
            law: Nonlinearity::Zero,
            window: 1.0,
        }
    }

    pub fn one_minus_two_x(window: f64) -> Self {
        Self {
            law: Nonlinearity::OneMinusTwoX,
            window,
        }
    }

    pub fn neg_exp_square(window: f64) -> Self {
        Self {
            law: Nonlinearity::NegExpSquare,
            window,
        }
    }

    /// Untruncated `(f, f', f'')` at `x`.
    fn raw(&self, x: f64) -> (f64, f64, f64) {
        match &self.law {
            Nonlinearity::Zero => (0.0, 0.0, 0.0),
            Nonlinearity::Affine { intercept, slope } => (intercept + slope * x, *slope, 0.0),
            Nonlinearity::OneMinusTwoX => (1.0 - 2.0 * x, -2.0, 0.0),
            Nonlinearity::NegExpSquare => {
                let e = (x * x).exp();
                (-e, -2.0 * x * e, -(2.0 + 4.0 * x * x) * e)
            }
            Nonlinearity::Tabulated { x: xs, f, df, d2f } => (
                lerp_table(xs, f, x),
                lerp_table(xs, df, x),
                lerp_table(xs, d2f, x),
            ),
        }
    }

    /// `f^{(order)}(x)` with truncation applied; `order` must be 0, 1 or 2.
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        let inside = x.abs() <= self.window;
        let (f, df, d2f) = self.raw(x.clamp(-self.window, self.window));
        match order {
            0 => f,
            1 if inside => df,
            2 if inside => d2f,
            1 | 2 => 0.0,
            _ => panic!("derivative order {order} not supported"),
        }
    }

    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    #[inline]
    pub fn df(&self, x: f64) -> f64 {
        self.eval(x, 1)
    }

    #[inline]
    pub fn d2f(&self, x: f64) -> f64 {
        self.eval(x, 2)
    }

    fn window_samples(&self) -> impl Iterator<Item = f64> + '_ {
        let w = self.window;
        (0..=AUDIT_SAMPLES)
            .map(move |i| -w + 2.0 * w * i as f64 / AUDIT_SAMPLES as f64)
            .chain(std::iter::once(0.0))
    }

    /// `‖f‖_∞` (attained inside the window since `f` is constant outside).
    pub fn sup_f(&self) -> f64 {
        self.window_samples().map(|x| self.f(x).abs()).fold(0.0, f64::max)
    }

    /// `‖f'‖_∞`.
    pub fn sup_df(&self) -> f64 {
        let mut s = self.window_samples().map(|x| self.df(x).abs()).fold(0.0, f64::max);
        if let Nonlinearity::Tabulated { x, f, .. } = &self.law {
            // Secant slopes bound the Lipschitz constant of the interpolant.
            for (xw, fw) in x.windows(2).zip(f.windows(2)) {
                s = s.max(((fw[1] - fw[0]) / (xw[1] - xw[0])).abs());
            }
        }
        s
    }

    /// `‖f‖_{W^{1,∞}} = max(‖f‖_∞, ‖f'‖_∞)`; also a Lipschitz constant of `f`.
    pub fn w1inf_norm(&self) -> f64 {
        self.sup_f().max(self.sup_df())
    }
}

/// Right-hand side `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Constant { value: f64 },
    /// `g = intercept - slope·|x|`.
    RadialLinear { intercept: f64, slope: f64 },
    /// `g = offset + amplitude·exp(-|x|²/width²)`.
    RadialGaussian {
        offset: f64,
        amplitude: f64,
        width: f64,
    },
    /// Non-radial bump on `[-L, L]²` ranging in `[low, high]`.
    Bump { low: f64, high: f64, half_width: f64 },
}

/// Source with optional declared H1 bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub source: Source,
    /// Declared `(g₀, g₁)`; checked against samples when present.
    pub declared_bounds: Option<(f64, f64)>,
}

impl SourceSpec {
    pub fn new(source: Source) -> Self {
        Self {
            source,
            declared_bounds: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Source::Constant { value })
    }

    pub fn with_bounds(mut self, g0: f64, g1: f64) -> Self {
        self.declared_bounds = Some((g0, g1));
        self
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.source {
            Source::Bump {
                low,
                high,
                half_width,
            } => {
                let bx = 0.5 * (1.0 + (PI * x / half_width).cos());
                let by = 0.5 * (1.0 + (PI * y / half_width).cos());
                low + (high - low) * bx * by
            }
            _ => self.radial(x.hypot(y)).expect("radial source"),
        }
    }

    /// Radial profile `g(r)`, or `None` for non-radial sources.
    pub fn radial(&self, r: f64) -> Option<f64> {
        match self.source {
            Source::Constant { value } => Some(value),
            Source::RadialLinear { intercept, slope } => Some(intercept - slope * r),
            Source::RadialGaussian {
                offset,
                amplitude,
                width,
            } => Some(offset + amplitude * (-(r * r) / (width * width)).exp()),
            Source::Bump { .. } => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.source, Source::Bump { .. })
    }

    pub fn is_identically_zero(&self) -> bool {
        matches!(self.source, Source::Constant { value } if value == 0.0)
    }

    /// Sampled `(min, max)` of `g` over the nodes and cell centers of `grid`.
    pub fn sampled_range(&self, grid: &Grid2D) -> (f64, f64) {
        let n = grid.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..=n {
            for i in 0..=n {
                let (x, y) = grid.node_xy(i, j);
                let v = self.eval(x, y);
                lo = lo.min(v);
                hi = hi.max(v);
                if i < n && j < n {
                    let (x, y) = grid.cell_center(i, j);
                    let v = self.eval(x, y);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    /// Radial profile is non-increasing and non-negative on `[0, r_max]`.
    pub fn radial_nonincreasing_nonneg(&self, r_max: f64) -> bool {
        let Some(mut prev) = self.radial(0.0) else {
            return false;
        };
        if prev < 0.0 {
            return false;
        }
        for i in 1..=AUDIT_SAMPLES {
            let v = self.radial(r_max * i as f64 / AUDIT_SAMPLES as f64).unwrap();
            if v > prev + 1e-14 || v < 0.0 {
                return false;
            }
            prev = v;
        }
        true
    }
}

/// Exact first Dirichlet eigenvalue of the square `[-L, L]²`: `2π²/(2L)²`.
pub fn lambda1_lower_bound(grid: &Grid2D) -> f64 {
    let side = 2.0 * grid.half_width();
    2.0 * PI * PI / (side * side)
}

/// Talenti bound on the torsion function of `D`: `(1/2d)(|D|/ω_d)^{2/d}` with `d = 2`.
pub fn torsion_bound(grid: &Grid2D) -> f64 {
    0.25 * grid.area() / PI
}

/// First zero of the Bessel function `J₀`.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// First Dirichlet eigenvalue of the disk of radius `r`.
pub fn lambda1_disk(radius: f64) -> f64 {
    (BESSEL_J0_FIRST_ZERO / radius).powi(2)
}

/// `ρ̄ = 0.99·λ₁/‖f‖_{W^{1,∞}}`, capped at `ceiling` when `f ≡ 0`.
pub fn contraction_threshold(lambda1: f64, f: &NonlinearitySpec, ceiling: f64) -> f64 {
    let lip = f.w1inf_norm();
    if lip > 0.0 {
        (CONTRACTION_SAFETY * lambda1 / lip).min(ceiling)
    } else {
        ceiling
    }
}

/// Flag with an optional human-readable witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub holds: bool,
    pub witness: String,
}

impl Certificate {
    fn new(holds: bool, witness: impl Into<String>) -> Self {
        Self {
            holds,
            witness: witness.into(),
        }
    }
}

/// Sign under which the existence hypotheses were certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSign {
    NonNegative,
    NonPositive,
    Mixed,
}

/// Outcome of [`check_hypotheses`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1: Certificate,
    pub h2: Certificate,
    pub h4: Certificate,
    pub source_sign: SourceSign,
    /// `(g₀, g₁)` used in the thresholds (for `-g` when `g <= 0`).
    pub g_bounds: (f64, f64),
    /// Uniform bound on `‖u‖_∞` from the torsion estimate.
    pub n_mg: f64,
    pub delta: f64,
    pub lambda1_lb: f64,
    pub torsion_bound: f64,
    pub f_sup: f64,
    pub df_sup: f64,
    pub f_w1inf: f64,
    /// Fixed-point threshold.
    pub rho_bar: f64,
    /// Monotonicity threshold (present when H1 holds).
    pub rho_1: Option<f64>,
    /// Sufficient certified existence threshold `min(ρ̄, ρ₁)`.
    pub rho_0: f64,
}

impl HypothesisReport {
    /// `ρ̄·‖f‖_{W^{1,∞}}/λ₁`, strictly below one by construction.
    pub fn contraction_factor(&self) -> f64 {
        self.rho_bar * self.f_w1inf / self.lambda1_lb
    }

    pub fn require_below_rho_bar(&self, rho: f64) -> Result<()> {
        if rho >= self.rho_bar {
            return Err(Error::RhoAboveThreshold {
                rho,
                threshold: self.rho_bar,
            });
        }
        Ok(())
    }
}

/// Options for [`check_hypotheses`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisOptions {
    /// H2 margin as a fraction of `N_mg`.
    pub delta_fraction: f64,
    pub rho_ceiling: f64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self {
            delta_fraction: 0.1,
            rho_ceiling: DEFAULT_RHO_CEILING,
        }
    }
}

/// `x ↦ x·f(x)` non-decreasing on `[0, upper]`; returns the first violation.
fn xf_nondecreasing(f: &NonlinearitySpec, upper: f64, sign: f64) -> Option<f64> {
    let mut prev = 0.0;
    for i in 1..=AUDIT_SAMPLES {
        let x = upper * i as f64 / AUDIT_SAMPLES as f64;
        let v = sign * x * f.f(x);
        if v < prev - 1e-14 * v.abs().max(1.0) {
            return Some(x);
        }
        prev = v;
    }
    None
}

pub fn check_hypotheses(
    f: &NonlinearitySpec,
    g: &SourceSpec,
    mass_bound: f64,
    grid: &Grid2D,
) -> Result<HypothesisReport> {
    check_hypotheses_with(f, g, mass_bound, grid, HypothesisOptions::default())
}

pub fn check_hypotheses_with(
    f: &NonlinearitySpec,
    g: &SourceSpec,
    mass_bound: f64,
    grid: &Grid2D,
    opts: HypothesisOptions,
) -> Result<HypothesisReport> {
    if !(mass_bound > 0.0) || mass_bound > grid.area() {
        return Err(Error::invalid(
            "m",
            format!("need 0 < m <= |D| = {}, got {mass_bound}", grid.area()),
        ));
    }
    if !(opts.delta_fraction > 0.0) {
        return Err(Error::invalid("delta", "H2 margin must be positive"));
    }
    let (g_min, g_max) = g.sampled_range(grid);
    if let Some((g0, g1)) = g.declared_bounds {
        if !(g0 > 0.0) || !(g0 < g1) {
            return Err(Error::Config(format!(
                "declared H1 bounds must satisfy 0 < g0 < g1, got ({g0}, {g1})"
            )));
        }
        let fits_pos = g0 <= g_min && g_max <= g1;
        let fits_neg = g0 <= -g_max && -g_min <= g1;
        if !fits_pos && !fits_neg {
            return Err(Error::Config(format!(
                "declared H1 bounds ({g0}, {g1}) contradict sampled range [{g_min}, {g_max}]"
            )));
        }
    }

    let source_sign = if g_min >= 0.0 {
        SourceSign::NonNegative
    } else if g_max <= 0.0 {
        SourceSign::NonPositive
    } else {
        SourceSign::Mixed
    };
    // Work with |g| and the matching sign of f.
    let (sign, g_lo, g_hi) = match source_sign {
        SourceSign::NonPositive => (-1.0, -g_max, -g_min),
        _ => (1.0, g_min, g_max),
    };
    let g_bounds = g.declared_bounds.unwrap_or((g_lo, g_hi));

    let lambda1 = lambda1_lower_bound(grid);
    let torsion = torsion_bound(grid);
    let f_sup = f.sup_f();
    let df_sup = f.sup_df();
    let f_w1inf = f_sup.max(df_sup);
    let rho_bar = contraction_threshold(lambda1, f, opts.rho_ceiling);
    let g_abs_max = g_min.abs().max(g_max.abs());
    let n_mg = (g_abs_max + rho_bar * f_sup) * torsion;
    let delta = opts.delta_fraction * n_mg;

    let h1 = if source_sign != SourceSign::Mixed && g_lo > 0.0 {
        Certificate::new(true, format!("{g_lo} <= |g| <= {g_hi}"))
    } else {
        Certificate::new(false, format!("sampled g in [{g_min}, {g_max}]"))
    };

    let h2 = match source_sign {
        SourceSign::Mixed => Certificate::new(false, "g changes sign"),
        _ => {
            let f0 = sign * f.f(0.0);
            if f0 > 0.0 {
                Certificate::new(false, format!("sign·f(0) = {f0} > 0"))
            } else {
                match xf_nondecreasing(f, n_mg + delta, sign) {
                    None => Certificate::new(
                        true,
                        format!("x·f(x) non-decreasing on [0, {}]", n_mg + delta),
                    ),
                    Some(x) => Certificate::new(false, format!("x·f(x) decreases near x = {x}")),
                }
            }
        }
    };

    let h4 = {
        let f0 = f.f(0.0);
        if g.is_identically_zero() && f0 < 0.0 {
            // Beyond the window x·f(x) is linear with slope f(±X); sample past it.
            let span = 2.0 * f.window;
            let mut prev = f64::INFINITY;
            let mut violation = None;
            for i in 0..=2 * AUDIT_SAMPLES {
                let x = -span + 2.0 * span * i as f64 / (2 * AUDIT_SAMPLES) as f64;
                let v = x * f.f(x);
                if v >= prev {
                    violation = Some(x);
                    break;
                }
                prev = v;
            }
            match violation {
                None => Certificate::new(true, format!("f(0) = {f0} < 0, x·f(x) decreasing")),
                Some(x) => Certificate::new(false, format!("x·f(x) not decreasing near {x}")),
            }
        } else if !g.is_identically_zero() {
            Certificate::new(false, "g is not identically zero")
        } else {
            Certificate::new(false, format!("f(0) = {f0} >= 0"))
        }
    };

    let rho_1 = if h1.holds {
        let g0 = g_bounds.0;
        let first = if f_sup + n_mg * df_sup > 0.0 {
            CONTRACTION_SAFETY * g0 / (f_sup + n_mg * df_sup)
        } else {
            opts.rho_ceiling
        };
        let second = if df_sup > 0.0 {
            0.5 * lambda1 / df_sup
        } else {
            opts.rho_ceiling
        };
        Some(first.min(second).min(rho_bar))
    } else {
        None
    };
    let rho_0 = rho_1.map_or(rho_bar, |r| r.min(rho_bar));

    Ok(HypothesisReport {
        h1,
        h2,
        h4,
        source_sign,
        g_bounds,
        n_mg,
        delta,
        lambda1_lb: lambda1,
        torsion_bound: torsion,
        f_sup,
        df_sup,
        f_w1inf,
        rho_bar,
        rho_1,
        rho_0,
    })
}
