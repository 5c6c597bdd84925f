//! Acceptance checks with pinned tolerances. Each check reports its measured
//! quantities and wall-clock time; a runtime limit is part of the verdict.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_semilinear, SemilinearOptions};
use crate::error::Result;
use crate::grid::{disk_indicator, Grid2D};
use crate::objective::{random_pair_gradient_check, GradientCheckOptions, RelaxedProblem};
use crate::optimizer::{hole_perturbation, m_continuation_probe, monotonicity_probe, topological_sign_field};
use crate::problem::{check_hypotheses, NonlinearitySpec, Source, SourceSpec};
use crate::radial::{
    instability_demo, linear_fit, perturbation_slope, solve_modes, solve_radial_state_adjoint,
    stability_verdict, RadialGrid, Verdict, XiSource,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: String,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub seconds: f64,
    pub runtime_limit: Option<f64>,
}

impl CriterionResult {
    /// One-line summary, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let details: Vec<String> = self
            .measurements
            .iter()
            .map(|m| {
                format!(
                    "{}={:.6e} ({}{})",
                    m.name,
                    m.value,
                    m.target,
                    if m.ok { "" } else { " violated" }
                )
            })
            .collect();
        let limit = self
            .runtime_limit
            .map_or(String::new(), |l| format!(" < {l}s"));
        format!(
            "{status} [{:>2}] {} | {} | {:.2}s{limit}",
            self.id,
            self.title,
            details.join("; "),
            self.seconds
        )
    }
}

struct Recorder {
    measurements: Vec<Measurement>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            measurements: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, value: f64, ok: bool, target: impl Into<String>) {
        self.measurements.push(Measurement {
            name: name.into(),
            value,
            target: target.into(),
            ok,
        });
    }

    fn within(&mut self, name: &str, value: f64, expected: f64, tol: f64) {
        self.check(
            name,
            value,
            (value - expected).abs() <= tol,
            format!("{expected:.6e} ± {tol:.1e}"),
        );
    }

    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value, value <= bound, format!("<= {bound:.1e}"));
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.check(name, if ok { 1.0 } else { 0.0 }, ok, "1");
    }
}

fn run_check(
    id: usize,
    title: &str,
    runtime_limit: Option<f64>,
    body: impl FnOnce(&mut Recorder) -> Result<()>,
) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let outcome = body(&mut rec);
    let seconds = start.elapsed().as_secs_f64();
    if let Err(e) = outcome {
        rec.check(&format!("error: {e}"), f64::NAN, false, "no error");
    }
    let in_time = runtime_limit.is_none_or(|l| seconds < l);
    CriterionResult {
        id,
        title: title.into(),
        passed: in_time && !rec.measurements.is_empty() && rec.measurements.iter().all(|m| m.ok),
        measurements: rec.measurements,
        seconds,
        runtime_limit,
    }
}

fn unit_ball(points: usize) -> Result<RadialGrid> {
    RadialGrid::new(1.0, points)
}

fn cone_source() -> SourceSpec {
    SourceSpec::new(Source::RadialLinear {
        intercept: 2.0,
        slope: 1.0,
    })
}

/// `g = 2 - |x|/(√2 L)`, ranging in `[1, 2]` on `[-L, L]²`.
pub fn bounded_decreasing_source(grid: &Grid2D) -> SourceSpec {
    SourceSpec::new(Source::RadialLinear {
        intercept: 2.0,
        slope: 1.0 / (2f64.sqrt() * grid.half_width()),
    })
}

pub fn radial_state_exactness() -> CriterionResult {
    run_check(1, "radial state exactness", Some(1.0), |rec| {
        let grid = unit_ball(4096)?;
        let rs = solve_radial_state_adjoint(&grid, 0.0, &NonlinearitySpec::zero(), &SourceSpec::constant(1.0))?;
        let err = grid
            .nodes()
            .iter()
            .zip(&rs.state)
            .fold(0.0f64, |m, (r, u)| m.max((u - (1.0 - r * r) / 4.0).abs()));
        rec.at_most("max|phi0-(1-r^2)/4|", err, 1e-6);
        rec.within("-phi0'(1)", -rs.state_slope, 0.5, 1e-5);
        Ok(())
    })
}

pub fn spectrum_closed_form() -> CriterionResult {
    run_check(2, "spectrum closed form", Some(5.0), |rec| {
        let rs = solve_radial_state_adjoint(&unit_ball(4096)?, 0.0, &NonlinearitySpec::zero(), &SourceSpec::constant(1.0))?;
        let rep = stability_verdict(&rs, 20)?;
        rec.at_most("|omega_1|", rep.omega[0].abs(), 1e-6 * PI);
        let worst = (2..=20)
            .map(|k| {
                let exact = PI * (k as f64 - 1.0) / 4.0;
                (rep.omega[k - 1] - exact).abs() / exact
            })
            .fold(0.0, f64::max);
        rec.at_most("max rel err k=2..20", worst, 1e-3);
        Ok(())
    })
}

pub fn stable_example() -> CriterionResult {
    run_check(3, "stable example g = 2 - r", None, |rec| {
        let rs = solve_radial_state_adjoint(&unit_ball(4096)?, 0.0, &NonlinearitySpec::zero(), &cone_source())?;
        let rep = stability_verdict(&rs, 20)?;
        rec.within("omega_1", rep.omega[0], 2.0 * PI / 9.0, 1e-3);
        rec.flag("verdict stable", rep.verdict == Verdict::Stable);
        rec.within("c1", rep.mean_excess, 1.0 / 3.0, 1e-4);
        Ok(())
    })
}

pub fn instability_reproduction() -> CriterionResult {
    run_check(4, "instability reproduction", Some(10.0), |rec| {
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let bundle = perturbation_slope(&f, &SourceSpec::constant(1.0), 4096)?;
        let sigma_ref = -7.0 / 32.0;
        rec.within("sigma", bundle.sigma, sigma_ref, 1e-4);
        let rep = instability_demo(&f, &[1e-2, 1e-3], 4096, XiSource::default())?;
        for (entry, band) in rep.entries.iter().zip([0.10, 0.03]) {
            let ratio = entry.ratio.unwrap_or(f64::NAN);
            let lo = sigma_ref * (1.0 + band);
            let hi = sigma_ref * (1.0 - band);
            rec.check(
                &format!("omega1/rho@{:e}", entry.rho),
                ratio,
                (lo..=hi).contains(&ratio),
                format!("in [{lo:.5}, {hi:.5}]"),
            );
        }
        Ok(())
    })
}

pub fn switching_gradient() -> CriterionResult {
    run_check(5, "switching-function gradient", Some(60.0), |rec| {
        let grid = Grid2D::new(1.0, 64)?;
        let p = RelaxedProblem::new(
            grid,
            100.0,
            0.05,
            NonlinearitySpec::one_minus_two_x(1.0),
            SourceSpec::constant(1.0),
        )
        .with_solver(SemilinearOptions::tight());
        let report = random_pair_gradient_check(&p, 20, &GradientCheckOptions::default())?;
        rec.at_most("max rel FD mismatch", report.max_rel_error, 1e-4);
        Ok(())
    })
}

pub fn relaxed_monotonicity() -> CriterionResult {
    run_check(6, "relaxed monotonicity", Some(120.0), |rec| {
        let grid = Grid2D::new(1.0, 32)?;
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = bounded_decreasing_source(&grid);
        let m = 0.5 * grid.area();
        let hyp = check_hypotheses(&f, &g, m, &grid)?;
        let rho_1 = hyp.rho_1.unwrap_or(0.0);
        rec.flag("H1 certified", hyp.h1.holds);
        let p = RelaxedProblem::new(grid, 1e3, 0.5 * rho_1, f, g);
        let report = monotonicity_probe(&p, m, 50, 2024)?;
        rec.at_most("violations", report.violations.len() as f64, 0.0);
        rec.check("min gap", report.min_gap, report.min_gap >= -1e-10, ">= -1e-10");
        Ok(())
    })
}

pub fn small_rho_scaling() -> CriterionResult {
    run_check(7, "state deviation is linear in rho", None, |rec| {
        let grid = Grid2D::new(1.0, 64)?;
        let f = NonlinearitySpec::one_minus_two_x(1.0);
        let g = SourceSpec::constant(1.0);
        let a = disk_indicator(&grid, 0.6)?;
        let base = solve_semilinear(&grid, &a, 1e3, 0.0, &f, &g)?;
        let rhos = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rho in rhos {
            let u = solve_semilinear(&grid, &a, 1e3, rho, &f, &g)?;
            let d = u
                .values()
                .iter()
                .zip(base.values())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            xs.push(rho.ln());
            ys.push(d.ln());
        }
        let fit = linear_fit(&xs, &ys)?;
        rec.within("log-log slope", fit.slope, 1.0, 0.1);
        rec.check("R^2", fit.r_squared, fit.r_squared >= 0.99, ">= 0.99");
        Ok(())
    })
}

pub fn continuation_limit() -> CriterionResult {
    run_check(8, "M-continuation limit", None, |rec| {
        let grid = Grid2D::new(2.0, 256)?;
        let p = RelaxedProblem::new(grid, 1.0, 0.0, NonlinearitySpec::zero(), SourceSpec::constant(1.0));
        let a = disk_indicator(&grid, 1.0)?;
        let rep = m_continuation_probe(&p, &a, &[1e2, 1e3, 1e4, 1e5])?;
        rec.flag("increments decreasing", rep.increments_decreasing);
        rec.flag("outside mass decreasing", rep.outside_decreasing);
        let last = rep.rows.last().map_or(f64::NAN, |r| r.value);
        rec.within("J(M=1e5)", last, -PI / 16.0, 3e-2);
        Ok(())
    })
}

pub fn elliptic_estimate_slopes() -> CriterionResult {
    run_check(9, "elliptic-estimate slopes", None, |rec| {
        let grid = unit_ball(2048)?;
        let f = NonlinearitySpec::neg_exp_square(1.0);
        let g = SourceSpec::constant(1.0);
        let rhos = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
        let sup = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut cols = [Vec::new(), Vec::new(), Vec::new()];
        for rho in rhos {
            let rs = solve_radial_state_adjoint(&grid, rho, &f, &g)?;
            let mode = solve_modes(&rs, 1, XiSource::default())?;
            cols[0].push(sup(grid.derivative(&rs.adjoint)).ln());
            cols[1].push(sup(grid.derivative(&mode.xi)).ln());
            cols[2].push(sup(grid.derivative(&mode.zeta)).ln());
        }
        let lr: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
        for (name, col, expected) in [
            ("slope |adjoint'|", &cols[0], 1.0),
            ("slope |xi_1'|", &cols[1], 1.0),
            ("slope |zeta_1'|", &cols[2], 2.0),
        ] {
            rec.within(name, linear_fit(&lr, col)?.slope, expected, 0.15);
        }
        Ok(())
    })
}

pub fn topological_sign() -> CriterionResult {
    run_check(10, "topological-derivative sign", None, |rec| {
        let grid = Grid2D::new(2.0, 64)?;
        let p = RelaxedProblem::new(
            grid,
            1e4,
            0.05,
            NonlinearitySpec::neg_exp_square(1.0),
            SourceSpec::constant(0.0),
        );
        let rep = topological_sign_field(&p, 1.0)?;
        rec.check(
            "fraction u*U < 0",
            rep.negative_fraction,
            rep.negative_fraction >= 0.99,
            ">= 0.99",
        );
        let a = disk_indicator(&grid, 1.0)?;
        let delta = hole_perturbation(&p, &a, 4.0 * grid.h())?;
        rec.check("hole dJ", delta, delta < 0.0, "< 0");
        Ok(())
    })
}

pub fn mode_growth() -> CriterionResult {
    run_check(11, "mode growth", None, |rec| {
        let rs = solve_radial_state_adjoint(&unit_ball(4096)?, 0.0, &NonlinearitySpec::zero(), &SourceSpec::constant(1.0))?;
        let rep = stability_verdict(&rs, 20)?;
        rec.within("fit slope k=10..20", rep.growth_fit.slope, PI / 4.0, 0.02 * PI / 4.0);
        Ok(())
    })
}

pub const CRITERIA: usize = 11;

/// Runs one criterion by number.
pub fn run_criterion(id: usize) -> Option<CriterionResult> {
    Some(match id {
        1 => radial_state_exactness(),
        2 => spectrum_closed_form(),
        3 => stable_example(),
        4 => instability_reproduction(),
        5 => switching_gradient(),
        6 => relaxed_monotonicity(),
        7 => small_rho_scaling(),
        8 => continuation_limit(),
        9 => elliptic_estimate_slopes(),
        10 => topological_sign(),
        11 => mode_growth(),
        _ => return None,
    })
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=CRITERIA).filter_map(run_criterion).collect()
}
