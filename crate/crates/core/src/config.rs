//! Run configuration, read from TOML.
//!
//! ```toml
//! m = 3.14159
//! rho = 0.01
//! M = 1e4
//! seed = 7
//!
//! [grid]
//! L = 2.0
//! n = 64
//!
//! [f]
//! kind = "one_minus_two_x"
//! window = 1.0
//!
//! [g]
//! kind = "constant"
//! value = 1.0
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elliptic::SemilinearOptions;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::objective::RelaxedProblem;
use crate::optimizer::OptimizerOptions;
use crate::problem::{Nonlinearity, NonlinearitySpec, Source, SourceSpec};
use crate::radial::{RadialGrid, XiSource};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L", default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_cells")]
    pub n: usize,
}

fn default_half_width() -> f64 {
    2.0
}

fn default_cells() -> usize {
    64
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            n: default_cells(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityConfig {
    #[serde(flatten)]
    pub law: Nonlinearity,
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_window() -> f64 {
    1.0
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            law: Nonlinearity::Zero,
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    #[serde(flatten)]
    pub source: Source,
    /// Declared `(g₀, g₁)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            source: Source::Constant { value: 1.0 },
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    #[serde(rename = "R", default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_radial_points")]
    pub n_r: usize,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub xi_source: XiSource,
    #[serde(default = "default_rho_list")]
    pub rho_list: Vec<f64>,
}

fn default_radius() -> f64 {
    1.0
}

fn default_radial_points() -> usize {
    4096
}

fn default_modes() -> usize {
    20
}

fn default_rho_list() -> Vec<f64> {
    vec![1e-3, 3e-3, 1e-2]
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            n_r: default_radial_points(),
            modes: default_modes(),
            xi_source: XiSource::default(),
            rho_list: default_rho_list(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(rename = "M_schedule", default = "default_schedule")]
    pub schedule: Vec<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_schedule() -> Vec<f64> {
    vec![1e2, 1e3, 1e4]
}

fn default_max_iter() -> usize {
    500
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            schedule: default_schedule(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Mass bound.
    #[serde(default = "default_mass")]
    pub m: f64,
    #[serde(default)]
    pub rho: f64,
    /// Penalization for single evaluations.
    #[serde(rename = "M", default = "default_penalty")]
    pub penalty: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub f: NonlinearityConfig,
    #[serde(default)]
    pub g: SourceConfig,
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_mass() -> f64 {
    PI
}

fn default_penalty() -> f64 {
    1e4
}

impl Default for Config {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            m: default_mass(),
            rho: 0.0,
            penalty: default_penalty(),
            seed: 0,
            grid: GridConfig::default(),
            f: NonlinearityConfig::default(),
            g: SourceConfig::default(),
            radial: RadialConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.grid()?;
        self.nonlinearity()?;
        self.radial_grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.half_width, self.grid.n)
    }

    pub fn nonlinearity(&self) -> Result<NonlinearitySpec> {
        NonlinearitySpec::new(self.f.law.clone(), self.f.window)
    }

    pub fn source(&self) -> SourceSpec {
        let spec = SourceSpec::new(self.g.source.clone());
        match self.g.bounds {
            Some((g0, g1)) => spec.with_bounds(g0, g1),
            None => spec,
        }
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.radial.radius, self.radial.n_r)
    }

    pub fn relaxed_problem(&self) -> Result<RelaxedProblem> {
        Ok(RelaxedProblem::new(
            self.grid()?,
            self.penalty,
            self.rho,
            self.nonlinearity()?,
            self.source(),
        )
        .with_solver(SemilinearOptions::default()))
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            schedule: self.optimizer.schedule.clone(),
            max_iter: self.optimizer.max_iter,
            ..OptimizerOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn full_document_round_trips() {
        let text = r#"
            m = 2.0
            rho = 0.05
            M = 100
            seed = 9

            [grid]
            L = 1.0
            n = 32

            [f]
            kind = "affine"
            intercept = -0.5
            slope = 1
            window = 2.0

            [g]
            kind = "radial_linear"
            intercept = 2.0
            slope = 0.5
            bounds = [1.0, 2.0]

            [radial]
            R = 1.0
            n_r = 512
            modes = 12
            xi_source = "literal"
            rho_list = [0.0, 0.01]

            [optimizer]
            M_schedule = [10.0, 100.0]
            max_iter = 50
        "#;
        let cfg = Config::from_toml_str(text).unwrap();
        assert_eq!(cfg.penalty, 100.0);
        assert_eq!(
            cfg.f.law,
            Nonlinearity::Affine {
                intercept: -0.5,
                slope: 1.0
            }
        );
        assert_eq!(cfg.radial.xi_source, XiSource::Literal);
        assert_eq!(cfg.source().declared_bounds, Some((1.0, 2.0)));
        let again = Config::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn malformed_documents_rejected() {
        for bad in [
            "unknown_key = 1",
            "[grid]\nn = 4",
            "[f]\nkind = \"cubic\"",
            "version = 2",
            "[radial]\nn_r = 10",
            "m = \"three\"",
        ] {
            assert!(matches!(Config::from_toml_str(bad), Err(Error::Config(_)) | Err(Error::GridTooCoarse(_)) | Err(Error::InvalidParameter { .. })), "{bad}");
        }
    }

    #[test]
    fn missing_file_is_named() {
        let err = Config::load(Path::new("/nonexistent/missing.cfg")).unwrap_err();
        assert!(err.to_string().contains("missing.cfg"));
    }
}
