//! JSON experiment configuration for the command-line driver.
//!
//! Configs are schema-versioned and human-diffable; every randomized check
//! draws from the config seed so a fixed `(config, seed)` pair reproduces
//! results byte for byte.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gap_experiments::{validate_eps_list, GapOptions, SweepSettings, DEFAULT_SEED};
use crate::geometry::CurvatureProfile;
use crate::spectral2d::REFERENCE_NY;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// One experiment family: a geometry swept over cross-section widths.
///
/// ```json
/// {
///   "schema_version": 1,
///   "geometry": { "name": "G1" },
///   "t0": 1.0,
///   "eps_list": [0.2, 0.1, 0.05],
///   "tP_fraction": 0.4,
///   "seed": 7
/// }
/// ```
///
/// A custom geometry replaces the name with
/// `{ "name": "custom", "coefficients": [1.0, 0.5, 0.2, 0.1] }`
/// (the constant, `s^2`, `t^2`, and `s^2 t^2` curvature coefficients).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub geometry: GeometryConfig,
    pub t0: f64,
    /// Strictly decreasing widths; may be empty (header-only outputs).
    pub eps_list: Vec<f64>,
    /// Potential corner as a fraction of `t0`, inside `(1/4, 1/2)`.
    #[serde(rename = "tP_fraction", default = "default_tp_fraction")]
    pub t_p_fraction: f64,
    /// Absolute coupling steps matched to `eps_list` by position; empty or
    /// omitted selects the automatic `1e-2 delta^{-1/3}` per width.
    #[serde(default)]
    pub r_steps: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for the randomized symmetry and compatibility checks; the
    /// command line `--seed` takes precedence.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// `G1`, `G2`, `G3`, or `custom`.
    pub name: String,
    /// Required iff `name` is `custom`.
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
}

/// Optional node-count overrides; `None` keeps reference resolution.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub n_x_cells: Option<usize>,
    #[serde(default)]
    pub n_y_cells: Option<usize>,
    /// Grid of the coupled gap families (coarser by default, which is
    /// sound for the discrete derivative identity).
    #[serde(default)]
    pub gap_n_x_cells: Option<usize>,
    #[serde(default)]
    pub gap_n_y_cells: Option<usize>,
}

fn default_tp_fraction() -> f64 {
    0.4
}

impl GeometryConfig {
    pub fn profile(&self) -> Result<CurvatureProfile> {
        if self.name.eq_ignore_ascii_case("custom") {
            let c = self
                .coefficients
                .as_ref()
                .ok_or_else(|| Error::config("custom geometry requires a `coefficients` list"))?;
            if c.len() != 4 {
                return Err(Error::config(format!(
                    "custom geometry takes 4 coefficients, got {}",
                    c.len()
                )));
            }
            return CurvatureProfile::custom("custom", c[0], c[1], c[2], c[3])
                .map_err(|e| Error::config(e.to_string()));
        }
        if self.coefficients.is_some() {
            return Err(Error::config(
                "named geometries do not take a `coefficients` list",
            ));
        }
        CurvatureProfile::by_name(&self.name)
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file.  Errors carry the file path and,
    /// for malformed JSON, the line and column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "config schema_version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.geometry.profile()?;
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::config(format!(
                "t0 = {} must be finite and positive",
                self.t0
            )));
        }
        validate_eps_list(&self.eps_list)?;
        if !(self.t_p_fraction > 0.25 && self.t_p_fraction < 0.5) {
            return Err(Error::config(format!(
                "tP_fraction = {} outside (0.25, 0.5)",
                self.t_p_fraction
            )));
        }
        if !self.r_steps.is_empty() {
            if self.r_steps.len() != self.eps_list.len() {
                return Err(Error::config(format!(
                    "r_steps has {} entries for {} widths",
                    self.r_steps.len(),
                    self.eps_list.len()
                )));
            }
            if let Some(&bad) = self.r_steps.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                return Err(Error::config(format!(
                    "r_steps entries must be finite and positive, got {bad}"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_seed(&self, cli_seed: Option<u64>) -> u64 {
        cli_seed.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    /// Sweep settings with the gap experiments enabled.
    pub fn sweep_settings(&self, cli_seed: Option<u64>) -> Result<SweepSettings> {
        let mut settings =
            SweepSettings::new(self.geometry.profile()?, self.t0, self.eps_list.clone());
        settings.t_p_fraction = self.t_p_fraction;
        settings.n_x_cells = self.grid.n_x_cells;
        settings.n_y_cells = self.grid.n_y_cells.unwrap_or(REFERENCE_NY);
        let mut gap = GapOptions::default();
        if self.grid.gap_n_x_cells.is_some() {
            gap.n_x_cells = self.grid.gap_n_x_cells;
        }
        if let Some(ny) = self.grid.gap_n_y_cells {
            gap.n_y_cells = ny;
        }
        settings.gap = Some(gap);
        if !self.r_steps.is_empty() {
            settings.r_steps = Some(self.r_steps.clone());
        }
        settings.seed = self.effective_seed(cli_seed);
        Ok(settings)
    }
}
