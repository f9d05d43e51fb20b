//! JSON run configuration.

use std::path::Path;

use divband::{ClaimDist, Grid, ModelParams};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub p: f64,
    pub beta: f64,
    pub c: f64,
    pub r: f64,
    pub sigma: f64,
    pub claim: ClaimSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub tol: TolSpec,
    #[serde(default)]
    pub sim: SimSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClaimSpec {
    Exponential { rate: f64 },
    PiecewiseUniform { lo: f64, hi: f64 },
    Tabulated { dx: f64, density: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolSpec {
    /// Certification tolerance; default `1e-3 (c + beta) V(a*)`.
    pub certify: Option<f64>,
    /// Residual tolerance for the `W` solve.
    pub resid: Option<f64>,
    pub gamma_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
}

pub const DEFAULT_H: f64 = 1e-3;

/// Validated model inputs.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub dist: ClaimDist,
    pub grid: Grid,
    pub tol: TolSpec,
    pub sim: SimSpec,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let params = ModelParams::new(self.p, self.beta, self.c, self.r, self.sigma);
        params.validate().map_err(CliError::invalid)?;
        let dist = match &self.claim {
            ClaimSpec::Exponential { rate } => ClaimDist::exponential(*rate),
            ClaimSpec::PiecewiseUniform { lo, hi } => ClaimDist::piecewise_uniform(*lo, *hi),
            ClaimSpec::Tabulated { dx, density } => ClaimDist::tabulated(*dx, density.clone()),
        }
        .map_err(CliError::invalid)?;
        let spec = self.grid.unwrap_or(GridSpec { x_max: None, h: None });
        let x_max = spec.x_max.unwrap_or(1.5 * params.payout_bound());
        let grid = Grid::new(x_max, spec.h.unwrap_or(DEFAULT_H)).map_err(CliError::invalid)?;
        Ok(Model { params, dist, grid, tol: self.tol, sim: self.sim })
    }
}
