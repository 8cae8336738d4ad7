//! Run configuration shared by the CLI commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::frame::PlanMode;
use crate::grading::DEFAULT_TAU_DEG;
use crate::heatmap::DEFAULT_SIGMA;
use crate::volume::{Dims, DEFAULT_TARGET_DIMS, DEFAULT_W_MAX, DEFAULT_W_MIN};
use crate::{json, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            w_min: DEFAULT_W_MIN,
            w_max: DEFAULT_W_MAX,
        }
    }
}

/// Optional default locations; command-line paths take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub weights: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window: WindowConfig,
    /// Network input `(nz, ny, nx)`.
    pub dims: Dims,
    /// Heatmap Gaussian width, voxels.
    pub sigma: f64,
    /// Perpendicularity tolerance, degrees.
    pub tau: f64,
    pub mode: PlanMode,
    pub seed: u64,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: WindowConfig::default(),
            dims: DEFAULT_TARGET_DIMS,
            sigma: DEFAULT_SIGMA,
            tau: DEFAULT_TAU_DEG,
            mode: PlanMode::default(),
            seed: 0,
            paths: PathsConfig::default(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = json::read(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let WindowConfig { w_min, w_max } = self.window;
        if !w_min.is_finite() || !w_max.is_finite() || w_min >= w_max {
            return Err(invalid(
                "window",
                format!("need finite w_min < w_max, got {w_min} and {w_max}"),
            ));
        }
        if self.dims.contains(&0) {
            return Err(invalid("dims", format!("{:?} has a zero axis", self.dims)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid("sigma", format!("{} must be positive", self.sigma)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0 && self.tau < 90.0) {
            return Err(invalid("tau", format!("{} must lie in (0, 90) degrees", self.tau)));
        }
        Ok(())
    }
}
