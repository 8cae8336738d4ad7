//! Landmark-driven laminectomy cutting-plane planning.
//!
//! The crate covers the whole chain from a CT crop to a graded plan:
//!
//! * [`volume`]: voxel grids, intensity windowing, cropping, resampling.
//! * [`heatmap`]: Gaussian target heatmaps, argmax localization, error metrics.
//! * [`spunet`]: a CPU forward-pass engine for the pyramid-upsampling U-Net
//!   that regresses one heatmap per landmark.
//! * [`frame`]: the per-vertebra coordinate frame and cutting planes.
//! * [`grading`]: A/B/C grading of planes and summary tables.
//! * [`phantom`]: synthetic vertebrae with analytically known landmarks.
//! * [`pipeline`]: file-level orchestration used by the `alcpp` CLI.

pub mod config;
pub mod error;
pub mod formats;
pub mod frame;
pub mod grading;
pub mod heatmap;
pub mod json;
pub mod landmarks;
pub mod pipeline;
pub mod phantom;
pub mod spunet;
pub mod volume;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use frame::{fit_frame, plan_planes, CutPlane, Frame, PlanMode, PlaneKind, PlaneName};
pub use grading::{aggregate, Grade, GradeOutcome, PlanReport};
pub use heatmap::{localize, HeatmapStack};
pub use landmarks::{Landmark, LandmarkSet};
pub use volume::{BoundingBox, Dims, Grid, Volume};

/// World-space vector or point, millimeters, `(x, y, z)`.
pub type Vec3 = nalgebra::Vector3<f64>;
