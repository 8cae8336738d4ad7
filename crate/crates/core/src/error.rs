use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: w_min ({w_min}) must be below w_max ({w_max})")]
    InvalidWindow { w_min: f64, w_max: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("bounding box out of bounds: {0}")]
    OutOfBounds(String),
    #[error("physical extents differ: {0}")]
    ExtentMismatch(String),
    #[error("invalid sigma {0}: must be positive and finite")]
    InvalidSigma(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("even spatial dimensions required, got {0:?}")]
    EvenDimsRequired([usize; 3]),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("weight error at `{layer}`: {reason}")]
    Weights { layer: String, reason: String },
    #[error("non-finite activation after layer `{layer}`")]
    NonFinite { layer: String },
    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),
    #[error("degenerate axis: |B - A| = {0:e} mm")]
    DegenerateAxis(f64),
    #[error("degenerate pedicles: |H' - I'| = {0:e} mm")]
    DegeneratePedicle(f64),
    #[error("non-unit normal (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("left/right orientation could not be resolved: {0}")]
    Orientation(String),
    #[error("degenerate grading region: {0}")]
    DegenerateRegion(String),
    #[error("phantom parameters out of bounds: {0}")]
    PhantomOutOfBounds(String),
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-readable tag for each variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidWindow { .. } => "invalid_window",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::OutOfBounds(_) => "out_of_bounds",
            Error::ExtentMismatch(_) => "extent_mismatch",
            Error::InvalidSigma(_) => "invalid_sigma",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::EmptyInput(_) => "empty_input",
            Error::EvenDimsRequired(_) => "even_dims_required",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Weights { .. } => "weights",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidLandmarks(_) => "invalid_landmarks",
            Error::DegenerateAxis(_) => "degenerate_axis",
            Error::DegeneratePedicle(_) => "degenerate_pedicle",
            Error::NonUnitNormal(_) => "non_unit_normal",
            Error::Orientation(_) => "orientation",
            Error::DegenerateRegion(_) => "degenerate_region",
            Error::PhantomOutOfBounds(_) => "phantom_out_of_bounds",
            Error::Format { .. } => "format",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::InFile { source, .. } => source.kind(),
        }
    }

    /// File the error refers to, when there is one.
    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            Error::Io { path, .. } | Error::Json { path, .. } | Error::InFile { path, .. } => {
                Some(path)
            }
            _ => None,
        }
    }

    /// Attaches `path` unless the error already names a file.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        if self.path().is_some() {
            return self;
        }
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
