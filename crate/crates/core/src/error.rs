use std::path::PathBuf;

/// Errors produced by the walk, spectral and topology routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A construction contract (e.g. the Bloch trace identity) was violated.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("linear algebra backend failed: {0}")]
    Linalg(String),

    #[error("pole of sec/tan at theta = {theta}")]
    Pole { theta: f64 },

    #[error("gapless point: {0}")]
    Gapless(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    /// Transfer classification evaluated where some inverse localization length vanishes.
    #[error("boundary point: {0}")]
    BoundaryPoint(String),

    #[error("target quasienergy lies on the spectral curve (distance {distance:.3e})")]
    TargetOnCurve { distance: f64 },

    #[error("no bulk modes left after filtering")]
    EmptyBulk,

    #[error("edge modes not found in spectrum: {0}")]
    EdgeModesNotFound(String),

    #[error("table schema mismatch: {0}")]
    Schema(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Short kebab-case tag used in status columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Consistency(_) => "consistency",
            Error::Singular(_) => "singular",
            Error::Linalg(_) => "linalg",
            Error::Pole { .. } => "pole",
            Error::Gapless(_) => "gapless",
            Error::Resolution(_) => "resolution",
            Error::BoundaryPoint(_) => "boundary-point",
            Error::TargetOnCurve { .. } => "target-on-curve",
            Error::EmptyBulk => "empty-bulk",
            Error::EdgeModesNotFound(_) => "edge-modes-not-found",
            Error::Schema(_) => "schema",
            Error::Io { .. } | Error::Csv { .. } | Error::Json { .. } => "io",
        }
    }

    /// True for failures caused by the parameter point itself (gap closings,
    /// transfer transitions, poles) rather than by bad input or I/O.
    pub fn is_numerical_precondition(&self) -> bool {
        matches!(
            self,
            Error::Gapless(_)
                | Error::BoundaryPoint(_)
                | Error::Pole { .. }
                | Error::TargetOnCurve { .. }
                | Error::Resolution(_)
                | Error::EdgeModesNotFound(_)
                | Error::EmptyBulk
                | Error::Singular(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
