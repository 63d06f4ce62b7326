use alloc::boxed::Box;
use alloc::string::String;

use crate::model::ValidationReport;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("horizon must be ≥ 1")]
    EmptyHorizon,

    #[error("{what} must be ≥ 1")]
    EmptyDimension { what: &'static str },

    #[error("dimension mismatch in {field}[{index}]: expected {expected}, found {found}")]
    Dimension {
        field: &'static str,
        index: usize,
        expected: String,
        found: String,
    },

    #[error("{field} has {found} entries, expected {expected}")]
    Length {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {field}[{index}]")]
    NonFinite { field: &'static str, index: usize },

    #[error("standing assumptions violated:\n{0}")]
    Invalid(ValidationReport),

    #[error("tree depth {depth} exceeds the path cap {cap}")]
    DepthCap { depth: usize, cap: usize },

    #[error("{field} at time {time}: {found} atoms provided, expected {expected}")]
    AtomCount {
        field: &'static str,
        time: usize,
        expected: usize,
        found: usize,
    },

    #[error("level mismatch: {0}")]
    Level(String),

    #[error("{what} is numerically singular at step {step} (condition estimate {condition:e})")]
    Singular {
        what: &'static str,
        step: usize,
        condition: f64,
    },

    #[error("problem not uniformly convex (minimum Hessian eigenvalue {min_eigenvalue:e})")]
    NotConvex { min_eigenvalue: f64 },

    #[error("stacked control dimension {dim} exceeds the QP cap {cap}")]
    QpCap { dim: usize, cap: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by the input (structure or assumptions),
    /// false for numerical breakdowns.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self.root(),
            Error::Singular { .. } | Error::NotConvex { .. }
        )
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
