//! Stateful exploration sessions over HTTP.

pub mod config;
pub mod http;
pub mod model;
pub mod service;
pub mod store;

use qrec_core::sql::SqlError;
use thiserror::Error;

pub use config::{DatabaseConfig, ServiceConfig};
pub use model::{explain, Dashboard, DashboardCell, HistoryEntry, NlExplanation, Session};
pub use service::{QueryInput, SessionService};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown database `{0}`")]
    UnknownDatabase(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown dashboard `{0}`")]
    UnknownDashboard(String),
    #[error("{message}")]
    Parse {
        message: String,
        position: Option<usize>,
    },
    #[error("execution failed: {0}")]
    Execution(String),
    #[error("recommendation index {index} is not in the last served set of {available}")]
    StaleRecommendationIndex { index: usize, available: usize },
    #[error("history index {index} is out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid dashboard cell: {0}")]
    InvalidCell(String),
    #[error("overlapping dashboard cells: {0}")]
    OverlappingCells(String),
    #[error("recommendation failed: {0}")]
    Recommendation(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl From<SqlError> for ServiceError {
    fn from(e: SqlError) -> Self {
        ServiceError::Parse {
            position: e.position(),
            message: e.to_string(),
        }
    }
}

impl ServiceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownDatabase(_) => "UnknownDatabase",
            ServiceError::UnknownSession(_) => "UnknownSession",
            ServiceError::UnknownDashboard(_) => "UnknownDashboard",
            ServiceError::Parse { .. } => "ParseError",
            ServiceError::Execution(_) => "ExecutionError",
            ServiceError::StaleRecommendationIndex { .. } => "StaleRecommendationIndex",
            ServiceError::IndexOutOfRange { .. } => "IndexOutOfRange",
            ServiceError::InvalidCell(_) => "InvalidCell",
            ServiceError::OverlappingCells(_) => "OverlappingCells",
            ServiceError::Recommendation(_) => "RecommendationError",
            ServiceError::Storage(_) => "StorageError",
            ServiceError::Config(_) => "ConfigError",
            ServiceError::BadRequest(_) => "BadRequest",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::UnknownDatabase(_)
            | ServiceError::UnknownSession(_)
            | ServiceError::UnknownDashboard(_)
            | ServiceError::IndexOutOfRange { .. } => 404,
            ServiceError::Parse { .. }
            | ServiceError::InvalidCell(_)
            | ServiceError::OverlappingCells(_)
            | ServiceError::BadRequest(_) => 400,
            ServiceError::StaleRecommendationIndex { .. } => 409,
            ServiceError::Execution(_) => 422,
            ServiceError::Recommendation(_)
            | ServiceError::Storage(_)
            | ServiceError::Config(_) => 500,
        }
    }

    pub fn position(&self) -> Option<usize> {
        match self {
            ServiceError::Parse { position, .. } => *position,
            _ => None,
        }
    }
}
