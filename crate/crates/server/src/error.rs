use servdial_core::generation::GenerationError;
use servdial_core::types::Role;
use servdial_core::GatewayError;
use thiserror::Error;

use crate::store::Mode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("session {0:?} not found")]
    NotFound(String),
    #[error("session {0:?} already exists")]
    DuplicateSession(String),
    #[error("not your turn: the {expected} speaks next")]
    NotYourTurn { expected: Role },
    #[error("session is closed")]
    SessionClosed,
    #[error("another BOT turn is running for this session")]
    Busy,
    #[error("operation needs a {expected:?} session")]
    WrongMode { expected: Mode },
    #[error("reply copies the knowledge (F1 {f1:.2})")]
    CopyRejected { f1: f64 },
    #[error("session already rated")]
    AlreadyRated,
    #[error("rating {0} outside 0..=5")]
    InvalidRating(u8),
    #[error("session has no BOT turn to rate")]
    NoBotTurn,
    #[error("participant {0:?} is already queued")]
    AlreadyQueued(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Generation(GenerationError),
    #[error("storage error: {0}")]
    Storage(String),
}

impl From<GenerationError> for EngineError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Gateway(g) => EngineError::Gateway(g),
            other => EngineError::Generation(other),
        }
    }
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::NotFound(_) => "not_found",
            EngineError::DuplicateSession(_) => "duplicate_session",
            EngineError::NotYourTurn { .. } => "not_your_turn",
            EngineError::SessionClosed => "session_closed",
            EngineError::Busy => "busy",
            EngineError::WrongMode { .. } => "wrong_mode",
            EngineError::CopyRejected { .. } => "copy_rejected",
            EngineError::AlreadyRated => "already_rated",
            EngineError::InvalidRating(_) => "invalid_rating",
            EngineError::NoBotTurn => "no_bot_turn",
            EngineError::AlreadyQueued(_) => "already_queued",
            EngineError::InvalidRequest(_) => "invalid_request",
            EngineError::Gateway(g) => g.code(),
            EngineError::Generation(g) => g.code(),
            EngineError::Storage(_) => "storage_error",
        }
    }

    /// HTTP status for the error response.
    pub fn status(&self) -> u16 {
        match self {
            EngineError::NotFound(_) => 404,
            EngineError::InvalidRequest(_) => 400,
            EngineError::CopyRejected { .. } | EngineError::InvalidRating(_) | EngineError::Gateway(_) => 422,
            EngineError::Generation(
                GenerationError::AdapterUnreachable(_) | GenerationError::AdapterMalformedReply(_),
            ) => 502,
            EngineError::Generation(_) | EngineError::Storage(_) => 500,
            _ => 409,
        }
    }
}
