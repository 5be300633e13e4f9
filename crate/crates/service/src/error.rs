use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use coevo_core::challenges::ChallengeError;
use coevo_core::evolve::EvolveError;
use coevo_core::shape::ShapeError;
use coevo_core::store::StoreError;
use serde::{Deserialize, Serialize};

/// The closed set of machine-readable error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidRequest,
    InvalidDesign,
    InvalidAction,
    InvalidParams,
    SeqOutOfRange,
    NotFound,
    UnknownChallenge,
    UnknownSession,
    UnknownRun,
    UnknownFrames,
    RunDone,
    IllegalTransition,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 13] = [
        ErrorCode::InvalidRequest,
        ErrorCode::InvalidDesign,
        ErrorCode::InvalidAction,
        ErrorCode::InvalidParams,
        ErrorCode::SeqOutOfRange,
        ErrorCode::NotFound,
        ErrorCode::UnknownChallenge,
        ErrorCode::UnknownSession,
        ErrorCode::UnknownRun,
        ErrorCode::UnknownFrames,
        ErrorCode::RunDone,
        ErrorCode::IllegalTransition,
        ErrorCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidRequest => "invalid_request",
            ErrorCode::InvalidDesign => "invalid_design",
            ErrorCode::InvalidAction => "invalid_action",
            ErrorCode::InvalidParams => "invalid_params",
            ErrorCode::SeqOutOfRange => "seq_out_of_range",
            ErrorCode::NotFound => "not_found",
            ErrorCode::UnknownChallenge => "unknown_challenge",
            ErrorCode::UnknownSession => "unknown_session",
            ErrorCode::UnknownRun => "unknown_run",
            ErrorCode::UnknownFrames => "unknown_frames",
            ErrorCode::RunDone => "run_done",
            ErrorCode::IllegalTransition => "illegal_transition",
            ErrorCode::Internal => "internal",
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::InvalidRequest
            | ErrorCode::InvalidDesign
            | ErrorCode::InvalidAction
            | ErrorCode::InvalidParams
            | ErrorCode::SeqOutOfRange => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound
            | ErrorCode::UnknownChallenge
            | ErrorCode::UnknownSession
            | ErrorCode::UnknownRun
            | ErrorCode::UnknownFrames => StatusCode::NOT_FOUND,
            ErrorCode::RunDone | ErrorCode::IllegalTransition => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub http_status: u16,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            http_status: code.status().as_u16(),
        }
    }

    pub fn internal(message: impl ToString) -> Self {
        Self::new(ErrorCode::Internal, message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<ShapeError> for ApiError {
    fn from(e: ShapeError) -> Self {
        ApiError::new(ErrorCode::InvalidDesign, e.to_string())
    }
}

impl From<ChallengeError> for ApiError {
    fn from(e: ChallengeError) -> Self {
        let code = match &e {
            ChallengeError::UnknownChallenge(_) => ErrorCode::UnknownChallenge,
            ChallengeError::EmptyChain | ChallengeError::Shape(_) => ErrorCode::InvalidDesign,
            ChallengeError::InvalidSpec(_) | ChallengeError::DegenerateSpec(_) => ErrorCode::InvalidRequest,
            ChallengeError::Physics(_) => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<EvolveError> for ApiError {
    fn from(e: EvolveError) -> Self {
        let code = match &e {
            EvolveError::InvalidParams(_) => ErrorCode::InvalidParams,
            EvolveError::RunDone => ErrorCode::RunDone,
            EvolveError::IllegalTransition { .. } => ErrorCode::IllegalTransition,
            EvolveError::EmptyChain | EvolveError::Shape(_) => ErrorCode::InvalidDesign,
            EvolveError::Challenge(c) => return c.clone().into(),
            EvolveError::Unevaluated | EvolveError::UnsupportedFormat(_) => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::UnknownSession(_) => ErrorCode::UnknownSession,
            StoreError::UnknownRun(_) => ErrorCode::UnknownRun,
            StoreError::UnknownFrames(_) => ErrorCode::UnknownFrames,
            StoreError::InvalidAction(_) => ErrorCode::InvalidAction,
            StoreError::SeqOutOfRange { .. } => ErrorCode::SeqOutOfRange,
            StoreError::InvalidResult(_) => ErrorCode::InvalidRequest,
            StoreError::Corrupt { .. } | StoreError::Io(_) => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}
