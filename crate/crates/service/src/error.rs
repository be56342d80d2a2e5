use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use uxkpi_core::analytics::{AnalyticsError, FilterError};
use uxkpi_core::inference::InferenceError;
use uxkpi_core::report::ReportError;
use uxkpi_core::simulate::SimulateError;
use uxkpi_core::survey::ScoreError;

/// Every error body the API can return is tagged with one of these codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApiErrorCode {
    /// A filter parameter is unknown or has an unparseable value.
    BadFilter,
    /// A required query parameter is missing.
    MissingParameter,
    /// The request body is not valid JSON or does not match the schema.
    InvalidBody,
    UnknownKind,
    UnknownDimension,
    /// A comparison group is below the minimum sample size.
    InsufficientSample,
    /// Both groups are constant, so no test statistic exists.
    DegenerateComparison,
    InvalidReportSpec,
    EmptyPeriod,
    UnknownProduct,
    InvalidExperiment,
    /// The experiment is well-formed but cannot be carried out.
    InfeasibleExperiment,
    /// The store is unreadable or the service runs without one.
    StoreUnavailable,
    NotFound,
    MethodNotAllowed,
    Internal,
}

impl ApiErrorCode {
    pub const ALL: [ApiErrorCode; 16] = [
        Self::BadFilter,
        Self::MissingParameter,
        Self::InvalidBody,
        Self::UnknownKind,
        Self::UnknownDimension,
        Self::InsufficientSample,
        Self::DegenerateComparison,
        Self::InvalidReportSpec,
        Self::EmptyPeriod,
        Self::UnknownProduct,
        Self::InvalidExperiment,
        Self::InfeasibleExperiment,
        Self::StoreUnavailable,
        Self::NotFound,
        Self::MethodNotAllowed,
        Self::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BadFilter => "BadFilter",
            Self::MissingParameter => "MissingParameter",
            Self::InvalidBody => "InvalidBody",
            Self::UnknownKind => "UnknownKind",
            Self::UnknownDimension => "UnknownDimension",
            Self::InsufficientSample => "InsufficientSample",
            Self::DegenerateComparison => "DegenerateComparison",
            Self::InvalidReportSpec => "InvalidReportSpec",
            Self::EmptyPeriod => "EmptyPeriod",
            Self::UnknownProduct => "UnknownProduct",
            Self::InvalidExperiment => "InvalidExperiment",
            Self::InfeasibleExperiment => "InfeasibleExperiment",
            Self::StoreUnavailable => "StoreUnavailable",
            Self::NotFound => "NotFound",
            Self::MethodNotAllowed => "MethodNotAllowed",
            Self::Internal => "Internal",
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            Self::BadFilter
            | Self::MissingParameter
            | Self::InvalidBody
            | Self::UnknownDimension
            | Self::InvalidReportSpec
            | Self::InvalidExperiment => StatusCode::BAD_REQUEST,
            Self::UnknownKind | Self::EmptyPeriod | Self::UnknownProduct | Self::NotFound => {
                StatusCode::NOT_FOUND
            }
            Self::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            Self::InsufficientSample | Self::DegenerateComparison | Self::InfeasibleExperiment => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Self::StoreUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            Self::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub http_status: u16,
}

impl ApiError {
    pub fn new(code: ApiErrorCode, message: impl Into<String>) -> Self {
        Self {
            code: code.as_str().to_owned(),
            message: message.into(),
            http_status: code.status().as_u16(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self)).into_response()
    }
}

impl From<FilterError> for ApiError {
    fn from(e: FilterError) -> Self {
        Self::new(ApiErrorCode::BadFilter, e.to_string())
    }
}

fn inference_code(e: &InferenceError) -> ApiErrorCode {
    match e {
        InferenceError::InsufficientSample { .. } | InferenceError::EmptyInput => {
            ApiErrorCode::InsufficientSample
        }
        InferenceError::DegenerateVariances | InferenceError::DegenerateProportions => {
            ApiErrorCode::DegenerateComparison
        }
        InferenceError::InvalidArgument(_) => ApiErrorCode::Internal,
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let code = match &e {
            AnalyticsError::StoreUnreadable(_) => ApiErrorCode::StoreUnavailable,
            AnalyticsError::InsufficientSample { .. } => ApiErrorCode::InsufficientSample,
            AnalyticsError::Inference(i) | AnalyticsError::Score(ScoreError::Inference(i)) => {
                inference_code(i)
            }
            AnalyticsError::Score(_) => ApiErrorCode::Internal,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::InvalidSpec(_) => Self::new(ApiErrorCode::InvalidReportSpec, e.to_string()),
            ReportError::EmptyPeriod(_) => Self::new(ApiErrorCode::EmptyPeriod, e.to_string()),
            ReportError::UnknownProduct(_) => Self::new(ApiErrorCode::UnknownProduct, e.to_string()),
            ReportError::Analytics(a) => a.into(),
        }
    }
}

impl From<SimulateError> for ApiError {
    fn from(e: SimulateError) -> Self {
        let code = match &e {
            SimulateError::InvalidArgument(_) | SimulateError::SampleTooLarge { .. } => {
                ApiErrorCode::InvalidExperiment
            }
            SimulateError::InfeasibleTarget { .. } | SimulateError::ExhaustedPopulation { .. } => {
                ApiErrorCode::InfeasibleExperiment
            }
            SimulateError::Inference(i) => inference_code(i),
        };
        Self::new(code, e.to_string())
    }
}
