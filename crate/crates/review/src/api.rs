use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ReviewError;
use crate::service::ReviewService;
use crate::types::{CreateSession, DecisionRequest, RegisterCohort};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError(ReviewError);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        Self(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self(ReviewError::BadRequest(e.body_text()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = ErrorBody {
            code: self.0.code().to_string(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

pub fn router(service: Arc<ReviewService>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/cohorts", post(register_cohort))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_case))
        .route("/sessions/{id}/decision", post(record_decision))
        .route("/sessions/{id}/report", get(report))
        .with_state(service)
}

async fn register_cohort(
    State(svc): State<Arc<ReviewService>>,
    body: Result<Json<RegisterCohort>, JsonRejection>,
) -> ApiResult {
    let Json(req) = body?;
    let n = req.cases.len();
    let id = svc.register_cohort(req)?;
    Ok(Json(json!({"cohort_id": id, "n_cases": n})).into_response())
}

async fn create_session(
    State(svc): State<Arc<ReviewService>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult {
    let Json(req) = body?;
    let id = svc.create_session(req)?;
    Ok(Json(json!({"session_id": id})).into_response())
}

async fn next_case(State(svc): State<Arc<ReviewService>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(svc.next_case(&id)?).into_response())
}

async fn record_decision(
    State(svc): State<Arc<ReviewService>>,
    Path(id): Path<String>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> ApiResult {
    let Json(req) = body?;
    Ok(Json(svc.record_decision(&id, req)?).into_response())
}

async fn report(State(svc): State<Arc<ReviewService>>, Path(id): Path<String>) -> ApiResult {
    Ok(json_bytes(svc.report_json(&id)?))
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<ReviewService>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
