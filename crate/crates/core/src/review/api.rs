use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use super::report::{session_report, ReportOptions, SessionReport};
use super::sample::SampleView;
use super::session::{Ack, Answer, NextItem, ReviewStore, SessionState, SessionStatus};
use crate::error::Error;

/// Error body: `{code, message}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    fn bad_request(message: String) -> Self {
        Self { code: "bad_request".into(), message, status: 400 }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) => 404,
            Error::Rejected(_) | Error::DuplicateKey(_) => 409,
            Error::InvalidLabel(_) | Error::Config(_) | Error::Parse { .. } => 422,
            _ => 500,
        };
        Self { code: e.code().into(), message: e.to_string(), status }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub rater_id: String,
    pub sample_id: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRating {
    pub crash_key: String,
    pub label: String,
    #[serde(default)]
    pub note: String,
}

/// Session progress without any answers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionView {
    pub session_id: String,
    pub rater_id: String,
    pub sample_id: String,
    pub rated: usize,
    pub total: usize,
    pub status: SessionStatus,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct ReportQuery {
    #[serde(default)]
    pub include_incomplete: bool,
    pub answer: Option<Answer>,
}

fn view(store: &ReviewStore, s: SessionState) -> Result<SessionView, ApiError> {
    let sample = store.sample(&s.sample_id)?;
    Ok(SessionView {
        rated: s.rated(),
        total: sample.len(),
        status: s.status(&sample),
        session_id: s.session_id,
        rater_id: s.rater_id,
        sample_id: s.sample_id,
    })
}

/// Runs store work off the async executor; session writes fsync.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError { code: "internal".into(), message: e.to_string(), status: 500 })?
}

async fn get_sample(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult<SampleView> {
    Ok(Json(store.sample(&id)?.blinded()))
}

async fn create_session(
    State(store): State<Arc<ReviewStore>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let v = blocking(move || {
        let s = store.create_session(&req.rater_id, &req.sample_id)?;
        view(&store, s)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(v)))
}

async fn get_session(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let s = store.session(&id)?;
    Ok(Json(view(&store, s)?))
}

async fn next_item(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult<NextItem> {
    Ok(Json(store.next_item(&id)?))
}

async fn submit_rating(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
    body: Result<Json<SubmitRating>, JsonRejection>,
) -> ApiResult<Ack> {
    let Json(req) = body?;
    let ack = blocking(move || Ok(store.submit(&id, &req.crash_key, &req.label, &req.note)?)).await?;
    Ok(Json(ack))
}

async fn close_session(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let v = blocking(move || {
        let s = store.close(&id)?;
        view(&store, s)
    })
    .await?;
    Ok(Json(v))
}

async fn get_report(
    State(store): State<Arc<ReviewStore>>,
    Path(sample_id): Path<String>,
    query: Result<Query<ReportQuery>, QueryRejection>,
) -> ApiResult<SessionReport> {
    let Query(q) = query?;
    let report = blocking(move || {
        let ctx = store.context(&sample_id)?;
        let opts = ReportOptions { include_incomplete: q.include_incomplete, answer: q.answer.unwrap_or(Answer::Final), ..Default::default() };
        Ok(session_report(&store, &sample_id, &ctx, &opts)?)
    })
    .await?;
    Ok(Json(report))
}

async fn not_found() -> ApiError {
    ApiError { code: "not_found".into(), message: "no such route".into(), status: 404 }
}

/// The review API; `ui_dir`, when given, is served for every non-API path.
pub fn router(store: Arc<ReviewStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/samples/{id}", get(get_sample))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/next", get(next_item))
        .route("/api/sessions/{id}/ratings", post(submit_rating))
        .route("/api/sessions/{id}/close", post(close_session))
        .route("/api/reports/{sample_id}", get(get_report))
        .route("/api/{*rest}", get(not_found).post(not_found));
    let app = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    app.with_state(store)
}

/// Serves until Ctrl-C.
pub async fn serve(store: Arc<ReviewStore>, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
