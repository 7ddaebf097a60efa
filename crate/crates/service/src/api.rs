//! Routes, request bodies and error mapping.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use larf_core::annotator::{AnnotateError, Annotator};
use larf_core::bionic::{bionic_format, BionicParams, DEFAULT_FIXATION, DEFAULT_SACCADE};
use larf_core::llm::{ChatBackend, HttpChatClient, LlmConfig};
use larf_core::markup::verify_text;
use larf_core::model::normalize;
use larf_core::offline::offline_annotate;
use larf_core::prompt::{Category, PromptSpec};
use larf_core::render::{render_html, RenderStyle};
use larf_core::scorer::{ScoreError, Scorer};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;
use tracing::{error, info};
use uuid::Uuid;

use crate::jobs::{JobKind, JobRecord, JobStatus, JobStore, JobView, LogEntry, Review, StoreError};

pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 200;

/// An error response: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn invalid_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_body", message)
    }

    fn invalid_parameter(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_parameter", message)
    }

    fn empty_text() -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_text", "text is empty")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::invalid_body(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::invalid_parameter(r.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(r: PathRejection) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", r.body_text())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownJob(id) => Self::new(StatusCode::NOT_FOUND, "not_found", format!("no job {id}")),
            e => {
                error!(error = %e, "job log write failed");
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
            }
        }
    }
}

impl From<AnnotateError> for ApiError {
    fn from(e: AnnotateError) -> Self {
        match e {
            AnnotateError::EmptyInput => Self::empty_text(),
            AnnotateError::Transport(m) => Self::new(StatusCode::BAD_GATEWAY, "upstream_transport", m),
            AnnotateError::Auth(m) => Self::new(StatusCode::UNAUTHORIZED, "upstream_auth", m),
            AnnotateError::Config(m) => Self::new(StatusCode::SERVICE_UNAVAILABLE, "llm_not_configured", m),
        }
    }
}

impl From<ScoreError> for ApiError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::EmptyInput => Self::empty_text(),
            ScoreError::NoScoreFound | ScoreError::ScoreOutOfRange(_) => {
                Self::new(StatusCode::BAD_GATEWAY, "unparseable_score", e.to_string())
            }
            ScoreError::Llm(e) => AnnotateError::from(e).into(),
        }
    }
}

/// JSON body extractor whose rejections are [`ApiError`]s. Keeps the raw
/// value for the job log.
struct Body<T> {
    raw: Value,
    parsed: T,
}

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(raw) = Json::<Value>::from_request(req, state).await?;
        let parsed = serde_json::from_value(raw.clone()).map_err(|e| ApiError::invalid_body(e.to_string()))?;
        Ok(Self { raw, parsed })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotateMode {
    #[default]
    Default,
    Custom,
    Offline,
}

#[derive(Debug, Deserialize)]
pub struct AnnotateRequest {
    pub text: String,
    #[serde(default)]
    pub mode: AnnotateMode,
    #[serde(default)]
    pub categories: Vec<Category>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    #[serde(default)]
    pub style: RenderStyle,
}

impl AnnotateRequest {
    fn prompt(&self) -> Result<PromptSpec, ApiError> {
        let invalid = |e: larf_core::prompt::PromptError| ApiError::invalid_parameter(e.to_string());
        let mut spec = match self.mode {
            AnnotateMode::Custom => PromptSpec::custom(self.categories.clone()).map_err(invalid)?,
            _ => PromptSpec::default(),
        };
        if let Some(t) = self.temperature {
            spec = spec.with_temperature(t).map_err(invalid)?;
        }
        if let Some(n) = self.max_output_tokens {
            spec = spec.with_max_output_tokens(n).map_err(invalid)?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Deserialize)]
pub struct BionicRequest {
    pub text: String,
    pub fixation: Option<i64>,
    pub saccade: Option<i64>,
    #[serde(default)]
    pub style: RenderStyle,
}

#[derive(Debug, Deserialize)]
pub struct ScoreRequest {
    pub article: String,
    pub answer: String,
}

#[derive(Debug, Deserialize)]
pub struct ReviewRequest {
    pub adjusted_score: Option<u8>,
    pub reviewer: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct ListQuery {
    pub kind: Option<JobKind>,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

#[derive(Clone)]
struct LlmClients {
    annotator: Annotator,
    scorer: Scorer,
}

/// Shared handler state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    store: Arc<dyn JobStore>,
    llm: Result<LlmClients, String>,
}

impl AppState {
    /// A state that can only serve offline modes; model-backed requests
    /// answer 503 with `reason`.
    pub fn offline(store: Arc<dyn JobStore>, reason: impl Into<String>) -> Self {
        Self {
            store,
            llm: Err(reason.into()),
        }
    }

    /// Annotator and scorer share one in-flight limiter.
    pub fn with_backend(
        store: Arc<dyn JobStore>,
        backend: Arc<dyn ChatBackend>,
        model: impl Into<String>,
        max_retries: u32,
        max_in_flight: usize,
    ) -> Self {
        let model = model.into();
        let limiter = Arc::new(Semaphore::new(max_in_flight.max(1)));
        let annotator =
            Annotator::new(backend.clone(), model.clone(), max_retries, max_in_flight).with_limiter(limiter.clone());
        let scorer = Scorer::new(backend, model, limiter);
        Self {
            store,
            llm: Ok(LlmClients { annotator, scorer }),
        }
    }

    /// Talks HTTP to the configured endpoint, or runs offline-only when no
    /// model is configured.
    pub fn from_config(store: Arc<dyn JobStore>, config: &LlmConfig) -> Self {
        match HttpChatClient::new(config) {
            Ok(client) => Self::with_backend(
                store,
                Arc::new(client),
                config.model_name.clone(),
                config.max_retries,
                config.max_in_flight,
            ),
            Err(e) => {
                info!(reason = %e, "model-backed endpoints disabled");
                Self::offline(store, e.to_string())
            }
        }
    }

    pub fn store(&self) -> Arc<dyn JobStore> {
        self.store.clone()
    }

    fn llm(&self) -> Result<&LlmClients, ApiError> {
        self.llm
            .as_ref()
            .map_err(|reason| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "llm_not_configured", reason.clone()))
    }

    async fn persist(&self, record: JobRecord) -> Result<Uuid, ApiError> {
        let id = record.id;
        self.store.append(LogEntry::Job(record)).await?;
        Ok(id)
    }

    /// Logs a failed model call, then returns the error.
    async fn fail(&self, kind: JobKind, request: Value, err: ApiError) -> ApiError {
        let result = json!({"code": err.code, "message": err.message});
        if let Err(e) = self
            .persist(JobRecord::new(kind, request, result, Vec::new(), JobStatus::Failed))
            .await
        {
            return e;
        }
        err
    }
}

/// Adds `job_id` to a stored result to form the response.
fn respond(mut result: Value, id: Uuid) -> Json<Value> {
    result["job_id"] = json!(id);
    Json(result)
}

async fn annotate(State(state): State<AppState>, body: Body<AnnotateRequest>) -> Result<Json<Value>, ApiError> {
    let req = body.parsed;
    if normalize(&req.text).is_empty() {
        return Err(ApiError::empty_text());
    }
    req.style.validate().map_err(|e| ApiError::invalid_parameter(e.to_string()))?;

    let (document, report, attempts, fallback_used, exchanges) = if req.mode == AnnotateMode::Offline {
        let document = offline_annotate(&req.text);
        let report = verify_text(&req.text, document.text());
        (document, report, 0, false, Vec::new())
    } else {
        let prompt = req.prompt()?;
        let annotator = &state.llm()?.annotator;
        match annotator.annotate(&req.text, &prompt).await {
            Ok(r) => (r.document, r.report, r.attempts, r.fallback_used, r.exchanges),
            Err(e) => return Err(state.fail(JobKind::Annotate, body.raw, e.into()).await),
        }
    };
    let html = render_html(&document, &req.style).expect("style validated above");
    let status = if fallback_used {
        JobStatus::FallbackUsed
    } else {
        JobStatus::Succeeded
    };
    let result = json!({
        "document": document,
        "report": report,
        "html": html,
        "attempts": attempts,
        "fallback_used": fallback_used,
    });
    let id = state
        .persist(JobRecord::new(JobKind::Annotate, body.raw, result.clone(), exchanges, status))
        .await?;
    Ok(respond(result, id))
}

async fn bionic(State(state): State<AppState>, body: Body<BionicRequest>) -> Result<Json<Value>, ApiError> {
    let req = body.parsed;
    let params = BionicParams::new(
        req.fixation.unwrap_or(i64::from(DEFAULT_FIXATION)),
        req.saccade.unwrap_or(i64::from(DEFAULT_SACCADE)),
    )
    .map_err(|e| ApiError::invalid_parameter(e.to_string()))?;
    req.style.validate().map_err(|e| ApiError::invalid_parameter(e.to_string()))?;
    if normalize(&req.text).is_empty() {
        return Err(ApiError::empty_text());
    }
    let document = bionic_format(&req.text, &params);
    let html = render_html(&document, &req.style).expect("style validated above");
    let result = json!({"document": document, "html": html, "params": params});
    let id = state
        .persist(JobRecord::new(JobKind::Bionic, body.raw, result.clone(), Vec::new(), JobStatus::Succeeded))
        .await?;
    Ok(respond(result, id))
}

async fn score(State(state): State<AppState>, body: Body<ScoreRequest>) -> Result<Json<Value>, ApiError> {
    let req = body.parsed;
    if normalize(&req.article).is_empty() || normalize(&req.answer).is_empty() {
        return Err(ApiError::empty_text());
    }
    let scorer = &state.llm()?.scorer;
    let outcome = scorer.score_logged(&req.article, &req.answer).await;
    let exchanges: Vec<_> = outcome.exchange.into_iter().collect();
    match outcome.result {
        Ok(result) => {
            let result = serde_json::to_value(result).expect("scores serialize");
            let id = state
                .persist(JobRecord::new(JobKind::Score, body.raw, result.clone(), exchanges, JobStatus::Succeeded))
                .await?;
            Ok(respond(result, id))
        }
        Err(e) => {
            let err = ApiError::from(e);
            let result = json!({"code": err.code, "message": err.message});
            state
                .persist(JobRecord::new(JobKind::Score, body.raw, result, exchanges, JobStatus::Failed))
                .await?;
            Err(err)
        }
    }
}

async fn get_job(State(state): State<AppState>, path: Result<Path<Uuid>, PathRejection>) -> Result<Json<JobView>, ApiError> {
    let Path(id) = path?;
    state
        .store
        .get(id)
        .await
        .map(Json)
        .ok_or_else(|| StoreError::UnknownJob(id).into())
}

async fn list_jobs(
    State(state): State<AppState>,
    query: Result<Query<ListQuery>, QueryRejection>,
) -> Result<Json<Value>, ApiError> {
    let Query(q) = query?;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE_SIZE).min(MAX_PAGE_SIZE);
    let offset = q.offset.unwrap_or(0);
    let (jobs, total) = state.store.list(q.kind, limit, offset).await;
    Ok(Json(json!({"jobs": jobs, "total": total, "limit": limit, "offset": offset})))
}

async fn review_job(
    State(state): State<AppState>,
    path: Result<Path<Uuid>, PathRejection>,
    body: Body<ReviewRequest>,
) -> Result<Json<JobView>, ApiError> {
    let Path(id) = path?;
    let req = body.parsed;
    if req.adjusted_score.is_some_and(|s| s > larf_core::scorer::MAX_SCORE) {
        return Err(ApiError::invalid_parameter("adjusted_score must be within 0..=10"));
    }
    let job = state.store.get(id).await.ok_or(StoreError::UnknownJob(id))?;
    if req.adjusted_score.is_some() && job.record.kind != JobKind::Score {
        return Err(ApiError::invalid_parameter("only score jobs take an adjusted_score"));
    }
    let review = Review {
        job_id: id,
        created_at: Utc::now(),
        adjusted_score: req.adjusted_score,
        reviewer: req.reviewer,
        note: req.note,
    };
    state.store.append(LogEntry::Review(review)).await?;
    Ok(Json(state.store.get(id).await.expect("job exists")))
}

async fn health() -> Json<Value> {
    Json(json!({
        "status": "ok",
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
    }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

/// The full API. With `ui_origin`, cross-origin requests from that origin
/// are allowed.
pub fn router(state: AppState, ui_origin: Option<&str>) -> Router {
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/api/annotate", post(annotate))
        .route("/api/bionic", post(bionic))
        .route("/api/score", post(score))
        .route("/api/jobs", get(list_jobs))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/jobs/{id}/review", post(review_job))
        .fallback(not_found)
        .with_state(state);
    if let Some(origin) = ui_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        );
    }
    app
}
