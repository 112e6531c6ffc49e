//! HTTP API for the evaluation UI and operators.
//!
//! Every campaign change goes through [`CampaignStore`], the same code path
//! the command line uses.

use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kgdf_core::clock::{Clock, SystemClock};
use kgdf_core::eval::{rank_personas, CampaignStats, CampaignStore, EvalError, PersonaRanking};
use kgdf_core::generate::GenerationBackend;
use kgdf_core::prompt::ScenarioSet;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::ServiceConfig;
use crate::pipeline::{read_jsonl, run_dirs, run_pipeline, AnnotationRecord, PipelineContext, ANNOTATIONS_FILE};
use crate::{build_backend, load_context, AppError};

/// Runs generation requests one at a time.
pub struct Generator {
    pub ctx: PipelineContext,
    pub backend: Arc<dyn GenerationBackend>,
    pub clock: Arc<dyn Clock>,
    running: Mutex<()>,
}

impl Generator {
    pub fn new(ctx: PipelineContext, backend: Arc<dyn GenerationBackend>, clock: Arc<dyn Clock>) -> Self {
        Self { ctx, backend, clock, running: Mutex::new(()) }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<CampaignStore>,
    pub data_dir: PathBuf,
    pub bearer_token: Option<String>,
    pub operator_token: Option<String>,
    pub generator: Option<Arc<Generator>>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.to_string(), message: message.into() }
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        let status = match &e {
            EvalError::UnknownTask(_) => StatusCode::NOT_FOUND,
            EvalError::DuplicateRating { .. } | EvalError::NoRatings => StatusCode::CONFLICT,
            EvalError::ScoreOutOfRange { .. } | EvalError::ScoreNotHalfStep { .. } | EvalError::InvalidEvaluator(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.code, message: self.message })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ")
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(expected) = &state.bearer_token {
        let presented = bearer(request.headers());
        // the operator token also opens the evaluator endpoints
        let ok = presented == Some(expected.as_str())
            || (presented.is_some() && presented == state.operator_token.as_deref());
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(request).await
}

#[derive(Debug, Deserialize)]
struct EvaluatorQuery {
    evaluator: Option<String>,
}

impl EvaluatorQuery {
    fn evaluator(&self) -> ApiResult<&str> {
        match self.evaluator.as_deref().map(str::trim) {
            Some(e) if !e.is_empty() => Ok(e),
            _ => Err(EvalError::InvalidEvaluator(String::new()).into()),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())))
}

async fn next_task(State(state): State<AppState>, Query(q): Query<EvaluatorQuery>) -> ApiResult<Response> {
    let evaluator = q.evaluator()?;
    Ok(match state.store.next_task(evaluator) {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn get_task(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    state.store.task(&id).map(|t| Json(t.clone()).into_response()).ok_or_else(|| EvalError::UnknownTask(id).into())
}

#[derive(Debug, Deserialize)]
struct RatingBody {
    task_id: String,
    evaluator: String,
    s1: f64,
    s2: f64,
}

async fn post_rating(State(state): State<AppState>, body: Result<Json<RatingBody>, JsonRejection>) -> ApiResult<Response> {
    let Json(body) = body.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidBody", e.body_text()))?;
    let store = Arc::clone(&state.store);
    let rating = blocking(move || Ok(store.submit_rating(&body.task_id, &body.evaluator, body.s1, body.s2)?)).await?;
    Ok((StatusCode::CREATED, Json(rating)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsResponse {
    #[serde(flatten)]
    pub stats: CampaignStats,
    pub ranking: PersonaRanking,
}

async fn get_stats(State(state): State<AppState>) -> ApiResult<Json<StatsResponse>> {
    let stats = state.store.stats()?;
    let ranking = rank_personas(&stats);
    Ok(Json(StatsResponse { stats, ranking }))
}

async fn get_progress(State(state): State<AppState>, Query(q): Query<EvaluatorQuery>) -> ApiResult<Response> {
    let evaluator = q.evaluator()?;
    Ok(Json(state.store.progress(evaluator)).into_response())
}

#[derive(Debug, Deserialize)]
struct GenerateBody {
    scenario_file: String,
}

/// Resolves a data-directory-relative path, refusing anything that escapes it.
fn inside(root: &Path, relative: &str) -> Option<PathBuf> {
    let p = Path::new(relative);
    if relative.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    Some(root.join(p))
}

async fn post_generate(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<GenerateBody>, JsonRejection>,
) -> ApiResult<Response> {
    let authorized = match (&state.operator_token, bearer(&headers)) {
        (Some(expected), Some(presented)) => expected == presented,
        _ => false,
    };
    let Some(generator) = state.generator.clone().filter(|_| authorized) else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "Forbidden", "generation needs the operator token"));
    };
    let Json(body) = body.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidBody", e.body_text()))?;
    let path = inside(&state.data_dir, &body.scenario_file).ok_or_else(|| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidPath", "scenario_file must be relative to the data directory")
    })?;
    let out_dir = run_dir(&state.data_dir, &path);
    let report = blocking(move || {
        let scenarios = ScenarioSet::load(&path)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ScenarioFile", e.to_string()))?;
        let _guard = generator.running.lock().unwrap_or_else(|p| p.into_inner());
        run_pipeline(&generator.ctx, &scenarios, generator.backend.as_ref(), generator.clock.as_ref(), &out_dir)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Pipeline", e.to_string()))
    })
    .await?;
    Ok(Json(report).into_response())
}

/// Output directory of a run over `scenario_file`.
pub fn run_dir(data_dir: &Path, scenario_file: &Path) -> PathBuf {
    let stem = scenario_file.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    data_dir.join("pipeline").join(stem)
}

async fn get_annotation(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let root = state.data_dir.join("pipeline");
    let found = blocking(move || {
        for dir in run_dirs(&root) {
            let records: Vec<AnnotationRecord> = read_jsonl(&dir.join(ANNOTATIONS_FILE))
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "CorruptRecord", e.to_string()))?;
            if let Some(r) = records.into_iter().find(|r| r.response_id == id) {
                return Ok(Some(r));
            }
        }
        Ok(None)
    })
    .await?;
    found
        .map(|r| Json(r).into_response())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownResponse", "no annotation for this response"))
}

pub fn router(state: AppState, cors_origin: Option<&str>) -> Result<Router, AppError> {
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/tasks/{id}", get(get_task))
        .route("/api/ratings", post(post_rating))
        .route("/api/stats", get(get_stats))
        .route("/api/progress", get(get_progress))
        .route("/api/generate", post(post_generate))
        .route("/api/annotations/{response_id}", get(get_annotation))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    Ok(match cors_origin {
        Some(origin) => {
            let origin = HeaderValue::from_str(origin).map_err(|_| {
                AppError::Config(crate::config::ConfigError::Parse {
                    path: "service.cors_origin".into(),
                    message: format!("invalid origin {origin:?}"),
                })
            })?;
            api.layer(
                CorsLayer::new()
                    .allow_origin(AllowOrigin::exact(origin))
                    .allow_methods([Method::GET, Method::POST])
                    .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]),
            )
        }
        None => api,
    })
}

/// Fails unless a file can be created in `dir`.
pub fn check_writable(dir: &Path) -> Result<(), AppError> {
    let unwritable = |reason: String| AppError::DataDirUnwritable { path: dir.display().to_string(), reason };
    std::fs::create_dir_all(dir).map_err(|e| unwritable(e.to_string()))?;
    let probe = dir.join(".kgdf-write-probe");
    std::fs::write(&probe, b"").map_err(|e| unwritable(e.to_string()))?;
    std::fs::remove_file(&probe).map_err(|e| unwritable(e.to_string()))?;
    Ok(())
}

/// Everything `serve` needs, checked before any socket is opened.
pub fn prepare(config: &ServiceConfig, offline: bool) -> Result<AppState, AppError> {
    let data_dir = config.service.data_dir.clone();
    check_writable(&data_dir)?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = CampaignStore::open(config.campaign_path(), Arc::clone(&clock)).map_err(|e| match e {
        EvalError::Io(io) => EvalError::Io(std::io::Error::new(
            io.kind(),
            format!("campaign {}: {io}", config.campaign_path().display()),
        )),
        other => other,
    })?;
    let generator = match &config.service.operator_token {
        Some(_) => {
            let ctx = load_context(config)?;
            let backend = build_backend(&config.effective_backend(offline)?)?;
            Some(Arc::new(Generator::new(ctx, backend, Arc::clone(&clock))))
        }
        None => None,
    };
    Ok(AppState {
        store: Arc::new(store),
        data_dir,
        bearer_token: config.service.bearer_token.clone(),
        operator_token: config.service.operator_token.clone(),
        generator,
    })
}

pub async fn bind(config: &ServiceConfig) -> Result<TcpListener, AppError> {
    let addr = config.listen_addr()?;
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => AppError::PortInUse(addr.port()),
        _ => AppError::Io(e),
    })
}

/// Validates everything, binds, then serves until interrupted.
pub async fn serve(config: &ServiceConfig, offline: bool) -> Result<(), AppError> {
    let state = prepare(config, offline)?;
    let app = router(state, config.service.cors_origin.as_deref())?;
    let listener = bind(config).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
