//! Local HTTP API over the engine, for a browser front end running oracle
//! mode. Binds loopback by default; every project lives under the data
//! directory and is resumed on restart.
//!
//! All JSON responses carry `X-Screenloop-Api: 1`. Errors are
//! `{error_code, message, detail}`.

mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{parse_bytes, search_records, Label, SourceFormat};
use crate::engine::{
    export_results, save_state, suggest_random_excluded, suggestion_rng, EngineError, ExportFormat, ProjectState,
    Progress, Settings,
};

pub use error::ApiError;
use store::{Project, Store};

pub const API_VERSION: &str = "1";
pub const API_VERSION_HEADER: &str = "x-screenloop-api";
pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 5275;
/// Environment variable holding an optional bearer token.
pub const TOKEN_ENV: &str = "SCREENLOOP_TOKEN";

const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;
const SNIPPET_CHARS: usize = 300;
const PLACEHOLDER_PAGE: &str = include_str!("index.html");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Directory with a built front end, served at `/`.
    pub ui_dir: Option<PathBuf>,
    /// When set, `/api` requests other than health need `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    token: Option<Arc<str>>,
}

impl AppState {
    pub fn open(config: &ServiceConfig) -> Result<Self, String> {
        Ok(AppState {
            store: Arc::new(Store::open(&config.data_dir)?),
            token: config.token.as_deref().map(Arc::from),
        })
    }

    /// Blocks until no project has a retrain in flight.
    pub fn wait_idle(&self) {
        for project in self.store.list() {
            let engine = project.lock().engine.clone();
            if let Some(engine) = engine {
                let _ = engine.wait_idle();
            }
        }
    }
}

pub fn router(app: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/dataset", post(upload_dataset))
        .route("/projects/{id}/search", get(search))
        .route("/projects/{id}/suggestions", get(suggestions))
        .route("/projects/{id}/priors", post(set_priors))
        .route("/projects/{id}/next", get(next))
        .route("/projects/{id}/labels", post(label))
        .route("/projects/{id}/progress", get(progress))
        .route("/projects/{id}/export", get(export))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_token))
        .route("/health", get(health))
        .fallback(|| async { ApiError::not_found("endpoint") });
    let router = Router::new()
        .nest("/api", api)
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(middleware::map_response(version_header))
        .with_state(app);
    match ui_dir {
        Some(dir) => router.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    }
}

async fn version_header(mut response: Response) -> Response {
    response
        .headers_mut()
        .insert(API_VERSION_HEADER, HeaderValue::from_static(API_VERSION));
    response
}

async fn require_token(State(app): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &app.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(&**token) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(request).await
}

/// Binds and serves until ctrl-c. Prints the bound URL on stdout.
pub async fn serve(listener: tokio::net::TcpListener, app: AppState, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    println!("screenloop listening on http://{addr}/");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    axum::serve(listener, router(app.clone(), ui_dir))
        .with_graceful_shutdown(shutdown)
        .await?;
    tokio::task::spawn_blocking(move || app.wait_idle())
        .await
        .map_err(std::io::Error::other)
}

fn project(app: &AppState, id: &str) -> Result<Arc<Project>, ApiError> {
    app.store.get(id).ok_or_else(|| ApiError::not_found("project"))
}

/// Runs blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    name: String,
    #[serde(default)]
    settings: Option<Settings>,
}

#[derive(Serialize)]
struct ApiProject {
    project_id: String,
    name: String,
    dataset_fingerprint: Option<String>,
    settings: Settings,
    priors_set: bool,
    progress: Progress,
}

fn describe(project: &Project) -> ApiProject {
    let slot = project.lock();
    let n_total = slot.dataset.as_ref().map_or(0, |d| d.len());
    ApiProject {
        project_id: slot.meta.project_id.clone(),
        name: slot.meta.name.clone(),
        dataset_fingerprint: slot.dataset.as_ref().map(|d| d.fingerprint().to_owned()),
        settings: slot.meta.settings.clone(),
        priors_set: slot.engine.is_some(),
        progress: slot
            .engine
            .as_ref()
            .map_or_else(|| Progress::empty(n_total), |e| e.with_state(ProjectState::progress)),
    }
}

async fn create_project(
    State(app): State<AppState>,
    body: Result<Json<CreateProject>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<ApiProject>), ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request("bad_body", e.body_text()))?;
    if body.name.trim().is_empty() {
        return Err(ApiError::bad_request("empty_name", "project name must not be empty"));
    }
    let settings = body.settings.unwrap_or_default();
    settings.validate().map_err(ApiError::from)?;
    let store = Arc::clone(&app.store);
    let project = blocking(move || store.create(body.name, settings).map_err(ApiError::internal)).await?;
    Ok((StatusCode::CREATED, Json(describe(&project))))
}

async fn list_projects(State(app): State<AppState>) -> Json<Vec<ApiProject>> {
    Json(app.store.list().iter().map(|p| describe(p)).collect())
}

async fn get_project(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<ApiProject>, ApiError> {
    Ok(Json(describe(&*project(&app, &id)?)))
}

#[derive(Deserialize)]
struct UploadQuery {
    format: Option<String>,
}

async fn upload_dataset(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let project = project(&app, &id)?;
    let format = match q.format.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None => None,
        Some("ris") => Some(SourceFormat::Ris),
        Some("csv") => Some(SourceFormat::Csv),
        Some(other) => return Err(ApiError::bad_request("bad_format", format!("unknown format {other:?}, expected ris or csv"))),
    };
    blocking(move || {
        let mut slot = project.lock();
        if slot.engine.is_some() {
            return Err(ApiError::conflict("labels_exist", "the dataset cannot be replaced once priors are set"));
        }
        let dataset = parse_bytes(&body, format)?;
        let format = dataset.source_format();
        store::save_dataset(&project.dir, &body).map_err(ApiError::internal)?;
        slot.meta.dataset_format = Some(format);
        store::save_meta(&project.dir, &slot.meta).map_err(ApiError::internal)?;
        let summary = json!({
            "n_records": dataset.len(),
            "n_rejected": dataset.report().rejected.len(),
            "format": format,
            "fingerprint": dataset.fingerprint(),
            "n_labeled": dataset.labels().iter().filter(|l| l.is_some()).count(),
            "rejected": dataset.report().rejected,
            "unknown_tags": dataset.report().unknown_tags,
        });
        slot.dataset = Some(Arc::new(dataset));
        Ok(Json(summary))
    })
    .await
}

#[derive(Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
    k: Option<usize>,
}

#[derive(Serialize)]
struct RecordView {
    row_id: usize,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    authors: Option<String>,
    keywords: Option<String>,
    doi: Option<String>,
    url: Option<String>,
    label: Option<Label>,
}

fn snippet(text: &str) -> String {
    match text.char_indices().nth(SNIPPET_CHARS) {
        Some((cut, _)) => format!("{}…", &text[..cut]),
        None => text.to_owned(),
    }
}

fn record_view(project: &Project, row_id: usize, full: bool) -> Option<RecordView> {
    let slot = project.lock();
    let dataset = slot.dataset.as_ref()?;
    let r = dataset.record(row_id)?;
    let label = slot.engine.as_ref().and_then(|e| e.with_state(|s| s.label_of(row_id)));
    Some(RecordView {
        row_id,
        title: r.title.clone(),
        abstract_text: if full { r.abstract_text.clone() } else { snippet(&r.abstract_text) },
        authors: r.authors.clone(),
        keywords: r.keywords.clone(),
        doi: r.doi.clone(),
        url: r.url.clone(),
        label,
    })
}

fn require_dataset(project: &Project) -> Result<Arc<crate::corpus::Dataset>, ApiError> {
    project
        .lock()
        .dataset
        .clone()
        .ok_or_else(|| ApiError::conflict("no_dataset", "upload a dataset first"))
}

async fn search(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SearchQuery>,
) -> Result<Json<Vec<RecordView>>, ApiError> {
    let project = project(&app, &id)?;
    let dataset = require_dataset(&project)?;
    let ids = search_records(&dataset, &q.q, q.k.unwrap_or(10))?;
    Ok(Json(ids.into_iter().filter_map(|i| record_view(&project, i, false)).collect()))
}

#[derive(Deserialize)]
struct SuggestQuery {
    k: Option<usize>,
}

/// Random records as candidates for the irrelevant prior.
async fn suggestions(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SuggestQuery>,
) -> Result<Json<Vec<RecordView>>, ApiError> {
    let project = project(&app, &id)?;
    let dataset = require_dataset(&project)?;
    let (seed, labeled) = {
        let slot = project.lock();
        let labeled = match &slot.engine {
            Some(e) => e.with_state(ProjectState::labeled_mask),
            None => vec![false; dataset.len()],
        };
        (slot.meta.settings.seed, labeled)
    };
    let k = q.k.unwrap_or(5).min(labeled.iter().filter(|&&l| !l).count());
    let ids = suggest_random_excluded(&labeled, k, &mut suggestion_rng(seed))?;
    Ok(Json(ids.into_iter().filter_map(|i| record_view(&project, i, false)).collect()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Priors {
    #[serde(default)]
    included: Vec<usize>,
    #[serde(default)]
    excluded: Vec<usize>,
}

async fn set_priors(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Priors>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Progress>, ApiError> {
    let Json(priors) = body.map_err(|e| ApiError::bad_request("bad_body", e.body_text()))?;
    let project = project(&app, &id)?;
    blocking(move || {
        let mut slot = project.lock();
        if slot.engine.is_some() {
            return Err(ApiError::conflict("priors_set", "priors are already set"));
        }
        let dataset = slot
            .dataset
            .clone()
            .ok_or_else(|| ApiError::conflict("no_dataset", "upload a dataset first"))?;
        let state = ProjectState::init_project(dataset, slot.meta.settings.clone(), &priors.included, &priors.excluded)
            .map_err(|e| match e {
                EngineError::UnknownRowId(_) => ApiError::bad_request("unknown_row_id", e.to_string()),
                other => other.into(),
            })?;
        let path = project.dir.join("state.tar");
        store::write_atomic(&path, &save_state(&state)).map_err(|e| ApiError::internal(e.to_string()))?;
        let progress = state.progress();
        slot.engine = Some(store::drive(&project.dir, state));
        Ok(Json(progress))
    })
    .await
}

fn engine(project: &Project) -> Result<crate::engine::AsyncProject, ApiError> {
    project
        .lock()
        .engine
        .clone()
        .ok_or_else(|| ApiError::conflict("no_priors", "set the prior records first"))
}

#[derive(Serialize)]
struct NextRecord {
    #[serde(flatten)]
    record: RecordView,
    model_version: u64,
    source: crate::engine::LabelSource,
}

async fn next(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let project = project(&app, &id)?;
    let engine = engine(&project)?;
    match engine.next_record() {
        Ok(p) => {
            let record = record_view(&project, p.row_id, true).ok_or_else(|| ApiError::internal("record vanished"))?;
            Ok(Json(NextRecord {
                record,
                model_version: p.model_version,
                source: p.source,
            })
            .into_response())
        }
        Err(EngineError::PoolExhausted | EngineError::Stopped) => Ok(StatusCode::NO_CONTENT.into_response()),
        Err(e) => Err(e.into()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelBody {
    row_id: usize,
    label: Label,
}

async fn label(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<LabelBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Progress>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request("bad_body", e.body_text()))?;
    let project = project(&app, &id)?;
    let engine = engine(&project)?;
    blocking(move || {
        engine.submit_label(body.row_id, body.label)?;
        Ok(Json(engine.with_state(ProjectState::progress)))
    })
    .await
}

async fn progress(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Progress>, ApiError> {
    Ok(Json(describe(&*project(&app, &id)?).progress))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let project = project(&app, &id)?;
    let format: ExportFormat = q
        .format
        .as_deref()
        .unwrap_or("csv")
        .parse()
        .map_err(|e: String| ApiError::bad_request("bad_format", e))?;
    let engine = engine(&project)?;
    let bytes = blocking(move || Ok(engine.with_state(|s| export_results(s, format)))).await?;
    let (content_type, ext) = match format {
        ExportFormat::Csv => ("text/csv; charset=utf-8", "csv"),
        ExportFormat::Ris => ("application/x-research-info-systems", "ris"),
    };
    let disposition = format!("attachment; filename=\"screening-{id}.{ext}\"");
    Ok((
        [(header::CONTENT_TYPE, content_type.to_owned()), (header::CONTENT_DISPOSITION, disposition)],
        bytes,
    )
        .into_response())
}
