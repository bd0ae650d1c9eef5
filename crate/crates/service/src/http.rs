//! JSON-over-HTTP API.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use taskvis_core::data::{load_dataset, DataError, Dataset, Field, FieldType, GeoRole, LoadOptions, SourceFormat};
use taskvis_core::task::list_tasks;

use crate::pipeline::{recommend, Engine, RecommendationRequest, RequestError};
use crate::registry::Registry;

pub const PORT_ENV: &str = "TASKVIS_PORT";
pub const MAP_FILE_ENV: &str = "TASKVIS_MAP_FILE";
pub const DEFAULT_PORT: u16 = 8080;
/// Largest accepted upload body.
pub const DEFAULT_UPLOAD_LIMIT: usize = 64 * 1024 * 1024;
/// Where emitted geoshape documents find the region map when served.
pub const MAP_ROUTE: &str = "/api/map";

static SHIPPED_MAP: &[u8] = include_bytes!("../../core/assets/maps/us-states-10m.json");

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub registry: Arc<Registry>,
    pub map: Arc<Vec<u8>>,
    pub upload_limit: usize,
    pub max_rows: usize,
}

impl AppState {
    pub fn new(engine: Engine) -> AppState {
        AppState {
            engine: Arc::new(engine),
            registry: Arc::new(Registry::new()),
            map: Arc::new(SHIPPED_MAP.to_vec()),
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            max_rows: LoadOptions::default().max_rows,
        }
    }

    /// Engine and map from the environment; emitted maps point at [`MAP_ROUTE`].
    pub fn from_env() -> Result<AppState, String> {
        let mut engine = Engine::from_env().map_err(|e| e.to_string())?;
        engine.emit.map_url = MAP_ROUTE.to_string();
        let mut state = AppState::new(engine);
        if let Some(path) = std::env::var_os(MAP_FILE_ENV) {
            let path = PathBuf::from(path);
            let bytes = std::fs::read(&path).map_err(|e| format!("reading {}: {e}", path.display()))?;
            state.map = Arc::new(bytes);
        }
        Ok(state)
    }
}

pub fn port_from_env() -> Result<u16, String> {
    match std::env::var(PORT_ENV) {
        Ok(p) => p.parse().map_err(|_| format!("{PORT_ENV}: `{p}` is not a port number")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

fn not_found(what: &str, name: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown {what} `{name}`"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset_id: String,
    pub row_count: usize,
    pub fields: Vec<Field>,
}

impl DatasetReport {
    pub fn new(d: &Dataset) -> DatasetReport {
        DatasetReport {
            dataset_id: d.id.clone(),
            row_count: d.row_count(),
            fields: d.fields().to_vec(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    format: Option<String>,
}

async fn upload(
    State(state): State<AppState>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> Result<(StatusCode, Json<DatasetReport>), ApiError> {
    let format = match q.format.as_deref() {
        None => None,
        Some("csv") => Some(SourceFormat::Csv),
        Some("json") => Some(SourceFormat::Json),
        Some(other) => {
            return Err(ApiError(
                StatusCode::BAD_REQUEST,
                format!("unknown format `{other}`; expected csv or json"),
            ))
        }
    };
    let opts = LoadOptions {
        format,
        max_rows: state.max_rows,
    };
    let dataset = tokio::task::spawn_blocking(move || load_dataset(&body, opts).map(|d| (d, body)))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let (dataset, body) = dataset.map_err(|e| match e {
        DataError::TooManyRows { .. } => ApiError(StatusCode::PAYLOAD_TOO_LARGE, e.to_string()),
        e => ApiError(StatusCode::BAD_REQUEST, e.to_string()),
    })?;
    let (_, stored) = state.registry.insert(dataset, &body);
    Ok((StatusCode::CREATED, Json(DatasetReport::new(&stored))))
}

async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<DatasetReport>, ApiError> {
    let d = state.registry.get(&id).ok_or_else(|| not_found("dataset", &id))?;
    Ok(Json(DatasetReport::new(&d)))
}

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<GeoRole>>, D::Error> {
    Option::<GeoRole>::deserialize(d).map(Some)
}

/// A field edit. `geo_role: null` clears the role.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPatch {
    #[serde(rename = "type", default)]
    pub ftype: Option<FieldType>,
    #[serde(default, deserialize_with = "present")]
    pub geo_role: Option<Option<GeoRole>>,
}

async fn patch_field(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    Json(edit): Json<FieldPatch>,
) -> Result<Json<Field>, ApiError> {
    if edit.ftype.is_none() && edit.geo_role.is_none() {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            "expected `type` and/or `geo_role`".into(),
        ));
    }
    let current = state.registry.get(&id).ok_or_else(|| not_found("dataset", &id))?;
    if current.field(&name).is_none() {
        return Err(not_found("field", &name));
    }
    let updated = state
        .registry
        .update(&id, |d| {
            let mut d = match edit.ftype {
                Some(t) => d.override_field_type(&name, t)?,
                None => d.clone(),
            };
            if let Some(role) = edit.geo_role {
                d = d.set_geo_role(&name, role)?;
            }
            Ok::<_, DataError>(d)
        })
        .ok_or_else(|| not_found("dataset", &id))?
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(updated.field(&name).expect("field checked above").clone()))
}

async fn tasks() -> impl IntoResponse {
    Json(list_tasks())
}

async fn recommend_handler(
    State(state): State<AppState>,
    Json(req): Json<RecommendationRequest>,
) -> Result<Response, ApiError> {
    let dataset = state
        .registry
        .get(&req.dataset_id)
        .ok_or_else(|| not_found("dataset", &req.dataset_id))?;
    let engine = state.engine.clone();
    let out = tokio::task::spawn_blocking(move || recommend(&engine, &dataset, &req))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match out {
        Ok(resp) => Ok(Json(resp).into_response()),
        Err(RequestError::Invalid(m)) => Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, m)),
        Err(RequestError::Engine(m)) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, m)),
    }
}

async fn map(State(state): State<AppState>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], state.map.as_ref().clone())
}

pub fn router(state: AppState) -> Router {
    let limit = state.upload_limit;
    Router::new()
        .route("/api/datasets", post(upload))
        .route("/api/datasets/{id}", get(get_dataset))
        .route("/api/datasets/{id}/fields/{name}", patch(patch_field))
        .route("/api/tasks", get(tasks))
        .route("/api/recommend", post(recommend_handler))
        .route(MAP_ROUTE, get(map))
        .layer(DefaultBodyLimit::max(limit))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serve until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("taskvis listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
