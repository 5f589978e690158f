//! HTTP measurement service.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/images` | raw PGM/PNG body, returns `{image_id, width, height}` |
//! | GET | `/images/{id}` | stored bytes |
//! | POST | `/sessions` | `{image_id, observer_id}`, returns `{session_id}` |
//! | GET | `/sessions/{id}` | session with its measurements |
//! | POST | `/sessions/{id}/measure` | `{roi_superior, roi_inferior, config?}`, returns the measurement and overlay segments |
//! | GET | `/export/observations.csv` | optional `group` and `method` filters |
//!
//! Errors are `{"error": "...", "field": "..."}` with `field` naming the
//! offending request field when there is one.

pub mod store;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cobb_core::{measure_cobb, Error as CoreError, Group, Measurement, Method, Observation, PipelineConfig, Rect, RoiRole, Segment};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::decode_image;
use crate::records::write_observations;
pub use store::{Session, Store};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8750";
pub const DEFAULT_MAX_IMAGE_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub max_image_bytes: usize,
    /// Static files served at `/` when set.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self { store: Arc::new(store) }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self { status, error: error.into(), field: None }
    }

    fn field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        log::error!("{e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body(body: Result<Bytes, BytesRejection>) -> ApiResult<Bytes> {
    body.map_err(|r| ApiError::new(r.status(), r.body_text()))
}

fn json_object(bytes: &[u8]) -> ApiResult<serde_json::Map<String, Value>> {
    match serde_json::from_slice::<Value>(bytes) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::new(StatusCode::BAD_REQUEST, "request body must be a JSON object")),
        Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}"))),
    }
}

fn string_field(m: &serde_json::Map<String, Value>, name: &str) -> ApiResult<String> {
    match m.get(name) {
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        _ => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("{name} must be a nonempty string")).field(name)),
    }
}

pub fn router(state: AppState, max_image_bytes: usize) -> Router {
    Router::new()
        .route("/images", post(upload_image))
        .route("/images/{id}", get(get_image))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/measure", post(measure))
        .route("/export/observations.csv", get(export_observations))
        .layer(DefaultBodyLimit::max(max_image_bytes))
        .with_state(state)
}

/// Router plus the static UI, if configured.
pub fn app(config: &ServiceConfig) -> std::io::Result<Router> {
    let state = AppState::new(Store::open(&config.data_dir)?);
    let api = router(state, config.max_image_bytes);
    Ok(match &config.ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    })
}

pub async fn serve(config: ServiceConfig, listen: SocketAddr) -> std::io::Result<()> {
    let app = app(&config)?;
    let listener = tokio::net::TcpListener::bind(listen).await?;
    log::info!("listening on {}, data in {}", listener.local_addr()?, config.data_dir.display());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImageCreated {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
}

async fn upload_image(State(state): State<AppState>, raw: Result<Bytes, BytesRejection>) -> ApiResult<Response> {
    let bytes = body(raw)?;
    if bytes.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty body"));
    }
    let img = decode_image(&bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let store = state.store.clone();
    let image_id = tokio::task::spawn_blocking(move || store.put_image(&bytes))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    let created = ImageCreated { image_id, width: img.width(), height: img.height() };
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_image(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = state
        .store
        .get_image(&id)
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown image {id}")))?;
    let kind = if bytes.starts_with(b"\x89PNG") { "image/png" } else { "image/x-portable-graymap" };
    Ok(([(header::CONTENT_TYPE, kind)], bytes).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(state): State<AppState>, raw: Result<Bytes, BytesRejection>) -> ApiResult<Response> {
    let m = json_object(&body(raw)?)?;
    let image_id = string_field(&m, "image_id")?;
    let observer_id = string_field(&m, "observer_id")?;
    if !state.store.has_image(&image_id) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown image {image_id}")).field("image_id"));
    }
    let session = Session {
        session_id: uuid::Uuid::new_v4().simple().to_string(),
        image_id,
        observer_id,
        created_at: now(),
        measurements: Vec::new(),
    };
    state.store.put_session(&session).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: session.session_id })).into_response())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn load_session(store: &Store, id: &str) -> ApiResult<Session> {
    store
        .get_session(id)
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Session>> {
    load_session(&state.store, &id).map(Json)
}

/// Overlay segments in full-image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub superior: Option<Segment>,
    pub inferior: Option<Segment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureResponse {
    #[serde(flatten)]
    pub measurement: Measurement,
    pub overlay: Overlay,
}

fn roi_field(m: &serde_json::Map<String, Value>, role: RoiRole) -> ApiResult<Rect> {
    let name = role.field();
    let bad = |msg: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg).field(name);
    let obj = m.get(name).and_then(Value::as_object).ok_or_else(|| bad(format!("{name} must be an object {{x, y, w, h}}")))?;
    let mut v = [0usize; 4];
    for (slot, key) in v.iter_mut().zip(["x", "y", "w", "h"]) {
        let n = obj.get(key).and_then(Value::as_i64).ok_or_else(|| bad(format!("{name}.{key} must be an integer")))?;
        if n < 0 {
            return Err(bad(format!("invalid {role} roi: {key} = {n} is off-image")));
        }
        *slot = n as usize;
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3]))
}

fn pipeline_error(e: CoreError) -> ApiError {
    let unprocessable = |field: &str| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()).field(field);
    match e {
        CoreError::InvalidRoi { role, .. } | CoreError::NoEndplate(role) => unprocessable(role.field()),
        CoreError::InvalidConfig(_) => unprocessable("config"),
        other => ApiError::internal(other),
    }
}

async fn measure(
    State(state): State<AppState>,
    Path(id): Path<String>,
    raw: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<MeasureResponse>> {
    let m = json_object(&body(raw)?)?;
    let roi_sup = roi_field(&m, RoiRole::Superior)?;
    let roi_inf = roi_field(&m, RoiRole::Inferior)?;
    let cfg = match m.get("config") {
        None | Some(Value::Null) => PipelineConfig::default(),
        Some(v) => serde_json::from_value::<PipelineConfig>(v.clone())
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()).field("config"))?,
    };

    let lock = state.store.session_lock(&id);
    let _guard = lock.lock().await;
    let mut session = load_session(&state.store, &id)?;
    let store = state.store.clone();
    let response = tokio::task::spawn_blocking(move || -> ApiResult<MeasureResponse> {
        let bytes = store
            .get_image(&session.image_id)
            .map_err(ApiError::internal)?
            .ok_or_else(|| ApiError::internal(format!("image {} missing from store", session.image_id)))?;
        let img = decode_image(&bytes).map_err(ApiError::internal)?;
        let measurement = measure_cobb(&img, roi_sup, roi_inf, &cfg)
            .map_err(pipeline_error)?
            .labeled(session.image_id.clone(), session.observer_id.clone(), now());
        session.measurements.push(measurement.clone());
        store.put_session(&session).map_err(ApiError::internal)?;
        let overlay = Overlay {
            superior: measurement.overlay(RoiRole::Superior),
            inferior: measurement.overlay(RoiRole::Inferior),
        };
        Ok(MeasureResponse { measurement, overlay })
    })
    .await
    .map_err(ApiError::internal)??;
    Ok(Json(response))
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    group: Option<String>,
    method: Option<String>,
}

/// Every stored measurement as an observation. An image's group comes from
/// the mean Cobb angle over all of its measurements, so all observers of one
/// image share a group.
pub fn observations(sessions: &[Session]) -> Vec<Observation> {
    let mut per_image: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for s in sessions {
        for m in &s.measurements {
            let e = per_image.entry(s.image_id.as_str()).or_default();
            e.0 += m.cobb_deg;
            e.1 += 1;
        }
    }
    sessions
        .iter()
        .flat_map(|s| {
            let (sum, n) = per_image.get(s.image_id.as_str()).copied().unwrap_or((0.0, 1));
            let group = Group::from_angle(sum / n as f64);
            s.measurements.iter().map(move |m| Observation {
                image_id: s.image_id.clone(),
                observer_id: s.observer_id.clone(),
                session_id: s.session_id.clone(),
                group,
                method: Method::Digital,
                cobb_deg: m.cobb_deg,
            })
        })
        .collect()
}

async fn export_observations(
    State(state): State<AppState>,
    query: Result<Query<ExportQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let group = q
        .group
        .map(|g| g.parse::<Group>().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()).field("group")))
        .transpose()?;
    let method = q
        .method
        .map(|m| m.parse::<Method>().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()).field("method")))
        .transpose()?;
    let store = state.store.clone();
    let sessions = tokio::task::spawn_blocking(move || store.sessions())
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    let rows = observations(&sessions);
    let selected = rows
        .iter()
        .filter(|o| group.is_none_or(|g| o.group == g) && method.is_none_or(|m| o.method == m));
    let mut out = Vec::new();
    write_observations(selected, &mut out).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], out).into_response())
}
