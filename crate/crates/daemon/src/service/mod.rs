//! HTTP API.

pub mod auth;
mod error;
pub mod params;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use gvss_core::{render, EncodedImage, Frame, RenderSettings};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::camera::{Camera, CameraSet};
use crate::clock::Clock;
use crate::orchestrator::{Mode, Orchestrator, OrchestratorError};
use crate::store::SnapshotStore;
pub use auth::{Authenticator, Credential, Session, SessionStore, SESSION_TTL};
pub use error::ApiError;

pub const TOKEN_HEADER: &str = "X-GVSS-Token";
pub const SEQUENCE_HEADER: &str = "X-Frame-Sequence";

/// Every API route as `(method, path)`; `{id}` stands for a snapshot id.
pub const ROUTES: &[(&str, &str)] = &[
    ("POST", "/login"),
    ("GET", "/cameras"),
    ("GET", "/frame"),
    ("POST", "/control"),
    ("GET", "/state"),
    ("POST", "/arm"),
    ("POST", "/disarm"),
    ("POST", "/snapshots"),
    ("GET", "/snapshots"),
    ("GET", "/snapshots/{id}"),
    ("DELETE", "/snapshots/{id}"),
];

/// Routes reachable without a session.
pub const PUBLIC_ROUTES: &[(&str, &str)] = &[("POST", "/login")];

pub struct Shared {
    pub orchestrator: Arc<Orchestrator>,
    pub cameras: Arc<CameraSet>,
    pub store: Arc<SnapshotStore>,
    pub sessions: SessionStore,
    pub users: Authenticator,
    pub clock: Arc<dyn Clock>,
    renders: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(
        orchestrator: Arc<Orchestrator>,
        cameras: Arc<CameraSet>,
        store: Arc<SnapshotStore>,
        sessions: SessionStore,
        users: Authenticator,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self(Arc::new(Shared {
            orchestrator,
            cameras,
            store,
            sessions,
            users,
            clock,
            renders: AtomicU64::new(0),
        }))
    }

    /// Number of frames rendered for `/frame` and `POST /snapshots` so far.
    pub fn renders(&self) -> u64 {
        self.0.renders.load(Ordering::Relaxed)
    }
}

impl std::ops::Deref for AppState {
    type Target = Shared;

    fn deref(&self) -> &Shared {
        &self.0
    }
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let protected = Router::new()
        .route("/cameras", get(cameras))
        .route("/frame", get(frame))
        .route("/control", post(control))
        .route("/state", get(current_state))
        .route("/arm", post(arm))
        .route("/disarm", post(disarm))
        .route("/snapshots", get(list_snapshots).post(create_snapshot))
        .route("/snapshots/{id}", get(fetch_snapshot).delete(delete_snapshot))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_session));

    let mut app = Router::new().route("/login", post(login)).merge(protected);
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app.with_state(state)
}

async fn require_session(State(app): State<AppState>, mut req: Request, next: Next) -> Response {
    let session = req
        .headers()
        .get(TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .and_then(|token| app.sessions.validate(token));
    match session {
        Some(session) => {
            req.extensions_mut().insert(session);
            next.run(req).await
        }
        None => ApiError::unauthorized().into_response(),
    }
}

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
}

async fn login(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let LoginBody { username, password } = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("expected JSON {{username, password}}: {e}")))?;
    if !app.users.verify(&username, &password) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "invalid credentials"));
    }
    let session = app.sessions.issue(&username);
    tracing::info!(user = %username, "login");
    Ok(Json(json!({
        "token": session.token,
        "username": session.username,
        "expires_at": session.expires_at,
        "cameras": app.cameras.descriptors(),
    }))
    .into_response())
}

async fn cameras(State(app): State<AppState>) -> Response {
    Json(app.cameras.descriptors()).into_response()
}

fn camera_for<'a>(app: &'a AppState, q: &HashMap<String, String>) -> Result<&'a Arc<Camera>, ApiError> {
    match q.get("cam") {
        Some(id) => Ok(app.cameras.get(id)?),
        None => Ok(app.cameras.first()),
    }
}

/// Parses settings, picks the camera and renders its latest frame off the runtime.
async fn render_request(
    app: &AppState,
    q: &HashMap<String, String>,
) -> Result<(Arc<Frame>, String, EncodedImage), ApiError> {
    let camera = camera_for(app, q)?;
    let settings: RenderSettings =
        params::render_settings(q, camera.descriptor()).map_err(ApiError::bad_request)?;
    let camera_id = camera.descriptor().camera_id.clone();
    let frame = app.cameras.capture_latest(&camera_id)?;
    let now = app.clock.now();
    app.renders.fetch_add(1, Ordering::Relaxed);
    let source = Arc::clone(&frame);
    let image = tokio::task::spawn_blocking(move || render(&source, &settings, now))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok((frame, camera_id, image))
}

fn image_response(image: EncodedImage, extra: HeaderMap) -> Response {
    let mut headers = extra;
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(image.media_type()));
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    (StatusCode::OK, headers, image.bytes).into_response()
}

async fn frame(
    State(app): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    if app.orchestrator.state().mode == Mode::Disarmed {
        // settings and camera are still validated first so errors stay precise
        let camera = camera_for(&app, &q)?;
        params::render_settings(&q, camera.descriptor()).map_err(ApiError::bad_request)?;
        return Err(ApiError::new(StatusCode::FORBIDDEN, "system is disarmed"));
    }
    let (frame, _, image) = render_request(&app, &q).await?;
    let mut headers = HeaderMap::new();
    headers.insert(SEQUENCE_HEADER, HeaderValue::from(frame.sequence()));
    Ok(image_response(image, headers))
}

async fn control(
    State(app): State<AppState>,
    Extension(session): Extension<Session>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    match q.get("Type").map(String::as_str) {
        Some("Kill") => {}
        Some(other) => return Err(ApiError::bad_request(format!("unknown control Type `{other}`"))),
        None => return Err(ApiError::bad_request("missing parameter `Type`")),
    }
    app.orchestrator.unlock(&session.username, "Kill").map_err(conflict)?;
    Ok(Json(app.orchestrator.snapshot()).into_response())
}

fn conflict(e: OrchestratorError) -> ApiError {
    ApiError::new(StatusCode::CONFLICT, e.to_string())
}

async fn current_state(State(app): State<AppState>) -> Response {
    Json(app.orchestrator.snapshot()).into_response()
}

async fn arm(State(app): State<AppState>, Extension(session): Extension<Session>) -> Result<Response, ApiError> {
    app.orchestrator.arm(&session.username).map_err(conflict)?;
    Ok(Json(app.orchestrator.snapshot()).into_response())
}

async fn disarm(State(app): State<AppState>, Extension(session): Extension<Session>) -> Result<Response, ApiError> {
    app.orchestrator.disarm(&session.username).map_err(conflict)?;
    Ok(Json(app.orchestrator.snapshot()).into_response())
}

async fn create_snapshot(
    State(app): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let (frame, camera_id, image) = render_request(&app, &q).await?;
    let store = Arc::clone(&app.store);
    let captured_at = frame.captured_at();
    let record = tokio::task::spawn_blocking(move || store.save(&image, &camera_id, captured_at))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn list_snapshots(State(app): State<AppState>) -> Response {
    Json(app.store.list()).into_response()
}

async fn fetch_snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = Arc::clone(&app.store);
    let snapshot = tokio::task::spawn_blocking(move || store.fetch(&id))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let mut headers = HeaderMap::new();
    if let Ok(v) = HeaderValue::from_str(&snapshot.record.media_type) {
        headers.insert(header::CONTENT_TYPE, v);
    }
    if let Ok(v) = HeaderValue::from_str(&snapshot.record.snapshot_id) {
        headers.insert("X-Snapshot-Id", v);
    }
    Ok((StatusCode::OK, headers, snapshot.bytes).into_response())
}

async fn delete_snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = Arc::clone(&app.store);
    tokio::task::spawn_blocking(move || store.delete(&id))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(StatusCode::NO_CONTENT.into_response())
}
