//! Playback and JSON API.

use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, State, WebSocketUpgrade};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use txt2vid_core::api::{
    compute_bitrate, compute_study, BitrateRequest, BitrateResponse, RatiosRequest, StudyRequest, StudyResponse,
};
use txt2vid_core::bench::{with_ratios, MatrixRow};

use crate::session::Hub;
use crate::{ui, wire};

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl ToString) -> Self {
        Self(StatusCode::BAD_REQUEST, msg.to_string())
    }

    fn not_found(msg: impl ToString) -> Self {
        Self(StatusCode::NOT_FOUND, msg.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Routes of the HTTP listener.
pub fn api_router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/sessions", get(list_sessions))
        .route("/api/sessions/{id}", get(session_info))
        .route("/api/profiles", get(list_profiles))
        .route("/session/{id}/stream", get(stream))
        .route("/api/bitrate", post(bitrate))
        .route("/api/ratios", post(ratios))
        .route("/api/study", post(study))
        .with_state(hub)
}

/// Routes of the websocket listener.
pub fn ws_router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/ui", get(ui_upgrade))
        .route("/wire", get(wire_upgrade))
        .with_state(hub)
}

#[derive(Debug, Deserialize)]
struct UiQuery {
    token: Option<String>,
    session: Option<u32>,
}

async fn ui_upgrade(State(hub): State<Arc<Hub>>, Query(q): Query<UiQuery>, ws: WebSocketUpgrade) -> Response {
    if q.token.as_deref() != Some(hub.config.ui_token.as_str()) {
        return (StatusCode::UNAUTHORIZED, "bad or missing token").into_response();
    }
    ws.on_upgrade(move |socket| ui::handle(socket, hub, q.session))
}

async fn wire_upgrade(State(hub): State<Arc<Hub>>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| wire::handle_ws(socket, hub))
}

async fn list_sessions(State(hub): State<Arc<Hub>>) -> Json<Vec<crate::session::SessionInfo>> {
    Json(hub.sessions().iter().map(|s| s.info()).collect())
}

async fn session_info(State(hub): State<Arc<Hub>>, Path(id): Path<u32>) -> ApiResult<crate::session::SessionInfo> {
    hub.session(id)
        .map(|s| Json(s.info()))
        .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
}

async fn list_profiles(State(hub): State<Arc<Hub>>) -> Json<Vec<crate::profiles::ProfileEntry>> {
    Json(hub.store.entries())
}

async fn stream(State(hub): State<Arc<Hub>>, Path(id): Path<u32>) -> Response {
    let Some(session) = hub.session(id) else {
        return ApiError::not_found(format!("unknown session {id}")).into_response();
    };
    let Some(playback) = session.playback.clone() else {
        return (StatusCode::SERVICE_UNAVAILABLE, "no muxer available for playback").into_response();
    };
    (
        [(header::CONTENT_TYPE, "video/mp2t"), (header::CACHE_CONTROL, "no-store")],
        Body::from_stream(playback.stream()),
    )
        .into_response()
}

async fn bitrate(Json(req): Json<BitrateRequest>) -> ApiResult<BitrateResponse> {
    compute_bitrate(&req).map(Json).map_err(ApiError::bad_request)
}

async fn ratios(Json(req): Json<RatiosRequest>) -> ApiResult<Vec<MatrixRow>> {
    with_ratios(&req.rows, req.txt2vid_bps).map(Json).map_err(ApiError::bad_request)
}

async fn study(Json(req): Json<StudyRequest>) -> ApiResult<StudyResponse> {
    compute_study(&req).map(Json).map_err(ApiError::bad_request)
}
