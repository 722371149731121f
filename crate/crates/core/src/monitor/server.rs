//! HTTP JSON API over a [`Monitor`].

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use super::model::{Aoi, AoiPatch};
use super::service::Monitor;
use crate::error::Error;

struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownAoi(_) | Error::UnknownAlert(_) | Error::NoObservations(_) => {
                StatusCode::NOT_FOUND
            }
            Error::DuplicateAoi(_) | Error::DuplicateScene { .. } | Error::StaleScene { .. } => {
                StatusCode::CONFLICT
            }
            Error::InvalidAoi(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("invalid body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> crate::error::Result<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn list_aois(State(m): State<Monitor>) -> Json<Vec<Aoi>> {
    Json(m.list_aois())
}

async fn create_aoi(State(m): State<Monitor>, body: Bytes) -> ApiResult<(StatusCode, Json<Aoi>)> {
    let aoi: Aoi = parse_body(&body)?;
    let aoi = blocking(move || m.register_aoi(aoi)).await?;
    Ok((StatusCode::CREATED, Json(aoi)))
}

async fn get_aoi(State(m): State<Monitor>, Path(id): Path<String>) -> ApiResult<Json<Aoi>> {
    Ok(Json(m.get_aoi(&id)?))
}

async fn patch_aoi(
    State(m): State<Monitor>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Aoi>> {
    let patch: AoiPatch = parse_body(&body)?;
    Ok(Json(blocking(move || m.update_aoi(&id, &patch)).await?))
}

async fn delete_aoi(State(m): State<Monitor>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(move || m.delete_aoi(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn timeline(State(m): State<Monitor>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(m.timeline(&id)?).into_response())
}

async fn latest(State(m): State<Monitor>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || m.latest(&id)).await?).into_response())
}

async fn latest_overlay(State(m): State<Monitor>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(png(blocking(move || m.latest_overlay_png(&id)).await?))
}

async fn latest_heatmap(State(m): State<Monitor>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(png(blocking(move || m.latest_heatmap_png(&id)).await?))
}

#[derive(Deserialize)]
struct AlertQuery {
    acknowledged: Option<String>,
}

async fn list_alerts(State(m): State<Monitor>, Query(q): Query<AlertQuery>) -> ApiResult<Response> {
    let filter = match q.acknowledged.as_deref() {
        None => None,
        Some("true") => Some(true),
        Some("false") => Some(false),
        Some(other) => {
            return Err(ApiError(
                StatusCode::BAD_REQUEST,
                format!("acknowledged must be true or false, got `{other}`"),
            ))
        }
    };
    Ok(Json(m.list_alerts(filter)).into_response())
}

async fn ack_alert(State(m): State<Monitor>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || m.ack_alert(&id)).await?).into_response())
}

async fn poll(State(m): State<Monitor>) -> ApiResult<Response> {
    Ok(Json(blocking(move || m.poll_once()).await?).into_response())
}

pub fn router(monitor: Monitor) -> Router {
    Router::new()
        .route("/api/aois", get(list_aois).post(create_aoi))
        .route(
            "/api/aois/{id}",
            get(get_aoi).patch(patch_aoi).delete(delete_aoi),
        )
        .route("/api/aois/{id}/timeline", get(timeline))
        .route("/api/aois/{id}/latest", get(latest))
        .route("/api/aois/{id}/latest/overlay.png", get(latest_overlay))
        .route("/api/aois/{id}/latest/heatmap.png", get(latest_heatmap))
        .route("/api/alerts", get(list_alerts))
        .route("/api/alerts/{id}/ack", post(ack_alert))
        .route("/api/poll", post(poll))
        .with_state(monitor)
}

/// Serves the API on an already bound listener until the task is dropped.
pub async fn serve_listener(
    monitor: Monitor,
    listener: tokio::net::TcpListener,
) -> std::io::Result<()> {
    axum::serve(listener, router(monitor)).await
}

/// Binds `addr` and serves the API.
pub async fn serve(monitor: Monitor, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    serve_listener(monitor, listener).await
}
