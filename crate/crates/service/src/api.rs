//! HTTP routes and the WebSocket row feed.

use axum::body::Bytes;
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use traitwave_core::session::{summarize, Phase};

use crate::error::ApiError;
use crate::state::{AppState, CreateSession, StreamMessage};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/predictions", get(predictions))
        .route("/sessions/{id}/ratings", post(ratings))
        .route("/sessions/{id}/stream", get(stream))
        .route("/reports/summary", get(summary))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advanced {
    pub phase: Phase,
    pub phase_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsRequest {
    pub ratings: Vec<u8>,
    pub satisfaction: f64,
}

/// Sent instead of rows when a subscriber fell too far behind; the socket
/// is closed right after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagNotice {
    pub notice: String,
    pub dropped: u64,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateSession = parse(&body)?;
    let handle = state.create(request).await?;
    let s = handle.session.lock().await;
    let created = Created {
        session_id: s.id.clone(),
        phase: s.phase(),
    };
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.get(&id).await?.snapshot().await))
}

async fn advance(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let phase = state.get(&id).await?.advance().await?;
    Ok(Json(Advanced {
        phase,
        phase_label: phase.label(),
    }))
}

async fn predictions(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let handle = state.get(&id).await?;
    let s = handle.session.lock().await;
    match s.predictions() {
        Some(p) => Ok(Json(p.to_vec())),
        None => Err(ApiError::new(
            StatusCode::CONFLICT,
            "wrong_phase",
            format!(
                "no predictions before the predicting phase; session is {}",
                s.phase()
            ),
        )),
    }
}

async fn ratings(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let handle = state.get(&id).await?;
    let request: RatingsRequest = parse(&body)?;
    Ok(Json(
        handle
            .submit_ratings(&request.ratings, request.satisfaction)
            .await?,
    ))
}

async fn summary(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(summarize(&state.reports().await)?))
}

async fn stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Result<Response, ApiError> {
    let rx = state.get(&id).await?.subscribe();
    let ws = ws.map_err(|e| ApiError::bad_request(e.body_text()))?;
    Ok(ws.on_upgrade(move |socket| forward(socket, rx)))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<StreamMessage>) {
    loop {
        tokio::select! {
            received = rx.recv() => {
                let text = match received {
                    Ok(msg) => serde_json::to_string(&msg).expect("serializable"),
                    Err(broadcast::error::RecvError::Lagged(dropped)) => {
                        let notice = LagNotice { notice: "lagged".into(), dropped };
                        let text = serde_json::to_string(&notice).expect("serializable");
                        let _ = socket.send(Message::Text(text.into())).await;
                        let _ = socket.send(Message::Close(None)).await;
                        return;
                    }
                    Err(broadcast::error::RecvError::Closed) => return,
                };
                if socket.send(Message::Text(text.into())).await.is_err() {
                    return;
                }
            }
            incoming = socket.recv() => {
                match incoming {
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => {}
                }
            }
        }
    }
}
