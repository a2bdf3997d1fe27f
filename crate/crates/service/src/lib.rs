//! HTTP and WebSocket service running live evaluation sessions.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/sessions` | create a session, body [`CreateSession`] |
//! | POST | `/sessions/{id}/advance` | move to the next phase |
//! | GET | `/sessions/{id}` | [`SessionSnapshot`] |
//! | GET | `/sessions/{id}/predictions` | the fourteen predictions |
//! | POST | `/sessions/{id}/ratings` | `{ratings: [0|1; 14], satisfaction}` |
//! | GET | `/reports/summary` | mean satisfaction and per-trait accuracy |
//! | WS | `/sessions/{id}/stream` | rows as `{t_ms, bands, phase}` |
//!
//! Errors are `{code, message}` with a matching status. Each session is
//! persisted to `<data_dir>/sessions/<id>.json`, and the bytes consumed in
//! each phase to `<data_dir>/sessions/<id>/captures/<id>_<emotion>.tgr`,
//! which a replay source can read back.

pub mod api;
pub mod error;
pub mod source;
pub mod state;

pub use api::router;
pub use error::{ApiError, ErrorBody};
pub use source::{Pacing, SourceConfig};
pub use state::{AppState, CreateSession, SessionSnapshot, StreamMessage};

/// Serve the API on `listener` until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
