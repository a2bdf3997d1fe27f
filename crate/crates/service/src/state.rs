//! Session registry, stream pumps and on-disk persistence.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, Mutex, RwLock};
use tokio::task::JoinHandle;
use traitwave_core::classical::{load_selector, TraitSelector};
use traitwave_core::codec::{decode_stream, DecoderState, ParsedEvent};
use traitwave_core::session::{EvaluationReport, Phase, Session};
use traitwave_core::simulator::row_timestamp;
use traitwave_core::{BandPowerRow, Emotion, NUM_BANDS};

use crate::error::ApiError;
use crate::source::{self, capture_file_name, Pacing, PhaseBytes, SourceConfig};

/// Per-subscriber backlog before a slow reader is dropped.
pub const STREAM_BUFFER: usize = 1024;

/// One row as pushed to stream subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMessage {
    pub t_ms: u64,
    pub bands: [u32; NUM_BANDS],
    pub phase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    /// Selector file; relative paths are resolved against the data directory.
    pub selector: PathBuf,
    pub source: SourceConfig,
    #[serde(default = "default_duration")]
    pub phase_duration_s: u32,
    #[serde(default = "default_rate")]
    pub rows_per_second: u32,
    #[serde(default)]
    pub pacing: Pacing,
}

fn default_duration() -> u32 {
    traitwave_core::session::DEFAULT_PHASE_SECONDS
}

fn default_rate() -> u32 {
    traitwave_core::simulator::DEFAULT_ROWS_PER_SECOND
}

/// What is written to `sessions/<id>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PersistedSession {
    session: Session,
    selector: PathBuf,
    source: SourceConfig,
    rows_per_second: u32,
    pacing: Pacing,
}

#[derive(Debug, Clone, Copy, Default)]
struct PumpStatus {
    complete: bool,
    rows: u64,
}

pub struct SessionHandle {
    pub session: Mutex<Session>,
    selector: TraitSelector,
    selector_path: PathBuf,
    source: SourceConfig,
    rows_per_second: u32,
    pacing: Pacing,
    feed: broadcast::Sender<StreamMessage>,
    pump: std::sync::Mutex<Option<JoinHandle<()>>>,
    status: std::sync::Mutex<PumpStatus>,
    dir: PathBuf,
}

/// Summary of a session for `GET /sessions/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub phase: Phase,
    pub phase_label: String,
    pub source: SourceConfig,
    pub phase_duration_s: u32,
    pub rows_per_second: u32,
    pub rows: HashMap<Emotion, usize>,
    /// The running phase's source has delivered everything it will.
    pub phase_complete: bool,
    pub has_predictions: bool,
    pub report: Option<EvaluationReport>,
}

impl SessionHandle {
    pub fn subscribe(&self) -> broadcast::Receiver<StreamMessage> {
        self.feed.subscribe()
    }

    pub fn captures_dir(&self) -> PathBuf {
        self.dir.join("captures")
    }

    pub async fn snapshot(&self) -> SessionSnapshot {
        let s = self.session.lock().await;
        let status = *self.status.lock().expect("status lock");
        SessionSnapshot {
            session_id: s.id.clone(),
            phase: s.phase(),
            phase_label: s.phase().label(),
            source: self.source.clone(),
            phase_duration_s: s.phase_duration_s,
            rows_per_second: self.rows_per_second,
            rows: Emotion::ALL.iter().map(|&e| (e, s.rows(e).len())).collect(),
            phase_complete: matches!(s.phase(), Phase::Running { .. }) && status.complete,
            has_predictions: s.predictions().is_some(),
            report: s.report().cloned(),
        }
    }

    fn persist(&self, session: &Session) -> io::Result<()> {
        let record = PersistedSession {
            session: session.clone(),
            selector: self.selector_path.clone(),
            source: self.source.clone(),
            rows_per_second: self.rows_per_second,
            pacing: self.pacing,
        };
        let path = self.dir.with_extension("json");
        let tmp = self.dir.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&record)?)?;
        fs::rename(tmp, path)
    }

    /// Apply the next transition, stopping the current pump and starting one
    /// for a new running phase.
    pub async fn advance(self: &Arc<Self>) -> Result<Phase, ApiError> {
        let mut session = self.session.lock().await;
        let next = session.advance(&self.selector)?;
        if let Some(task) = self.pump.lock().expect("pump lock").take() {
            task.abort();
        }
        self.persist(&session)
            .map_err(|e| ApiError::internal(format!("persisting session: {e}")))?;
        if let Phase::Running { emotion, .. } = next {
            *self.status.lock().expect("status lock") = PumpStatus::default();
            let handle = Arc::clone(self);
            let duration = session.phase_duration_s;
            let task = tokio::spawn(async move {
                if let Err(e) = handle.run_pump(emotion, duration).await {
                    log::warn!("pump for {emotion} stopped: {e}");
                }
                handle.status.lock().expect("status lock").complete = true;
            });
            *self.pump.lock().expect("pump lock") = Some(task);
        }
        Ok(next)
    }

    pub async fn submit_ratings(
        &self,
        ratings: &[u8],
        satisfaction: f64,
    ) -> Result<EvaluationReport, ApiError> {
        let mut session = self.session.lock().await;
        let report = session.submit_ratings(ratings, satisfaction)?.clone();
        self.persist(&session)
            .map_err(|e| ApiError::internal(format!("persisting session: {e}")))?;
        Ok(report)
    }

    async fn run_pump(&self, emotion: Emotion, duration_s: u32) -> io::Result<()> {
        let target = duration_s as u64 * self.rows_per_second as u64;
        let mut bytes =
            PhaseBytes::open(&self.source, emotion, duration_s, self.rows_per_second).await?;
        fs::create_dir_all(self.captures_dir())?;
        let id = self.session.lock().await.id.clone();
        let mut capture =
            fs::File::create(self.captures_dir().join(capture_file_name(&id, emotion)))?;
        let mut ticker = match self.pacing {
            Pacing::Realtime => Some(tokio::time::interval(std::time::Duration::from_micros(
                1_000_000 / self.rows_per_second as u64,
            ))),
            Pacing::Unpaced => None,
        };
        let mut decoder = DecoderState::new();
        let mut delivered = 0u64;
        while delivered < target {
            let Some(chunk) = bytes.next_chunk().await? else {
                break;
            };
            capture.write_all(&chunk)?;
            let (events, errors, next) = decode_stream(&chunk, decoder);
            decoder = next;
            for e in errors {
                log::warn!("session {id} {emotion}: {e}");
            }
            for event in events {
                let ParsedEvent::EegPower(bands) = event else {
                    continue;
                };
                if let Some(t) = ticker.as_mut() {
                    t.tick().await;
                }
                let t_ms = row_timestamp(delivered, self.rows_per_second);
                {
                    let mut session = self.session.lock().await;
                    if session.push_row(BandPowerRow::new(t_ms, bands)).is_err() {
                        return Ok(());
                    }
                }
                let _ = self.feed.send(StreamMessage {
                    t_ms,
                    bands,
                    phase: emotion.name().to_string(),
                });
                delivered += 1;
                self.status.lock().expect("status lock").rows = delivered;
                if delivered >= target {
                    break;
                }
                if ticker.is_none() {
                    tokio::task::yield_now().await;
                }
            }
        }
        Ok(())
    }
}

/// Shared service state.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

impl AppState {
    /// Open `data_dir`, restoring persisted sessions under `sessions/`.
    pub fn open(data_dir: impl Into<PathBuf>) -> io::Result<Self> {
        let data_dir = data_dir.into();
        let sessions_dir = data_dir.join("sessions");
        fs::create_dir_all(&sessions_dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&sessions_dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            match restore(&path) {
                Ok(handle) => {
                    let id = handle.session.try_lock().expect("fresh lock").id.clone();
                    sessions.insert(id, Arc::new(handle));
                }
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(Self {
            inner: Arc::new(Inner {
                data_dir,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.data_dir
    }

    pub async fn create(&self, request: CreateSession) -> Result<Arc<SessionHandle>, ApiError> {
        let selector_path = self.data_dir().join(&request.selector);
        let selector = load_selector(&selector_path).map_err(|e| {
            ApiError::new(
                axum::http::StatusCode::BAD_REQUEST,
                "selector_load",
                e.to_string(),
            )
        })?;
        if request.rows_per_second == 0 || request.rows_per_second > 1000 {
            return Err(ApiError::bad_request("rows_per_second must be in 1..=1000"));
        }
        if request.phase_duration_s == 0 {
            return Err(ApiError::bad_request("phase_duration_s must be positive"));
        }
        let source = request.source.resolved(self.data_dir());
        source::validate(&source).map_err(|e| {
            ApiError::new(
                axum::http::StatusCode::BAD_REQUEST,
                "source_error",
                e.to_string(),
            )
        })?;

        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(&id, source.kind(), request.phase_duration_s);
        let handle = Arc::new(SessionHandle {
            dir: self.data_dir().join("sessions").join(&id),
            session: Mutex::new(session.clone()),
            selector,
            selector_path,
            source,
            rows_per_second: request.rows_per_second,
            pacing: request.pacing,
            feed: broadcast::channel(STREAM_BUFFER).0,
            pump: std::sync::Mutex::new(None),
            status: std::sync::Mutex::new(PumpStatus::default()),
        });
        fs::create_dir_all(&handle.dir)
            .and_then(|_| handle.persist(&session))
            .map_err(|e| ApiError::internal(format!("persisting session: {e}")))?;
        self.inner
            .sessions
            .write()
            .await
            .insert(id, Arc::clone(&handle));
        Ok(handle)
    }

    pub async fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.inner
            .sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    /// Reports of every finished session, ordered by session id.
    pub async fn reports(&self) -> Vec<EvaluationReport> {
        let handles: Vec<Arc<SessionHandle>> =
            self.inner.sessions.read().await.values().cloned().collect();
        let mut out = Vec::new();
        for h in handles {
            if let Some(r) = h.session.lock().await.report() {
                out.push(r.clone());
            }
        }
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }
}

fn restore(path: &Path) -> Result<SessionHandle, Box<dyn std::error::Error>> {
    let record: PersistedSession = serde_json::from_slice(&fs::read(path)?)?;
    let selector = load_selector(&record.selector)?;
    Ok(SessionHandle {
        dir: path.with_extension(""),
        session: Mutex::new(record.session),
        selector,
        selector_path: record.selector,
        source: record.source,
        rows_per_second: record.rows_per_second,
        pacing: record.pacing,
        feed: broadcast::channel(STREAM_BUFFER).0,
        pump: std::sync::Mutex::new(None),
        // A restored running phase has no pump; whatever was buffered is final.
        status: std::sync::Mutex::new(PumpStatus {
            complete: true,
            rows: 0,
        }),
    })
}
