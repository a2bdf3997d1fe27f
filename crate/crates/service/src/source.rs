//! Byte sources feeding a session phase.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tokio::io::AsyncReadExt;
use tokio::net::TcpStream;
use traitwave_core::session::SourceKind;
use traitwave_core::simulator::{generate_segment, segment_to_wire, SubjectProfile};
use traitwave_core::Emotion;

/// Where a session's rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    /// Synthesize phases for one subject of a cohort manifest (`cohort.jsonl`).
    Simulator {
        manifest: PathBuf,
        subject_id: String,
    },
    /// Replay `<captures>/<subject_id>_<emotion>.tgr`.
    Replay {
        captures: PathBuf,
        subject_id: String,
    },
    /// Connect to `address` at the start of each phase and read raw frames.
    ExternalBytes { address: String },
}

impl SourceConfig {
    pub fn kind(&self) -> SourceKind {
        match self {
            SourceConfig::Simulator { .. } => SourceKind::Simulator,
            SourceConfig::Replay { .. } => SourceKind::Replay,
            SourceConfig::ExternalBytes { .. } => SourceKind::ExternalBytes,
        }
    }

    /// Make relative paths absolute against `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        match self.clone() {
            SourceConfig::Simulator {
                manifest,
                subject_id,
            } => SourceConfig::Simulator {
                manifest: base.join(manifest),
                subject_id,
            },
            SourceConfig::Replay {
                captures,
                subject_id,
            } => SourceConfig::Replay {
                captures: base.join(captures),
                subject_id,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// One row every `1 / rows_per_second` seconds.
    #[default]
    Realtime,
    /// Rows are delivered as fast as they decode.
    Unpaced,
}

pub fn capture_file_name(subject_id: &str, emotion: Emotion) -> String {
    format!("{subject_id}_{emotion}.tgr")
}

/// Read a subject profile from a cohort manifest (one JSON profile per line).
pub fn load_profile(manifest: &Path, subject_id: &str) -> io::Result<SubjectProfile> {
    let text = fs::read_to_string(manifest)?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: SubjectProfile = serde_json::from_str(line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", manifest.display(), i + 1),
            )
        })?;
        if p.subject_id == subject_id {
            return Ok(p);
        }
    }
    Err(io::Error::new(
        io::ErrorKind::NotFound,
        format!("subject {subject_id} not in {}", manifest.display()),
    ))
}

/// Checks a source can start before the session is created.
pub fn validate(config: &SourceConfig) -> io::Result<()> {
    match config {
        SourceConfig::Simulator {
            manifest,
            subject_id,
        } => load_profile(manifest, subject_id).map(|_| ()),
        SourceConfig::Replay {
            captures,
            subject_id,
        } => {
            for e in Emotion::ALL {
                let path = captures.join(capture_file_name(subject_id, e));
                if !path.is_file() {
                    return Err(io::Error::new(
                        io::ErrorKind::NotFound,
                        format!("missing capture {}", path.display()),
                    ));
                }
            }
            Ok(())
        }
        SourceConfig::ExternalBytes { address } => {
            if address.is_empty() {
                return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty address"));
            }
            Ok(())
        }
    }
}

/// Size of one EEG-power packet; in-memory sources are chunked by it so a
/// capture never runs ahead of the rows delivered.
const CHUNK: usize = 30;

pub enum PhaseBytes {
    Buffered { bytes: Vec<u8>, offset: usize },
    Tcp(TcpStream),
}

impl PhaseBytes {
    pub async fn open(
        config: &SourceConfig,
        emotion: Emotion,
        duration_s: u32,
        rows_per_second: u32,
    ) -> io::Result<Self> {
        let invalid = |e: String| io::Error::new(io::ErrorKind::InvalidData, e);
        Ok(match config {
            SourceConfig::Simulator {
                manifest,
                subject_id,
            } => {
                let profile = load_profile(manifest, subject_id)?;
                let segment = generate_segment(
                    &profile,
                    emotion,
                    duration_s,
                    rows_per_second,
                    profile.segment_seed(emotion),
                )
                .map_err(|e| invalid(e.to_string()))?;
                PhaseBytes::Buffered {
                    bytes: segment_to_wire(&segment).map_err(|e| invalid(e.to_string()))?,
                    offset: 0,
                }
            }
            SourceConfig::Replay {
                captures,
                subject_id,
            } => PhaseBytes::Buffered {
                bytes: fs::read(captures.join(capture_file_name(subject_id, emotion)))?,
                offset: 0,
            },
            SourceConfig::ExternalBytes { address } => {
                PhaseBytes::Tcp(TcpStream::connect(address).await?)
            }
        })
    }

    /// Next chunk of bytes, or `None` at end of stream.
    pub async fn next_chunk(&mut self) -> io::Result<Option<Vec<u8>>> {
        match self {
            PhaseBytes::Buffered { bytes, offset } => {
                if *offset >= bytes.len() {
                    return Ok(None);
                }
                let end = (*offset + CHUNK).min(bytes.len());
                let chunk = bytes[*offset..end].to_vec();
                *offset = end;
                Ok(Some(chunk))
            }
            PhaseBytes::Tcp(stream) => {
                let mut buf = vec![0u8; 4096];
                let n = stream.read(&mut buf).await?;
                if n == 0 {
                    return Ok(None);
                }
                buf.truncate(n);
                Ok(Some(buf))
            }
        }
    }
}
