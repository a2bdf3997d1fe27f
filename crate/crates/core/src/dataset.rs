//! Session records on disk and the subject-level train/test split.
//!
//! A dataset directory holds two files:
//!
//! * `segments.csv` with header
//!   `subject_id,emotion,timestamp_ms,delta,theta,low_alpha,high_alpha,low_beta,high_beta,low_gamma,mid_gamma`
//! * `labels.jsonl`, one object per subject with `subject_id`, `provenance`
//!   and all fourteen trait fields.
//!
//! Record order is the order of `labels.jsonl`; export writes records in
//! the order given and emotions in canonical order, so export is a pure
//! function of its input.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::simulator::{SimError, SubjectProfile};
use crate::types::{
    Band, BandPowerRow, Emotion, Segment, Trait, TraitLabels, MAX_BAND_VALUE, NUM_BANDS,
};

pub const SEGMENTS_FILE: &str = "segments.csv";
pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("subject {subject}: missing or invalid label `{field}`")]
    Label { subject: String, field: String },
    #[error("subject {subject}: no {emotion} segment")]
    Emotion { subject: String, emotion: Emotion },
    #[error("subject {0} appears more than once")]
    DuplicateSubject(String),
    #[error("split needs at least 5 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

type Result<T> = std::result::Result<T, DatasetError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    Replayed,
    Live,
}

/// Everything recorded for one subject: four emotion segments plus labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub subject_id: String,
    segments: BTreeMap<Emotion, Segment>,
    pub labels: TraitLabels,
    pub provenance: Provenance,
}

impl SessionRecord {
    /// Build a record; every emotion must have exactly one non-empty
    /// segment belonging to `subject_id`.
    pub fn new(
        subject_id: impl Into<String>,
        segments: impl IntoIterator<Item = Segment>,
        labels: TraitLabels,
        provenance: Provenance,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        let mut map = BTreeMap::new();
        for s in segments {
            if s.subject_id != subject_id || s.is_empty() {
                return Err(DatasetError::Emotion {
                    subject: subject_id,
                    emotion: s.emotion,
                });
            }
            map.insert(s.emotion, s);
        }
        if let Some(&missing) = Emotion::ALL.iter().find(|e| !map.contains_key(e)) {
            return Err(DatasetError::Emotion {
                subject: subject_id,
                emotion: missing,
            });
        }
        Ok(Self {
            subject_id,
            segments: map,
            labels,
            provenance,
        })
    }

    pub fn segment(&self, emotion: Emotion) -> &Segment {
        &self.segments[&emotion]
    }

    /// Segments in canonical emotion order.
    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.values()
    }
}

/// Generate full sessions for simulated subjects.
pub fn simulated_records(
    profiles: &[SubjectProfile],
    duration_s: u32,
    rows_per_second: u32,
) -> std::result::Result<Vec<SessionRecord>, SimError> {
    profiles
        .iter()
        .map(|p| {
            let segments = p.generate_session(duration_s, rows_per_second)?;
            Ok(
                SessionRecord::new(&p.subject_id, segments, p.labels, Provenance::Simulated)
                    .expect("generated sessions cover every emotion"),
            )
        })
        .collect()
}

fn csv_header() -> Vec<&'static str> {
    let mut h = vec!["subject_id", "emotion", "timestamp_ms"];
    h.extend(Band::ALL.iter().map(|b| b.name()));
    h
}

#[derive(Serialize, Deserialize)]
struct LabelLine {
    subject_id: String,
    provenance: Provenance,
    #[serde(flatten)]
    labels: TraitLabels,
}

/// Write `records` to `dir`, creating it if needed.
pub fn export(records: &[SessionRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let csv_path = dir.join(SEGMENTS_FILE);
    let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_io = |e: csv::Error| DatasetError::Io {
        path: csv_path.clone(),
        source: e.into(),
    };
    w.write_record(csv_header()).map_err(to_io)?;
    for r in records {
        for s in r.segments() {
            for row in &s.rows {
                let mut fields = vec![
                    r.subject_id.clone(),
                    s.emotion.name().to_string(),
                    row.timestamp_ms.to_string(),
                ];
                fields.extend(row.bands.iter().map(u32::to_string));
                w.write_record(&fields).map_err(to_io)?;
            }
        }
    }
    w.flush().map_err(io_err(&csv_path))?;

    let labels_path = dir.join(LABELS_FILE);
    let file = File::create(&labels_path).map_err(io_err(&labels_path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = LabelLine {
            subject_id: r.subject_id.clone(),
            provenance: r.provenance,
            labels: r.labels,
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| io_err(&labels_path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(&labels_path))?;
    }
    w.flush().map_err(io_err(&labels_path))?;
    Ok(())
}

fn schema(path: &Path, line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_labels(path: &Path) -> Result<Vec<(String, Provenance, TraitLabels)>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| schema(path, n + 1, e.to_string()))?;
        let Some(subject) = value.get("subject_id").and_then(|v| v.as_str()) else {
            return Err(schema(path, n + 1, "missing subject_id"));
        };
        for t in Trait::ALL {
            if !value.get(t.name()).is_some_and(|v| v.is_boolean()) {
                return Err(DatasetError::Label {
                    subject: subject.to_string(),
                    field: t.name().to_string(),
                });
            }
        }
        let parsed: LabelLine =
            serde_json::from_value(value).map_err(|e| schema(path, n + 1, e.to_string()))?;
        if !seen.insert(parsed.subject_id.clone()) {
            return Err(DatasetError::DuplicateSubject(parsed.subject_id));
        }
        out.push((parsed.subject_id, parsed.provenance, parsed.labels));
    }
    Ok(out)
}

/// Read a dataset directory written by [`export`].
pub fn ingest(dir: &Path) -> Result<Vec<SessionRecord>> {
    let labels = read_labels(&dir.join(LABELS_FILE))?;

    let csv_path = dir.join(SEGMENTS_FILE);
    let file = File::open(&csv_path).map_err(io_err(&csv_path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let header = reader
        .headers()
        .map_err(|e| schema(&csv_path, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != csv_header() {
        return Err(schema(&csv_path, 1, "unexpected header"));
    }

    let mut rows: HashMap<String, BTreeMap<Emotion, Vec<BandPowerRow>>> = HashMap::new();
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| schema(&csv_path, line, e.to_string()))?;
        if rec.len() != 3 + NUM_BANDS {
            return Err(schema(&csv_path, line, "wrong number of columns"));
        }
        let emotion: Emotion = rec[1]
            .parse()
            .map_err(|e: crate::types::ParseNameError| schema(&csv_path, line, e.to_string()))?;
        let timestamp_ms: u64 = rec[2]
            .parse()
            .map_err(|_| schema(&csv_path, line, "bad timestamp_ms"))?;
        let mut bands = [0u32; NUM_BANDS];
        for (b, field) in bands.iter_mut().zip(rec.iter().skip(3)) {
            *b = field
                .parse()
                .ok()
                .filter(|&v| v <= MAX_BAND_VALUE)
                .ok_or_else(|| schema(&csv_path, line, format!("bad band value `{field}`")))?;
        }
        let seg = rows
            .entry(rec[0].to_string())
            .or_default()
            .entry(emotion)
            .or_default();
        if seg
            .last()
            .is_some_and(|prev| prev.timestamp_ms > timestamp_ms)
        {
            return Err(schema(
                &csv_path,
                line,
                "timestamps decrease within segment",
            ));
        }
        seg.push(BandPowerRow::new(timestamp_ms, bands));
    }

    let mut records = Vec::with_capacity(labels.len());
    for (subject, provenance, labels) in labels {
        let mut by_emotion = rows.remove(&subject).unwrap_or_default();
        let mut segments = Vec::with_capacity(4);
        for e in Emotion::ALL {
            let seg_rows = by_emotion.remove(&e).ok_or_else(|| DatasetError::Emotion {
                subject: subject.clone(),
                emotion: e,
            })?;
            segments.push(Segment::new(subject.clone(), e, seg_rows));
        }
        records.push(SessionRecord::new(subject, segments, labels, provenance)?);
    }
    if let Some(orphan) = rows.keys().min() {
        return Err(DatasetError::Label {
            subject: orphan.clone(),
            field: "subject_id".into(),
        });
    }
    Ok(records)
}

/// Subject-level partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    /// Sorted subject ids.
    pub train: Vec<String>,
    /// Sorted subject ids.
    pub test: Vec<String>,
}

impl Split {
    pub fn is_train(&self, subject_id: &str) -> bool {
        self.train
            .binary_search_by(|s| s.as_str().cmp(subject_id))
            .is_ok()
    }

    pub fn is_test(&self, subject_id: &str) -> bool {
        self.test
            .binary_search_by(|s| s.as_str().cmp(subject_id))
            .is_ok()
    }

    /// Records on each side, in input order.
    pub fn partition<'a>(
        &self,
        records: &'a [SessionRecord],
    ) -> (Vec<&'a SessionRecord>, Vec<&'a SessionRecord>) {
        records.iter().partition(|r| self.is_train(&r.subject_id))
    }

    pub fn train_records<'a>(&self, records: &'a [SessionRecord]) -> Vec<&'a SessionRecord> {
        self.partition(records).0
    }

    pub fn test_records<'a>(&self, records: &'a [SessionRecord]) -> Vec<&'a SessionRecord> {
        records
            .iter()
            .filter(|r| self.is_test(&r.subject_id))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("split serializes");
        fs::write(path, json + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| schema(path, e.line(), e.to_string()))
    }
}

/// Train size for `n` subjects: `round(0.8 n)`, ties toward train.
pub fn train_size(n: usize) -> usize {
    (8 * n + 5) / 10
}

/// Shuffle subjects with `seed` and put 80% in train.
///
/// Ids are sorted before shuffling, so the split depends only on the set
/// of subjects and the seed.
pub fn split_80_20(records: &[SessionRecord], seed: u64) -> Result<Split> {
    let mut ids: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(DatasetError::DuplicateSubject(w[0].clone()));
    }
    if ids.len() < 5 {
        return Err(DatasetError::TooFewSubjects(ids.len()));
    }
    ids.shuffle(&mut seed::rng(seed));
    let mut test = ids.split_off(train_size(ids.len()));
    let mut train = ids;
    train.sort();
    test.sort();
    Ok(Split { seed, train, test })
}

/// Single-writer, multi-reader record store. Readers get an immutable
/// snapshot that later writes do not affect.
#[derive(Debug, Default)]
pub struct DatasetStore {
    records: RwLock<Arc<Vec<SessionRecord>>>,
}

impl DatasetStore {
    pub fn new(records: Vec<SessionRecord>) -> Self {
        Self {
            records: RwLock::new(Arc::new(records)),
        }
    }

    pub fn open(dir: &Path) -> Result<Self> {
        Ok(Self::new(ingest(dir)?))
    }

    pub fn snapshot(&self) -> Arc<Vec<SessionRecord>> {
        Arc::clone(&self.records.read().expect("store lock"))
    }

    pub fn insert(&self, record: SessionRecord) -> Result<()> {
        let mut guard = self.records.write().expect("store lock");
        if guard.iter().any(|r| r.subject_id == record.subject_id) {
            return Err(DatasetError::DuplicateSubject(record.subject_id));
        }
        let mut next = Vec::clone(&guard);
        next.push(record);
        *guard = Arc::new(next);
        Ok(())
    }
}
