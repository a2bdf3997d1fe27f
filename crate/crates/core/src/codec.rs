//! ThinkGear-style packet framing.
//!
//! A packet on the wire is
//!
//! ```text
//! [0xAA] [0xAA] [len: 1..=169] [payload: len bytes] [checksum]
//! ```
//!
//! where `checksum = !(sum(payload) & 0xFF)`. The payload is a run of data
//! rows, each `[0x55]* code [vlen] value`: codes below `0x80` carry a single
//! value byte, codes at or above `0x80` carry an explicit length byte. See
//! `docs/protocol.md` for the code table.
//!
//! Decoding is incremental. [`decode_stream`] consumes arbitrary bytes and
//! returns a [`DecoderState`] holding any partial packet; [`finish`] flushes
//! the state at end of input. Corruption never aborts decoding: it is
//! reported as [`FrameError`] values and the decoder rescans from the byte
//! after the rejected sync pair, so a good packet hidden behind a false
//! sync is still found.

use serde::{Deserialize, Serialize};

use crate::types::{MAX_BAND_VALUE, NUM_BANDS};

pub const SYNC: u8 = 0xAA;
pub const EXCODE: u8 = 0x55;
/// Largest legal payload length; 170 (`SYNC`) and above are never lengths.
pub const MAX_PAYLOAD: usize = 169;

pub const CODE_POOR_SIGNAL: u8 = 0x02;
pub const CODE_ATTENTION: u8 = 0x04;
pub const CODE_MEDITATION: u8 = 0x05;
pub const CODE_RAW_WAVE: u8 = 0x80;
pub const CODE_EEG_POWER: u8 = 0x83;

const EEG_POWER_LEN: usize = NUM_BANDS * 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("packet payload is empty")]
    PayloadTooSmall,
    #[error("packet payload of {0} bytes exceeds {MAX_PAYLOAD}")]
    PayloadTooLarge(usize),
    #[error("data row {index} is invalid: {reason}")]
    InvalidRow { index: usize, reason: &'static str },
    #[error("band value {0} does not fit in 24 bits")]
    ValueOutOfRange(u32),
}

/// One typed value inside a packet payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataRow {
    /// Number of `0x55` extended-code prefix bytes.
    pub excode_count: u8,
    pub code: u8,
    pub value: Vec<u8>,
}

impl DataRow {
    pub fn new(code: u8, value: Vec<u8>) -> Self {
        Self {
            excode_count: 0,
            code,
            value,
        }
    }

    /// The 24-byte eight-band power block, each band as 3 big-endian bytes.
    pub fn eeg_power(bands: &[u32; NUM_BANDS]) -> Result<Self, EncodeError> {
        let mut value = Vec::with_capacity(EEG_POWER_LEN);
        for &b in bands {
            if b > MAX_BAND_VALUE {
                return Err(EncodeError::ValueOutOfRange(b));
            }
            value.extend_from_slice(&b.to_be_bytes()[1..]);
        }
        Ok(Self::new(CODE_EEG_POWER, value))
    }

    fn encoded_len(&self) -> usize {
        let header = self.excode_count as usize + 1;
        if self.code >= 0x80 {
            header + 1 + self.value.len()
        } else {
            header + self.value.len()
        }
    }

    fn validate(&self, index: usize) -> Result<(), EncodeError> {
        let invalid = |reason| Err(EncodeError::InvalidRow { index, reason });
        if self.code == EXCODE {
            return invalid("code 0x55 is reserved for extended-code prefixes");
        }
        if self.code < 0x80 && self.value.len() != 1 {
            return invalid("single-byte code must carry exactly one value byte");
        }
        if self.code >= 0x80 && self.value.len() > u8::MAX as usize {
            return invalid("multi-byte value longer than 255 bytes");
        }
        Ok(())
    }
}

/// Decoded device event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParsedEvent {
    PoorSignal(u8),
    Attention(u8),
    Meditation(u8),
    RawWave(i16),
    /// Eight band magnitudes in canonical band order. The wire carries no
    /// timestamp; consumers stamp rows on arrival.
    EegPower([u32; NUM_BANDS]),
    /// Any row that is not one of the known shapes, kept byte-for-byte.
    Unknown {
        excode_count: u8,
        code: u8,
        value: Vec<u8>,
    },
}

impl ParsedEvent {
    pub fn from_row(row: &DataRow) -> Self {
        let unknown = || ParsedEvent::Unknown {
            excode_count: row.excode_count,
            code: row.code,
            value: row.value.clone(),
        };
        if row.excode_count != 0 {
            return unknown();
        }
        match (row.code, row.value.as_slice()) {
            (CODE_POOR_SIGNAL, &[v]) if v <= 200 => ParsedEvent::PoorSignal(v),
            (CODE_ATTENTION, &[v]) if v <= 100 => ParsedEvent::Attention(v),
            (CODE_MEDITATION, &[v]) if v <= 100 => ParsedEvent::Meditation(v),
            (CODE_RAW_WAVE, &[hi, lo]) => ParsedEvent::RawWave(i16::from_be_bytes([hi, lo])),
            (CODE_EEG_POWER, v) if v.len() == EEG_POWER_LEN => {
                let mut bands = [0u32; NUM_BANDS];
                for (band, chunk) in bands.iter_mut().zip(v.chunks_exact(3)) {
                    *band = u32::from_be_bytes([0, chunk[0], chunk[1], chunk[2]]);
                }
                ParsedEvent::EegPower(bands)
            }
            _ => unknown(),
        }
    }

    /// Inverse of [`ParsedEvent::from_row`].
    pub fn to_row(&self) -> DataRow {
        match self {
            ParsedEvent::PoorSignal(v) => DataRow::new(CODE_POOR_SIGNAL, vec![*v]),
            ParsedEvent::Attention(v) => DataRow::new(CODE_ATTENTION, vec![*v]),
            ParsedEvent::Meditation(v) => DataRow::new(CODE_MEDITATION, vec![*v]),
            ParsedEvent::RawWave(v) => DataRow::new(CODE_RAW_WAVE, v.to_be_bytes().to_vec()),
            ParsedEvent::EegPower(bands) => {
                let value = bands
                    .iter()
                    .flat_map(|b| b.to_be_bytes()[1..].to_vec())
                    .collect();
                DataRow::new(CODE_EEG_POWER, value)
            }
            ParsedEvent::Unknown {
                excode_count,
                code,
                value,
            } => DataRow {
                excode_count: *excode_count,
                code: *code,
                value: value.clone(),
            },
        }
    }
}

pub fn checksum(payload: &[u8]) -> u8 {
    !payload.iter().fold(0u8, |acc, &b| acc.wrapping_add(b))
}

/// Serialize rows into one framed packet.
pub fn encode_packet(rows: &[DataRow]) -> Result<Vec<u8>, EncodeError> {
    if rows.is_empty() {
        return Err(EncodeError::PayloadTooSmall);
    }
    for (i, row) in rows.iter().enumerate() {
        row.validate(i)?;
    }
    let len: usize = rows.iter().map(DataRow::encoded_len).sum();
    if len > MAX_PAYLOAD {
        return Err(EncodeError::PayloadTooLarge(len));
    }

    let mut out = Vec::with_capacity(len + 4);
    out.extend_from_slice(&[SYNC, SYNC, len as u8]);
    for row in rows {
        out.extend(std::iter::repeat_n(EXCODE, row.excode_count as usize));
        out.push(row.code);
        if row.code >= 0x80 {
            out.push(row.value.len() as u8);
        }
        out.extend_from_slice(&row.value);
    }
    out.push(checksum(&out[3..]));
    Ok(out)
}

/// Split a checksum-verified payload into data rows.
pub fn parse_payload(payload: &[u8]) -> Result<Vec<DataRow>, &'static str> {
    let mut rows = Vec::new();
    let mut p = 0;
    while p < payload.len() {
        let mut excode_count = 0u8;
        while payload[p] == EXCODE {
            excode_count += 1;
            p += 1;
            if p == payload.len() {
                return Err("payload ends inside extended-code prefix");
            }
        }
        let code = payload[p];
        p += 1;
        let vlen = if code >= 0x80 {
            let Some(&vlen) = payload.get(p) else {
                return Err("payload ends before value length");
            };
            p += 1;
            vlen as usize
        } else {
            1
        };
        let Some(value) = payload.get(p..p + vlen) else {
            return Err("value runs past end of payload");
        };
        rows.push(DataRow {
            excode_count,
            code,
            value: value.to_vec(),
        });
        p += vlen;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameErrorKind {
    BadChecksum {
        expected: u8,
        found: u8,
    },
    /// Length byte of zero or above [`MAX_PAYLOAD`].
    BadLength(u8),
    MalformedPayload(String),
    /// Input ended inside a packet.
    Truncated,
}

/// Corruption found in the byte stream. `offset` is the absolute stream
/// position of the first sync byte of the rejected packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameError {
    pub offset: u64,
    pub kind: FrameErrorKind,
}

impl std::fmt::Display for FrameError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            FrameErrorKind::BadChecksum { expected, found } => write!(
                f,
                "bad checksum at byte {}: expected {expected:#04x}, found {found:#04x}",
                self.offset
            ),
            FrameErrorKind::BadLength(l) => {
                write!(f, "bad payload length {l} at byte {}", self.offset)
            }
            FrameErrorKind::MalformedPayload(why) => {
                write!(f, "malformed payload at byte {}: {why}", self.offset)
            }
            FrameErrorKind::Truncated => {
                write!(f, "stream truncated inside packet at byte {}", self.offset)
            }
        }
    }
}

/// Bytes carried between [`decode_stream`] calls.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecoderState {
    pending: Vec<u8>,
    /// Stream offset of `pending[0]`.
    base: u64,
}

impl DecoderState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total bytes consumed so far, including those still pending.
    pub fn position(&self) -> u64 {
        self.base + self.pending.len() as u64
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }
}

/// Feed `bytes` to the decoder.
pub fn decode_stream(
    bytes: &[u8],
    mut state: DecoderState,
) -> (Vec<ParsedEvent>, Vec<FrameError>, DecoderState) {
    state.pending.extend_from_slice(bytes);
    let mut events = Vec::new();
    let mut errors = Vec::new();
    scan(&mut state, false, &mut events, &mut errors);
    (events, errors, state)
}

/// Flush the decoder at end of input. A packet still in progress is
/// reported as [`FrameErrorKind::Truncated`] and the bytes after its sync
/// pair are rescanned.
pub fn finish(mut state: DecoderState) -> (Vec<ParsedEvent>, Vec<FrameError>) {
    let mut events = Vec::new();
    let mut errors = Vec::new();
    scan(&mut state, true, &mut events, &mut errors);
    (events, errors)
}

/// Decode a complete capture in one call.
pub fn decode_all(bytes: &[u8]) -> (Vec<ParsedEvent>, Vec<FrameError>) {
    let (mut events, mut errors, state) = decode_stream(bytes, DecoderState::new());
    let (tail_events, tail_errors) = finish(state);
    events.extend(tail_events);
    errors.extend(tail_errors);
    (events, errors)
}

fn find_sync(buf: &[u8], from: usize) -> Option<usize> {
    buf.get(from..)?
        .windows(2)
        .position(|w| w == [SYNC, SYNC])
        .map(|p| p + from)
}

fn scan(
    state: &mut DecoderState,
    eof: bool,
    events: &mut Vec<ParsedEvent>,
    errors: &mut Vec<FrameError>,
) {
    let buf = &state.pending;
    let mut i = 0;
    let error_at = |i: usize, kind| FrameError {
        offset: state.base + i as u64,
        kind,
    };

    loop {
        let Some(start) = find_sync(buf, i) else {
            // Keep a trailing sync byte: it may pair with the next chunk.
            i = if !eof && buf.last() == Some(&SYNC) {
                buf.len() - 1
            } else {
                buf.len()
            };
            break;
        };
        i = start;
        let Some(&len) = buf.get(i + 2) else {
            if eof {
                errors.push(error_at(i, FrameErrorKind::Truncated));
                i = buf.len();
            }
            break;
        };
        if len == SYNC {
            // Three or more sync bytes in a row: slide forward.
            i += 1;
            continue;
        }
        if len == 0 || len as usize > MAX_PAYLOAD {
            errors.push(error_at(i, FrameErrorKind::BadLength(len)));
            i += 1;
            continue;
        }
        let end = i + 3 + len as usize + 1;
        if end > buf.len() {
            if eof {
                errors.push(error_at(i, FrameErrorKind::Truncated));
                i += 1;
                continue;
            }
            break;
        }
        let payload = &buf[i + 3..end - 1];
        let found = buf[end - 1];
        let expected = checksum(payload);
        if found != expected {
            errors.push(error_at(i, FrameErrorKind::BadChecksum { expected, found }));
            i += 1;
            continue;
        }
        match parse_payload(payload) {
            Ok(rows) => {
                events.extend(rows.iter().map(ParsedEvent::from_row));
                i = end;
            }
            Err(why) => {
                errors.push(error_at(i, FrameErrorKind::MalformedPayload(why.into())));
                i += 1;
            }
        }
    }

    state.pending.drain(..i);
    state.base += i as u64;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sum_complement(payload: &[u8]) -> u8 {
        let total: u32 = payload.iter().map(|&b| b as u32).sum();
        255 - (total % 256) as u8
    }

    #[test]
    fn poor_signal_packet_bytes() {
        let bytes = encode_packet(&[DataRow::new(CODE_POOR_SIGNAL, vec![0x14])]).unwrap();
        assert_eq!(sum_complement(&[0x02, 0x14]), 0xE9);
        assert_eq!(bytes, vec![0xAA, 0xAA, 0x02, 0x02, 0x14, 0xE9]);
    }

    #[test]
    fn empty_rows_rejected() {
        assert_eq!(encode_packet(&[]), Err(EncodeError::PayloadTooSmall));
    }

    #[test]
    fn oversized_payload_rejected() {
        let row = DataRow::new(0x90, vec![0; 168]);
        assert_eq!(
            encode_packet(&[row]),
            Err(EncodeError::PayloadTooLarge(170))
        );
        let row = DataRow::new(0x90, vec![0; 167]);
        assert_eq!(encode_packet(&[row]).unwrap().len(), 169 + 4);
    }

    #[test]
    fn invalid_rows_rejected() {
        assert!(matches!(
            encode_packet(&[DataRow::new(0x04, vec![1, 2])]),
            Err(EncodeError::InvalidRow { index: 0, .. })
        ));
        assert!(matches!(
            encode_packet(&[DataRow::new(0x02, vec![1]), DataRow::new(EXCODE, vec![1])]),
            Err(EncodeError::InvalidRow { index: 1, .. })
        ));
        assert_eq!(
            DataRow::eeg_power(&[1 << 24, 0, 0, 0, 0, 0, 0, 0]),
            Err(EncodeError::ValueOutOfRange(1 << 24))
        );
    }

    #[test]
    fn eeg_power_layout() {
        let row = DataRow::eeg_power(&[42, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let bytes = encode_packet(&[row]).unwrap();
        let payload = &bytes[3..bytes.len() - 1];
        assert_eq!(&payload[..5], &[0x83, 0x18, 0x00, 0x00, 0x2A]);
        assert_eq!(payload.len(), 26);
        assert!(payload[5..].iter().all(|&b| b == 0));
    }

    #[test]
    fn known_codes_decode_to_typed_events() {
        let rows = vec![
            DataRow::new(CODE_POOR_SIGNAL, vec![200]),
            DataRow::new(CODE_ATTENTION, vec![55]),
            DataRow::new(CODE_MEDITATION, vec![101]),
            DataRow::new(CODE_RAW_WAVE, vec![0xFF, 0xFE]),
            DataRow {
                excode_count: 2,
                code: 0x02,
                value: vec![9],
            },
        ];
        let (events, errors) = decode_all(&encode_packet(&rows).unwrap());
        assert!(errors.is_empty());
        assert_eq!(
            events,
            vec![
                ParsedEvent::PoorSignal(200),
                ParsedEvent::Attention(55),
                ParsedEvent::Unknown {
                    excode_count: 0,
                    code: CODE_MEDITATION,
                    value: vec![101]
                },
                ParsedEvent::RawWave(-2),
                ParsedEvent::Unknown {
                    excode_count: 2,
                    code: 0x02,
                    value: vec![9]
                },
            ]
        );
        let back: Vec<DataRow> = events.iter().map(ParsedEvent::to_row).collect();
        assert_eq!(back, rows);
    }

    #[test]
    fn flipped_checksum_byte_rejected() {
        let mut bytes = encode_packet(&[DataRow::new(CODE_ATTENTION, vec![80])]).unwrap();
        *bytes.last_mut().unwrap() ^= 0xFF;
        let (events, errors) = decode_all(&bytes);
        assert!(events.is_empty());
        assert_eq!(errors.len(), 1);
        assert!(matches!(errors[0].kind, FrameErrorKind::BadChecksum { .. }));
        assert_eq!(errors[0].offset, 0);
    }

    #[test]
    fn bad_length_reported_and_skipped() {
        let good = encode_packet(&[DataRow::new(CODE_ATTENTION, vec![3])]).unwrap();
        let mut bytes = vec![SYNC, SYNC, 200];
        bytes.extend_from_slice(&good);
        let (events, errors) = decode_all(&bytes);
        assert_eq!(events, vec![ParsedEvent::Attention(3)]);
        assert_eq!(
            errors,
            vec![FrameError {
                offset: 0,
                kind: FrameErrorKind::BadLength(200)
            }]
        );
    }

    #[test]
    fn truncated_capture_names_offset() {
        let mut bytes = encode_packet(&[DataRow::new(CODE_ATTENTION, vec![3])]).unwrap();
        let second = encode_packet(&[DataRow::eeg_power(&[1; 8]).unwrap()]).unwrap();
        bytes.extend_from_slice(&second[..10]);
        let (events, errors) = decode_all(&bytes);
        assert_eq!(events, vec![ParsedEvent::Attention(3)]);
        assert_eq!(
            errors,
            vec![FrameError {
                offset: 6,
                kind: FrameErrorKind::Truncated
            }]
        );
    }

    #[test]
    fn false_sync_in_front_of_packet_is_skipped() {
        // A sync pair whose length swallows the real packet.
        let good = encode_packet(&[DataRow::new(CODE_ATTENTION, vec![3])]).unwrap();
        let mut bytes = vec![SYNC, SYNC, 4, 1];
        bytes.extend_from_slice(&good);
        let (events, errors) = decode_all(&bytes);
        assert_eq!(events, vec![ParsedEvent::Attention(3)]);
        assert_eq!(errors.len(), 1);
    }

    #[test]
    fn false_sync_longer_than_stream_is_rescanned_at_end() {
        let good = encode_packet(&[DataRow::new(CODE_ATTENTION, vec![3])]).unwrap();
        let mut bytes = vec![SYNC, SYNC, 150];
        bytes.extend_from_slice(&good);
        let (events, errors, state) = decode_stream(&bytes, DecoderState::new());
        assert!(events.is_empty() && errors.is_empty());
        let (events, errors) = finish(state);
        assert_eq!(events, vec![ParsedEvent::Attention(3)]);
        assert_eq!(errors[0].kind, FrameErrorKind::Truncated);
    }

    #[test]
    fn split_packet_reassembled() {
        let bytes = encode_packet(&[DataRow::eeg_power(&[7; 8]).unwrap()]).unwrap();
        let (e1, err1, state) = decode_stream(&bytes[..5], DecoderState::new());
        assert!(e1.is_empty() && err1.is_empty());
        assert_eq!(state.position(), 5);
        let (e2, err2, state) = decode_stream(&bytes[5..], state);
        assert_eq!(e2, vec![ParsedEvent::EegPower([7; 8])]);
        assert!(err2.is_empty());
        assert_eq!(state.pending_len(), 0);
    }

    fn arb_row() -> impl Strategy<Value = DataRow> {
        (
            0u8..3,
            any::<u8>(),
            prop::collection::vec(any::<u8>(), 0..30),
        )
            .prop_map(|(excode_count, code, value)| {
                let code = if code == EXCODE { 0x56 } else { code };
                let value = if code < 0x80 {
                    vec![value.first().copied().unwrap_or(0)]
                } else {
                    value
                };
                DataRow {
                    excode_count,
                    code,
                    value,
                }
            })
    }

    fn arb_packet_rows() -> impl Strategy<Value = Vec<DataRow>> {
        prop::collection::vec(arb_row(), 1..6).prop_filter("fits in one packet", |rows| {
            rows.iter().map(DataRow::encoded_len).sum::<usize>() <= MAX_PAYLOAD
        })
    }

    proptest! {
        #[test]
        fn round_trip(rows in arb_packet_rows()) {
            let bytes = encode_packet(&rows).unwrap();
            let (events, errors) = decode_all(&bytes);
            prop_assert!(errors.is_empty());
            let back: Vec<DataRow> = events.iter().map(ParsedEvent::to_row).collect();
            prop_assert_eq!(back, rows);
        }

        #[test]
        fn chunked_decoding_matches_whole(
            packets in prop::collection::vec(arb_packet_rows(), 1..5),
            noise in prop::collection::vec(any::<u8>(), 0..40),
            chunk in 1usize..17,
        ) {
            let mut stream = noise.clone();
            for rows in &packets {
                stream.extend(encode_packet(rows).unwrap());
                stream.extend_from_slice(&noise[..noise.len() / 2]);
            }
            let whole = decode_all(&stream);

            let mut state = DecoderState::new();
            let mut events = Vec::new();
            let mut errors = Vec::new();
            for piece in stream.chunks(chunk) {
                let (e, err, s) = decode_stream(piece, state);
                events.extend(e);
                errors.extend(err);
                state = s;
            }
            let (e, err) = finish(state);
            events.extend(e);
            errors.extend(err);
            prop_assert_eq!(whole, (events, errors));
        }

        #[test]
        fn single_bit_flip_detected(rows in arb_packet_rows(), pick in any::<prop::sample::Index>(), bit in 0u8..8) {
            let mut bytes = encode_packet(&rows).unwrap();
            // payload and checksum bytes only
            let pos = 3 + pick.index(bytes.len() - 3);
            bytes[pos] ^= 1 << bit;
            let (events, errors) = decode_all(&bytes);
            let original: Vec<ParsedEvent> = rows.iter().map(ParsedEvent::from_row).collect();
            prop_assert_ne!(events, original);
            prop_assert!(!errors.is_empty());
        }
    }
}
