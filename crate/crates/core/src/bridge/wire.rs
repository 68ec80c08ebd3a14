//! Message types and line framing of the evaluator wire protocol.
//!
//! Every message is one JSON object on one line, terminated by `\n`, with a
//! `type` tag. Unknown fields are ignored so newer peers can add fields
//! without breaking older ones. The full description lives in
//! `docs/wire-protocol.md`.

use crate::metrics::MetricKind;
use crate::prune::LayerId;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::BufRead;

pub const PROTOCOL_VERSION: u32 = 1;

/// Training settings forwarded to the worker untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_seq_len: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self { lr: 2e-5, batch_size: 32, epochs: 3, max_seq_len: 128 }
    }
}

/// Opens a session; sent by the client first and answered by the worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    /// Free-form identity of the sender, e.g. `"echo-mock 0.1.0"`.
    pub agent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub protocol: u32,
    pub id: u64,
    pub task: String,
    pub dataset: String,
    /// Sorted ascending.
    pub kept: Vec<LayerId>,
    pub seed: u64,
    pub hparams: Hyperparameters,
    pub metric: MetricKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: u64,
    pub status: WireStatus,
    /// Present and finite when `status` is `ok`.
    pub score: Option<f64>,
    pub val_loss: Option<f64>,
    pub wall_seconds: f64,
    pub worker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Complaint about a message the peer could not use. `id` names the request
/// it refers to, when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNotice {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello(Hello),
    Evaluate(WireRequest),
    Result(WireResponse),
    Error(ErrorNotice),
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("truncated message at byte {offset}: stream ended without a newline")]
    Truncated { offset: u64 },
    #[error("protocol version {found} at byte {offset}; this side speaks version {PROTOCOL_VERSION}")]
    VersionMismatch { offset: u64, found: u32 },
    #[error("duplicate request id {id} at byte {offset}")]
    DuplicateId { offset: u64, id: u64 },
    #[error("transport: {0}")]
    Io(String),
}

impl ProtocolError {
    /// Whether the stream can still be read after this error.
    pub fn is_recoverable(&self) -> bool {
        !matches!(self, ProtocolError::Truncated { .. } | ProtocolError::Io(_))
    }
}

pub fn encode(msg: &Message) -> String {
    let mut s = serde_json::to_string(msg).expect("messages serialize");
    s.push('\n');
    s
}

/// Parses one line (without its newline) that started at byte `offset`.
pub fn decode_line(line: &[u8], offset: u64) -> Result<Message, ProtocolError> {
    let malformed = |reason: String| ProtocolError::Malformed { offset, reason };
    let msg: Message = serde_json::from_slice(line).map_err(|e| malformed(e.to_string()))?;
    match &msg {
        Message::Hello(h) if h.protocol != PROTOCOL_VERSION => {
            return Err(ProtocolError::VersionMismatch { offset, found: h.protocol });
        }
        Message::Evaluate(r) => {
            if r.protocol != PROTOCOL_VERSION {
                return Err(ProtocolError::VersionMismatch { offset, found: r.protocol });
            }
            if r.kept.is_empty() || r.kept.windows(2).any(|w| w[0] >= w[1]) {
                return Err(malformed(format!("kept layers {:?} must be non-empty and strictly ascending", r.kept)));
            }
        }
        Message::Result(r) if r.status == WireStatus::Ok && !r.score.is_some_and(f64::is_finite) => {
            return Err(malformed("status ok requires a finite score".into()));
        }
        _ => {}
    }
    Ok(msg)
}

/// Reads messages from a byte stream, keeping track of byte offsets.
pub struct Decoder<R> {
    reader: R,
    offset: u64,
    buf: Vec<u8>,
}

impl<R: BufRead> Decoder<R> {
    pub fn new(reader: R) -> Self {
        Self { reader, offset: 0, buf: Vec::new() }
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Next message, `None` at a clean end of stream. A malformed line is
    /// consumed and reported; reading can continue after it.
    pub fn next_message(&mut self) -> Option<Result<Message, ProtocolError>> {
        self.buf.clear();
        let start = self.offset;
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(n) => {
                self.offset += n as u64;
                if self.buf.last() != Some(&b'\n') {
                    return Some(Err(ProtocolError::Truncated { offset: start }));
                }
                let line = &self.buf[..self.buf.len() - 1];
                let line = line.strip_suffix(b"\r").unwrap_or(line);
                Some(decode_line(line, start))
            }
            Err(e) => Some(Err(ProtocolError::Io(e.to_string()))),
        }
    }
}

/// Rejects request ids seen before in the same session.
#[derive(Debug, Default)]
pub struct IdRegistry {
    seen: HashSet<u64>,
}

impl IdRegistry {
    pub fn admit(&mut self, id: u64, offset: u64) -> Result<(), ProtocolError> {
        if self.seen.insert(id) {
            Ok(())
        } else {
            Err(ProtocolError::DuplicateId { offset, id })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn request(id: u64, kept: Vec<usize>) -> WireRequest {
        WireRequest {
            protocol: PROTOCOL_VERSION,
            id,
            task: "cola".into(),
            dataset: "glue/cola".into(),
            kept,
            seed: 3,
            hparams: Hyperparameters::default(),
            metric: MetricKind::MatthewsCorr,
        }
    }

    proptest! {
        #[test]
        fn request_round_trip(id in any::<u64>(), mask in 1u32..4096, seed in any::<u64>(), lr in 1e-7f64..1.0) {
            let kept: Vec<usize> = (0..12).filter(|b| mask & (1 << b) != 0).collect();
            let mut r = request(id, kept);
            r.seed = seed;
            r.hparams.lr = lr;
            let line = encode(&Message::Evaluate(r.clone()));
            prop_assert!(line.ends_with('\n') && !line[..line.len() - 1].contains('\n'));
            let back = decode_line(line.trim_end().as_bytes(), 0).unwrap();
            prop_assert_eq!(back, Message::Evaluate(r));
        }

        #[test]
        fn any_bytes_parse_or_fail_with_location(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let mut d = Decoder::new(&bytes[..]);
            let mut guard = 0;
            while let Some(item) = d.next_message() {
                if let Err(e) = item {
                    let text = e.to_string();
                    prop_assert!(text.contains("byte") || text.contains("transport"), "{}", text);
                }
                guard += 1;
                prop_assert!(guard <= bytes.len() + 1);
            }
            prop_assert_eq!(d.offset(), bytes.len() as u64);
        }
    }

    #[test]
    fn unknown_fields_are_dropped() {
        let line = br#"{"type":"result","id":4,"status":"ok","score":0.5,"val_loss":null,"wall_seconds":1.5,"worker":"w","gpu":"A100","extra":{"x":1}}"#;
        match decode_line(line, 0).unwrap() {
            Message::Result(r) => {
                assert_eq!(r.id, 4);
                assert_eq!(r.score, Some(0.5));
                let again = encode(&Message::Result(r));
                assert!(!again.contains("gpu"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_name_their_offsets() {
        let good = encode(&Message::Shutdown);
        let stream = format!("{good}not json\n{good}{{\"type\":\"hello\",\"protocol\":2,\"agent\":\"x\"}}\n{{\"type\":");
        let mut d = Decoder::new(stream.as_bytes());
        assert_eq!(d.next_message(), Some(Ok(Message::Shutdown)));
        let g = good.len() as u64;
        assert!(matches!(d.next_message(), Some(Err(ProtocolError::Malformed { offset, .. })) if offset == g));
        // the session survives a garbage line
        assert_eq!(d.next_message(), Some(Ok(Message::Shutdown)));
        let at = 2 * g + 9;
        assert_eq!(d.next_message(), Some(Err(ProtocolError::VersionMismatch { offset: at, found: 2 })));
        assert!(matches!(d.next_message(), Some(Err(ProtocolError::Truncated { .. }))));
        assert_eq!(d.next_message(), None);
    }

    #[test]
    fn semantic_checks() {
        let bad_kept = encode(&Message::Evaluate(request(1, vec![3, 1])));
        assert!(matches!(decode_line(bad_kept.trim_end().as_bytes(), 7), Err(ProtocolError::Malformed { offset: 7, .. })));
        let ok_without_score = br#"{"type":"result","id":1,"status":"ok","score":null,"val_loss":null,"wall_seconds":0.0,"worker":"w"}"#;
        assert!(decode_line(ok_without_score, 0).is_err());
        let mut ids = IdRegistry::default();
        ids.admit(5, 0).unwrap();
        assert_eq!(ids.admit(5, 10), Err(ProtocolError::DuplicateId { offset: 10, id: 5 }));
    }
}
