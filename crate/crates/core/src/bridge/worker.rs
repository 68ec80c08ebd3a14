use super::wire::{
    encode, Decoder, ErrorNotice, Hello, IdRegistry, Message, ProtocolError, WireRequest, WireResponse, WireStatus,
    PROTOCOL_VERSION,
};
use crate::prune::synthetic::AdditiveOracle;
use std::io::{BufRead, Write};
use std::time::Duration;

/// Counts of what a [`serve`] loop saw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeSummary {
    pub answered: usize,
    pub rejected: usize,
}

fn send<W: Write>(writer: &mut W, msg: &Message) -> Result<(), ProtocolError> {
    writer.write_all(encode(msg).as_bytes()).and_then(|_| writer.flush()).map_err(|e| ProtocolError::Io(e.to_string()))
}

fn reject<W: Write>(writer: &mut W, id: Option<u64>, err: &ProtocolError) -> Result<(), ProtocolError> {
    send(writer, &Message::Error(ErrorNotice { id, message: err.to_string() }))
}

/// Worker side of a session: answers the handshake, then every `evaluate`
/// request with `handle`, until `shutdown` or end of input. Bad lines are
/// answered with an `error` message and skipped.
pub fn serve<R, W, F>(reader: R, mut writer: W, agent: &str, mut handle: F) -> Result<ServeSummary, ProtocolError>
where
    R: BufRead,
    W: Write,
    F: FnMut(&WireRequest) -> WireResponse,
{
    let mut decoder = Decoder::new(reader);
    match decoder.next_message() {
        Some(Ok(Message::Hello(_))) => {
            send(&mut writer, &Message::Hello(Hello { protocol: PROTOCOL_VERSION, agent: agent.to_string() }))?;
        }
        Some(Err(e)) => {
            reject(&mut writer, None, &e)?;
            return Err(e);
        }
        Some(Ok(other)) => {
            let e = ProtocolError::Malformed { offset: 0, reason: format!("expected hello, got {other:?}") };
            reject(&mut writer, None, &e)?;
            return Err(e);
        }
        None => return Ok(ServeSummary::default()),
    }
    let mut ids = IdRegistry::default();
    let mut summary = ServeSummary::default();
    loop {
        let offset = decoder.offset();
        match decoder.next_message() {
            None | Some(Ok(Message::Shutdown)) => return Ok(summary),
            Some(Ok(Message::Evaluate(req))) => match ids.admit(req.id, offset) {
                Ok(()) => {
                    let mut resp = handle(&req);
                    resp.id = req.id;
                    send(&mut writer, &Message::Result(resp))?;
                    summary.answered += 1;
                }
                Err(e) => {
                    reject(&mut writer, Some(req.id), &e)?;
                    summary.rejected += 1;
                }
            },
            Some(Ok(other)) => {
                let e = ProtocolError::Malformed { offset, reason: format!("unexpected {other:?}") };
                reject(&mut writer, None, &e)?;
                summary.rejected += 1;
            }
            Some(Err(e)) if e.is_recoverable() => {
                reject(&mut writer, None, &e)?;
                summary.rejected += 1;
            }
            Some(Err(e)) => return Err(e),
        }
    }
}

/// Deterministic stand-in for a real evaluator: the score of a kept set is
/// the sum of fixed per-layer weights (see [`AdditiveOracle::random`]).
#[derive(Debug, Clone)]
pub struct EchoMock {
    oracle: AdditiveOracle,
    delay: Duration,
}

impl EchoMock {
    pub const AGENT: &'static str = concat!("echo-mock ", env!("CARGO_PKG_VERSION"));

    pub fn new(depth: usize, seed: u64) -> Self {
        Self { oracle: AdditiveOracle::random(depth, seed), delay: Duration::ZERO }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn oracle(&self) -> &AdditiveOracle {
        &self.oracle
    }

    pub fn respond(&self, req: &WireRequest) -> WireResponse {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let depth = self.oracle.weights().len();
        let base = WireResponse {
            id: req.id,
            status: WireStatus::Ok,
            score: None,
            val_loss: None,
            wall_seconds: 0.0,
            worker: Self::AGENT.to_string(),
            message: None,
        };
        match req.kept.iter().find(|&&l| l >= depth) {
            Some(l) => WireResponse {
                status: WireStatus::Failed,
                message: Some(format!("layer {l} does not exist in a {depth}-layer model")),
                ..base
            },
            None => WireResponse { score: Some(self.oracle.value(&req.kept)), ..base },
        }
    }

    pub fn serve<R: BufRead, W: Write>(&self, reader: R, writer: W) -> Result<ServeSummary, ProtocolError> {
        serve(reader, writer, Self::AGENT, |r| self.respond(r))
    }
}
