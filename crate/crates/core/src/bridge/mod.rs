//! Out-of-process evaluators over a line-delimited JSON protocol.
//!
//! The client side ([`Session`], [`BridgeEvaluator`]) turns a worker
//! process or socket into an [`Evaluator`](crate::orchestrator::Evaluator).
//! The worker side ([`serve`]) and a deterministic [`EchoMock`] are here too,
//! so the whole path can be exercised without a real model.

mod evaluator;
mod session;
pub mod wire;
mod worker;

pub use evaluator::{glue_metric, BridgeConfig, BridgeEvaluator, Connector};
pub use session::{BridgeError, CallError, Session};
pub use wire::{
    Decoder, ErrorNotice, Hello, Hyperparameters, Message, ProtocolError, WireRequest, WireResponse, WireStatus,
    PROTOCOL_VERSION,
};
pub use worker::{serve, EchoMock, ServeSummary};
