use super::wire::{encode, Decoder, Hello, Message, ProtocolError, WireRequest, WireResponse, PROTOCOL_VERSION};
use std::collections::HashMap;
use std::io::{BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BridgeError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("cannot start worker: {0}")]
    Spawn(String),
}

/// Why a call produced no response.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CallError {
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("worker rejected the request: {0}")]
    Rejected(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

enum Reply {
    Response(WireResponse),
    Rejected(String),
}

#[derive(Default)]
struct Shared {
    pending: Mutex<HashMap<u64, Sender<Reply>>>,
    closed: Mutex<Option<String>>,
}

impl Shared {
    fn close(&self, reason: String) {
        let mut closed = self.closed.lock().unwrap_or_else(|p| p.into_inner());
        closed.get_or_insert(reason);
        // dropping the senders wakes every waiter
        self.pending.lock().unwrap_or_else(|p| p.into_inner()).clear();
    }

    fn closed(&self) -> Option<String> {
        self.closed.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

/// Client end of one worker connection. Calls may come from several
/// threads at once; responses are matched to callers by request id.
pub struct Session {
    writer: Mutex<Box<dyn Write + Send>>,
    shared: Arc<Shared>,
    next_id: AtomicU64,
    worker: String,
    timeout: Duration,
    child: Option<Child>,
    reader: Option<JoinHandle<()>>,
}

impl Session {
    /// Performs the handshake over an arbitrary byte stream pair.
    pub fn connect<R, W>(reader: R, writer: W, timeout: Duration) -> Result<Self, BridgeError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let mut writer: Box<dyn Write + Send> = Box::new(writer);
        let hello = Message::Hello(Hello { protocol: PROTOCOL_VERSION, agent: concat!("layer-prune ", env!("CARGO_PKG_VERSION")).into() });
        writer
            .write_all(encode(&hello).as_bytes())
            .and_then(|_| writer.flush())
            .map_err(|e| BridgeError::Handshake(format!("cannot write hello: {e}")))?;

        let shared = Arc::new(Shared::default());
        let (hello_tx, hello_rx) = mpsc::channel();
        let thread_shared = Arc::clone(&shared);
        let handle = std::thread::Builder::new()
            .name("bridge-reader".into())
            .spawn(move || read_loop(BufReader::new(reader), thread_shared, hello_tx))
            .map_err(|e| BridgeError::Handshake(e.to_string()))?;
        let worker = match hello_rx.recv_timeout(timeout) {
            Ok(Ok(agent)) => agent,
            Ok(Err(e)) => return Err(e),
            Err(RecvTimeoutError::Timeout) => return Err(BridgeError::Handshake(format!("no hello within {timeout:?}"))),
            Err(RecvTimeoutError::Disconnected) => {
                let why = shared.closed().unwrap_or_else(|| "worker closed the stream".into());
                return Err(BridgeError::Handshake(why));
            }
        };
        Ok(Self {
            writer: Mutex::new(writer),
            shared,
            next_id: AtomicU64::new(1),
            worker,
            timeout,
            child: None,
            reader: Some(handle),
        })
    }

    /// Starts `command` through the shell and talks to it over its
    /// standard streams. Its stderr is passed through.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, BridgeError> {
        let mut child = Command::new("sh")
            .arg("-c")
            // exec so that killing the child reaches the worker, not just the shell
            .arg(format!("exec {command}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BridgeError::Spawn(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        match Self::connect(stdout, stdin, timeout) {
            Ok(mut s) => {
                s.child = Some(child);
                Ok(s)
            }
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    /// Connects to a worker listening on a local socket.
    #[cfg(unix)]
    pub fn connect_unix(path: &std::path::Path, timeout: Duration) -> Result<Self, BridgeError> {
        let stream = std::os::unix::net::UnixStream::connect(path)
            .map_err(|e| BridgeError::Spawn(format!("{}: {e}", path.display())))?;
        let reader = stream.try_clone().map_err(|e| BridgeError::Spawn(e.to_string()))?;
        Self::connect(reader, stream, timeout)
    }

    /// Identity string the worker sent in its hello.
    pub fn worker(&self) -> &str {
        &self.worker
    }

    pub fn is_alive(&self) -> bool {
        self.shared.closed().is_none()
    }

    /// Ends the session without waiting for the worker to finish whatever
    /// it is doing; a spawned worker is killed.
    pub fn abandon(mut self) {
        self.shared.close("session abandoned".into());
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }

    /// Sends `request` under a fresh id and waits for the matching response.
    pub fn call(&self, mut request: WireRequest) -> Result<WireResponse, CallError> {
        if let Some(why) = self.shared.closed() {
            return Err(CallError::Transport(why));
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        request.id = id;
        let (tx, rx) = mpsc::channel();
        self.shared.pending.lock().unwrap_or_else(|p| p.into_inner()).insert(id, tx);
        let line = encode(&Message::Evaluate(request));
        let written = {
            let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
            w.write_all(line.as_bytes()).and_then(|_| w.flush())
        };
        if let Err(e) = written {
            self.shared.pending.lock().unwrap_or_else(|p| p.into_inner()).remove(&id);
            self.shared.close(format!("write failed: {e}"));
            return Err(CallError::Transport(format!("write failed: {e}")));
        }
        match rx.recv_timeout(self.timeout) {
            Ok(Reply::Response(r)) => Ok(r),
            Ok(Reply::Rejected(m)) => Err(CallError::Rejected(m)),
            Err(RecvTimeoutError::Timeout) => {
                self.shared.pending.lock().unwrap_or_else(|p| p.into_inner()).remove(&id);
                Err(CallError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(CallError::Transport(self.shared.closed().unwrap_or_else(|| "session closed".into())))
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        {
            let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
            let _ = w.write_all(encode(&Message::Shutdown).as_bytes()).and_then(|_| w.flush());
            // closing our end lets the worker see end of input
            *w = Box::new(std::io::sink());
        }
        if let Some(mut child) = self.child.take() {
            let deadline = std::time::Instant::now() + Duration::from_secs(2);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if std::time::Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
            if let Some(h) = self.reader.take() {
                let _ = h.join();
            }
        }
        // for plain streams the reader thread ends when the peer closes
    }
}

fn read_loop<R: std::io::BufRead>(reader: R, shared: Arc<Shared>, hello: Sender<Result<String, BridgeError>>) {
    let mut decoder = Decoder::new(reader);
    let mut hello = Some(hello);
    loop {
        let item = decoder.next_message();
        if let Some(tx) = hello.take() {
            let outcome = match &item {
                Some(Ok(Message::Hello(h))) => Ok(h.agent.clone()),
                Some(Ok(Message::Error(n))) => Err(BridgeError::Handshake(n.message.clone())),
                Some(Ok(other)) => Err(BridgeError::Handshake(format!("expected hello, got {other:?}"))),
                Some(Err(e)) => Err(BridgeError::Protocol(e.clone())),
                None => Err(BridgeError::Handshake("worker closed the stream before saying hello".into())),
            };
            let failed = outcome.is_err();
            let _ = tx.send(outcome);
            if failed {
                shared.close("handshake failed".into());
                return;
            }
            continue;
        }
        match item {
            None => {
                shared.close("worker closed the stream".into());
                return;
            }
            Some(Ok(Message::Result(r))) => {
                let tx = shared.pending.lock().unwrap_or_else(|p| p.into_inner()).remove(&r.id);
                match tx {
                    Some(tx) => {
                        let _ = tx.send(Reply::Response(r));
                    }
                    None => log::warn!("dropping response for unknown or expired request id {}", r.id),
                }
            }
            Some(Ok(Message::Error(n))) => {
                let tx = n.id.and_then(|id| shared.pending.lock().unwrap_or_else(|p| p.into_inner()).remove(&id));
                match tx {
                    Some(tx) => {
                        let _ = tx.send(Reply::Rejected(n.message));
                    }
                    None => log::warn!("worker reported: {}", n.message),
                }
            }
            Some(Ok(other)) => log::warn!("ignoring unexpected message from worker: {other:?}"),
            Some(Err(e)) if e.is_recoverable() => log::warn!("ignoring bad line from worker: {e}"),
            Some(Err(e)) => {
                shared.close(e.to_string());
                return;
            }
        }
    }
}
