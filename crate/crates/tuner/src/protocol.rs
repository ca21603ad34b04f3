//! Protocol v1: newline-delimited JSON between the tuner and an evaluator subprocess.
//!
//! The child writes one handshake line on startup, then answers each request line with exactly
//! one response line, in order. See `PROTOCOL.md` at the repository root for the framing.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use pareto_tuner_core::search_space::{GUIDANCE_RESCALE, GUIDANCE_SCALE, INFERENCE_STEPS, SEED};
use pareto_tuner_core::{EvalRequest, ObjectiveVector, SearchSpace};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_NAME: &str = "pareto-tuner";
pub const PROTOCOL_VERSION: &str = "1";

/// First line written by a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Handshake {
    pub protocol: String,
    pub version: String,
    pub parallel_safe: bool,
}

impl Handshake {
    pub fn v1(parallel_safe: bool) -> Self {
        Self { protocol: PROTOCOL_NAME.into(), version: PROTOCOL_VERSION.into(), parallel_safe }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("handshake serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRequest {
    pub id: String,
    pub steps: i64,
    pub guidance_scale: f64,
    pub guidance_rescale: f64,
    pub seed: i64,
    pub positive_prompt: String,
    pub negative_prompt: String,
    pub base_prompt: String,
}

impl WireRequest {
    /// Builds the wire form of `req`; `space` must contain the four numeric diffusion parameters.
    pub fn from_eval(req: &EvalRequest, space: &SearchSpace) -> Result<Self, String> {
        let gene = |name: &str| {
            space
                .index_of(name)
                .and_then(|i| req.candidate.genes.get(i))
                .ok_or_else(|| format!("search space has no `{name}` parameter"))
        };
        let int = |name: &str| gene(name)?.as_int().ok_or_else(|| format!("`{name}` is not an integer"));
        let real = |name: &str| gene(name)?.as_real().ok_or_else(|| format!("`{name}` is not a real"));
        Ok(Self {
            id: req.id.clone(),
            steps: int(INFERENCE_STEPS)?,
            guidance_scale: real(GUIDANCE_SCALE)?,
            guidance_rescale: real(GUIDANCE_RESCALE)?,
            seed: int(SEED)?,
            positive_prompt: req.positive_prompt.clone(),
            negative_prompt: req.negative_prompt.clone(),
            base_prompt: req.base_prompt.clone(),
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }

    pub fn parse(line: &str) -> Result<Self, String> {
        serde_json::from_str(line).map_err(|e| e.to_string())
    }
}

/// A backend's answer: objectives or an error message, never both.
#[derive(Debug, Clone, PartialEq)]
pub struct WireResponse {
    pub id: String,
    pub outcome: Result<ObjectiveVector, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResponse {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl WireResponse {
    pub fn ok(id: impl Into<String>, time_ms: f64, quality: f64) -> Self {
        Self { id: id.into(), outcome: Ok(ObjectiveVector::new(time_ms, quality)) }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        Self { id: id.into(), outcome: Err(message.into()) }
    }

    pub fn to_line(&self) -> String {
        let raw = match &self.outcome {
            Ok(o) => {
                RawResponse { id: self.id.clone(), time_ms: Some(o.time_ms), quality: Some(o.quality), error: None }
            }
            Err(e) => RawResponse { id: self.id.clone(), time_ms: None, quality: None, error: Some(e.clone()) },
        };
        serde_json::to_string(&raw).expect("response serializes")
    }

    pub fn parse(line: &str) -> Result<Self, String> {
        let raw: RawResponse = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let outcome = match (raw.time_ms, raw.quality, raw.error) {
            (Some(t), Some(q), None) => Ok(ObjectiveVector::new(t, q)),
            (None, None, Some(e)) => Err(e),
            (_, _, Some(_)) => return Err("response carries both objectives and an error".into()),
            _ => return Err("response needs both time_ms and quality, or error".into()),
        };
        Ok(Self { id: raw.id, outcome })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("cannot start backend `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend sent no handshake within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("malformed handshake line {line:?}: {reason}")]
    HandshakeMalformed { line: String, reason: String },
    #[error("backend speaks protocol version {got:?}, expected {expected:?}")]
    VersionMismatch { expected: String, got: String },
    #[error("malformed response line {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("response id {got:?} does not match request id {expected:?}")]
    IdMismatch { expected: String, got: String },
    #[error("backend did not answer within {0:?}")]
    Timeout(Duration),
    #[error("backend exited ({0})")]
    ChildExited(String),
    #[error("backend handle is dead after an earlier error")]
    Dead,
}

enum Incoming {
    Line(String),
    Eof,
    Failed(String),
}

/// How to start a backend and how long to wait for it.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendSpec {
    pub command: Vec<String>,
    pub handshake_timeout: Duration,
    pub request_timeout: Duration,
}

impl BackendSpec {
    pub fn new(command: Vec<String>) -> Self {
        Self { command, handshake_timeout: Duration::from_secs(600), request_timeout: Duration::from_secs(600) }
    }

    pub fn display_command(&self) -> String {
        self.command.join(" ")
    }
}

/// A live backend process. Any error kills the child and leaves the handle dead.
pub struct BackendHandle {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Incoming>,
    request_timeout: Duration,
    handshake: Handshake,
    dead: bool,
}

/// Starts `spec.command` and waits for its handshake.
pub fn spawn_backend(spec: &BackendSpec) -> Result<BackendHandle, ProtocolError> {
    let (program, args) = spec.command.split_first().ok_or_else(|| ProtocolError::Spawn {
        command: String::new(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
    })?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| ProtocolError::Spawn { command: spec.display_command(), source })?;
    let stdin = child.stdin.take();
    let stdout = child.stdout.take().expect("stdout is piped");

    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(stdout);
        loop {
            let mut line = String::new();
            let msg = match reader.read_line(&mut line) {
                Ok(0) => Incoming::Eof,
                Ok(_) => Incoming::Line(line.trim_end_matches(['\n', '\r']).to_string()),
                Err(e) => Incoming::Failed(e.to_string()),
            };
            let stop = !matches!(msg, Incoming::Line(_));
            if tx.send(msg).is_err() || stop {
                break;
            }
        }
    });

    let mut handle = BackendHandle {
        child,
        stdin,
        lines: rx,
        request_timeout: spec.request_timeout,
        handshake: Handshake::v1(false),
        dead: false,
    };
    let line = match handle.lines.recv_timeout(spec.handshake_timeout) {
        Ok(Incoming::Line(line)) => line,
        Ok(Incoming::Eof) | Err(RecvTimeoutError::Disconnected) => {
            return Err(handle.fail_exit());
        }
        Ok(Incoming::Failed(reason)) => {
            handle.kill();
            return Err(ProtocolError::HandshakeMalformed { line: String::new(), reason });
        }
        Err(RecvTimeoutError::Timeout) => {
            handle.kill();
            return Err(ProtocolError::HandshakeTimeout(spec.handshake_timeout));
        }
    };
    let hs: Handshake = match serde_json::from_str(&line) {
        Ok(hs) => hs,
        Err(e) => {
            handle.kill();
            return Err(ProtocolError::HandshakeMalformed { line, reason: e.to_string() });
        }
    };
    if hs.protocol != PROTOCOL_NAME {
        handle.kill();
        return Err(ProtocolError::HandshakeMalformed { line, reason: format!("protocol must be {PROTOCOL_NAME:?}") });
    }
    if hs.version != PROTOCOL_VERSION {
        handle.kill();
        return Err(ProtocolError::VersionMismatch { expected: PROTOCOL_VERSION.into(), got: hs.version });
    }
    handle.handshake = hs;
    Ok(handle)
}

impl BackendHandle {
    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    pub fn is_dead(&self) -> bool {
        self.dead
    }

    /// Sends one request and waits for its response.
    pub fn roundtrip(&mut self, req: &WireRequest) -> Result<WireResponse, ProtocolError> {
        if self.dead {
            return Err(ProtocolError::Dead);
        }
        let mut line = req.to_line();
        line.push('\n');
        let written = match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
            None => Err(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "stdin closed")),
        };
        if written.is_err() {
            return Err(self.fail_exit());
        }
        let reply = match self.lines.recv_timeout(self.request_timeout) {
            Ok(Incoming::Line(reply)) => reply,
            Ok(Incoming::Eof) | Err(RecvTimeoutError::Disconnected) => return Err(self.fail_exit()),
            Ok(Incoming::Failed(reason)) => {
                self.kill();
                return Err(ProtocolError::Malformed { line: String::new(), reason });
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                return Err(ProtocolError::Timeout(self.request_timeout));
            }
        };
        let resp = match WireResponse::parse(&reply) {
            Ok(r) => r,
            Err(reason) => {
                self.kill();
                return Err(ProtocolError::Malformed { line: reply, reason });
            }
        };
        if resp.id != req.id {
            self.kill();
            return Err(ProtocolError::IdMismatch { expected: req.id.clone(), got: resp.id });
        }
        Ok(resp)
    }

    /// Kills the child and reports how it ended.
    fn fail_exit(&mut self) -> ProtocolError {
        // Give an exiting child a moment so its status is available.
        let deadline = Instant::now() + Duration::from_millis(200);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(s)) => break Some(s),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => break None,
            }
        };
        self.kill();
        ProtocolError::ChildExited(match status {
            Some(s) => s.to_string(),
            None => "output closed".into(),
        })
    }

    fn kill(&mut self) {
        self.dead = true;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for BackendHandle {
    fn drop(&mut self) {
        if self.dead {
            return;
        }
        // Closing stdin asks the child to exit; kill it if it lingers.
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        self.kill();
    }
}
