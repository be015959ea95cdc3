//! Predictor backed by a child process speaking line-delimited JSON.
//!
//! ```text
//! parent: {"type":"hello","version":1}
//! child:  {"type":"hello","version":1,"num_classes":D,"num_features":d}
//! parent: {"type":"predict","id":7,"instances":[[...],...]}
//! child:  {"type":"prediction","id":7,"probabilities":[[...],...]}
//! ```
//!
//! Child stderr is forwarded to the log line by line. Requests are
//! serialised: one request is in flight at a time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::composition::Composition;
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Message {
    Hello {
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_features: Option<usize>,
    },
    Predict {
        id: u64,
        instances: Vec<Vec<f64>>,
    },
    Prediction {
        id: u64,
        probabilities: Vec<Vec<f64>>,
    },
}

struct Channel {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    next_id: u64,
    dead: bool,
}

pub struct ExternalModel {
    channel: Mutex<Channel>,
    classes: usize,
    features: usize,
    timeout: Duration,
    command: String,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .field("classes", &self.classes)
            .field("features", &self.features)
            .finish()
    }
}

enum Recv {
    Line(String),
    Timeout,
    Closed,
}

impl Channel {
    fn recv(&mut self, timeout: Duration) -> Recv {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => return Recv::Line(line),
                Err(RecvTimeoutError::Timeout) => return Recv::Timeout,
                Err(RecvTimeoutError::Disconnected) => return Recv::Closed,
            }
        }
    }

    fn send(&mut self, msg: &Message) -> std::io::Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| std::io::Error::from(std::io::ErrorKind::BrokenPipe))?;
        let mut line = serde_json::to_string(msg).expect("messages serialise");
        line.push('\n');
        stdin.write_all(line.as_bytes())?;
        stdin.flush()
    }

    /// Exit code of a child that closed its stdout, killing it if it lingers.
    fn exit_code(&mut self, grace: Duration) -> Option<i32> {
        self.dead = true;
        self.stdin = None;
        let deadline = Instant::now() + grace;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return status.code(),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => {
                    let _ = self.child.kill();
                    return self.child.wait().ok().and_then(|s| s.code());
                }
            }
        }
    }

    fn kill(&mut self) {
        self.dead = true;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl ExternalModel {
    /// Spawns `cmdline` (split with shell quoting rules, no shell involved)
    /// and completes the handshake within `timeout_ms`.
    pub fn spawn(cmdline: &str, timeout_ms: u64) -> Result<Self> {
        let argv = shell_words::split(cmdline).map_err(|e| Error::SpawnFailed(e.to_string()))?;
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::SpawnFailed("empty command line".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::SpawnFailed(format!("{program}: {e}")))?;

        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        let tag = program.clone();
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(|l| l.ok()) {
                log::warn!(target: "sshap::external", "[{tag}] {line}");
            }
        });

        let timeout = Duration::from_millis(timeout_ms);
        let mut channel = Channel {
            stdin: child.stdin.take(),
            child,
            lines: rx,
            next_id: 0,
            dead: false,
        };

        let hello = Message::Hello {
            version: PROTOCOL_VERSION,
            num_classes: None,
            num_features: None,
        };
        if channel.send(&hello).is_err() {
            return Err(Error::ChildExited(channel.exit_code(timeout)));
        }
        let reply = match channel.recv(timeout) {
            Recv::Line(l) => l,
            Recv::Timeout => {
                channel.kill();
                return Err(Error::HandshakeTimeout(timeout_ms));
            }
            Recv::Closed => return Err(Error::ChildExited(channel.exit_code(timeout))),
        };
        let (classes, features) = match serde_json::from_str::<Message>(&reply) {
            Ok(Message::Hello {
                version: PROTOCOL_VERSION,
                num_classes: Some(k),
                num_features: Some(d),
            }) if k >= 2 && d >= 1 => (k, d),
            Ok(Message::Hello { version, .. }) if version != PROTOCOL_VERSION => {
                channel.kill();
                return Err(Error::Protocol(format!(
                    "unsupported protocol version {version}"
                )));
            }
            _ => {
                channel.kill();
                return Err(Error::Protocol(format!("invalid handshake reply: {reply}")));
            }
        };
        Ok(ExternalModel {
            channel: Mutex::new(channel),
            classes,
            features,
            timeout,
            command: cmdline.to_string(),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }
}

impl Predictor for ExternalModel {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn num_features(&self) -> usize {
        self.features
    }

    fn predict(&self, instances: &[Vec<f64>]) -> Result<Vec<Composition>> {
        if let Some(x) = instances.iter().find(|x| x.len() != self.features) {
            return Err(Error::DimensionMismatch {
                expected: self.features,
                got: x.len(),
            });
        }
        if instances.is_empty() {
            return Ok(Vec::new());
        }
        let mut ch = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        if ch.dead {
            return Err(Error::ChildExited(ch.child.try_wait().ok().flatten().and_then(|s| s.code())));
        }
        let id = ch.next_id;
        ch.next_id += 1;
        let request = Message::Predict {
            id,
            instances: instances.to_vec(),
        };
        if ch.send(&request).is_err() {
            return Err(Error::ChildExited(ch.exit_code(self.timeout)));
        }
        let line = match ch.recv(self.timeout) {
            Recv::Line(l) => l,
            Recv::Timeout => {
                ch.kill();
                return Err(Error::RequestTimeout {
                    id,
                    timeout_ms: self.timeout.as_millis() as u64,
                });
            }
            Recv::Closed => return Err(Error::ChildExited(ch.exit_code(self.timeout))),
        };
        let fail = |ch: &mut Channel, msg: String| {
            // The stream can no longer be trusted to be in sync.
            ch.kill();
            Err(Error::Protocol(msg))
        };
        let probabilities = match serde_json::from_str::<Message>(&line) {
            Ok(Message::Prediction {
                id: got,
                probabilities,
            }) => {
                if got != id {
                    return fail(&mut ch, format!("response id {got} does not match request id {id}"));
                }
                probabilities
            }
            Ok(other) => return fail(&mut ch, format!("expected a prediction, got {other:?}")),
            Err(e) => return fail(&mut ch, format!("malformed response ({e}): {line}")),
        };
        if probabilities.len() != instances.len() {
            return fail(
                &mut ch,
                format!(
                    "expected {} rows, got {}",
                    instances.len(),
                    probabilities.len()
                ),
            );
        }
        let mut out = Vec::with_capacity(probabilities.len());
        for (r, row) in probabilities.iter().enumerate() {
            if row.len() != self.classes {
                return fail(
                    &mut ch,
                    format!(
                        "row {r}: expected {} probabilities, got {}",
                        self.classes,
                        row.len()
                    ),
                );
            }
            match Composition::from_model_output(row) {
                Ok(c) => out.push(c),
                Err(e) => return fail(&mut ch, format!("row {r}: {e}")),
            }
        }
        Ok(out)
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|p| p.into_inner());
        if !ch.dead {
            ch.kill();
        }
    }
}
