//! External training workers spoken to over stdin/stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::protocol::{Hello, ProgressRecord, Record, ResultRecord, PROTOCOL_VERSION};
use super::{EvalError, EvalRequest};

pub const DEFAULT_WORKER_TIMEOUT_MS: u64 = 600_000;

/// Program plus arguments used to launch one worker process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl WorkerCommand {
    pub fn new(program: impl Into<String>, args: &[&str]) -> Self {
        Self {
            program: program.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    /// Splits a launch line on whitespace; no quoting is interpreted.
    pub fn parse(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace();
        let program = parts.next()?.to_string();
        Some(Self {
            program,
            args: parts.map(str::to_string).collect(),
        })
    }
}

enum Line {
    Text(String),
    Invalid(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerReply {
    pub result: ResultRecord,
    pub progress: Vec<ProgressRecord>,
}

/// One live, handshaken worker process.
pub struct WorkerConnection {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Line>,
    timeout: Duration,
}

impl WorkerConnection {
    pub fn spawn(command: &WorkerCommand, timeout: Duration) -> Result<Self, EvalError> {
        let mut child = Command::new(&command.program)
            .args(&command.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Spawn(format!("{}: {e}", command.program)))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut buf = Vec::new();
                match reader.read_until(b'\n', &mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        if buf.last() == Some(&b'\n') {
                            buf.pop();
                        }
                        let line = match String::from_utf8(buf) {
                            Ok(text) => Line::Text(text),
                            Err(e) => Line::Invalid(e.into_bytes()),
                        };
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                }
            }
        });
        let mut conn = Self {
            child,
            stdin,
            lines: rx,
            timeout,
        };
        conn.handshake()?;
        Ok(conn)
    }

    fn handshake(&mut self) -> Result<(), EvalError> {
        self.send(&Record::Hello(Hello { version: PROTOCOL_VERSION }))?;
        let deadline = Instant::now() + self.timeout;
        match self.next_record(deadline)? {
            Record::Hello(Hello { version }) if version == PROTOCOL_VERSION => Ok(()),
            Record::Hello(Hello { version }) => Err(EvalError::Handshake(format!(
                "worker speaks version {version}, expected {PROTOCOL_VERSION}"
            ))),
            other => Err(EvalError::Protocol {
                message: "expected hello".into(),
                raw: other.to_line(),
            }),
        }
    }

    fn send(&mut self, record: &Record) -> Result<(), EvalError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| EvalError::Protocol {
            message: "worker input closed".into(),
            raw: String::new(),
        })?;
        let mut line = record.to_line();
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| EvalError::Protocol {
                message: format!("write failed: {e}"),
                raw: line,
            })
    }

    fn next_record(&mut self, deadline: Instant) -> Result<Record, EvalError> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Line::Text(text)) => Record::parse_line(&text).map_err(|e| EvalError::Protocol {
                message: e.to_string(),
                raw: text,
            }),
            Ok(Line::Invalid(bytes)) => Err(EvalError::Protocol {
                message: "line is not UTF-8".into(),
                raw: String::from_utf8_lossy(&bytes).into_owned(),
            }),
            Err(RecvTimeoutError::Timeout) => Err(EvalError::Timeout {
                millis: self.timeout.as_millis() as u64,
            }),
            Err(RecvTimeoutError::Disconnected) => Err(EvalError::Protocol {
                message: "worker closed its output".into(),
                raw: String::new(),
            }),
        }
    }

    /// Runs one request to completion. After any `Err` other than
    /// [`EvalError::Worker`] the connection must be discarded.
    pub fn request(&mut self, req: &EvalRequest) -> Result<WorkerReply, EvalError> {
        self.send(&Record::EvalRequest(req.clone()))?;
        let deadline = Instant::now() + self.timeout;
        let mut progress = Vec::new();
        loop {
            let record = self.next_record(deadline)?;
            let raw = record.to_line();
            let mismatch = |id: &str| EvalError::Protocol {
                message: format!("reply for {id}, expected {}", req.request_id),
                raw: raw.clone(),
            };
            match record {
                Record::Progress(p) if p.request_id == req.request_id => progress.push(p),
                Record::EvalResult(result) if result.request_id == req.request_id => {
                    if !(result.metric_mean.is_finite() && result.metric_std.is_finite() && result.metric_std >= 0.0)
                    {
                        return Err(EvalError::Protocol {
                            message: "result metrics out of range".into(),
                            raw,
                        });
                    }
                    return Ok(WorkerReply { result, progress });
                }
                Record::EvalError(err) if err.request_id == req.request_id => {
                    return Err(EvalError::Worker {
                        request_id: err.request_id,
                        message: err.message,
                    });
                }
                Record::Progress(p) => return Err(mismatch(&p.request_id)),
                Record::EvalResult(r) => return Err(mismatch(&r.request_id)),
                Record::EvalError(e) => return Err(mismatch(&e.request_id)),
                other => {
                    return Err(EvalError::Protocol {
                        message: format!("unexpected {} record", other.kind()),
                        raw,
                    })
                }
            }
        }
    }
}

impl Drop for WorkerConnection {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct PoolState {
    idle: Vec<WorkerConnection>,
    busy: usize,
}

/// Up to `size` worker processes, each serving one request at a time.
/// Workers are started on demand and replaced after a failure.
pub struct WorkerPool {
    command: WorkerCommand,
    size: usize,
    timeout: Duration,
    state: Mutex<PoolState>,
    ready: Condvar,
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool")
            .field("command", &self.command)
            .field("size", &self.size)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl WorkerPool {
    pub fn new(command: WorkerCommand, size: usize, timeout: Duration) -> Self {
        Self {
            command,
            size: size.max(1),
            timeout,
            state: Mutex::new(PoolState { idle: Vec::new(), busy: 0 }),
            ready: Condvar::new(),
        }
    }

    /// Starts one worker up front so a bad command or version is caught early.
    pub fn connect(command: WorkerCommand, size: usize, timeout: Duration) -> Result<Self, EvalError> {
        let pool = Self::new(command, size, timeout);
        let conn = WorkerConnection::spawn(&pool.command, pool.timeout)?;
        pool.state.lock().unwrap().idle.push(conn);
        Ok(pool)
    }

    pub fn command(&self) -> &WorkerCommand {
        &self.command
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn idle_workers(&self) -> usize {
        self.state.lock().unwrap().idle.len()
    }

    fn acquire(&self) -> Result<WorkerConnection, EvalError> {
        let mut state = self.state.lock().unwrap();
        loop {
            if let Some(conn) = state.idle.pop() {
                state.busy += 1;
                return Ok(conn);
            }
            if state.busy + state.idle.len() < self.size {
                state.busy += 1;
                drop(state);
                let spawned = WorkerConnection::spawn(&self.command, self.timeout);
                if spawned.is_err() {
                    self.release(None);
                }
                return spawned;
            }
            state = self.ready.wait(state).unwrap();
        }
    }

    fn release(&self, conn: Option<WorkerConnection>) {
        let mut state = self.state.lock().unwrap();
        state.busy -= 1;
        if let Some(conn) = conn {
            state.idle.push(conn);
        }
        self.ready.notify_one();
    }

    pub fn evaluate(&self, req: &EvalRequest) -> Result<WorkerReply, EvalError> {
        let mut conn = self.acquire()?;
        let outcome = conn.request(req);
        let keep = matches!(outcome, Ok(_) | Err(EvalError::Worker { .. }));
        self.release(keep.then_some(conn));
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_launch_line() {
        let cmd = WorkerCommand::parse("python3 -m worker --device cpu").unwrap();
        assert_eq!(cmd.program, "python3");
        assert_eq!(cmd.args, vec!["-m", "worker", "--device", "cpu"]);
        assert!(WorkerCommand::parse("   ").is_none());
    }

    #[test]
    fn missing_program_is_a_spawn_error() {
        let pool = WorkerPool::new(
            WorkerCommand::new("/nonexistent/archon-worker", &[]),
            1,
            Duration::from_millis(100),
        );
        let req = EvalRequest {
            request_id: "r".into(),
            genotype: String::new(),
            feature_plan: vec![],
            dataset: "toy-cora".into(),
            seeds: vec![1],
            epochs_cap: 1,
        };
        assert!(matches!(pool.evaluate(&req), Err(EvalError::Spawn(_))));
        assert!(matches!(pool.evaluate(&req), Err(EvalError::Spawn(_))));
    }
}
