//! Client side of the script sidecar: a pool of child processes speaking
//! line-delimited JSON over stdin/stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tabqa_core::{ColumnOrigin, ExecutionContext, ExecutionOutcome, FailureKind, Table, TableName};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl WireTable {
    /// Columns travel under their normalized names, the identifiers code
    /// sees in the prompt.
    pub fn from_table(table: &Table) -> WireTable {
        WireTable {
            name: table.name().to_string(),
            columns: table
                .columns()
                .iter()
                .map(|c| c.normalized_name().to_string())
                .collect(),
            rows: table.raw_rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRequest {
    pub id: String,
    pub tables: Vec<WireTable>,
    pub code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarResponse {
    pub id: String,
    pub status: Status,
    pub table: Option<WireTable>,
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SidecarError {
    #[error("sidecar command is empty or cannot be parsed")]
    BadCommand,
    #[error("cannot start sidecar: {0}")]
    Spawn(std::io::Error),
    #[error("sidecar closed its pipes")]
    Closed,
    #[error("sidecar did not answer within {0:?}")]
    Timeout(Duration),
    #[error("sidecar protocol violation: {0}")]
    Protocol(String),
    #[error("sidecar health check failed: {0}")]
    Unhealthy(String),
}

impl SidecarError {
    fn into_outcome(self) -> ExecutionOutcome {
        let kind = match self {
            SidecarError::Timeout(_) => FailureKind::Timeout,
            _ => FailureKind::SidecarUnavailable,
        };
        ExecutionOutcome::failure(kind, self.to_string())
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Process {
    fn spawn(argv: &[String]) -> Result<Process, SidecarError> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(SidecarError::Spawn)?;
        let stdin = child.stdin.take().ok_or(SidecarError::Closed)?;
        let stdout = child.stdout.take().ok_or(SidecarError::Closed)?;
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Process { child, stdin, lines })
    }

    fn call(&mut self, request: &SidecarRequest, timeout: Duration) -> Result<SidecarResponse, SidecarError> {
        let mut line = serde_json::to_string(request).map_err(|e| SidecarError::Protocol(e.to_string()))?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|_| SidecarError::Closed)?;
        let reply = match self.lines.recv_timeout(timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => return Err(SidecarError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(SidecarError::Closed),
        };
        let response: SidecarResponse =
            serde_json::from_str(&reply).map_err(|e| SidecarError::Protocol(format!("{e}: {reply}")))?;
        if response.id != request.id {
            return Err(SidecarError::Protocol(format!(
                "response id {} does not match request {}",
                response.id, request.id
            )));
        }
        Ok(response)
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Launches sidecars on demand, health-checks each new one with a no-op
/// request, and reuses idle processes. A process that times out or breaks
/// the protocol is killed rather than returned to the pool.
pub struct SidecarPool {
    argv: Vec<String>,
    timeout: Duration,
    idle: Mutex<Vec<Process>>,
    next_id: AtomicU64,
}

impl SidecarPool {
    pub fn new(command: &str, timeout: Duration) -> Result<SidecarPool, SidecarError> {
        let argv = shlex::split(command)
            .filter(|a| !a.is_empty())
            .ok_or(SidecarError::BadCommand)?;
        Ok(SidecarPool {
            argv,
            timeout,
            idle: Mutex::new(Vec::new()),
            next_id: AtomicU64::new(0),
        })
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn request_id(&self) -> String {
        format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    fn acquire(&self) -> Result<Process, SidecarError> {
        if let Some(p) = self.idle.lock().expect("sidecar pool poisoned").pop() {
            return Ok(p);
        }
        let mut p = Process::spawn(&self.argv)?;
        let probe = SidecarRequest {
            id: self.request_id(),
            tables: vec![WireTable {
                name: "T0".into(),
                columns: vec!["Col".into()],
                rows: vec![vec!["1".into()]],
            }],
            code: "pass".into(),
        };
        match p.call(&probe, self.timeout)? {
            SidecarResponse { status: Status::Ok, .. } => Ok(p),
            SidecarResponse { error, .. } => Err(SidecarError::Unhealthy(error.unwrap_or_default())),
        }
    }

    /// Starts one process eagerly so that launch problems surface early.
    pub fn warm_up(&self) -> Result<(), SidecarError> {
        let p = self.acquire()?;
        self.idle.lock().expect("sidecar pool poisoned").push(p);
        Ok(())
    }

    pub fn call(&self, tables: Vec<WireTable>, code: &str) -> Result<SidecarResponse, SidecarError> {
        let mut process = self.acquire()?;
        let request = SidecarRequest {
            id: self.request_id(),
            tables,
            code: code.to_string(),
        };
        let response = process.call(&request, self.timeout)?;
        self.idle.lock().expect("sidecar pool poisoned").push(process);
        Ok(response)
    }

    pub fn execute(&self, code: &str, ctx: &ExecutionContext) -> ExecutionOutcome {
        let tables = ctx.tables().iter().map(WireTable::from_table).collect();
        match self.call(tables, code) {
            Ok(response) => response_outcome(response, ctx.next_table_name()),
            Err(e) => e.into_outcome(),
        }
    }
}

fn response_outcome(response: SidecarResponse, name: TableName) -> ExecutionOutcome {
    match (response.status, response.table) {
        (Status::Ok, Some(t)) => match Table::from_raw(name, t.columns, ColumnOrigin::Script, t.rows) {
            Ok(table) => ExecutionOutcome::Success(table),
            Err(e) => ExecutionOutcome::failure(
                FailureKind::ScriptError,
                format!("sidecar returned a malformed table: {e}"),
            ),
        },
        (Status::Ok, None) => ExecutionOutcome::failure(FailureKind::ScriptError, "sidecar returned no table"),
        (Status::Error, _) => ExecutionOutcome::failure(
            FailureKind::ScriptError,
            response
                .error
                .filter(|e| !e.is_empty())
                .unwrap_or_else(|| "script failed".into()),
        ),
    }
}
