//! Client for an external language-model process speaking line-delimited
//! JSON on its standard input and output.
//!
//! Request:  `{"id": 7, "context": "Model {", "top_k": 1000}`
//! Response: `{"id": 7, "tokens": ["System", ...], "probs": [0.93, ...]}`
//!
//! A response may instead carry `"error": "<msg>"`. Any mismatch (wrong
//! id, unequal arrays, more than `top_k` entries, probabilities not summing
//! to one within 1e-6) is reported as a backend failure.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, TokenDistribution};

/// Allowed deviation of a response's probability sum from one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub id: u64,
    pub context: String,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    pub id: u64,
    #[serde(default)]
    pub tokens: Vec<String>,
    #[serde(default)]
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BridgeResponse {
    /// Checks the response against the request it answers.
    pub fn into_distribution(self, request: &BridgeRequest) -> Result<TokenDistribution, BackendError> {
        let fail = |m: String| Err(BackendError(m));
        if self.id != request.id {
            return fail(format!("response id {} does not echo request id {}", self.id, request.id));
        }
        if let Some(e) = self.error {
            return fail(format!("bridge reported: {e}"));
        }
        if self.tokens.len() != self.probs.len() {
            return fail(format!(
                "{} tokens but {} probabilities",
                self.tokens.len(),
                self.probs.len()
            ));
        }
        if self.tokens.len() > request.top_k {
            return fail(format!("{} entries exceed top_k {}", self.tokens.len(), request.top_k));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return fail(format!("probabilities sum to {sum}"));
        }
        TokenDistribution::from_weights(self.tokens.into_iter().zip(self.probs))
            .map_err(|e| BackendError(e.to_string()))
    }
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

/// A spawned bridge process. Requests over one connection are serialized.
pub struct BridgeBackend {
    conn: Mutex<Connection>,
    top_k: usize,
}

impl BridgeBackend {
    pub const DEFAULT_TOP_K: usize = 1000;

    /// Spawns `program args...` with piped stdio; stderr is inherited.
    pub fn spawn(program: &str, args: &[String], top_k: usize) -> std::io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(BridgeBackend {
            conn: Mutex::new(Connection {
                child,
                stdin,
                stdout,
                next_id: 0,
            }),
            top_k,
        })
    }

    /// Spawns from a single shell-style command line.
    pub fn spawn_command_line(command: &str, top_k: usize) -> std::io::Result<Self> {
        let words = shlex::split(command)
            .filter(|w| !w.is_empty())
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "unparsable bridge command"))?;
        Self::spawn(&words[0], &words[1..], top_k)
    }

    fn query(&self, context: &str) -> Result<TokenDistribution, BackendError> {
        let mut conn = self.conn.lock().map_err(|_| BackendError("bridge connection poisoned".into()))?;
        let request = BridgeRequest {
            id: conn.next_id,
            context: context.to_string(),
            top_k: self.top_k,
        };
        conn.next_id += 1;
        let mut line = serde_json::to_string(&request).expect("serializable");
        line.push('\n');
        let io = |e: std::io::Error| BackendError(format!("bridge i/o: {e}"));
        conn.stdin.write_all(line.as_bytes()).map_err(io)?;
        conn.stdin.flush().map_err(io)?;
        let mut reply = String::new();
        if conn.stdout.read_line(&mut reply).map_err(io)? == 0 {
            return Err(BackendError("bridge closed its output".into()));
        }
        let response: BridgeResponse = serde_json::from_str(reply.trim_end())
            .map_err(|e| BackendError(format!("malformed bridge response: {e}")))?;
        response.into_distribution(&request)
    }
}

impl Backend for BridgeBackend {
    fn next_distribution(&self, context: &str) -> Result<TokenDistribution, BackendError> {
        self.query(context)
    }
}

impl Drop for BridgeBackend {
    fn drop(&mut self) {
        if let Ok(conn) = self.conn.get_mut() {
            // closing stdin is the shutdown signal; reap the child if it
            // does not exit on its own
            let _ = conn.stdin.flush();
            let _ = conn.child.kill();
            let _ = conn.child.wait();
        }
    }
}
