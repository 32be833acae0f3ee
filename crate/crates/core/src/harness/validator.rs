use std::fmt;
use std::io::Read;
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_PLACEHOLDER: &str = "{model}";

/// How long to keep reading stderr after the child is gone; a grandchild
/// may still hold the pipe open.
const STDERR_GRACE: Duration = Duration::from_millis(500);
const STDERR_LIMIT: usize = 64 * 1024;
const EXCERPT_LIMIT: usize = 400;
const EXCERPT_KEYWORDS: &[&str] = &[
    "error",
    "abort",
    "fatal",
    "exception",
    "segmentation",
    "assert",
    "panic",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Valid,
    Rejected,
    Crash,
    Timeout,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeKind::Valid => "valid",
            OutcomeKind::Rejected => "rejected",
            OutcomeKind::Crash => "crash",
            OutcomeKind::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExitDetail {
    Code(i32),
    Signal(i32),
    /// Killed by the harness at the deadline.
    Deadline,
    /// Ended without an exit code or a known signal.
    Abnormal,
}

impl fmt::Display for ExitDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExitDetail::Code(c) => write!(f, "code {c}"),
            ExitDetail::Signal(s) => write!(f, "signal {s}"),
            ExitDetail::Deadline => f.write_str("deadline"),
            ExitDetail::Abnormal => f.write_str("abnormal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationOutcome {
    pub kind: OutcomeKind,
    pub exit: ExitDetail,
    pub excerpt: String,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidatorError {
    #[error("validator template `{0}` has no {{model}} placeholder")]
    MissingPlaceholder(String),
    #[error("validator template `{0}` cannot be split into words")]
    UnparsableTemplate(String),
    #[error("validator command `{0}` not found")]
    CommandNotFound(String),
    #[error("cannot start validator `{program}`: {message}")]
    SpawnFailure { program: String, message: String },
}

/// A command template split into words, with `{model}` substituted per run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatorCommand {
    words: Vec<String>,
}

impl ValidatorCommand {
    pub fn parse(template: &str) -> Result<Self, ValidatorError> {
        let words = shlex::split(template)
            .filter(|w| !w.is_empty())
            .ok_or_else(|| ValidatorError::UnparsableTemplate(template.to_string()))?;
        if !words.iter().any(|w| w.contains(MODEL_PLACEHOLDER)) {
            return Err(ValidatorError::MissingPlaceholder(template.to_string()));
        }
        Ok(ValidatorCommand { words })
    }

    pub fn argv(&self, model: &Path) -> Vec<String> {
        let path = model.to_string_lossy();
        self.words
            .iter()
            .map(|w| w.replace(MODEL_PLACEHOLDER, &path))
            .collect()
    }

    /// Runs the validator on one model file and classifies how it ended.
    pub fn run(&self, model: &Path, timeout: Duration) -> Result<ValidationOutcome, ValidatorError> {
        let argv = self.argv(model);
        let program = argv[0].clone();
        let mut cmd = Command::new(&program);
        cmd.args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ValidatorError::CommandNotFound(program.clone()),
            _ => ValidatorError::SpawnFailure {
                program: program.clone(),
                message: e.to_string(),
            },
        })?;
        let stderr = read_stderr(&mut child);
        let deadline = start + timeout;
        let mut pause = Duration::from_millis(2);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= deadline => {
                    kill_tree(&mut child);
                    break None;
                }
                Ok(None) => {
                    thread::sleep(pause);
                    pause = (pause * 2).min(Duration::from_millis(50));
                }
                Err(e) => {
                    kill_tree(&mut child);
                    return Err(ValidatorError::SpawnFailure {
                        program,
                        message: e.to_string(),
                    });
                }
            }
        };
        let wall_time = start.elapsed();
        let text = stderr.recv_timeout(STDERR_GRACE).unwrap_or_default();
        let (kind, exit) = match status {
            None => (OutcomeKind::Timeout, ExitDetail::Deadline),
            Some(s) => classify(s),
        };
        Ok(ValidationOutcome {
            kind,
            exit,
            excerpt: diagnostic_excerpt(&text),
            wall_time,
        })
    }
}

/// Substitutes `model_path` into `command_template` and runs it with a
/// deadline.
pub fn run_validator(
    model_path: &Path,
    command_template: &str,
    timeout: Duration,
) -> Result<ValidationOutcome, ValidatorError> {
    ValidatorCommand::parse(command_template)?.run(model_path, timeout)
}

fn read_stderr(child: &mut Child) -> mpsc::Receiver<String> {
    let (tx, rx) = mpsc::channel();
    if let Some(pipe) = child.stderr.take() {
        thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = pipe.take(STDERR_LIMIT as u64).read_to_end(&mut buf);
            let _ = tx.send(String::from_utf8_lossy(&buf).into_owned());
        });
    }
    rx
}

#[cfg(unix)]
fn kill_tree(child: &mut Child) {
    // the child leads its own process group, so this reaches grandchildren
    if let Ok(pid) = i32::try_from(child.id()) {
        unsafe {
            libc::killpg(pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

#[cfg(not(unix))]
fn kill_tree(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

fn classify(status: ExitStatus) -> (OutcomeKind, ExitDetail) {
    if let Some(code) = status.code() {
        let kind = if code == 0 {
            OutcomeKind::Valid
        } else {
            OutcomeKind::Rejected
        };
        return (kind, ExitDetail::Code(code));
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(sig) = status.signal() {
            return (OutcomeKind::Crash, ExitDetail::Signal(sig));
        }
    }
    (OutcomeKind::Crash, ExitDetail::Abnormal)
}

/// First stderr line that looks like a diagnostic, else the first
/// non-empty line.
pub fn diagnostic_excerpt(stderr: &str) -> String {
    let lines = stderr.lines().map(str::trim).filter(|l| !l.is_empty());
    let line = lines
        .clone()
        .find(|l| {
            let lower = l.to_lowercase();
            EXCERPT_KEYWORDS.iter().any(|k| lower.contains(k))
        })
        .or_else(|| lines.clone().next())
        .unwrap_or("");
    line.chars().take(EXCERPT_LIMIT).collect()
}
