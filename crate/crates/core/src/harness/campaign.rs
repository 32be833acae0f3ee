use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::check::{check_text, Severity};
use super::triage::{signature_of, CrashBucket, Triage};
use super::validator::{OutcomeKind, ValidatorCommand, ValidatorError};
use crate::graph::csv_field;
use crate::sampler::{generate, Backend, SamplerConfig, SamplerError};
use crate::syntax::print;

pub const OUTCOMES_FILE: &str = "outcomes.jsonl";
pub const REPORT_FILE: &str = "report.csv";
pub const BUCKETS_FILE: &str = "buckets.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// What happened to one generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Unparsable,
    StaticInvalid,
    /// Passed the static rules; no validator was configured.
    StaticValid,
    Valid,
    Rejected,
    Crash,
    Timeout,
}

impl RecordKind {
    pub fn validator_kind(self) -> Option<OutcomeKind> {
        match self {
            RecordKind::Valid => Some(OutcomeKind::Valid),
            RecordKind::Rejected => Some(OutcomeKind::Rejected),
            RecordKind::Crash => Some(OutcomeKind::Crash),
            RecordKind::Timeout => Some(OutcomeKind::Timeout),
            _ => None,
        }
    }
}

impl From<OutcomeKind> for RecordKind {
    fn from(k: OutcomeKind) -> Self {
        match k {
            OutcomeKind::Valid => RecordKind::Valid,
            OutcomeKind::Rejected => RecordKind::Rejected,
            OutcomeKind::Crash => RecordKind::Crash,
            OutcomeKind::Timeout => RecordKind::Timeout,
        }
    }
}

/// One line of `outcomes.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    /// Path relative to the campaign directory.
    pub model: String,
    pub kind: RecordKind,
    pub exit: Option<String>,
    pub diag: String,
    pub sig: Option<String>,
    pub ms: u64,
    /// Generation hit the token budget before the end-of-text token.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CampaignReport {
    pub generated: u64,
    pub parse_ok: u64,
    pub parse_failures: u64,
    pub static_valid: u64,
    pub static_failures: u64,
    pub validator_enabled: bool,
    pub validator_valid: u64,
    pub rejected: u64,
    pub crashes: u64,
    pub timeouts: u64,
    pub truncated: u64,
    pub buckets: Vec<CrashBucket>,
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("record {index}: stored signature {stored:?} does not match recomputed {computed:?}")]
    SignatureMismatch {
        index: usize,
        stored: Option<String>,
        computed: Option<String>,
    },
    #[error("{path}: line {line}: {message}")]
    BadRecord { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CampaignReport {
    /// Recomputes totals and crash buckets from outcome records, checking
    /// each stored signature along the way.
    pub fn from_records(records: &[OutcomeRecord]) -> Result<Self, TriageError> {
        let mut r = CampaignReport {
            validator_enabled: records.iter().any(|x| x.kind.validator_kind().is_some())
                && !records.iter().any(|x| x.kind == RecordKind::StaticValid),
            ..Default::default()
        };
        let mut triage = Triage::default();
        for (i, rec) in records.iter().enumerate() {
            r.generated += 1;
            r.truncated += u64::from(rec.truncated);
            match rec.kind {
                RecordKind::Unparsable => r.parse_failures += 1,
                RecordKind::StaticInvalid => r.static_failures += 1,
                _ => r.static_valid += 1,
            }
            match rec.kind {
                RecordKind::Valid => r.validator_valid += 1,
                RecordKind::Rejected => r.rejected += 1,
                RecordKind::Crash => r.crashes += 1,
                RecordKind::Timeout => r.timeouts += 1,
                _ => {}
            }
            let computed = rec
                .kind
                .validator_kind()
                .and_then(|k| signature_of(k, rec.exit.as_deref().unwrap_or(""), &rec.diag).ok());
            if computed != rec.sig {
                return Err(TriageError::SignatureMismatch {
                    index: i,
                    stored: rec.sig.clone(),
                    computed,
                });
            }
            if let (Some(sig), Some(kind)) = (&computed, rec.kind.validator_kind()) {
                triage.add(sig, kind, &rec.diag, &rec.model, i as u64);
            }
        }
        r.parse_ok = r.generated - r.parse_failures;
        r.buckets = triage.into_buckets();
        Ok(r)
    }

    pub fn validator_outcomes(&self) -> u64 {
        self.validator_valid + self.rejected + self.crashes + self.timeouts
    }

    /// generated = parse failures + static failures + (validator outcomes
    /// or static-valid samples).
    pub fn is_conserved(&self) -> bool {
        let tail = if self.validator_enabled {
            self.validator_outcomes()
        } else {
            self.static_valid
        };
        self.generated == self.parse_failures + self.static_failures + tail
    }

    pub fn static_valid_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.static_valid as f64 / self.generated as f64
        }
    }

    fn rows(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("generated", self.generated),
            ("parse_ok", self.parse_ok),
            ("parse_failures", self.parse_failures),
            ("static_valid", self.static_valid),
            ("static_failures", self.static_failures),
            ("validator_valid", self.validator_valid),
            ("rejected", self.rejected),
            ("crashes", self.crashes),
            ("timeouts", self.timeouts),
            ("truncated", self.truncated),
            ("crash_buckets", self.buckets.len() as u64),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.rows() {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn buckets_csv(&self) -> String {
        let mut s = String::from("signature,kind,members,first_seen,diagnostic,example\n");
        for b in &self.buckets {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                b.signature,
                b.kind,
                b.members.len(),
                b.first_seen,
                csv_field(&b.diagnostic),
                csv_field(&b.members[0])
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let pct = |n: u64| {
            if self.generated == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.generated as f64
            }
        };
        let _ = writeln!(s, "generated        {}", self.generated);
        let _ = writeln!(s, "parsed           {} ({:.1}%)", self.parse_ok, pct(self.parse_ok));
        let _ = writeln!(s, "static-valid     {} ({:.1}%)", self.static_valid, pct(self.static_valid));
        if self.validator_enabled {
            let _ = writeln!(s, "validator-valid  {}", self.validator_valid);
            let _ = writeln!(s, "rejected         {}", self.rejected);
            let _ = writeln!(s, "crashes          {}", self.crashes);
            let _ = writeln!(s, "timeouts         {}", self.timeouts);
        } else {
            let _ = writeln!(s, "validator        not configured");
        }
        if self.truncated > 0 {
            let _ = writeln!(s, "truncated        {}", self.truncated);
        }
        let _ = writeln!(s, "conservation     {}", if self.is_conserved() { "ok" } else { "VIOLATED" });
        for b in &self.buckets {
            let _ = writeln!(
                s,
                "bucket {} {} x{}: {}",
                b.signature,
                b.kind,
                b.members.len(),
                b.diagnostic
            );
        }
        s
    }

    /// Writes `report.csv`, `buckets.csv` and `summary.txt` into `dir`.
    pub fn write_files(&self, dir: &Path) -> io::Result<()> {
        fs::write(dir.join(REPORT_FILE), self.to_csv())?;
        fs::write(dir.join(BUCKETS_FILE), self.buckets_csv())?;
        fs::write(dir.join(SUMMARY_FILE), self.summary())
    }
}

pub fn read_records(path: &Path) -> Result<Vec<OutcomeRecord>, TriageError> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|source| TriageError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TriageError::Io {
            path: shown.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| TriageError::BadRecord {
            path: shown.clone(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Rebuilds the report of a finished campaign directory from its outcome log.
pub fn retriage(dir: &Path) -> Result<CampaignReport, TriageError> {
    CampaignReport::from_records(&read_records(&dir.join(OUTCOMES_FILE))?)
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub out_dir: PathBuf,
    pub sampler: SamplerConfig,
    pub budget_count: Option<u64>,
    pub budget_time: Option<Duration>,
    /// Command template with a `{model}` placeholder.
    pub validator: Option<String>,
    pub timeout: Duration,
    pub jobs: usize,
}

impl CampaignConfig {
    pub fn new(out_dir: impl Into<PathBuf>, sampler: SamplerConfig) -> Self {
        CampaignConfig {
            out_dir: out_dir.into(),
            sampler,
            budget_count: None,
            budget_time: None,
            validator: None,
            timeout: Duration::from_secs(60),
            jobs: default_jobs(),
        }
    }
}

pub fn default_jobs() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("campaign needs a sample count or time budget")]
    NoBudget,
    #[error(transparent)]
    Sampler(SamplerError),
    #[error(transparent)]
    Validator(ValidatorError),
    /// Work stopped early; `report` covers every sample persisted so far.
    #[error("campaign aborted after {} samples: {reason}", report.generated)]
    Aborted {
        reason: String,
        report: Box<CampaignReport>,
    },
}

struct Claims {
    next: u64,
    started: Instant,
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

/// Generates, restores, checks and (optionally) validates samples until a
/// budget runs out, persisting each model and one outcome record per
/// sample. Sample `i` is drawn with RNG seed `rng_seed + i`.
pub fn fuzz_campaign(
    backend: &(dyn Backend + Sync),
    cfg: &CampaignConfig,
) -> Result<CampaignReport, CampaignError> {
    if cfg.budget_count.is_none() && cfg.budget_time.is_none() {
        return Err(CampaignError::NoBudget);
    }
    cfg.sampler.validate().map_err(CampaignError::Sampler)?;
    let validator = cfg
        .validator
        .as_deref()
        .map(ValidatorCommand::parse)
        .transpose()
        .map_err(CampaignError::Validator)?;

    let aborted = |reason: String, records: &[OutcomeRecord]| CampaignError::Aborted {
        reason,
        report: Box::new(CampaignReport::from_records(records).unwrap_or_default()),
    };
    prepare_dirs(&cfg.out_dir).map_err(|e| aborted(io_at(&cfg.out_dir)(e), &[]))?;
    let log_path = cfg.out_dir.join(OUTCOMES_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| aborted(io_at(&log_path)(e), &[]))?);

    let claims = Mutex::new(Claims {
        next: 0,
        started: Instant::now(),
    });
    let claim = || -> Option<u64> {
        let mut c = claims.lock().unwrap();
        if cfg.budget_count.is_some_and(|n| c.next >= n) || cfg.budget_time.is_some_and(|t| c.started.elapsed() >= t) {
            return None;
        }
        c.next += 1;
        Some(c.next - 1)
    };
    let stop = AtomicBool::new(false);
    let serial = Mutex::new(());
    let (tx, rx) = mpsc::channel::<(u64, Result<OutcomeRecord, CampaignError>)>();

    let mut records = Vec::new();
    let mut failure = None;
    thread::scope(|scope| {
        for _ in 0..cfg.jobs.max(1) {
            let tx = tx.clone();
            let (claim, stop, serial, validator) = (&claim, &stop, &serial, &validator);
            scope.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let Some(i) = claim() else { break };
                    let r = run_one(i, backend, cfg, validator.as_ref(), serial);
                    if r.is_err() {
                        stop.store(true, Ordering::Relaxed);
                    }
                    if tx.send((i, r)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);

        // single writer: records land in index order
        let mut pending = BTreeMap::new();
        let mut next = 0u64;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&next) {
                next += 1;
                if failure.is_some() {
                    continue;
                }
                match r {
                    Ok(rec) => {
                        let line = serde_json::to_string(&rec).expect("serializable");
                        if let Err(e) = writeln!(log, "{line}") {
                            failure = Some(CampaignError::Aborted {
                                reason: io_at(&log_path)(e),
                                report: Box::default(),
                            });
                            stop.store(true, Ordering::Relaxed);
                            continue;
                        }
                        records.push(rec);
                    }
                    Err(e) => failure = Some(e),
                }
            }
        }
    });

    let flushed = log.flush().map_err(io_at(&log_path));
    let report = CampaignReport::from_records(&records).map_err(|e| aborted(e.to_string(), &records))?;
    let written = report.write_files(&cfg.out_dir).map_err(io_at(&cfg.out_dir));
    let failure = failure.or_else(|| {
        flushed
            .and(written)
            .err()
            .map(|reason| CampaignError::Aborted {
                reason,
                report: Box::default(),
            })
    });
    match failure {
        None => Ok(report),
        Some(CampaignError::Aborted { reason, .. }) => Err(CampaignError::Aborted {
            reason,
            report: Box::new(report),
        }),
        Some(CampaignError::Sampler(e)) => Err(CampaignError::Aborted {
            reason: e.to_string(),
            report: Box::new(report),
        }),
        Some(e) => Err(e),
    }
}

fn run_one(
    i: u64,
    backend: &(dyn Backend + Sync),
    cfg: &CampaignConfig,
    validator: Option<&ValidatorCommand>,
    serial: &Mutex<()>,
) -> Result<OutcomeRecord, CampaignError> {
    let start = Instant::now();
    let sampler = SamplerConfig {
        rng_seed: cfg.sampler.rng_seed.wrapping_add(i),
        ..cfg.sampler.clone()
    };
    let generated = if backend.is_concurrent() {
        generate(backend, &sampler)
    } else {
        let _guard = serial.lock().unwrap();
        generate(backend, &sampler)
    }
    .map_err(CampaignError::Sampler)?;
    let ctx = EvalContext {
        out_dir: &cfg.out_dir,
        validator,
        timeout: cfg.timeout,
    };
    let mut rec = evaluate_sample(i, &generated.text, !generated.completed, &ctx)?;
    rec.ms = start.elapsed().as_millis() as u64;
    Ok(rec)
}

/// Where and how [`evaluate_sample`] persists and validates.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub out_dir: &'a Path,
    pub validator: Option<&'a ValidatorCommand>,
    pub timeout: Duration,
}

/// Creates fresh `raw/` and `models/` directories under `out_dir`.
pub fn prepare_dirs(out_dir: &Path) -> io::Result<()> {
    for d in [out_dir.join("raw"), out_dir.join("models")] {
        if d.exists() {
            fs::remove_dir_all(&d)?;
        }
        fs::create_dir_all(&d)?;
    }
    Ok(())
}

/// Persists sample `i` as `raw/NNNNNN.txt`, restores and checks it, and for
/// static-valid samples writes `models/NNNNNN.mdl` and runs the validator.
pub fn evaluate_sample(
    i: u64,
    text: &str,
    truncated: bool,
    ctx: &EvalContext,
) -> Result<OutcomeRecord, CampaignError> {
    let start = Instant::now();
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e: io::Error| CampaignError::Aborted {
            reason: io_at(&p)(e),
            report: Box::default(),
        }
    };
    let raw_rel = format!("raw/{i:06}.txt");
    let raw_path = ctx.out_dir.join(&raw_rel);
    fs::write(&raw_path, text).map_err(io(&raw_path))?;

    let checked = check_text(text);
    let mut rec = OutcomeRecord {
        model: raw_rel,
        kind: RecordKind::Unparsable,
        exit: None,
        diag: String::new(),
        sig: None,
        ms: 0,
        truncated,
    };
    match &checked.tree {
        None => rec.diag = checked.parse_error.clone().unwrap_or_default(),
        Some(_) if !checked.static_valid() => {
            rec.kind = RecordKind::StaticInvalid;
            rec.diag = checked
                .findings
                .iter()
                .find(|f| f.severity == Severity::Error)
                .map(ToString::to_string)
                .unwrap_or_default();
        }
        Some(tree) => {
            rec.model = format!("models/{i:06}.mdl");
            let model_path = ctx.out_dir.join(&rec.model);
            fs::write(&model_path, print(tree)).map_err(io(&model_path))?;
            rec.kind = RecordKind::StaticValid;
            rec.diag = checked.findings.first().map(ToString::to_string).unwrap_or_default();
            if let Some(v) = ctx.validator {
                let outcome = v.run(&model_path, ctx.timeout).map_err(CampaignError::Validator)?;
                rec.kind = outcome.kind.into();
                rec.exit = Some(outcome.exit.to_string());
                rec.diag = outcome.excerpt;
                rec.sig = signature_of(outcome.kind, rec.exit.as_deref().unwrap_or(""), &rec.diag).ok();
            }
        }
    }
    rec.ms = start.elapsed().as_millis() as u64;
    Ok(rec)
}

/// Writes one JSON line per record.
pub fn write_records(path: &Path, records: &[OutcomeRecord]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).expect("serializable"))?;
    }
    w.flush()
}
