//! Corpus ingestion, the staged corpus-to-fuzzer pipeline and metrics
//! reports.
//!
//! Stages run in a fixed order and each owns one numbered directory under
//! the output directory:
//!
//! | stage    | directory     | main artifact                         |
//! |----------|---------------|---------------------------------------|
//! | ingest   | `01-ingest`   | `manifest.csv`                        |
//! | simplify | `02-simplify` | simplified copies of accepted models  |
//! | canon    | `03-canon`    | canonical models and `corpus.txt`     |
//! | train    | `04-train`    | `model.json`                          |
//! | sample   | `05-sample`   | `NNNNNN.txt` samples, `samples.csv`   |
//! | restore  | `06-restore`  | restored `NNNNNN.mdl`, `restore.csv`  |
//! | check    | `07-check`    | `outcomes.jsonl`, `report.csv`        |
//! | report   | `08-report`   | metrics CSVs and `summary.txt`        |
//!
//! A stage finishes by writing a `.done` stamp holding a fingerprint of
//! its settings. It is skipped when that fingerprint still matches and the
//! stamp is newer than every file it reads.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, SystemTime};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::canon::{canonicalize, restore};
use crate::graph::{build_graph, metrics, metrics_csv, MetricsRecord};
use crate::harness::{
    default_jobs, evaluate_sample, prepare_dirs, retriage, write_records, EvalContext, ValidatorCommand,
    OUTCOMES_FILE,
};
use crate::kv;
use crate::sampler::{generate, NGramModel, SamplerConfig};
use crate::simplify::{is_flat_no_deps, simplify, SimplifyPolicy};
use crate::syntax::{parse, parse_bytes, print, tokenize, ParseMode, SyntaxTree, TokenSeq};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const MODEL_FILE: &str = "model.json";
const STAMP_FILE: &str = ".done";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("directory not found: {}", .0.display())]
    DirectoryNotFound(PathBuf),
    #[error("stage {stage} failed at {}: {message}", artifact.display())]
    Stage {
        stage: Stage,
        artifact: PathBuf,
        message: String,
    },
}

impl PipelineError {
    /// 1 for configuration problems, 3 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::DirectoryNotFound(_) => 1,
            PipelineError::Stage { .. } => 3,
        }
    }
}

impl From<kv::KvError> for PipelineError {
    fn from(e: kv::KvError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// manifest

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    /// Parsed only after lenient repairs.
    Repaired,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatStatus {
    Flat,
    Nonflat,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplifyStatus {
    Ok,
    /// No block survived simplification.
    Empty,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryStatus {
    Accepted,
    RejectedUnparsable,
    RejectedNonflat,
    RejectedEmpty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the corpus directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub parse: ParseStatus,
    pub flatness: FlatStatus,
    pub simplify: SimplifyStatus,
    pub status: EntryStatus,
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn accepted(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.status == EntryStatus::Accepted)
    }

    pub fn count(&self, status: EntryStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.entries.is_empty() {
            w.write_record([
                "path",
                "sha256",
                "parse",
                "flatness",
                "simplify",
                "status",
                "tokens_before",
                "tokens_after",
                "note",
            ])
            .expect("in-memory write");
        }
        for e in &self.entries {
            w.serialize(e).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
    }

    pub fn from_csv(text: &str) -> Result<Self, csv::Error> {
        let entries = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()?;
        Ok(CorpusManifest { entries })
    }

    /// Token totals over accepted entries, before and after simplification.
    pub fn token_totals(&self) -> (usize, usize) {
        self.accepted()
            .fold((0, 0), |(b, a), e| (b + e.tokens_before, a + e.tokens_after))
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn mdl_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("mdl"))
        })
        .collect();
    files.sort();
    files
}

/// Inspects one corpus file.
pub fn ingest_file(root: &Path, path: &Path, policy: &SimplifyPolicy) -> ManifestEntry {
    let mut entry = ManifestEntry {
        path: relative(root, path),
        sha256: String::new(),
        parse: ParseStatus::Failed,
        flatness: FlatStatus::Unknown,
        simplify: SimplifyStatus::Skipped,
        status: EntryStatus::RejectedUnparsable,
        tokens_before: 0,
        tokens_after: 0,
        note: String::new(),
    };
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            entry.note = e.to_string();
            return entry;
        }
    };
    entry.sha256 = digest(&bytes);
    entry.tokens_before = tokenize(&String::from_utf8_lossy(&bytes)).len();
    let parsed = match parse_bytes(&bytes, ParseMode::Lenient) {
        Ok(p) => p,
        Err(e) => {
            entry.note = e.to_string();
            return entry;
        }
    };
    entry.parse = if parsed.diagnostics.is_empty() {
        ParseStatus::Ok
    } else {
        entry.note = format!("{} lenient repairs", parsed.diagnostics.len());
        ParseStatus::Repaired
    };
    let flat = is_flat_no_deps(&parsed.tree);
    if !flat.flat {
        entry.flatness = FlatStatus::Nonflat;
        entry.status = EntryStatus::RejectedNonflat;
        entry.note = flat.reasons.join("; ");
        return entry;
    }
    entry.flatness = FlatStatus::Flat;
    let simplified = simplify(&parsed.tree, policy);
    entry.tokens_after = tokenize(&print(&simplified.tree)).len();
    if simplified.empty_after_simplify {
        entry.simplify = SimplifyStatus::Empty;
        entry.status = EntryStatus::RejectedEmpty;
    } else {
        entry.simplify = SimplifyStatus::Ok;
        entry.status = EntryStatus::Accepted;
    }
    entry
}

/// Recursively inspects every `.mdl` file under `dir`; a bad file only
/// marks its own entry.
pub fn ingest(dir: &Path, policy: &SimplifyPolicy) -> Result<CorpusManifest, PipelineError> {
    if !dir.is_dir() {
        return Err(PipelineError::DirectoryNotFound(dir.to_path_buf()));
    }
    let entries = mdl_files(dir)
        .par_iter()
        .map(|p| ingest_file(dir, p, policy))
        .collect();
    Ok(CorpusManifest { entries })
}

/// One metrics row per model, header first. Models whose path search runs
/// out of budget are left out and named in the second return value.
pub fn report_metrics(models: &[(String, SyntaxTree)]) -> (String, Vec<String>) {
    let rows: Vec<(String, Result<MetricsRecord, String>)> = models
        .par_iter()
        .map(|(name, tree)| {
            let r = build_graph(tree, ParseMode::Lenient)
                .and_then(|g| metrics(&g))
                .map_err(|e| e.to_string());
            (name.clone(), r)
        })
        .collect();
    let mut skipped = Vec::new();
    let ok: Vec<(&str, MetricsRecord)> = rows
        .iter()
        .filter_map(|(n, r)| match r {
            Ok(m) => Some((n.as_str(), *m)),
            Err(e) => {
                skipped.push(format!("{n}: {e}"));
                None
            }
        })
        .collect();
    (metrics_csv(ok), skipped)
}

/// Parses every `.mdl` file under `dir` for [`report_metrics`]; names are
/// relative paths.
pub fn load_models(dir: &Path) -> Vec<(String, SyntaxTree)> {
    mdl_files(dir)
        .into_iter()
        .filter_map(|p| {
            let text = fs::read_to_string(&p).ok()?;
            let tree = parse(&text, ParseMode::Lenient).ok()?;
            Some((relative(dir, &p), tree))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    pub policy_path: Option<PathBuf>,
    pub ngram_order: usize,
    pub sampler: SamplerConfig,
    pub samples: u64,
    pub validator_cmd: Option<String>,
    pub timeout: Duration,
    pub jobs: usize,
    pub budget_count: Option<u64>,
    pub budget_seconds: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_dir: PathBuf::from("corpus/synthetic"),
            output_dir: PathBuf::from("out"),
            policy_path: None,
            ngram_order: 5,
            sampler: SamplerConfig::default(),
            samples: 100,
            validator_cmd: None,
            timeout: Duration::from_secs(60),
            jobs: default_jobs(),
            budget_count: None,
            budget_seconds: None,
        }
    }
}

/// Keys accepted in a pipeline configuration file.
pub const CONFIG_KEYS: &[&str] = &[
    "corpus_dir",
    "output_dir",
    "policy",
    "ngram_order",
    "seed_text",
    "temperature",
    "nucleus",
    "max_tokens",
    "samples",
    "rng_seed",
    "eot_token",
    "validator_cmd",
    "timeout",
    "jobs",
    "budget_count",
    "budget_seconds",
];

impl PipelineConfig {
    /// Reads `key = value` lines over the defaults; relative paths are
    /// resolved against `base`.
    pub fn from_kv_str(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg = PipelineConfig::default();
        let path = |v: &str| base.join(v);
        for e in kv::parse(text)? {
            match e.key.as_str() {
                "corpus_dir" => cfg.corpus_dir = path(&e.value),
                "output_dir" => cfg.output_dir = path(&e.value),
                "policy" => cfg.policy_path = Some(path(&e.value)),
                "ngram_order" => cfg.ngram_order = e.parsed()?,
                "seed_text" => cfg.sampler.seed_text = e.value.clone(),
                "temperature" => cfg.sampler.temperature = e.parsed()?,
                "nucleus" => cfg.sampler.nucleus = e.parsed()?,
                "max_tokens" => cfg.sampler.max_tokens = e.parsed()?,
                "samples" => cfg.samples = e.parsed()?,
                "rng_seed" => cfg.sampler.rng_seed = e.parsed()?,
                "eot_token" => cfg.sampler.eot_token = e.value.clone(),
                "validator_cmd" => cfg.validator_cmd = Some(e.value.clone()).filter(|v| !v.is_empty()),
                "timeout" => cfg.timeout = Duration::from_secs_f64(e.parsed::<f64>()?.max(0.0)),
                "jobs" => cfg.jobs = e.parsed()?,
                "budget_count" => cfg.budget_count = Some(e.parsed()?),
                "budget_seconds" => cfg.budget_seconds = Some(e.parsed()?),
                _ => return Err(e.unknown_key().into()),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_kv_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks value ranges and that every referenced path exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !self.corpus_dir.is_dir() {
            return Err(PipelineError::DirectoryNotFound(self.corpus_dir.clone()));
        }
        if let Some(p) = &self.policy_path {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("policy file {} not found", p.display())));
            }
        }
        if self.ngram_order == 0 {
            return Err(PipelineError::Config("ngram_order must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        if let Some(v) = &self.validator_cmd {
            ValidatorCommand::parse(v).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        self.sampler.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn policy(&self) -> Result<SimplifyPolicy, PipelineError> {
        match &self.policy_path {
            None => Ok(SimplifyPolicy::default()),
            Some(p) => Ok(SimplifyPolicy::from_config_file(p)?),
        }
    }

    fn fingerprint(&self, stage: Stage) -> String {
        let s = &self.sampler;
        let policy = self
            .policy_path
            .as_ref()
            .map(|p| fs::read_to_string(p).unwrap_or_default())
            .unwrap_or_default();
        let detail = match stage {
            Stage::Ingest | Stage::Simplify => format!("{}|{policy}", self.corpus_dir.display()),
            Stage::Canon | Stage::Restore | Stage::Report => String::new(),
            Stage::Train => format!("{}|{}", self.ngram_order, s.eot_token),
            Stage::Sample => format!(
                "{}|{}|{}|{}|{}|{}|{}",
                s.seed_text, s.temperature, s.nucleus, s.max_tokens, s.rng_seed, s.eot_token, self.samples
            ),
            Stage::Check => format!(
                "{}|{}",
                self.validator_cmd.as_deref().unwrap_or(""),
                self.timeout.as_secs_f64()
            ),
        };
        format!("{} {stage} {detail}\n", env!("CARGO_PKG_VERSION"))
    }
}

// ---------------------------------------------------------------------------
// stages

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Simplify,
    Canon,
    Train,
    Sample,
    Restore,
    Check,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Simplify,
        Stage::Canon,
        Stage::Train,
        Stage::Sample,
        Stage::Restore,
        Stage::Check,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Simplify => "simplify",
            Stage::Canon => "canon",
            Stage::Train => "train",
            Stage::Sample => "sample",
            Stage::Restore => "restore",
            Stage::Check => "check",
            Stage::Report => "report",
        }
    }

    pub fn dir_name(self) -> String {
        format!("{:02}-{}", self as usize + 1, self.name())
    }

    fn inputs(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Simplify => &[Stage::Ingest],
            Stage::Canon => &[Stage::Simplify],
            Stage::Train => &[Stage::Canon],
            Stage::Sample => &[Stage::Train],
            Stage::Restore | Stage::Check => &[Stage::Sample],
            Stage::Report => &[Stage::Canon, Stage::Check],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s || (s == "fuzz" && *st == Stage::Check))
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineReport {
    pub stages: Vec<StageOutcome>,
}

fn newest_mtime(path: &Path) -> Option<SystemTime> {
    WalkDir::new(path)
        .into_iter()
        .filter_map(Result::ok)
        .filter_map(|e| e.metadata().ok()?.modified().ok())
        .max()
}

fn up_to_date(stage_dir: &Path, inputs: &[PathBuf], fingerprint: &str) -> bool {
    let stamp = stage_dir.join(STAMP_FILE);
    let Ok(content) = fs::read_to_string(&stamp) else {
        return false;
    };
    if content != fingerprint {
        return false;
    }
    let Some(stamped) = fs::metadata(&stamp).and_then(|m| m.modified()).ok() else {
        return false;
    };
    inputs
        .iter()
        .all(|p| p.exists() && newest_mtime(p).is_none_or(|t| t < stamped))
}

struct StageRun<'a> {
    cfg: &'a PipelineConfig,
    stage: Stage,
    dir: PathBuf,
}

impl StageRun<'_> {
    fn fail(&self, artifact: &Path, message: impl fmt::Display) -> PipelineError {
        PipelineError::Stage {
            stage: self.stage,
            artifact: artifact.to_path_buf(),
            message: message.to_string(),
        }
    }

    fn input(&self, stage: Stage) -> PathBuf {
        self.cfg.output_dir.join(stage.dir_name())
    }

    fn write(&self, path: &Path, text: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| self.fail(parent, e))?;
        }
        fs::write(path, text).map_err(|e| self.fail(path, e))
    }

    fn read(&self, path: &Path) -> Result<String, PipelineError> {
        fs::read_to_string(path).map_err(|e| self.fail(path, e))
    }

    fn sample_files(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let dir = self.input(Stage::Sample);
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| self.fail(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        Ok(files)
    }
}

/// Runs `stages` in pipeline order (duplicates ignored).
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let mut wanted = stages.to_vec();
    wanted.sort();
    wanted.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    pool.install(|| {
        let mut report = PipelineReport::default();
        for stage in wanted {
            let run = StageRun {
                cfg,
                stage,
                dir: cfg.output_dir.join(stage.dir_name()),
            };
            let mut inputs: Vec<PathBuf> = stage.inputs().iter().map(|s| run.input(*s)).collect();
            if stage == Stage::Ingest {
                inputs.push(cfg.corpus_dir.clone());
            }
            if let Some(p) = cfg.policy_path.as_ref().filter(|_| stage <= Stage::Simplify) {
                inputs.push(p.clone());
            }
            for p in &inputs {
                if !p.exists() {
                    return Err(run.fail(p, "input missing; run the earlier stage first"));
                }
            }
            let fingerprint = cfg.fingerprint(stage);
            if up_to_date(&run.dir, &inputs, &fingerprint) {
                report.stages.push(StageOutcome {
                    stage,
                    skipped: true,
                    detail: "up to date".into(),
                });
                continue;
            }
            if run.dir.exists() {
                fs::remove_dir_all(&run.dir).map_err(|e| run.fail(&run.dir, e))?;
            }
            fs::create_dir_all(&run.dir).map_err(|e| run.fail(&run.dir, e))?;
            let detail = match stage {
                Stage::Ingest => stage_ingest(&run)?,
                Stage::Simplify => stage_simplify(&run)?,
                Stage::Canon => stage_canon(&run)?,
                Stage::Train => stage_train(&run)?,
                Stage::Sample => stage_sample(&run)?,
                Stage::Restore => stage_restore(&run)?,
                Stage::Check => stage_check(&run)?,
                Stage::Report => stage_report(&run)?,
            };
            run.write(&run.dir.join(STAMP_FILE), &fingerprint)?;
            report.stages.push(StageOutcome {
                stage,
                skipped: false,
                detail,
            });
        }
        Ok(report)
    })
}

fn stage_ingest(run: &StageRun) -> Result<String, PipelineError> {
    let policy = run.cfg.policy()?;
    let manifest = ingest(&run.cfg.corpus_dir, &policy)?;
    run.write(&run.dir.join(MANIFEST_FILE), manifest.to_csv())?;
    let (before, after) = manifest.token_totals();
    let mut detail = format!(
        "{} files, {} accepted, {} non-flat, {} unparsable, {} empty",
        manifest.entries.len(),
        manifest.count(EntryStatus::Accepted),
        manifest.count(EntryStatus::RejectedNonflat),
        manifest.count(EntryStatus::RejectedUnparsable),
        manifest.count(EntryStatus::RejectedEmpty),
    );
    if before > 0 {
        detail += &format!(
            "; tokens {before} -> {after} ({:.1}% fewer)",
            100.0 * (1.0 - after as f64 / before as f64)
        );
    }
    if manifest.entries.is_empty() {
        detail += "; warning: no .mdl files found";
    }
    Ok(detail)
}

fn stage_simplify(run: &StageRun) -> Result<String, PipelineError> {
    let policy = run.cfg.policy()?;
    let manifest_path = run.input(Stage::Ingest).join(MANIFEST_FILE);
    let manifest = CorpusManifest::from_csv(&run.read(&manifest_path)?).map_err(|e| run.fail(&manifest_path, e))?;
    let accepted: Vec<&ManifestEntry> = manifest.accepted().collect();
    accepted.par_iter().try_for_each(|entry| {
        let src = run.cfg.corpus_dir.join(&entry.path);
        let bytes = fs::read(&src).map_err(|e| run.fail(&src, e))?;
        let parsed = parse_bytes(&bytes, ParseMode::Lenient).map_err(|e| run.fail(&src, e))?;
        let out = simplify(&parsed.tree, &policy);
        run.write(&run.dir.join(&entry.path), print(&out.tree))
    })?;
    Ok(format!("{} models simplified", accepted.len()))
}

fn stage_canon(run: &StageRun) -> Result<String, PipelineError> {
    let src_dir = run.input(Stage::Simplify);
    let files = mdl_files(&src_dir);
    let docs: Vec<Result<String, String>> = files
        .par_iter()
        .map(|p| -> Result<Result<String, String>, PipelineError> {
            let text = run.read(p)?;
            let rel = relative(&src_dir, p);
            let canonical = parse(&text, ParseMode::Lenient)
                .map_err(|e| e.to_string())
                .and_then(|t| canonicalize(&t, ParseMode::Lenient, true).map_err(|e| e.to_string()));
            match canonical {
                Ok(c) => {
                    run.write(&run.dir.join(&rel), &c.text)?;
                    Ok(Ok(tokenize(&c.text).join()))
                }
                Err(e) => Ok(Err(format!("{rel}: {e}"))),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut corpus = String::new();
    let mut skipped = Vec::new();
    for d in docs {
        match d {
            Ok(line) => {
                corpus.push_str(&line);
                corpus.push('\n');
            }
            Err(e) => skipped.push(e),
        }
    }
    run.write(&run.dir.join(CORPUS_FILE), &corpus)?;
    run.write(&run.dir.join("skipped.txt"), skipped.join("\n"))?;
    Ok(format!(
        "{} canonical documents, {} skipped",
        files.len() - skipped.len(),
        skipped.len()
    ))
}

/// One training document per non-empty line.
pub fn read_corpus(text: &str) -> Vec<TokenSeq> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| TokenSeq(l.split_whitespace().map(str::to_string).collect()))
        .collect()
}

fn stage_train(run: &StageRun) -> Result<String, PipelineError> {
    let corpus_path = run.input(Stage::Canon).join(CORPUS_FILE);
    let docs = read_corpus(&run.read(&corpus_path)?);
    let model = NGramModel::train(&docs, run.cfg.ngram_order, &run.cfg.sampler.eot_token)
        .map_err(|e| run.fail(&corpus_path, e))?;
    run.write(&run.dir.join(MODEL_FILE), model.to_json())?;
    Ok(format!(
        "order {} over {} documents, vocabulary {}",
        model.order(),
        docs.len(),
        model.vocab().len()
    ))
}

fn stage_sample(run: &StageRun) -> Result<String, PipelineError> {
    let model_path = run.input(Stage::Train).join(MODEL_FILE);
    let model = NGramModel::from_json(&run.read(&model_path)?).map_err(|e| run.fail(&model_path, e))?;
    let rows: Vec<String> = (0..run.cfg.samples)
        .into_par_iter()
        .map(|i| {
            let cfg = SamplerConfig {
                rng_seed: run.cfg.sampler.rng_seed.wrapping_add(i),
                ..run.cfg.sampler.clone()
            };
            let out = run.dir.join(format!("{i:06}.txt"));
            let g = generate(&model, &cfg).map_err(|e| run.fail(&out, e))?;
            run.write(&out, &g.text)?;
            Ok(format!("{i:06}.txt,{},{}", g.completed, g.tokens_emitted))
        })
        .collect::<Result<_, PipelineError>>()?;
    let complete = rows.iter().filter(|r| r.contains(",true,")).count();
    run.write(
        &run.dir.join("samples.csv"),
        format!("file,completed,tokens\n{}\n", rows.join("\n")),
    )?;
    Ok(format!("{} samples, {complete} reached end-of-text", rows.len()))
}

fn stage_restore(run: &StageRun) -> Result<String, PipelineError> {
    let files = run.sample_files()?;
    let rows: Vec<(String, bool)> = files
        .par_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            match restore(&run.read(p)?) {
                Ok(tree) => {
                    run.write(&run.dir.join(format!("{stem}.mdl")), print(&tree))?;
                    Ok((stem, true))
                }
                Err(_) => Ok((stem, false)),
            }
        })
        .collect::<Result<_, PipelineError>>()?;
    let restored = rows.iter().filter(|r| r.1).count();
    let mut csv = String::from("sample,status\n");
    for (s, ok) in &rows {
        csv += &format!("{s},{}\n", if *ok { "restored" } else { "unparsable" });
    }
    run.write(&run.dir.join("restore.csv"), csv)?;
    Ok(format!("{restored} of {} samples restored", rows.len()))
}

fn stage_check(run: &StageRun) -> Result<String, PipelineError> {
    let files = run.sample_files()?;
    let validator = run
        .cfg
        .validator_cmd
        .as_deref()
        .map(ValidatorCommand::parse)
        .transpose()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    prepare_dirs(&run.dir).map_err(|e| run.fail(&run.dir, e))?;
    let ctx = EvalContext {
        out_dir: &run.dir,
        validator: validator.as_ref(),
        timeout: run.cfg.timeout,
    };
    let complete = sample_completion(&run.input(Stage::Sample));
    let records = files
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let text = run.read(p)?;
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let truncated = complete.iter().any(|(f, c)| *f == name && !c);
            evaluate_sample(i as u64, &text, truncated, &ctx).map_err(|e| run.fail(p, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let log = run.dir.join(OUTCOMES_FILE);
    write_records(&log, &records).map_err(|e| run.fail(&log, e))?;
    let report = retriage(&run.dir).map_err(|e| run.fail(&log, e))?;
    report.write_files(&run.dir).map_err(|e| run.fail(&run.dir, e))?;
    Ok(format!(
        "{} of {} samples static-valid ({:.1}%), {} parsed",
        report.static_valid,
        report.generated,
        100.0 * report.static_valid_rate(),
        report.parse_ok
    ))
}

fn sample_completion(sample_dir: &Path) -> Vec<(String, bool)> {
    fs::read_to_string(sample_dir.join("samples.csv"))
        .unwrap_or_default()
        .lines()
        .skip(1)
        .filter_map(|l| {
            let mut f = l.split(',');
            Some((f.next()?.to_string(), f.next()? == "true"))
        })
        .collect()
}

fn stage_report(run: &StageRun) -> Result<String, PipelineError> {
    let (corpus_csv, mut skipped) = report_metrics(&load_models(&run.input(Stage::Canon)));
    run.write(&run.dir.join("corpus_metrics.csv"), corpus_csv)?;
    let check_dir = run.input(Stage::Check);
    let (sample_csv, more) = report_metrics(&load_models(&check_dir.join("models")));
    skipped.extend(more);
    run.write(&run.dir.join("sample_metrics.csv"), sample_csv)?;
    let report = retriage(&check_dir).map_err(|e| run.fail(&check_dir, e))?;
    report.write_files(&run.dir).map_err(|e| run.fail(&run.dir, e))?;
    if !skipped.is_empty() {
        run.write(&run.dir.join("metrics_skipped.txt"), skipped.join("\n"))?;
    }
    Ok(report.summary().lines().take(3).collect::<Vec<_>>().join("; "))
}
