//! The `mdlfuzz` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (an input that does not parse or is malformed), 3 stage failure.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::canon::{canonicalize, restore};
use crate::harness::{fuzz_campaign, retriage, CampaignConfig, CampaignError};
use crate::pipeline::{
    ingest, load_models, read_corpus, report_metrics, run_pipeline, EntryStatus, PipelineConfig, PipelineError,
    Stage,
};
use crate::sampler::{generate, Backend, BridgeBackend, NGramModel, SamplerConfig, SamplerError};
use crate::simplify::{simplify, SimplifyPolicy};
use crate::syntax::{parse, print, tokenize, ParseMode, SyntaxTree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_STAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mdlfuzz", version, about = "Corpus-to-fuzzer toolchain for MDL model files")]
pub struct Cli {
    /// `key = value` configuration file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base RNG seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a corpus directory and print its manifest as CSV
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Strip layout and default parameters from a model
    Simplify {
        file: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rewrite a flat model into canonical block/line order
    Canon {
        file: PathBuf,
        /// Keep original block names
        #[arg(long)]
        no_rename: bool,
        /// Simplify before canonicalizing
        #[arg(long)]
        simplify: bool,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Turn a sampled token stream back into a model file
    Restore {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Graph metrics CSV for model files or directories
    Metrics {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train an n-gram model on a corpus file (one document per line) or a
    /// directory of models
    TrainNgram {
        corpus: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate samples into a directory
    Sample {
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(short = 'n', long, default_value_t = 1)]
        count: u64,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Run a fuzzing campaign
    Fuzz {
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        budget_count: Option<u64>,
        #[arg(long)]
        budget_seconds: Option<f64>,
        /// Validator command template containing `{model}`
        #[arg(long)]
        validator_cmd: Option<String>,
        /// Per-model validator timeout in seconds
        #[arg(long)]
        timeout: Option<f64>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Rebuild the report of a campaign directory from its outcome log
    Report { dir: PathBuf },
    /// Run pipeline stages from the configuration file
    Run {
        /// Comma-separated stage names; all stages when omitted
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
    },
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long = "keep-param", value_name = "KEY")]
    keep: Vec<String>,
    #[arg(long = "drop-param", value_name = "KEY")]
    drop: Vec<String>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct BackendArgs {
    /// Trained n-gram model (JSON)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Command line of a bridge server speaking the JSON-lines protocol
    #[arg(long)]
    bridge: Option<String>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    nucleus: Option<f64>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    seed_text: Option<String>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

fn data(e: impl fmt::Display) -> CliError {
    CliError {
        code: EXIT_DATA,
        message: e.to_string(),
    }
}

fn stage(e: impl fmt::Display) -> CliError {
    CliError {
        code: EXIT_STAGE,
        message: e.to_string(),
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), CliError>;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> CliResult {
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| stage(format!("{}: {e}", dir.display())))?;
            }
            fs::write(p, text).map_err(|e| stage(format!("{}: {e}", p.display())))
        }
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| stage(format!("stdout: {e}"))),
    }
}

fn parse_file(path: &Path) -> Result<SyntaxTree, CliError> {
    parse(&read(path)?, ParseMode::Lenient).map_err(|e| data(format!("{}: {e}", path.display())))
}

struct Context {
    cfg: PipelineConfig,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self, CliError> {
        let mut cfg = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(usage("--jobs must be at least 1"));
            }
            cfg.jobs = j;
        }
        if let Some(s) = cli.seed {
            cfg.sampler.rng_seed = s;
        }
        Ok(Context { cfg })
    }

    fn policy(&self, args: &PolicyArgs) -> Result<SimplifyPolicy, CliError> {
        let mut policy = match &args.policy {
            Some(p) => SimplifyPolicy::from_config_file(p).map_err(usage)?,
            None => self.cfg.policy().map_err(CliError::from)?,
        };
        for k in &args.keep {
            policy.keep_param(k);
        }
        for k in &args.drop {
            policy.drop_param(k);
        }
        Ok(policy)
    }

    fn sampler(&self, args: &SamplingArgs) -> Result<SamplerConfig, CliError> {
        let mut s = self.cfg.sampler.clone();
        if let Some(t) = args.temperature {
            s.temperature = t;
        }
        if let Some(n) = args.nucleus {
            s.nucleus = n;
        }
        if let Some(m) = args.max_tokens {
            s.max_tokens = m;
        }
        if let Some(t) = &args.seed_text {
            s.seed_text = t.clone();
        }
        s.validate().map_err(usage)?;
        Ok(s)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.jobs)
            .build()
            .map_err(usage)
    }
}

enum LoadedBackend {
    NGram(NGramModel),
    Bridge(BridgeBackend),
}

impl LoadedBackend {
    fn open(args: &BackendArgs) -> Result<Self, CliError> {
        match (&args.model, &args.bridge) {
            (Some(p), _) => NGramModel::from_json(&read(p)?)
                .map(LoadedBackend::NGram)
                .map_err(|e| data(format!("{}: {e}", p.display()))),
            (None, Some(cmd)) => BridgeBackend::spawn_command_line(cmd, BridgeBackend::DEFAULT_TOP_K)
                .map(LoadedBackend::Bridge)
                .map_err(|e| usage(format!("cannot start bridge `{cmd}`: {e}"))),
            (None, None) => Err(usage("one of --model or --bridge is required")),
        }
    }

    fn get(&self) -> &(dyn Backend + Sync) {
        match self {
            LoadedBackend::NGram(m) => m,
            LoadedBackend::Bridge(b) => b,
        }
    }
}

fn sampler_error(e: SamplerError) -> CliError {
    match e {
        SamplerError::InvalidConfig(_) => usage(e),
        _ => stage(e),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mdlfuzz: {e}");
            e.code
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult {
    let ctx = Context::load(cli)?;
    match &cli.command {
        Command::Ingest { dir, policy, output } => {
            let policy = match policy {
                Some(p) => SimplifyPolicy::from_config_file(p).map_err(usage)?,
                None => ctx.cfg.policy()?,
            };
            let manifest = ctx.pool()?.install(|| ingest(dir, &policy))?;
            if manifest.entries.is_empty() {
                eprintln!("warning: no .mdl files under {}", dir.display());
            }
            eprintln!(
                "{} files, {} accepted",
                manifest.entries.len(),
                manifest.count(EntryStatus::Accepted)
            );
            emit(output.as_deref(), &manifest.to_csv())
        }
        Command::Simplify { file, policy, output } => {
            let policy = ctx.policy(policy)?;
            let out = simplify(&parse_file(file)?, &policy);
            if out.empty_after_simplify {
                eprintln!("warning: no blocks left after simplification");
            }
            emit(output.as_deref(), &print(&out.tree))
        }
        Command::Canon {
            file,
            no_rename,
            simplify: simp,
            policy,
            output,
        } => {
            let mut tree = parse_file(file)?;
            if *simp {
                tree = simplify(&tree, &ctx.policy(policy)?).tree;
            }
            let c = canonicalize(&tree, ParseMode::Lenient, !no_rename)
                .map_err(|e| data(format!("{}: {e}", file.display())))?;
            emit(output.as_deref(), &c.text)
        }
        Command::Restore { file, output } => {
            let tree = restore(&read(file)?).map_err(|e| data(format!("{}: {e}", file.display())))?;
            emit(output.as_deref(), &print(&tree))
        }
        Command::Metrics { paths, output } => {
            let mut models = Vec::new();
            for p in paths {
                if p.is_dir() {
                    models.extend(load_models(p));
                } else {
                    models.push((p.display().to_string(), parse_file(p)?));
                }
            }
            let (csv, skipped) = ctx.pool()?.install(|| report_metrics(&models));
            for s in skipped {
                eprintln!("warning: skipped {s}");
            }
            emit(output.as_deref(), &csv)
        }
        Command::TrainNgram { corpus, order, output } => {
            let docs = if corpus.is_dir() {
                let models = load_models(corpus);
                let docs: Result<Vec<_>, _> = models
                    .par_iter()
                    .map(|(name, tree)| {
                        canonicalize(tree, ParseMode::Lenient, true)
                            .map(|c| tokenize(&c.text))
                            .map_err(|e| data(format!("{name}: {e}")))
                    })
                    .collect();
                docs?
            } else {
                read_corpus(&read(corpus)?)
            };
            let order = order.unwrap_or(ctx.cfg.ngram_order);
            let model = NGramModel::train(&docs, order, &ctx.cfg.sampler.eot_token).map_err(data)?;
            eprintln!(
                "order {order} over {} documents, vocabulary {}",
                docs.len(),
                model.vocab().len()
            );
            emit(Some(output), &model.to_json())
        }
        Command::Sample {
            backend,
            count,
            output,
            sampling,
        } => {
            let base = ctx.sampler(sampling)?;
            let backend = LoadedBackend::open(backend)?;
            fs::create_dir_all(output).map_err(|e| stage(format!("{}: {e}", output.display())))?;
            let one = |i: u64| -> CliResult {
                let cfg = SamplerConfig {
                    rng_seed: base.rng_seed.wrapping_add(i),
                    ..base.clone()
                };
                let g = generate(backend.get(), &cfg).map_err(sampler_error)?;
                emit(Some(&output.join(format!("{i:06}.txt"))), &g.text)
            };
            if backend.get().is_concurrent() {
                ctx.pool()?.install(|| (0..*count).into_par_iter().try_for_each(one))
            } else {
                (0..*count).try_for_each(one)
            }
        }
        Command::Fuzz {
            backend,
            output,
            budget_count,
            budget_seconds,
            validator_cmd,
            timeout,
            sampling,
        } => {
            let mut cfg = CampaignConfig::new(output, ctx.sampler(sampling)?);
            cfg.budget_count = budget_count.or(ctx.cfg.budget_count);
            cfg.budget_time = budget_seconds
                .or(ctx.cfg.budget_seconds)
                .map(|s| Duration::try_from_secs_f64(s).map_err(usage))
                .transpose()?;
            cfg.validator = validator_cmd.clone().or_else(|| ctx.cfg.validator_cmd.clone());
            cfg.timeout = match timeout {
                Some(t) => Duration::try_from_secs_f64(*t).map_err(usage)?,
                None => ctx.cfg.timeout,
            };
            cfg.jobs = ctx.cfg.jobs;
            let backend = LoadedBackend::open(backend)?;
            match fuzz_campaign(backend.get(), &cfg) {
                Ok(report) => {
                    print!("{}", report.summary());
                    Ok(())
                }
                Err(CampaignError::Aborted { reason, report }) => {
                    print!("{}", report.summary());
                    Err(stage(format!("campaign aborted: {reason}")))
                }
                Err(e @ (CampaignError::NoBudget | CampaignError::Validator(_))) => Err(usage(e)),
                Err(CampaignError::Sampler(e)) => Err(sampler_error(e)),
            }
        }
        Command::Report { dir } => {
            let report = retriage(dir).map_err(data)?;
            report
                .write_files(dir)
                .map_err(|e| stage(format!("{}: {e}", dir.display())))?;
            print!("{}", report.summary());
            Ok(())
        }
        Command::Run { stages } => {
            if cli.config.is_none() {
                return Err(usage("run needs --config"));
            }
            let stages = if stages.is_empty() { Stage::ALL.to_vec() } else { stages.clone() };
            let report = run_pipeline(&ctx.cfg, &stages)?;
            for s in report.stages {
                let state = if s.skipped { "skipped" } else { "done" };
                println!("{:<9} {state:<8} {}", s.stage.name(), s.detail);
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["mdlfuzz"]), EXIT_USAGE);
        assert_eq!(run(["mdlfuzz", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["mdlfuzz", "sample", "-o", "x"]), EXIT_USAGE);
        assert_eq!(run(["mdlfuzz", "run"]), EXIT_USAGE);
        assert_eq!(run(["mdlfuzz", "--help"]), EXIT_OK);
    }

    #[test]
    fn stage_list_parses() {
        let cli = Cli::try_parse_from(["mdlfuzz", "run", "--stages", "ingest,canon"]).unwrap();
        match cli.command {
            Command::Run { stages } => assert_eq!(stages, [Stage::Ingest, Stage::Canon]),
            _ => unreachable!(),
        }
        assert!(Cli::try_parse_from(["mdlfuzz", "run", "--stages", "nope"]).is_err());
    }
}
