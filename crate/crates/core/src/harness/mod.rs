//! Static checks, external validation and crash triage for generated
//! models, plus the campaign loop that ties them to a sampler.

mod campaign;
mod check;
mod triage;
mod validator;

pub use campaign::{
    default_jobs, evaluate_sample, fuzz_campaign, prepare_dirs, write_records, EvalContext, read_records, retriage, CampaignConfig, CampaignError, CampaignReport,
    OutcomeRecord, RecordKind, TriageError, BUCKETS_FILE, OUTCOMES_FILE, REPORT_FILE, SUMMARY_FILE,
};
pub use check::{check_text, has_errors, static_check, CheckedSample, Finding, Severity, RULE_CATALOG};
pub use triage::{crash_signature, normalize_diagnostic, signature_of, CrashBucket, NotACrash, Triage};
pub use validator::{
    diagnostic_excerpt, run_validator, ExitDetail, OutcomeKind, ValidationOutcome, ValidatorCommand,
    ValidatorError, MODEL_PLACEHOLDER,
};
