//! A short campaign from an n-gram model against a shell stub that crashes
//! on some inputs, then the report and its crash buckets.
//!
//! cargo run --example fuzz_campaign [-- <out-dir>]

use std::path::PathBuf;
use std::time::Duration;

use mdlfuzz::canon::canonicalize;
use mdlfuzz::harness::{fuzz_campaign, CampaignConfig};
use mdlfuzz::pipeline::load_models;
use mdlfuzz::sampler::{NGramModel, SamplerConfig, DEFAULT_EOT};
use mdlfuzz::simplify::{simplify, SimplifyPolicy};
use mdlfuzz::syntax::{tokenize, ParseMode};

const VALIDATOR: &str = "sh -c 'if grep -q Display \"$0\"; then \
echo \"Assertion failed: display buffer in $0\" >&2; kill -ABRT $$; \
elif grep -q Constant \"$0\"; then echo \"Error: unsupported block\" >&2; exit 1; fi' {model}";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mdlfuzz-campaign"));

    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/synthetic");
    let docs = load_models(&corpus)
        .iter()
        .map(|(_, t)| {
            let s = simplify(t, &SimplifyPolicy::default()).tree;
            canonicalize(&s, ParseMode::Lenient, true).map(|c| tokenize(&c.text))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let model = NGramModel::train(&docs, 5, DEFAULT_EOT)?;

    let mut cfg = CampaignConfig::new(&out, SamplerConfig::default());
    cfg.budget_count = Some(300);
    cfg.timeout = Duration::from_secs(5);
    if cfg!(unix) {
        cfg.validator = Some(VALIDATOR.into());
    }
    let report = fuzz_campaign(&model, &cfg)?;
    print!("{}", report.summary());
    assert!(report.is_conserved());
    println!("artifacts in {}", out.display());
    Ok(())
}
