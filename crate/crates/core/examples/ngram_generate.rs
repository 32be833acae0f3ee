//! Trains an n-gram model on the canonical synthetic corpus and draws a few
//! samples from it.
//!
//! cargo run --example ngram_generate [-- <order> <count>]

use std::path::PathBuf;

use mdlfuzz::canon::canonicalize;
use mdlfuzz::pipeline::load_models;
use mdlfuzz::sampler::{generate, NGramModel, SamplerConfig, DEFAULT_EOT};
use mdlfuzz::simplify::{simplify, SimplifyPolicy};
use mdlfuzz::syntax::{tokenize, ParseMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let order: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(5);
    let count: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(3);

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/synthetic");
    let policy = SimplifyPolicy::default();
    let docs = load_models(&dir)
        .iter()
        .map(|(_, t)| canonicalize(&simplify(t, &policy).tree, ParseMode::Lenient, true).map(|c| tokenize(&c.text)))
        .collect::<Result<Vec<_>, _>>()?;
    let model = NGramModel::train(&docs, order, DEFAULT_EOT)?;
    println!("trained order {order} on {} documents, vocabulary {}", docs.len(), model.vocab().len());

    for seed in 0..count {
        let cfg = SamplerConfig {
            rng_seed: seed,
            ..SamplerConfig::default()
        };
        let out = generate(&model, &cfg)?;
        println!("\n[{seed}] {} tokens, completed {}\n{}", out.tokens_emitted, out.completed, out.text);
    }
    Ok(())
}
