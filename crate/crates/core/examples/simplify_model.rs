//! Strips layout and default parameters from the export-style fixture and
//! reports how many tokens that saves.
//!
//! cargo run --example simplify_model [-- <file.mdl> [policy.conf]]

use std::path::PathBuf;

use mdlfuzz::simplify::{is_flat_no_deps, simplify, SimplifyPolicy};
use mdlfuzz::syntax::{parse, print, tokenize, ParseMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/fixtures/export_style.mdl"));
    let policy = match args.next() {
        Some(p) => SimplifyPolicy::from_config_file(p.as_ref())?,
        None => SimplifyPolicy::default(),
    };

    let text = std::fs::read_to_string(&path)?;
    let tree = parse(&text, ParseMode::Strict)?;
    println!("flatness: {:?}", is_flat_no_deps(&tree));

    let out = simplify(&tree, &policy);
    let simplified = print(&out.tree);
    print!("{simplified}");

    let before = tokenize(&text).len();
    let after = tokenize(&simplified).len();
    println!(
        "-- removed {} params, {} sections, {} comments; {before} -> {after} tokens ({:.1}% fewer)",
        out.removed_params,
        out.removed_sections,
        out.removed_comments,
        100.0 * (1.0 - after as f64 / before as f64)
    );
    Ok(())
}
