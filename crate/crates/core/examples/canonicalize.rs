//! Rewrites a model into breadth-first block/line order with canonical
//! block names, then restores the result to a loadable layout.
//!
//! cargo run --example canonicalize [-- <file.mdl>]

use std::path::PathBuf;

use mdlfuzz::canon::{canonicalize, restore};
use mdlfuzz::simplify::{simplify, SimplifyPolicy};
use mdlfuzz::syntax::{parse, print, tokenize, ParseMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/synthetic/synth_003.mdl"));
    let tree = parse(&std::fs::read_to_string(&path)?, ParseMode::Strict)?;
    let simplified = simplify(&tree, &SimplifyPolicy::default()).tree;

    let canonical = canonicalize(&simplified, ParseMode::Strict, true)?;
    println!("{}", canonical.text);
    for (original, short) in canonical.renames.pairs() {
        println!("  {original} -> {short}");
    }
    println!("-- {} tokens in the training form", tokenize(&canonical.text).len());

    print!("{}", print(&restore(&canonical.text)?));
    Ok(())
}
