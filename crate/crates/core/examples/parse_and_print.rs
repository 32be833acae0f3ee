//! Parses a model, prints it back in normal form and shows its tokens.
//!
//! cargo run --example parse_and_print [-- <file.mdl>]

use std::path::PathBuf;

use mdlfuzz::syntax::{parse, parse_with_diagnostics, print, tokenize, ParseMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/fixtures/handwritten.mdl"));
    let text = std::fs::read_to_string(&path)?;

    let tree = parse(&text, ParseMode::Strict)?;
    let normal = print(&tree);
    print!("{normal}");
    assert_eq!(parse(&normal, ParseMode::Strict)?, tree);

    let tokens = tokenize(&normal);
    println!("-- {} tokens; first 12: {:?}", tokens.len(), &tokens.0[..12.min(tokens.len())]);

    // lenient mode repairs what it can and says what it did
    let broken = "Model {\n  Name \"unterminated\n}\n";
    let repaired = parse_with_diagnostics(broken, ParseMode::Lenient)?;
    for d in &repaired.diagnostics {
        println!("repaired: {d}");
    }
    println!("strict says: {}", parse(broken, ParseMode::Strict).unwrap_err());
    // unbalanced braces are fatal in both modes
    println!("truncated: {}", parse("Model { System {", ParseMode::Lenient).unwrap_err());
    Ok(())
}
