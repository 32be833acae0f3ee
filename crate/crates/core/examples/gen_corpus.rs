//! Regenerates the bundled corpus under `corpus/`.
//!
//! cargo run --example gen_corpus [-- <dir>]

use std::fs;
use std::path::PathBuf;

use mdlfuzz::synth::{export_fixture, hierarchical_fixture, write_corpus, CORPUS_SEED, CORPUS_SIZE};

fn main() -> std::io::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus"));
    write_corpus(&root.join("synthetic"), CORPUS_SEED, CORPUS_SIZE)?;
    let fixtures = root.join("fixtures");
    fs::create_dir_all(&fixtures)?;
    fs::write(fixtures.join("export_style.mdl"), export_fixture())?;
    fs::write(fixtures.join("hierarchical.mdl"), hierarchical_fixture())?;
    println!("wrote {CORPUS_SIZE} models and 2 fixtures under {}", root.display());
    Ok(())
}
