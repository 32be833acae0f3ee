//! Takes an interleaved token stream, as a sampler produces it, and moves
//! every block ahead of the lines so the file can be loaded.
//!
//! cargo run --example restore_sample [-- <sample.txt>]

use mdlfuzz::canon::{blocks_precede_lines, restore};
use mdlfuzz::syntax::print;

const SAMPLE: &str = "Model { System { Block { BlockType Sin Name \"a\" } \
Line { SrcBlock \"a\" SrcPort 1 DstBlock \"b\" DstPort 1 } Block { BlockType Gain Name \"b\" } \
Line { SrcBlock \"b\" SrcPort 1 DstBlock \"c\" DstPort 1 } Block { BlockType Scope Name \"c\" } } }";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(p)?,
        None => SAMPLE.to_string(),
    };
    let tree = restore(&text)?;
    assert!(blocks_precede_lines(&tree));
    print!("{}", print(&tree));
    Ok(())
}
