//! Runs the static rules over a few hand-made samples and prints what each
//! one trips.
//!
//! cargo run --example static_check [-- <sample>...]

use mdlfuzz::harness::check_text;

const SAMPLES: &[&str] = &[
    "Model { System { Block { BlockType Sin Name \"a\" Ports [0, 1] } \
     Line { SrcBlock \"a\" SrcPort 1 DstBlock \"b\" DstPort 1 } Block { BlockType Scope Name \"b\" Ports [1] } } }",
    "Model { System { Line { SrcBlock \"a\" SrcPort 1 DstBlock \"ghost\" DstPort 1 } \
     Block { BlockType Sin Name \"a\" } } }",
    "Model { System { Block { BlockType Gain Name \"a\" } Block { BlockType Gain Name \"a\" } } }",
    "Model { System { Block { BlockType Sin Name \"a\" } }",
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let samples: Vec<&str> = if args.is_empty() {
        SAMPLES.to_vec()
    } else {
        args.iter().map(String::as_str).collect()
    };
    for (i, text) in samples.iter().enumerate() {
        let checked = check_text(text);
        println!("[{i}] parsed {} static-valid {}", checked.parsed(), checked.static_valid());
        if let Some(e) = &checked.parse_error {
            println!("    {e}");
        }
        for f in &checked.findings {
            println!("    {f}");
        }
    }
}
