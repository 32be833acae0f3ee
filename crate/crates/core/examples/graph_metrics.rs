//! Builds the block graph of each model and prints its metrics as CSV.
//!
//! cargo run --example graph_metrics [-- <file.mdl>...]

use std::path::PathBuf;

use mdlfuzz::graph::{build_graph, connected_components, metrics, metrics_csv};
use mdlfuzz::syntax::{parse, ParseMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        paths = (0..5).map(|i| corpus.join(format!("synthetic/synth_{i:03}.mdl"))).collect();
    }

    let mut rows = Vec::new();
    for p in &paths {
        let tree = parse(&std::fs::read_to_string(p)?, ParseMode::Strict)?;
        let g = build_graph(&tree, ParseMode::Lenient)?;
        for f in g.findings() {
            eprintln!("{}: {f:?}", p.display());
        }
        let components = connected_components(&g);
        eprintln!("{}: components {components:?}", p.display());
        rows.push((p.file_name().unwrap().to_string_lossy().into_owned(), metrics(&g)?));
    }
    print!("{}", metrics_csv(rows.iter().map(|(n, m)| (n.as_str(), *m))));
    Ok(())
}
