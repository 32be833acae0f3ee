//! Runs every pipeline stage from a configuration file, then runs it again
//! to show that finished stages are skipped.
//!
//! cargo run --release --example pipeline [-- <config>]

use std::path::PathBuf;

use mdlfuzz::pipeline::{run_pipeline, PipelineConfig, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/pipeline.conf"));
    let cfg = PipelineConfig::load(&path)?;
    cfg.validate()?;

    for pass in ["first", "second"] {
        println!("{pass} pass");
        for s in run_pipeline(&cfg, &Stage::ALL)?.stages {
            let state = if s.skipped { "skipped" } else { "ran" };
            println!("  {:<8} {state:<8} {}", s.stage.name(), s.detail);
        }
    }
    println!("report in {}", cfg.output_dir.join(Stage::Report.dir_name()).display());
    Ok(())
}
