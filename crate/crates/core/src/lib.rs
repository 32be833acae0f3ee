//! Corpus-to-fuzzer toolchain for MDL block-diagram model files.

pub mod canon;
pub mod graph;
pub mod kv;
pub mod sampler;
pub mod simplify;
pub mod syntax;
pub mod harness;
pub mod synth;
pub mod pipeline;
pub mod cli;
