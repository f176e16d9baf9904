//! Benchmark driver for the robust distributed estimation toolkit:
//! synthetic designs, Monte-Carlo experiments, CSV ingestion/emission and
//! the pre-baked suite grids behind the `rose-bench` binary.

pub mod config;
pub mod emit;
pub mod experiment;
pub mod ingest;
pub mod suites;
pub mod synth;
