//! Evaluation harness for programming-language confusion in code-generating
//! language models.
//!
//! The pipeline per sample: extract code from a model response, identify its
//! language with a detector ensemble, parse it with the detected language's
//! grammar, then classify it as confused or not. Metrics, migration matrices
//! and report tables are computed over the classified samples.

pub mod corpus;
pub mod detect;
pub mod extract;
pub mod infer;
pub mod metrics;
pub mod migrate;
pub mod parse;
pub mod pipeline;
pub mod report;
