//! Check-mining, LLM-guided API fuzzing toolkit.
//!
//! The pipeline mines input-check macros from a native library's source
//! tree, turns each check into a context-free, type-keyed edge case via a
//! pluggable completion backend, synthesizes a valid test program per target
//! API with a bounded generate-and-debug loop, and then mutates those
//! programs against every matching edge case, classifying crashes, runtime
//! error patterns, and device-inconsistent outputs.
//!
//! Stages communicate exclusively through file artifacts (JSON / JSON
//! Lines), so each one can be run and re-run in isolation; see the `mine`,
//! `analyze`, `standardize`, `gen`, and `fuzz` subcommands.

pub mod analyzer;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod llm;
pub mod miner;
pub mod mutator;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
