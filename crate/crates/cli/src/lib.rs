//! Batch harness around the `proxflow` library: TOML-configured problems, a
//! built-in corpus, artifact output and invariant-check exit gating.

pub mod config;
pub mod corpus;
pub mod runner;

pub use config::{HarnessError, RunConfig};
pub use corpus::{corpus, CORPUS_TOML};
pub use runner::{run, Overrides, RunOutcome};
