//! Experiment configuration, Monte Carlo runner and result summaries.

mod config;
mod experiment;
mod summary;

pub use config::{ArchSpec, NetworkConfig};
pub use experiment::{fmt_g, run_experiment, run_region, run_to_writer, ResultRow, RESULT_COLUMNS};
pub use summary::{summarize, summarize_reader, SummaryRow, SUMMARY_COLUMNS};
