//! Configuration ingestion, run orchestration, result persistence, and
//! static rendering for the gilbert solver.
//!
//! All files are JSON with a versioned `schema` field, except the CSV node
//! dump and the SVG renderings. Runs are deterministic: the same
//! configuration and seed produce byte-identical result payloads, regardless
//! of the worker count.

pub mod config;
pub mod exec;
pub mod formats;
pub mod render;
pub mod run;

/// Exit status conventions: 0 success, 1 input error, 2 convergence warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ConvergenceWarning,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::ConvergenceWarning => 2,
        }
    }
}
