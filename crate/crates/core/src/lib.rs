//! Solver toolkit for mailing-style branched transport networks.
//!
//! Given finitely many sources and sinks with a prescribed pairing of mass
//! (a *mailing plan*), the branched-transport cost `Σ_e w(e)^σ |e|` with
//! `σ ∈ [0,1)` rewards flow concentration and makes the network design
//! problem combinatorial and non-convex. This crate implements a convex
//! route to it:
//!
//! * [`trees`] — the exact combinatorial side: embedded trees, edge flows,
//!   the concentration cost `G`, the budgeted transport cost `H`, the
//!   closed-form optimal budget, and the identity `H = G^{1+α}`.
//! * [`wasserstein`] — the conditional transport cost of a source/sink pair
//!   relative to a background measure, in closed form on weighted paths and
//!   as a discrete concave dual over grid potentials.
//! * [`solver`] — minimization of the convex relaxed functional on the
//!   probability simplex via entropic regularization: a softmax recovers the
//!   weights in closed form and a single concave dual over potentials is
//!   maximized with ε-annealing.
//! * [`extract`] — reads the network back off the solved weights: threshold
//!   support graph, pruning, cycle/tree analysis, and cost evaluation.
//! * [`oracle`] — independent brute-force references (mirror descent on the
//!   simplex, exhaustive branch-point search, finite differences, projected
//!   descent on budgets) used to cross-check everything above.
//!
//! The crate is `no_std`-compatible (`alloc` required); enable the `libm`
//! feature instead of `std` on bare-metal targets. All solver entry points
//! are deterministic for a fixed seed.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("enable either the `std` or the `libm` feature");

extern crate alloc;

pub mod error;
pub mod extract;
pub mod grid;
mod linsolve;
mod math;
pub mod oracle;
pub mod solver;
pub mod trees;
pub mod wasserstein;

pub use error::Error;
pub use grid::{GridSpec, MailingPlan, NodeIndex, SimplexWeights, TerminalSet};
pub use solver::{AnnealSchedule, SolveDiagnostics, SolveOutput, SolverOptions};
pub use trees::{CostBudget, EdgeFlow, EmbeddedTree};
pub use wasserstein::PExponent;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
