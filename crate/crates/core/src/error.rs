//! Error type shared by all modules.

use core::fmt;

/// Validation and computation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid axis with fewer than two nodes.
    AxisTooSmall { axis: usize, len: usize },
    /// Grid with no axes, or more than three.
    BadDimension { dims: usize },
    /// Non-positive grid spacing.
    BadSpacing(f64),
    /// Terminal node index outside the grid.
    TerminalOutOfRange { index: usize, nodes: usize },
    /// Repeated node index within a terminal list.
    DuplicateTerminal { index: usize },
    /// Plan entry referencing a missing source or sink.
    PairOutOfRange { source: usize, sink: usize },
    /// Repeated (source, sink) key in a plan.
    DuplicatePair { source: usize, sink: usize },
    /// Plan entry with non-positive mass.
    BadMass { source: usize, sink: usize, mass: f64 },
    /// Plan mass does not sum to one.
    PlanMassNotUnit { total: f64 },
    /// Empty plan.
    EmptyPlan,
    /// Negative weight entry.
    NegativeWeight { node: usize, value: f64 },
    /// Weights do not sum to one.
    WeightsNotUnit { total: f64 },
    /// Weight vector length differs from the grid size.
    WeightsLengthMismatch { expected: usize, got: usize },
    /// Concentration exponent outside `[0, 1)`.
    SigmaOutOfRange(f64),
    /// Transport exponent outside `(1, ∞)`, or a non-positive `α`.
    ExponentOutOfRange(f64),
    /// Vertex index outside a tree.
    VertexOutOfRange { index: usize, vertices: usize },
    /// Edge list that is not a spanning tree of the vertex set.
    NotATree { vertices: usize, edges: usize, components: usize },
    /// Geometrically degenerate edge.
    ZeroLengthEdge { edge: usize },
    /// Plan pair whose terminal has no vertex in the tree.
    MissingTerminalVertex { source: usize, sink: usize },
    /// Budget violating the unit construction constraint.
    BudgetExceeded { total: f64 },
    /// Per-edge data with the wrong length.
    EdgeLengthMismatch { expected: usize, got: usize },
    /// All edge flows vanish, so no budget allocation exists.
    AllFlowsZero,
    /// Empty orbit family passed to the parallel composition rule.
    EmptyOrbitFamily,
    /// Orbit integral that must be positive.
    BadOrbitIntegral(f64),
    /// Threshold outside `(0, 1]`.
    TauOutOfRange(f64),
    /// Invalid annealing schedule.
    BadSchedule(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::AxisTooSmall { axis, len } => {
                write!(f, "grid axis {axis} has {len} nodes, need at least 2")
            }
            Error::BadDimension { dims } => {
                write!(f, "grid must have 1 to 3 axes, got {dims}")
            }
            Error::BadSpacing(s) => write!(f, "grid spacing must be positive, got {s}"),
            Error::TerminalOutOfRange { index, nodes } => {
                write!(f, "terminal node {index} outside grid of {nodes} nodes")
            }
            Error::DuplicateTerminal { index } => {
                write!(f, "node {index} repeated within a terminal list")
            }
            Error::PairOutOfRange { source, sink } => {
                write!(f, "plan pair ({source}, {sink}) references a missing terminal")
            }
            Error::DuplicatePair { source, sink } => {
                write!(f, "plan pair ({source}, {sink}) appears more than once")
            }
            Error::BadMass { source, sink, mass } => {
                write!(f, "plan pair ({source}, {sink}) has non-positive mass {mass}")
            }
            Error::PlanMassNotUnit { total } => {
                write!(f, "plan mass sums to {total}, expected 1")
            }
            Error::EmptyPlan => write!(f, "plan has no entries"),
            Error::NegativeWeight { node, value } => {
                write!(f, "weight at node {node} is negative ({value})")
            }
            Error::WeightsNotUnit { total } => {
                write!(f, "weights sum to {total}, expected 1")
            }
            Error::WeightsLengthMismatch { expected, got } => {
                write!(f, "weight vector has {got} entries, grid has {expected} nodes")
            }
            Error::SigmaOutOfRange(s) => {
                write!(f, "concentration exponent must lie in [0, 1), got {s}")
            }
            Error::ExponentOutOfRange(p) => {
                write!(f, "exponent out of range: {p}")
            }
            Error::VertexOutOfRange { index, vertices } => {
                write!(f, "vertex {index} outside tree of {vertices} vertices")
            }
            Error::NotATree { vertices, edges, components } => {
                write!(
                    f,
                    "edge set is not a spanning tree: {vertices} vertices, {edges} edges, \
                     {components} components"
                )
            }
            Error::ZeroLengthEdge { edge } => write!(f, "edge {edge} has zero length"),
            Error::MissingTerminalVertex { source, sink } => {
                write!(f, "pair ({source}, {sink}) has a terminal missing from the tree")
            }
            Error::BudgetExceeded { total } => {
                write!(f, "construction budget {total} exceeds the unit constraint")
            }
            Error::EdgeLengthMismatch { expected, got } => {
                write!(f, "per-edge data has {got} entries, tree has {expected} edges")
            }
            Error::AllFlowsZero => write!(f, "every edge flow is zero"),
            Error::EmptyOrbitFamily => write!(f, "parallel composition needs at least one orbit"),
            Error::BadOrbitIntegral(v) => {
                write!(f, "orbit integral must be positive, got {v}")
            }
            Error::TauOutOfRange(t) => {
                write!(f, "support threshold must lie in (0, 1], got {t}")
            }
            Error::BadSchedule(msg) => write!(f, "invalid annealing schedule: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
