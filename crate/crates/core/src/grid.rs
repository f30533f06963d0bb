//! Discrete geometry: the finite grid with its neighbor structure, terminal
//! sets, mailing plans, and points of the probability simplex over the nodes.
//!
//! All types here are immutable after construction and validated on entry;
//! the other modules consume them without re-checking.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Linear index of a grid node (row-major over the axes).
pub type NodeIndex = usize;

/// Absolute tolerance for unit-mass checks.
pub const MASS_TOL: f64 = 1e-12;

/// Axis-aligned finite grid in 1, 2 or 3 dimensions with nearest-neighbor
/// structure: interior nodes have `2d` neighbors, faces and corners fewer.
#[derive(Debug, Clone)]
pub struct GridSpec {
    dims: Vec<usize>,
    spacing: f64,
    /// CSR neighbor lists: node `z` has neighbors `targets[offsets[z]..offsets[z+1]]`.
    offsets: Vec<u32>,
    targets: Vec<u32>,
    /// Undirected edges as `(u, v)` with `u < v`.
    edges: Vec<(u32, u32)>,
}

impl GridSpec {
    /// Builds a grid with the given node counts per axis and physical spacing.
    pub fn new(dims: &[usize], spacing: f64) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::BadDimension { dims: dims.len() });
        }
        for (axis, &len) in dims.iter().enumerate() {
            if len < 2 {
                return Err(Error::AxisTooSmall { axis, len });
            }
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::BadSpacing(spacing));
        }

        let n: usize = dims.iter().product();
        let strides = strides_of(dims);

        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut edges = Vec::new();
        offsets.push(0u32);
        let mut multi = vec![0usize; dims.len()];
        for z in 0..n {
            unravel(z, dims, &strides, &mut multi);
            for axis in 0..dims.len() {
                if multi[axis] > 0 {
                    targets.push((z - strides[axis]) as u32);
                }
            }
            for axis in 0..dims.len() {
                if multi[axis] + 1 < dims[axis] {
                    let nb = z + strides[axis];
                    targets.push(nb as u32);
                    edges.push((z as u32, nb as u32));
                }
            }
            offsets.push(targets.len() as u32);
        }

        Ok(GridSpec { dims: dims.to_vec(), spacing, offsets, targets, edges })
    }

    /// Number of nodes `|Z|`.
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Node counts per axis.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Physical distance between adjacent nodes.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Neighbor list `N(z)`.
    pub fn neighbors(&self, z: NodeIndex) -> &[u32] {
        let lo = self.offsets[z] as usize;
        let hi = self.offsets[z + 1] as usize;
        &self.targets[lo..hi]
    }

    /// `|N(z)|`.
    pub fn degree(&self, z: NodeIndex) -> usize {
        (self.offsets[z + 1] - self.offsets[z]) as usize
    }

    /// All undirected neighbor pairs, each listed once with `u < v`.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Multi-index of a node along the axes.
    pub fn multi_index(&self, z: NodeIndex) -> Vec<usize> {
        let strides = strides_of(&self.dims);
        let mut multi = vec![0usize; self.dims.len()];
        unravel(z, &self.dims, &strides, &mut multi);
        multi
    }

    /// Linear index of a multi-index; `None` when out of range.
    pub fn node_at(&self, multi: &[usize]) -> Option<NodeIndex> {
        if multi.len() != self.dims.len() {
            return None;
        }
        let strides = strides_of(&self.dims);
        let mut z = 0usize;
        for axis in 0..multi.len() {
            if multi[axis] >= self.dims[axis] {
                return None;
            }
            z += multi[axis] * strides[axis];
        }
        Some(z)
    }

    /// Physical coordinates of a node (`multi-index × spacing`).
    pub fn position(&self, z: NodeIndex) -> Vec<f64> {
        self.multi_index(z).iter().map(|&i| i as f64 * self.spacing).collect()
    }

    /// Largest linear-index offset between neighbors; the half bandwidth of
    /// any matrix assembled on the neighbor stencil.
    pub(crate) fn half_bandwidth(&self) -> usize {
        strides_of(&self.dims)[0]
    }

    /// Grid node closest to a physical point (ties round half up per axis),
    /// with the Euclidean snap distance. `None` on dimension mismatch.
    pub fn nearest_node(&self, point: &[f64]) -> Option<(NodeIndex, f64)> {
        if point.len() != self.dims.len() {
            return None;
        }
        let mut multi = Vec::with_capacity(point.len());
        for (axis, &x) in point.iter().enumerate() {
            let idx = (x / self.spacing + 0.5) as isize;
            let idx = idx.clamp(0, self.dims[axis] as isize - 1) as usize;
            multi.push(idx);
        }
        let node = self.node_at(&multi)?;
        let snapped = self.position(node);
        Some((node, crate::math::dist(point, &snapped)))
    }
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    // Row-major: the first axis has the largest stride.
    let mut strides = vec![1usize; dims.len()];
    for axis in (0..dims.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * dims[axis + 1];
    }
    strides
}

fn unravel(z: usize, dims: &[usize], strides: &[usize], out: &mut [usize]) {
    let mut rest = z;
    for axis in 0..dims.len() {
        out[axis] = rest / strides[axis];
        rest %= strides[axis];
    }
}

/// Source set `A` and sink set `B`, as grid nodes. The two lists may overlap;
/// within each list the nodes are distinct.
#[derive(Debug, Clone)]
pub struct TerminalSet {
    sources: Vec<NodeIndex>,
    sinks: Vec<NodeIndex>,
}

impl TerminalSet {
    pub fn new(grid: &GridSpec, sources: Vec<NodeIndex>, sinks: Vec<NodeIndex>) -> Result<Self> {
        let nodes = grid.num_nodes();
        for list in [&sources, &sinks] {
            for (i, &z) in list.iter().enumerate() {
                if z >= nodes {
                    return Err(Error::TerminalOutOfRange { index: z, nodes });
                }
                if list[..i].contains(&z) {
                    return Err(Error::DuplicateTerminal { index: z });
                }
            }
        }
        Ok(TerminalSet { sources, sinks })
    }

    pub fn sources(&self) -> &[NodeIndex] {
        &self.sources
    }

    pub fn sinks(&self) -> &[NodeIndex] {
        &self.sinks
    }

    /// Grid node realizing source `i`.
    pub fn source_node(&self, i: usize) -> NodeIndex {
        self.sources[i]
    }

    /// Grid node realizing sink `j`.
    pub fn sink_node(&self, j: usize) -> NodeIndex {
        self.sinks[j]
    }
}

/// One pair of a mailing plan: mass routed from source `i` to sink `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
}

/// Prescribed transport plan `π(i, j)` between the source and sink lists of a
/// [`TerminalSet`], with unit total mass. Marginals are derived on
/// construction: `f⁺(i) = Σ_j π(i,j)` and `f⁻(j) = Σ_i π(i,j)`.
#[derive(Debug, Clone)]
pub struct MailingPlan {
    num_sources: usize,
    num_sinks: usize,
    entries: Vec<PlanEntry>,
    source_marginals: Vec<f64>,
    sink_marginals: Vec<f64>,
}

impl MailingPlan {
    pub fn new(num_sources: usize, num_sinks: usize, entries: Vec<PlanEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyPlan);
        }
        let mut total = 0.0;
        let mut source_marginals = vec![0.0; num_sources];
        let mut sink_marginals = vec![0.0; num_sinks];
        for (k, e) in entries.iter().enumerate() {
            if e.source >= num_sources || e.sink >= num_sinks {
                return Err(Error::PairOutOfRange { source: e.source, sink: e.sink });
            }
            if !(e.mass > 0.0) || !e.mass.is_finite() {
                return Err(Error::BadMass { source: e.source, sink: e.sink, mass: e.mass });
            }
            if entries[..k].iter().any(|o| o.source == e.source && o.sink == e.sink) {
                return Err(Error::DuplicatePair { source: e.source, sink: e.sink });
            }
            total += e.mass;
            source_marginals[e.source] += e.mass;
            sink_marginals[e.sink] += e.mass;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::PlanMassNotUnit { total });
        }
        Ok(MailingPlan { num_sources, num_sinks, entries, source_marginals, sink_marginals })
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn num_sinks(&self) -> usize {
        self.num_sinks
    }

    /// Derived marginals `(f⁺, f⁻)`; each sums to one.
    pub fn marginals(&self) -> (&[f64], &[f64]) {
        (&self.source_marginals, &self.sink_marginals)
    }
}

/// Nonnegative weights over the grid nodes summing to one: a point of the
/// probability simplex `S(Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    values: Vec<f64>,
}

impl SimplexWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut total = 0.0;
        for (node, &v) in values.iter().enumerate() {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::NegativeWeight { node, value: v });
            }
            total += v;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::WeightsNotUnit { total });
        }
        Ok(SimplexWeights { values })
    }

    /// `m(z) = 1/|Z|` on every node.
    pub fn uniform(grid: &GridSpec) -> Self {
        let n = grid.num_nodes();
        SimplexWeights { values: vec![1.0 / n as f64; n] }
    }

    /// Bypasses validation for internally generated points (softmax output
    /// normalizes by construction).
    pub(crate) fn from_normalized(values: Vec<f64>) -> Self {
        SimplexWeights { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, z: NodeIndex) -> f64 {
        self.values[z]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `λ a + (1−λ) b`; stays on the simplex for `λ ∈ [0, 1]`.
    pub fn convex_combination(a: &Self, b: &Self, lambda: f64) -> Self {
        let values = a
            .values
            .iter()
            .zip(b.values.iter())
            .map(|(&x, &y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        SimplexWeights { values }
    }

    /// Total-variation distance `½ Σ |a − b|`.
    pub fn total_variation(a: &Self, b: &Self) -> f64 {
        0.5 * a
            .values
            .iter()
            .zip(b.values.iter())
            .map(|(&x, &y)| (x - y).abs())
            .sum::<f64>()
    }
}
