//! Exact combinatorial costs on embedded trees: edge flows induced by a
//! mailing plan, the concentration cost `G(T) = Σ_e w(e)^σ |e|`, the budgeted
//! transport cost `H(T, s) = Σ_e w(e) |e| s(e)^{−α}`, and the closed-form
//! optimal budget under the unit construction constraint `Σ_e |e| s(e) ≤ 1`.
//!
//! The two costs are equivalent for `σ = 1/(1+α)`: minimizing `H` over
//! budgets gives `H(T) = (Σ_e |e| w(e)^{1/(1+α)})^{1+α} = G(T)^{1+α}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::MailingPlan;
use crate::math;
use crate::Result;

/// Slack allowed on the unit construction budget.
pub const BUDGET_TOL: f64 = 1e-12;

/// A tree embedded in `R^d`: vertex coordinates, undirected edges, and the
/// vertices realizing each source and sink of a terminal set. Terminals that
/// the tree does not represent are `None`; any plan pair touching one is
/// rejected by [`compute_edge_flows`].
#[derive(Debug, Clone)]
pub struct EmbeddedTree {
    points: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    lengths: Vec<f64>,
    /// Per vertex: `(neighbor vertex, edge id)`.
    adjacency: Vec<Vec<(usize, usize)>>,
    sources: Vec<Option<usize>>,
    sinks: Vec<Option<usize>>,
}

impl EmbeddedTree {
    /// Validates connectivity (`|E| = |V| − 1`, one component), positive edge
    /// lengths, and terminal vertex indices.
    pub fn new(
        points: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        sources: Vec<Option<usize>>,
        sinks: Vec<Option<usize>>,
    ) -> Result<Self> {
        let n = points.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut lengths = Vec::with_capacity(edges.len());
        for (e, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::VertexOutOfRange { index: a.max(b), vertices: n });
            }
            let len = math::dist(&points[a], &points[b]);
            if !(len > 0.0) {
                return Err(Error::ZeroLengthEdge { edge: e });
            }
            lengths.push(len);
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        let components = count_components(n, &adjacency);
        if edges.len() + 1 != n || components != 1 {
            return Err(Error::NotATree { vertices: n, edges: edges.len(), components });
        }
        for list in [&sources, &sinks] {
            for &v in list.iter().flatten() {
                if v >= n {
                    return Err(Error::VertexOutOfRange { index: v, vertices: n });
                }
            }
        }
        Ok(EmbeddedTree { points, edges, lengths, adjacency, sources, sinks })
    }

    /// Convenience constructor when every terminal is present.
    pub fn with_terminals(
        points: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        sources: Vec<usize>,
        sinks: Vec<usize>,
    ) -> Result<Self> {
        Self::new(
            points,
            edges,
            sources.into_iter().map(Some).collect(),
            sinks.into_iter().map(Some).collect(),
        )
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn point(&self, v: usize) -> &[f64] {
        &self.points[v]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn source_vertices(&self) -> &[Option<usize>] {
        &self.sources
    }

    pub fn sink_vertices(&self) -> &[Option<usize>] {
        &self.sinks
    }

    /// The unique simple path between two vertices, as an ordered edge list.
    /// Empty exactly when `from == to`.
    pub fn find_orbit(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        Ok(self.orbit_steps(from, to)?.into_iter().map(|(_, e)| e).collect())
    }

    /// Path as `(next vertex, edge id)` steps starting at `from`.
    fn orbit_steps(&self, from: usize, to: usize) -> Result<Vec<(usize, usize)>> {
        let n = self.num_vertices();
        if from >= n || to >= n {
            return Err(Error::VertexOutOfRange { index: from.max(to), vertices: n });
        }
        if from == to {
            return Ok(Vec::new());
        }
        // Depth-first walk; the tree invariant makes the path unique.
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut stack = vec![from];
        let mut seen = vec![false; n];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            if v == to {
                break;
            }
            for &(nb, e) in &self.adjacency[v] {
                if !seen[nb] {
                    seen[nb] = true;
                    parent[nb] = Some((v, e));
                    stack.push(nb);
                }
            }
        }
        if !seen[to] {
            // Unreachable for a validated tree; kept as a guard for callers
            // that disable validation in the future.
            return Err(Error::NotATree {
                vertices: n,
                edges: self.edges.len(),
                components: count_components(n, &self.adjacency),
            });
        }
        let mut steps = Vec::new();
        let mut v = to;
        while let Some((prev, e)) = parent[v] {
            steps.push((v, e));
            v = prev;
        }
        steps.reverse();
        Ok(steps)
    }
}

fn count_components(n: usize, adjacency: &[Vec<(usize, usize)>]) -> usize {
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &(nb, _) in &adjacency[v] {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    components
}

/// Per-edge flows induced by a plan: `total` sums `π` over all pairs whose
/// orbit uses the edge (the `w_π(e)` entering the costs); `net` is the signed
/// sum with orientation taken from the stored edge tuple, used for the
/// conservation check.
#[derive(Debug, Clone)]
pub struct EdgeFlow {
    total: Vec<f64>,
    net: Vec<f64>,
}

impl EdgeFlow {
    pub fn total(&self) -> &[f64] {
        &self.total
    }

    pub fn net(&self) -> &[f64] {
        &self.net
    }

    /// Largest conservation violation over the vertices: at every vertex the
    /// signed outflow must equal the net production `f⁺(v) − f⁻(v)` (zero at
    /// non-terminals).
    pub fn kirchhoff_residual(&self, tree: &EmbeddedTree, plan: &MailingPlan) -> f64 {
        let n = tree.num_vertices();
        let mut production = vec![0.0; n];
        for entry in plan.entries() {
            if let (Some(sv), Some(tv)) =
                (tree.sources[entry.source], tree.sinks[entry.sink])
            {
                production[sv] += entry.mass;
                production[tv] -= entry.mass;
            }
        }
        let mut worst: f64 = 0.0;
        for v in 0..n {
            let mut outflow = 0.0;
            for &(_, e) in &tree.adjacency[v] {
                let (a, _) = tree.edges[e];
                outflow += if v == a { self.net[e] } else { -self.net[e] };
            }
            worst = worst.max((outflow - production[v]).abs());
        }
        worst
    }
}

/// Accumulates `w_π(e) = Σ_{(x,y): e ∈ orbit(x,y)} π(x, y)` over the plan.
/// Pairs whose source and sink coincide have an empty orbit and contribute
/// nothing.
pub fn compute_edge_flows(tree: &EmbeddedTree, plan: &MailingPlan) -> Result<EdgeFlow> {
    let mut total = vec![0.0; tree.num_edges()];
    let mut net = vec![0.0; tree.num_edges()];
    for entry in plan.entries() {
        let sv = tree.sources.get(entry.source).copied().flatten();
        let tv = tree.sinks.get(entry.sink).copied().flatten();
        let (sv, tv) = match (sv, tv) {
            (Some(s), Some(t)) => (s, t),
            _ => {
                return Err(Error::MissingTerminalVertex {
                    source: entry.source,
                    sink: entry.sink,
                })
            }
        };
        if sv == tv {
            continue;
        }
        let mut at = sv;
        for (next, e) in tree.orbit_steps(sv, tv)? {
            total[e] += entry.mass;
            let (a, _) = tree.edges[e];
            net[e] += if at == a { entry.mass } else { -entry.mass };
            at = next;
        }
    }
    Ok(EdgeFlow { total, net })
}

/// Concentration cost `G(T; π) = Σ_e w_π(e)^σ |e|` for `σ ∈ [0, 1)`.
///
/// Edges with zero flow contribute nothing for every `σ`, including `σ = 0`,
/// so the Steiner-limit cost counts only the used subtree.
pub fn gilbert_cost(tree: &EmbeddedTree, plan: &MailingPlan, sigma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::SigmaOutOfRange(sigma));
    }
    let flows = compute_edge_flows(tree, plan)?;
    Ok(gilbert_cost_with_flows(tree, &flows, sigma))
}

/// As [`gilbert_cost`] with flows already computed. `sigma` is not
/// re-validated.
pub fn gilbert_cost_with_flows(tree: &EmbeddedTree, flows: &EdgeFlow, sigma: f64) -> f64 {
    let mut cost = 0.0;
    for (e, &w) in flows.total().iter().enumerate() {
        if w > 0.0 {
            cost += math::powf(w, sigma) * tree.edge_length(e);
        }
    }
    cost
}

/// Per-edge construction budget `s(e) ≥ 0` (cost per unit length) with the
/// transport exponent `α > 0`, constrained by `Σ_e |e| s(e) ≤ 1`.
#[derive(Debug, Clone)]
pub struct CostBudget {
    s: Vec<f64>,
    alpha: f64,
}

impl CostBudget {
    pub fn new(tree: &EmbeddedTree, s: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::ExponentOutOfRange(alpha));
        }
        if s.len() != tree.num_edges() {
            return Err(Error::EdgeLengthMismatch { expected: tree.num_edges(), got: s.len() });
        }
        let mut total = 0.0;
        for (e, &se) in s.iter().enumerate() {
            if se < 0.0 || !se.is_finite() {
                return Err(Error::NegativeWeight { node: e, value: se });
            }
            total += tree.edge_length(e) * se;
        }
        if total > 1.0 + BUDGET_TOL {
            return Err(Error::BudgetExceeded { total });
        }
        Ok(CostBudget { s, alpha })
    }

    pub fn per_unit_costs(&self) -> &[f64] {
        &self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Budget actually spent, `Σ_e |e| s(e)`.
    pub fn spent(&self, tree: &EmbeddedTree) -> f64 {
        self.s.iter().enumerate().map(|(e, &se)| tree.edge_length(e) * se).sum()
    }
}

/// Transport cost `H(T, s) = Σ_e w_π(e) |e| s(e)^{−α}`; `+∞` when an edge
/// carries flow but has no budget.
pub fn transport_cost(tree: &EmbeddedTree, budget: &CostBudget, plan: &MailingPlan) -> Result<f64> {
    if budget.s.len() != tree.num_edges() {
        return Err(Error::EdgeLengthMismatch { expected: tree.num_edges(), got: budget.s.len() });
    }
    let spent = budget.spent(tree);
    if spent > 1.0 + BUDGET_TOL {
        return Err(Error::BudgetExceeded { total: spent });
    }
    let flows = compute_edge_flows(tree, plan)?;
    let mut cost = 0.0;
    for (e, &w) in flows.total().iter().enumerate() {
        if w > 0.0 {
            let s = budget.s[e];
            if s == 0.0 {
                return Ok(f64::INFINITY);
            }
            cost += w * tree.edge_length(e) * math::powf(s, -budget.alpha);
        }
    }
    Ok(cost)
}

/// Budget minimizing the transport cost:
/// `s(e) = w(e)^{1/(1+α)} / Σ_{e'} |e'| w(e')^{1/(1+α)}`, spending the unit
/// budget exactly; zero-flow edges receive nothing.
pub fn optimal_budget(tree: &EmbeddedTree, plan: &MailingPlan, alpha: f64) -> Result<CostBudget> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::ExponentOutOfRange(alpha));
    }
    let flows = compute_edge_flows(tree, plan)?;
    let exponent = 1.0 / (1.0 + alpha);
    let mut denom = 0.0;
    for (e, &w) in flows.total().iter().enumerate() {
        if w > 0.0 {
            denom += tree.edge_length(e) * math::powf(w, exponent);
        }
    }
    if denom == 0.0 {
        return Err(Error::AllFlowsZero);
    }
    let s = flows
        .total()
        .iter()
        .map(|&w| if w > 0.0 { math::powf(w, exponent) / denom } else { 0.0 })
        .collect();
    Ok(CostBudget { s, alpha })
}

/// Minimum of the transport cost over budgets,
/// `H(T) = (Σ_e |e| w_π(e)^{1/(1+α)})^{1+α}`, which equals
/// `G(T)^{1+α}` at `σ = 1/(1+α)`.
pub fn min_transport_cost(tree: &EmbeddedTree, plan: &MailingPlan, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::ExponentOutOfRange(alpha));
    }
    let flows = compute_edge_flows(tree, plan)?;
    let exponent = 1.0 / (1.0 + alpha);
    let mut base = 0.0;
    for (e, &w) in flows.total().iter().enumerate() {
        if w > 0.0 {
            base += tree.edge_length(e) * math::powf(w, exponent);
        }
    }
    if base == 0.0 {
        return Err(Error::AllFlowsZero);
    }
    Ok(math::powf(base, 1.0 + alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PlanEntry;
    use alloc::vec;

    fn single_edge(length: f64) -> EmbeddedTree {
        EmbeddedTree::with_terminals(
            vec![vec![0.0, 0.0], vec![length, 0.0]],
            vec![(0, 1)],
            vec![0],
            vec![1],
        )
        .unwrap()
    }

    fn unit_plan() -> MailingPlan {
        MailingPlan::new(1, 1, vec![PlanEntry { source: 0, sink: 0, mass: 1.0 }]).unwrap()
    }

    /// Sources (0,0) and (0,2) joined at (1,1), sink (3,1), half mass each.
    fn spec_star() -> (EmbeddedTree, MailingPlan) {
        let tree = EmbeddedTree::with_terminals(
            vec![vec![0.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0], vec![3.0, 1.0]],
            vec![(0, 2), (1, 2), (2, 3)],
            vec![0, 1],
            vec![3],
        )
        .unwrap();
        let plan = MailingPlan::new(
            2,
            1,
            vec![
                PlanEntry { source: 0, sink: 0, mass: 0.5 },
                PlanEntry { source: 1, sink: 0, mass: 0.5 },
            ],
        )
        .unwrap();
        (tree, plan)
    }

    #[test]
    fn orbit_single_edge_and_degenerate() {
        let t = single_edge(1.0);
        assert_eq!(t.find_orbit(0, 1).unwrap(), vec![0]);
        assert_eq!(t.find_orbit(0, 0).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn orbit_through_star() {
        let (t, _) = spec_star();
        assert_eq!(t.find_orbit(0, 3).unwrap(), vec![0, 2]);
        assert_eq!(t.find_orbit(1, 3).unwrap(), vec![1, 2]);
        assert_eq!(t.find_orbit(0, 1).unwrap(), vec![0, 1]);
    }

    #[test]
    fn rejects_cycle_and_disconnection() {
        let square = EmbeddedTree::with_terminals(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            vec![0],
            vec![2],
        );
        assert!(matches!(square, Err(Error::NotATree { .. })));

        let split = EmbeddedTree::with_terminals(
            vec![vec![0.0], vec![1.0], vec![3.0], vec![4.0]],
            vec![(0, 1), (2, 3)],
            vec![0],
            vec![3],
        );
        assert!(matches!(split, Err(Error::NotATree { .. })));

        let degenerate = EmbeddedTree::with_terminals(
            vec![vec![0.0], vec![0.0]],
            vec![(0, 1)],
            vec![0],
            vec![1],
        );
        assert!(matches!(degenerate, Err(Error::ZeroLengthEdge { .. })));
    }

    #[test]
    fn single_vertex_tree_is_valid() {
        let t = EmbeddedTree::with_terminals(vec![vec![0.5, 0.5]], vec![], vec![0], vec![0])
            .unwrap();
        assert_eq!(t.num_edges(), 0);
        assert_eq!(t.find_orbit(0, 0).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn flows_on_star_merge() {
        let (t, plan) = spec_star();
        let flows = compute_edge_flows(&t, &plan).unwrap();
        assert!((flows.total()[0] - 0.5).abs() < 1e-15);
        assert!((flows.total()[1] - 0.5).abs() < 1e-15);
        assert!((flows.total()[2] - 1.0).abs() < 1e-15);
        assert!(flows.kirchhoff_residual(&t, &plan) < 1e-12);
    }

    #[test]
    fn flow_skips_degenerate_pair() {
        let t = EmbeddedTree::with_terminals(
            vec![vec![0.0], vec![1.0]],
            vec![(0, 1)],
            vec![0],
            vec![0, 1],
        )
        .unwrap();
        let plan = MailingPlan::new(
            1,
            2,
            vec![
                PlanEntry { source: 0, sink: 0, mass: 0.3 },
                PlanEntry { source: 0, sink: 1, mass: 0.7 },
            ],
        )
        .unwrap();
        let flows = compute_edge_flows(&t, &plan).unwrap();
        assert!((flows.total()[0] - 0.7).abs() < 1e-15);
        assert!(flows.kirchhoff_residual(&t, &plan) < 1e-12);
    }

    #[test]
    fn missing_terminal_rejected() {
        let t = EmbeddedTree::new(
            vec![vec![0.0], vec![1.0]],
            vec![(0, 1)],
            vec![Some(0)],
            vec![None],
        )
        .unwrap();
        assert!(matches!(
            compute_edge_flows(&t, &unit_plan()),
            Err(Error::MissingTerminalVertex { .. })
        ));
    }

    #[test]
    fn gilbert_cost_single_edge() {
        let t = single_edge(2.0);
        assert!((gilbert_cost(&t, &unit_plan(), 0.5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gilbert_cost_star_worked_example() {
        let (t, plan) = spec_star();
        let g = gilbert_cost(&t, &plan, 0.5).unwrap();
        assert!((g - 4.0).abs() < 1e-12, "G = {g}");
        // Steiner case: plain total length of the used subtree.
        let g0 = gilbert_cost(&t, &plan, 0.0).unwrap();
        assert!((g0 - (2.0 * core::f64::consts::SQRT_2 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn gilbert_cost_rejects_sigma() {
        let t = single_edge(1.0);
        assert!(gilbert_cost(&t, &unit_plan(), 1.0).is_err());
        assert!(gilbert_cost(&t, &unit_plan(), -0.1).is_err());
    }

    #[test]
    fn transport_cost_single_edge() {
        let t = single_edge(1.0);
        let budget = CostBudget::new(&t, vec![1.0], 1.0).unwrap();
        assert!((transport_cost(&t, &budget, &unit_plan()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transport_cost_starved_edge_is_infinite() {
        let t = single_edge(1.0);
        let budget = CostBudget::new(&t, vec![0.0], 1.0).unwrap();
        assert_eq!(transport_cost(&t, &budget, &unit_plan()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn budget_constraint_enforced() {
        let t = single_edge(2.0);
        assert!(matches!(
            CostBudget::new(&t, vec![0.6], 1.0),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn optimal_budget_single_edge() {
        let t = single_edge(2.0);
        let budget = optimal_budget(&t, &unit_plan(), 1.0).unwrap();
        assert!((budget.per_unit_costs()[0] - 0.5).abs() < 1e-15);
        assert!((budget.spent(&t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn optimal_budget_star() {
        let (t, plan) = spec_star();
        let budget = optimal_budget(&t, &plan, 1.0).unwrap();
        let leg = (0.5f64).sqrt() / 4.0;
        assert!((budget.per_unit_costs()[0] - leg).abs() < 1e-12);
        assert!((budget.per_unit_costs()[1] - leg).abs() < 1e-12);
        assert!((budget.per_unit_costs()[2] - 0.25).abs() < 1e-12);
        assert!((budget.spent(&t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_transport_cost_closed_forms() {
        let t = single_edge(2.0);
        let h = min_transport_cost(&t, &unit_plan(), 1.0).unwrap();
        assert!((h - 4.0).abs() < 1e-12);

        let (star, plan) = spec_star();
        let h = min_transport_cost(&star, &plan, 1.0).unwrap();
        assert!((h - 16.0).abs() < 1e-10, "H = {h}");
        let budget = optimal_budget(&star, &plan, 1.0).unwrap();
        let direct = transport_cost(&star, &budget, &plan).unwrap();
        assert!((h - direct).abs() / h < 1e-12);
    }

    #[test]
    fn all_zero_flows_rejected() {
        // Sink equals source: no edge carries mass.
        let t = EmbeddedTree::with_terminals(
            vec![vec![0.0], vec![1.0]],
            vec![(0, 1)],
            vec![0],
            vec![0],
        )
        .unwrap();
        assert!(matches!(
            optimal_budget(&t, &unit_plan(), 1.0),
            Err(Error::AllFlowsZero)
        ));
        assert!(min_transport_cost(&t, &unit_plan(), 1.0).is_err());
    }
}
