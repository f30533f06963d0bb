//! Shared helpers for integration tests: random embedded trees with plans.

use gilbert_core::grid::{MailingPlan, PlanEntry};
use gilbert_core::trees::EmbeddedTree;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random tree in the plane with a random mailing plan. Vertices attach
/// uniformly to an earlier vertex (random recursive tree); sources and sinks
/// are disjoint vertex subsets so every pair carries flow.
pub fn random_tree_instance(
    rng: &mut ChaCha8Rng,
    max_vertices: usize,
    max_pairs: usize,
) -> (EmbeddedTree, MailingPlan) {
    loop {
        let k = rng.gen_range(2..=max_vertices);
        let points: Vec<Vec<f64>> =
            (0..k).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let mut edges = Vec::with_capacity(k - 1);
        for v in 1..k {
            edges.push((rng.gen_range(0..v), v));
        }
        let degenerate = edges.iter().any(|&(a, b)| {
            let dx = points[a][0] - points[b][0];
            let dy = points[a][1] - points[b][1];
            (dx * dx + dy * dy).sqrt() < 1e-9
        });
        if degenerate {
            continue;
        }

        let mut order: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let ns = rng.gen_range(1..=3.min(k - 1));
        let nt = rng.gen_range(1..=2.min(k - ns));
        let sources: Vec<usize> = order[..ns].to_vec();
        let sinks: Vec<usize> = order[ns..ns + nt].to_vec();

        let mut combos: Vec<(usize, usize)> = (0..ns)
            .flat_map(|i| (0..nt).map(move |j| (i, j)))
            .collect();
        for i in (1..combos.len()).rev() {
            combos.swap(i, rng.gen_range(0..=i));
        }
        let np = rng.gen_range(1..=combos.len().min(max_pairs));
        let mut masses: Vec<f64> = (0..np).map(|_| 0.05 + rng.gen::<f64>()).collect();
        let total: f64 = masses.iter().sum();
        for m in masses.iter_mut() {
            *m /= total;
        }
        let entries: Vec<PlanEntry> = combos[..np]
            .iter()
            .zip(masses)
            .map(|(&(source, sink), mass)| PlanEntry { source, sink, mass })
            .collect();

        let tree = EmbeddedTree::with_terminals(points, edges, sources, sinks)
            .expect("random recursive tree is valid");
        let plan = MailingPlan::new(ns, nt, entries).expect("normalized plan is valid");
        return (tree, plan);
    }
}
