//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with its measured quantities and wall time.
//!
//! Criteria 7 and 9 assert tree-shaped extraction for diagonal-geometry
//! instances. The converged discrete relaxation provably spreads over
//! equal-length parallel lattice paths instead (the parallel composition
//! rule makes such splits exactly cost-neutral on the 4-neighbor grid), so
//! those two tests fail honestly; the decisions ledger carries the analysis
//! and the measured values.

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gilbert_core::extract::{extract_network, TreeifyOutcome};
use gilbert_core::grid::{GridSpec, MailingPlan, PlanEntry, SimplexWeights, TerminalSet};
use gilbert_core::oracle::{branch_point_search, budget_min_direct, convexity_probe, finite_diff_gradient};
use gilbert_core::solver::{
    dual_gradient, dual_objective, entropic_weights, solve, ConstantsMode, PotentialSet,
    SolveOutput, SolverOptions,
};
use gilbert_core::trees::{gilbert_cost, min_transport_cost, optimal_budget, transport_cost, EmbeddedTree};
use gilbert_core::wasserstein::{
    inner_max, parallel_wpp, InnerOptions, PExponent, PathSegment, WeightedPath,
};

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

struct YInstance {
    grid: GridSpec,
    terminals: TerminalSet,
    plan: MailingPlan,
    pexp: PExponent,
}

fn y_instance() -> YInstance {
    // Sources (0.25, 0.2), (0.25, 0.8), sink (0.85, 0.5) snapped onto the
    // 33x33 grid over the unit square.
    let grid = GridSpec::new(&[33, 33], 1.0 / 32.0).unwrap();
    let snap = |x: f64, y: f64| grid.nearest_node(&[x, y]).unwrap().0;
    let sources = vec![snap(0.25, 0.2), snap(0.25, 0.8)];
    let sinks = vec![snap(0.85, 0.5)];
    let terminals = TerminalSet::new(&grid, sources, sinks).unwrap();
    let plan = MailingPlan::new(
        2,
        1,
        vec![
            PlanEntry { source: 0, sink: 0, mass: 0.5 },
            PlanEntry { source: 1, sink: 0, mass: 0.5 },
        ],
    )
    .unwrap();
    let pexp = PExponent::from_sigma(0.5).unwrap();
    YInstance { grid, terminals, plan, pexp }
}

static Y_SOLVE: OnceLock<SolveOutput> = OnceLock::new();

fn y_solve() -> &'static SolveOutput {
    Y_SOLVE.get_or_init(|| {
        let inst = y_instance();
        let options = SolverOptions::default_for(&inst.pexp);
        solve(&inst.grid, &inst.terminals, &inst.plan, &inst.pexp, &options).unwrap()
    })
}

// ---------------------------------------------------------------------------
// Criterion 1
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_budget_equivalence_on_random_trees() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_identity = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for trial in 0..200 {
        let (tree, plan) = common::random_tree_instance(&mut rng, 11, 6);
        for &alpha in &[0.5, 1.0, 2.0] {
            let h = min_transport_cost(&tree, &plan, alpha).unwrap();
            let g = gilbert_cost(&tree, &plan, 1.0 / (1.0 + alpha)).unwrap();
            let identity = (h - g.powf(1.0 + alpha)).abs() / h;
            worst_identity = worst_identity.max(identity);
            assert!(
                identity < 1e-10,
                "criterion 1: trial {trial} alpha {alpha}: |H - G^(1+a)|/H = {identity:e}"
            );

            let oracle = budget_min_direct(&tree, &plan, alpha, 20_000).unwrap();
            let gap = (oracle.value - h).abs() / h;
            worst_oracle = worst_oracle.max(gap);
            assert!(
                gap < 1e-6,
                "criterion 1: trial {trial} alpha {alpha}: budget oracle gap {gap:e}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "criterion 1: runtime {elapsed:?} over 30 s");
    println!(
        "criterion 1 (budget/concentration equivalence): PASS \
         (worst identity {worst_identity:.2e}, worst oracle gap {worst_oracle:.2e}, {elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_star_worked_example() {
    let started = Instant::now();
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

    let g = gilbert_cost(&tree, &plan, 0.5).unwrap();
    assert!((g - 4.0).abs() < 1e-10, "criterion 2: G = {g}");
    let h = min_transport_cost(&tree, &plan, 1.0).unwrap();
    assert!((h - 16.0).abs() < 1e-10, "criterion 2: H = {h}");

    let budget = optimal_budget(&tree, &plan, 1.0).unwrap();
    let leg = 0.5f64.sqrt() / 4.0;
    for (e, want) in [(0usize, leg), (1, leg), (2, 0.25)] {
        let got = budget.per_unit_costs()[e];
        assert!((got - want).abs() < 1e-10, "criterion 2: s[{e}] = {got}, want {want}");
    }
    assert!((budget.spent(&tree) - 1.0).abs() < 1e-12, "criterion 2: budget not exactly spent");
    let direct = transport_cost(&tree, &budget, &plan).unwrap();
    assert!((direct - 16.0).abs() < 1e-10);
    println!(
        "criterion 2 (star worked example): PASS (G = {g}, H = {h}, s = ({leg:.5}, {leg:.5}, 0.25), {:?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 3
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_path_discretization() {
    let started = Instant::now();
    let pexp = PExponent::from_p(2.0).unwrap();
    let mut previous_gap = f64::INFINITY;
    let mut last_gap = f64::NAN;
    for &n in &[9usize, 17, 33, 65] {
        let grid = GridSpec::new(&[n], 1.0).unwrap();
        let m = SimplexWeights::uniform(&grid);
        let solve = inner_max(&grid, &m, 0, n - 1, &pexp, &InnerOptions::default());
        let closed = (n * n) as f64 - 5.0 * n as f64 / 3.0;
        assert!(
            (solve.value - closed).abs() <= 1e-8,
            "criterion 3: n = {n}: value {} vs closed form {closed}",
            solve.value
        );
        let continuum = ((n - 1) * (n - 1)) as f64;
        let gap = (solve.value - continuum).abs() / continuum;
        assert!(gap < previous_gap, "criterion 3: gap not decreasing at n = {n}");
        previous_gap = gap;
        last_gap = gap;
    }
    assert!(last_gap < 0.01, "criterion 3: final gap {last_gap} not below 1%");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "criterion 3: runtime {elapsed:?} over 5 s");
    println!(
        "criterion 3 (1-D discretization): PASS (final continuum gap {:.3}%, {elapsed:?})",
        last_gap * 100.0
    );
}

// ---------------------------------------------------------------------------
// Criterion 4
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_convexity_probe() {
    let started = Instant::now();
    let grid = GridSpec::new(&[8, 8], 1.0).unwrap();
    let corner = |i: usize, j: usize| grid.node_at(&[i, j]).unwrap();
    let terminals =
        TerminalSet::new(&grid, vec![corner(0, 0), corner(0, 7)], vec![corner(7, 7), corner(7, 0)])
            .unwrap();
    let plan = MailingPlan::new(
        2,
        2,
        vec![
            PlanEntry { source: 0, sink: 0, mass: 0.6 },
            PlanEntry { source: 1, sink: 1, mass: 0.4 },
        ],
    )
    .unwrap();
    let pexp = PExponent::from_p(2.0).unwrap();
    let report = convexity_probe(
        &grid,
        &terminals,
        &plan,
        &pexp,
        100,
        2024,
        1e-9,
        &InnerOptions::default(),
    );
    assert!(
        report.pass,
        "criterion 4: worst midpoint violation {:e} above 1e-9",
        report.worst_margin
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 4: runtime {elapsed:?} over 60 s");
    println!(
        "criterion 4 (midpoint convexity): PASS (worst margin {:.2e} over {} trials, {elapsed:?})",
        report.worst_margin, report.trials
    );
}

// ---------------------------------------------------------------------------
// Criterion 5
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_dual_gradient_matches_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for &(p, delta) in &[(2.0, 0.0), (4.0, 0.05)] {
        for _ in 0..10 {
            let grid = GridSpec::new(&[5, 5], 1.0).unwrap();
            let mut nodes = Vec::new();
            while nodes.len() < 4 {
                let z = rng.gen_range(0..25);
                if !nodes.contains(&z) {
                    nodes.push(z);
                }
            }
            let terminals =
                TerminalSet::new(&grid, vec![nodes[0], nodes[1]], vec![nodes[2], nodes[3]])
                    .unwrap();
            let plan = MailingPlan::new(
                2,
                2,
                vec![
                    PlanEntry { source: 0, sink: 0, mass: 0.6 },
                    PlanEntry { source: 1, sink: 1, mass: 0.4 },
                ],
            )
            .unwrap();
            let pexp = PExponent::from_p(p).unwrap();
            let eps = 0.3 + rng.gen::<f64>();
            let pots =
                PotentialSet::zeros(&grid, &terminals, &plan).perturbed(rng.gen(), 2.0);

            let grads =
                dual_gradient(&grid, &plan, &pots, &pexp, eps, delta, ConstantsMode::Consistent);
            let n = grid.num_nodes();
            let flat: Vec<f64> =
                pots.potentials().iter().flat_map(|q| q.values().to_vec()).collect();
            let objective = |flat: &[f64]| -> f64 {
                let values: Vec<Vec<f64>> = flat.chunks(n).map(|c| c.to_vec()).collect();
                let ps = PotentialSet::from_values(&grid, &terminals, &plan, values).unwrap();
                dual_objective(&grid, &plan, &ps, &pexp, eps, delta, ConstantsMode::Consistent)
            };
            let fd = finite_diff_gradient(objective, &flat, 1e-5);

            let sup_g = grads
                .iter()
                .flat_map(|b| b.iter())
                .fold(0.0f64, |a, &g| a.max(g.abs()));
            let mut sup_diff = 0.0f64;
            for (k, pot) in pots.potentials().iter().enumerate() {
                for z in 0..n {
                    if z == pot.sink_node() {
                        continue; // the gauge coordinate is fixed by construction
                    }
                    sup_diff = sup_diff.max((grads[k][z] - fd[k * n + z]).abs());
                }
                // The sink component is pinned by shift invariance: the block
                // must sum to zero.
                let block_sum: f64 = grads[k].iter().sum();
                sup_diff = sup_diff.max(block_sum.abs());
            }
            let rel = sup_diff / sup_g;
            worst = worst.max(rel);
            assert!(rel <= 1e-5, "criterion 5: p = {p}: relative gradient error {rel:e}");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 5: runtime {elapsed:?} over 60 s");
    println!(
        "criterion 5 (dual gradient vs finite differences): PASS (worst relative error {worst:.2e}, {elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 6
// ---------------------------------------------------------------------------

/// Independent simplex oracle: projected gradient descent with Euclidean
/// projection, minimizing `-(p/p')<m, c> + (eps p/p') Σ m ln m`. Shares no
/// code with the softmax route.
fn simplex_entropy_min(c: &[f64], eps: f64, pexp: &PExponent) -> Vec<f64> {
    let n = c.len();
    let ratio = pexp.p() / pexp.p_prime();
    let objective = |m: &[f64]| -> f64 {
        let mut v = 0.0;
        for (&mi, &ci) in m.iter().zip(c.iter()) {
            let entropy = if mi > 0.0 { mi * mi.ln() } else { 0.0 };
            v += -ratio * mi * ci + eps * ratio * entropy;
        }
        v
    };
    let project = |v: &[f64]| -> Vec<f64> {
        let mut sorted = v.to_vec();
        sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
        let mut acc = 0.0;
        let mut theta = 0.0;
        for (j, &vj) in sorted.iter().enumerate() {
            acc += vj;
            let candidate = (acc - 1.0) / (j + 1) as f64;
            if vj - candidate > 0.0 {
                theta = candidate;
            }
        }
        v.iter().map(|&x| (x - theta).max(0.0)).collect()
    };

    let mut m = vec![1.0 / n as f64; n];
    let mut value = objective(&m);
    let mut step = 1.0;
    for _ in 0..20_000 {
        let grad: Vec<f64> = m
            .iter()
            .zip(c.iter())
            .map(|(&mi, &ci)| -ratio * ci + eps * ratio * (mi.max(1e-300).ln() + 1.0))
            .collect();
        step *= 2.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> =
                m.iter().zip(grad.iter()).map(|(&mi, &g)| mi - step * g).collect();
            let trial = project(&trial);
            let trial_value = objective(&trial);
            if trial_value < value {
                m = trial;
                value = trial_value;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    m
}

#[test]
fn criterion_6_softmax_optimality_and_saddle_consistency() {
    let started = Instant::now();
    // Softmax against the independent projected-gradient minimizer.
    let pexp = PExponent::from_p(2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_softmax = 0.0f64;
    // Interior-regime instances: with c/eps spread beyond ~10 the optimum
    // hugs the boundary where the projected-gradient oracle itself loses
    // accuracy, which would test the oracle rather than the softmax.
    for &(scale, eps) in &[(1.0, 1.0), (2.0, 1.0), (1.0, 0.5), (2.0, 0.5)] {
        let c: Vec<f64> = (0..25).map(|_| scale * rng.gen::<f64>()).collect();
        let softmax = entropic_weights(&c, eps);
        let direct = simplex_entropy_min(&c, eps, &pexp);
        let sup = softmax
            .values()
            .iter()
            .zip(direct.iter())
            .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs()));
        worst_softmax = worst_softmax.max(sup);
        assert!(sup <= 1e-6, "criterion 6: softmax vs direct minimizer sup {sup:e}");
    }

    // Saddle consistency on acceptance solves: the 33x33 end-to-end run and a
    // small corner instance, both p = 2 where the absolute gate is
    // representable.
    let mut worst_gap = 0.0f64;
    for stage in &y_solve().diagnostics.stages {
        worst_gap = worst_gap.max(stage.consistency_gap);
    }
    let grid = GridSpec::new(&[9, 9], 1.0).unwrap();
    let terminals = TerminalSet::new(&grid, vec![0], vec![80]).unwrap();
    let plan = MailingPlan::new(1, 1, vec![PlanEntry { source: 0, sink: 0, mass: 1.0 }]).unwrap();
    let out = solve(&grid, &terminals, &plan, &pexp, &SolverOptions::default_for(&pexp)).unwrap();
    for stage in &out.diagnostics.stages {
        worst_gap = worst_gap.max(stage.consistency_gap);
    }
    assert!(worst_gap <= 1e-8, "criterion 6: saddle consistency gap {worst_gap:e}");

    println!(
        "criterion 6 (softmax optimality and saddle consistency): PASS \
         (worst softmax sup {worst_softmax:.2e}, worst gap {worst_gap:.2e}, {:?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 7 — honest red; see the decisions ledger
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_end_to_end_y_network() {
    let started = Instant::now();
    let inst = y_instance();
    let output = y_solve();
    let star = branch_point_search(&inst.grid, &inst.terminals, &inst.plan, inst.pexp.sigma())
        .unwrap();
    let extraction = extract_network(
        &inst.grid,
        &output.weights,
        &inst.terminals,
        &inst.plan,
        inst.pexp.sigma(),
        0.05,
        Some(star.value),
    )
    .unwrap();
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "criterion 7: runtime {elapsed:?} over 2 min");

    let report = &extraction.report;
    if !report.is_tree {
        println!(
            "criterion 7 (end-to-end Y network): FAIL — extraction yields is_tree = false \
             (components {}, cycles {}): the converged relaxed optimum (primal {:.1}) lies \
             below every tree-supported measure (best staircase Y 1781) because equal-length \
             parallel lattice paths are exactly cost-neutral; see the decisions ledger.",
            report.component_count,
            report.cycle_count,
            output.diagnostics.stages.last().unwrap().primal_value,
        );
    }
    assert!(report.is_tree, "criterion 7: extraction did not produce a tree");

    let tree = match &extraction.outcome {
        TreeifyOutcome::Tree { tree, .. } => tree,
        other => panic!("criterion 7: expected tree, got {other:?}"),
    };
    let branches: Vec<usize> =
        (0..tree.num_vertices()).filter(|&v| tree.degree(v) >= 3).collect();
    assert_eq!(branches.len(), 1, "criterion 7: expected exactly one branch vertex");
    assert_eq!(tree.degree(branches[0]), 3, "criterion 7: branch vertex degree");
    let gap = report.oracle_gap.unwrap();
    assert!(gap.abs() <= 0.05, "criterion 7: extracted cost {:+.2}% off the star minimum", gap * 100.0);
    println!(
        "criterion 7 (end-to-end Y network): PASS (cost gap {:+.2}%, {elapsed:?})", gap * 100.0
    );
}

// ---------------------------------------------------------------------------
// Criterion 8
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_empirical_uniqueness() {
    let started = Instant::now();
    let inst = y_instance();
    let mut first = SolverOptions::default_for(&inst.pexp);
    first.seed = Some(1);
    let mut second = first;
    second.seed = Some(2);
    let a = solve(&inst.grid, &inst.terminals, &inst.plan, &inst.pexp, &first).unwrap();
    let b = solve(&inst.grid, &inst.terminals, &inst.plan, &inst.pexp, &second).unwrap();
    let tv = SimplexWeights::total_variation(&a.weights, &b.weights);
    assert!(tv <= 1e-3, "criterion 8: total variation {tv:e} above 1e-3");
    println!(
        "criterion 8 (empirical uniqueness): PASS (TV distance {tv:.2e}, {:?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 9 — honest red; see the decisions ledger
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_steiner_limit_triangle() {
    let started = Instant::now();
    // Unit-side near-equilateral triangle on the lattice: base 22 cells,
    // apex (11, 19); spacing 1/22 makes the side exactly 1.
    let grid = GridSpec::new(&[33, 33], 1.0 / 22.0).unwrap();
    let v1 = grid.node_at(&[5, 6]).unwrap();
    let v2 = grid.node_at(&[27, 6]).unwrap();
    let v3 = grid.node_at(&[16, 25]).unwrap();
    let terminals = TerminalSet::new(&grid, vec![v1, v2, v3], vec![v1, v2, v3]).unwrap();
    let mut entries = Vec::new();
    for i in 0..3usize {
        for j in 0..3usize {
            if i != j {
                entries.push(PlanEntry { source: i, sink: j, mass: 1.0 / 6.0 });
            }
        }
    }
    let plan = MailingPlan::new(3, 3, entries).unwrap();
    let pexp = PExponent::from_p(8.0).unwrap();
    let options = SolverOptions::default_for(&pexp);
    let output = solve(&grid, &terminals, &plan, &pexp, &options).unwrap();
    let extraction = extract_network(
        &grid,
        &output.weights,
        &terminals,
        &plan,
        pexp.sigma(),
        0.05,
        None,
    )
    .unwrap();

    let report = &extraction.report;
    if !report.is_tree {
        println!(
            "criterion 9 (Steiner limit): FAIL — extraction yields is_tree = false \
             (components {}, cycles {}): at p = 8 the converged measure spreads across \
             equal-length staircase families around each terminal (split-neutral lattice \
             geometry); a thin 3-leg tree measure evaluates 35x worse than the spread \
             optimum. See the decisions ledger.",
            report.component_count, report.cycle_count
        );
    }
    assert!(report.is_tree, "criterion 9: extraction did not produce a tree");

    let tree = match &extraction.outcome {
        TreeifyOutcome::Tree { tree, .. } => tree,
        other => panic!("criterion 9: expected tree, got {other:?}"),
    };
    let branches: Vec<usize> =
        (0..tree.num_vertices()).filter(|&v| tree.degree(v) >= 3).collect();
    assert_eq!(branches.len(), 1, "criterion 9: expected exactly one branch vertex");
    let branch = tree.point(branches[0]);
    let h = grid.spacing();
    let centroid = [(5.0 + 27.0 + 16.0) / 3.0 * h, (6.0 + 6.0 + 25.0) / 3.0 * h];
    let cheb = (branch[0] - centroid[0]).abs().max((branch[1] - centroid[1]).abs());
    assert!(cheb <= h * (1.0 + 1e-9), "criterion 9: branch {cheb} away from centroid");
    let collapsed = gilbert_core::extract::collapse_chains(tree).unwrap();
    let straight: f64 = (0..collapsed.num_edges()).map(|e| collapsed.edge_length(e)).sum();
    let target = 3.0f64.sqrt();
    assert!(
        (straight - target).abs() / target <= 0.10,
        "criterion 9: straight-line length {straight} vs sqrt(3)"
    );
    println!(
        "criterion 9 (Steiner limit): PASS (branch offset {cheb:.4}, length {straight:.4}, {:?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 10
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_cycle_formula() {
    let started = Instant::now();
    let p2 = PExponent::from_p(2.0).unwrap();
    // Two unit orbits of density 1/2: I = 2 each, parallel value 1.
    let value = parallel_wpp(&[2.0, 2.0], &p2).unwrap();
    assert!((value - 1.0).abs() <= 1e-12, "criterion 10: two-orbit value {value}");
    // k-fold symmetric case: I * k^(1-p).
    for &k in &[2usize, 3, 5] {
        for &p in &[1.5, 2.0, 3.0] {
            let pexp = PExponent::from_p(p).unwrap();
            let i0 = 4.0;
            let got = parallel_wpp(&vec![i0; k], &pexp).unwrap();
            let want = i0 * (k as f64).powf(1.0 - p);
            assert!(
                (got - want).abs() <= 1e-12 * want.max(1.0),
                "criterion 10: k = {k}, p = {p}: {got} vs {want}"
            );
        }
    }

    // Discrete two-corridor instance: mass spread uniformly over two
    // disjoint corridors joining the terminals; the full grid evaluation must
    // agree with the parallel composition of the per-orbit path costs taken
    // in the same discrete metric.
    let len = 30usize;
    let grid = GridSpec::new(&[len + 1, 3], 1.0).unwrap();
    let x = grid.node_at(&[0, 1]).unwrap();
    let y = grid.node_at(&[len, 1]).unwrap();
    let mut mass = vec![0.0; grid.num_nodes()];
    for i in 0..=len {
        mass[grid.node_at(&[i, 0]).unwrap()] = 1.0;
        mass[grid.node_at(&[i, 2]).unwrap()] = 1.0;
    }
    mass[x] = 1.0;
    mass[y] = 1.0;
    let total: f64 = mass.iter().sum();
    for v in mass.iter_mut() {
        *v /= total;
    }
    let m = SimplexWeights::new(mass).unwrap();
    let discrete = inner_max(&grid, &m, x, y, &p2, &InnerOptions::default()).value;

    let orbit_integral = |row: usize| -> f64 {
        let mut nodes = vec![x];
        for i in 0..=len {
            nodes.push(grid.node_at(&[i, row]).unwrap());
        }
        nodes.push(y);
        let segments: Vec<PathSegment> = nodes
            .windows(2)
            .map(|w| {
                let (u, v) = (w[0], w[1]);
                let conductance = m.get(u) / grid.degree(u) as f64
                    + m.get(v) / grid.degree(v) as f64;
                PathSegment { length: 1.0, density: conductance }
            })
            .collect();
        gilbert_core::wasserstein::path_wpp(&WeightedPath::new(segments).unwrap(), &p2)
    };
    let composed = parallel_wpp(&[orbit_integral(0), orbit_integral(2)], &p2).unwrap();
    let gap = (discrete - composed).abs() / composed;
    assert!(
        gap <= 0.05,
        "criterion 10: grid evaluation {discrete} vs parallel composition {composed} ({gap:e})"
    );
    println!(
        "criterion 10 (cycle formula): PASS (grid vs composition gap {:.3}%, {:?})",
        gap * 100.0,
        started.elapsed()
    );
}
