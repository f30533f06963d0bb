//! Independent brute-force references.
//!
//! Everything here deliberately avoids the entropic dual code path: the
//! simplex minimization runs multiplicative-weights mirror descent on the
//! relaxed objective directly, the budget minimization runs projected
//! gradient descent on budget shares, branch points are found by exhaustive
//! enumeration, and gradients are checked by central differences. Agreement
//! across this module boundary is the main anti-bug defense for the solver.
//!
//! All randomized routines take an explicit seed and are deterministic.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::grid::{GridSpec, MailingPlan, SimplexWeights, TerminalSet};
use crate::math;
use crate::trees::{compute_edge_flows, EmbeddedTree};
use crate::wasserstein::{dphi, inner_max, InnerOptions, PExponent};
use crate::Result;

/// Method tag carried by oracle outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    PrimalMirrorDescent,
    BranchPointSearch,
    BudgetProjectedDescent,
    ConvexityProbe,
}

impl core::fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match self {
            OracleMethod::PrimalMirrorDescent => "primal-mirror-descent",
            OracleMethod::BranchPointSearch => "branch-point-search",
            OracleMethod::BudgetProjectedDescent => "budget-projected-descent",
            OracleMethod::ConvexityProbe => "convexity-probe",
        };
        f.write_str(name)
    }
}

/// Reference result: the value, a snapshot of the minimizing argument, and
/// bookkeeping for reproducibility.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    pub argument: Vec<f64>,
    pub iterations: usize,
    pub method: OracleMethod,
    pub seed: Option<u64>,
    /// False on step-budget exhaustion (the last iterate is still reported).
    pub converged: bool,
}

/// Direct minimization of the relaxed objective over the simplex by
/// entropy-mirror (multiplicative weights) descent with step size `η/√t` and
/// iterate averaging. Subgradients come from the inner maximization
/// (envelope: `∂/∂m(z) = −(p/p′) Σ π Dφ*(z)`).
pub fn primal_min_direct(
    grid: &GridSpec,
    terminals: &TerminalSet,
    plan: &MailingPlan,
    pexp: &PExponent,
    steps: usize,
    inner: &InnerOptions,
) -> OracleResult {
    let n = grid.num_nodes();
    let mut m = vec![1.0 / n as f64; n];
    let mut average = vec![0.0; n];
    let mut best_value = f64::INFINITY;
    let mut best_m = m.clone();
    let eta0 = 1.0;

    let evaluate = |m: &[f64]| -> (f64, Vec<f64>) {
        // Relaxed objective and its subgradient at m, sharing the inner solves.
        let weights = SimplexWeights::from_normalized(m.to_vec());
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        for entry in plan.entries() {
            let x = terminals.source_node(entry.source);
            let y = terminals.sink_node(entry.sink);
            if x == y {
                continue;
            }
            let solve = inner_max(grid, &weights, x, y, pexp, inner);
            value += entry.mass * solve.value;
            if solve.value.is_finite() {
                let energies = dphi(grid, &solve.potential, pexp, inner.delta);
                let factor = entry.mass * pexp.p() / pexp.p_prime();
                for (g, &dz) in grad.iter_mut().zip(energies.iter()) {
                    *g -= factor * dz;
                }
            }
        }
        (value, grad)
    };

    let mut tail_improvement = 0.0;
    for t in 1..=steps {
        let (value, grad) = evaluate(&m);
        if value < best_value {
            if t > steps - steps / 4 {
                tail_improvement += best_value - value;
            }
            best_value = value;
            best_m = m.clone();
        }
        let sup = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        if sup == 0.0 {
            break;
        }
        let eta = eta0 / (math::sqrt(t as f64) * sup);
        // Multiplicative update, shift-stabilized.
        let min_g = grad.iter().fold(f64::INFINITY, |a, &g| a.min(g));
        let mut total = 0.0;
        for (mz, &g) in m.iter_mut().zip(grad.iter()) {
            *mz *= math::exp(-eta * (g - min_g));
            total += *mz;
        }
        for mz in m.iter_mut() {
            *mz /= total;
        }
        for (a, &mz) in average.iter_mut().zip(m.iter()) {
            *a += mz;
        }
    }

    // The averaged iterate is often better than the last one; keep whichever
    // evaluates lower.
    let total: f64 = average.iter().sum();
    if total > 0.0 {
        for a in average.iter_mut() {
            *a /= total;
        }
        let (avg_value, _) = evaluate(&average);
        if avg_value < best_value {
            best_value = avg_value;
            best_m = average;
        }
    }
    let converged = tail_improvement <= 1e-7 * best_value.abs().max(1.0);
    OracleResult {
        value: best_value,
        argument: best_m,
        iterations: steps,
        method: OracleMethod::PrimalMirrorDescent,
        seed: None,
        converged,
    }
}

/// Exhaustive single-branch-point search: for every grid node `v`, the star
/// joining all active terminals to `v` by straight segments is priced at
/// concentration exponent `σ`, and the best node wins. Exact over the star
/// family and deterministic (first minimizer in node order).
pub fn branch_point_search(
    grid: &GridSpec,
    terminals: &TerminalSet,
    plan: &MailingPlan,
    sigma: f64,
) -> Result<OracleResult> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::SigmaOutOfRange(sigma));
    }
    // Star-edge flow per terminal node: every pair routes through the hub,
    // loading both of its terminal edges. Pairs with coincident endpoints
    // stay put and load nothing.
    let n = grid.num_nodes();
    let mut load = vec![0.0f64; n];
    for entry in plan.entries() {
        let x = terminals.source_node(entry.source);
        let y = terminals.sink_node(entry.sink);
        if x == y {
            continue;
        }
        load[x] += entry.mass;
        load[y] += entry.mass;
    }
    let loaded: Vec<(usize, f64, Vec<f64>)> = load
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w > 0.0)
        .map(|(z, &w)| (z, math::powf(w, sigma), grid.position(z)))
        .collect();

    let mut best_value = f64::INFINITY;
    let mut best_node = 0;
    for v in 0..n {
        let pos = grid.position(v);
        let mut cost = 0.0;
        for (_, wsigma, tpos) in &loaded {
            cost += wsigma * math::dist(tpos, &pos);
        }
        if cost < best_value {
            best_value = cost;
            best_node = v;
        }
    }
    Ok(OracleResult {
        value: best_value,
        argument: grid.position(best_node),
        iterations: n,
        method: OracleMethod::BranchPointSearch,
        seed: None,
        converged: true,
    })
}

/// Central finite differences of `f` at `point`.
pub fn finite_diff_gradient<F>(f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(point.len());
    let mut work = point.to_vec();
    for i in 0..point.len() {
        let original = work[i];
        work[i] = original + step;
        let plus = f(&work);
        work[i] = original - step;
        let minus = f(&work);
        work[i] = original;
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Outcome of the midpoint convexity probe.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub pass: bool,
    /// Largest signed violation `f(mid) − ½(f(a) + f(b))` over the trials;
    /// nonpositive margins certify midpoint convexity on the sample.
    pub worst_margin: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Draws random strictly positive simplex pairs and checks the midpoint
/// inequality of the relaxed objective.
#[allow(clippy::too_many_arguments)]
pub fn convexity_probe(
    grid: &GridSpec,
    terminals: &TerminalSet,
    plan: &MailingPlan,
    pexp: &PExponent,
    trials: usize,
    seed: u64,
    tol: f64,
    inner: &InnerOptions,
) -> ConvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.num_nodes();
    let draw = |rng: &mut ChaCha8Rng| -> SimplexWeights {
        // Dirichlet(1, …, 1) via normalized exponentials, floored away from
        // the boundary so every probe point is interior.
        let mut values: Vec<f64> =
            (0..n).map(|_| -math::ln(1.0 - rng.gen::<f64>()) + 1e-12).collect();
        let total: f64 = values.iter().sum();
        for v in values.iter_mut() {
            *v /= total;
        }
        SimplexWeights::from_normalized(values)
    };
    let objective = |m: &SimplexWeights| {
        crate::wasserstein::primal_objective(grid, terminals, plan, m, pexp, inner)
    };

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let mid = SimplexWeights::convex_combination(&a, &b, 0.5);
        let margin = objective(&mid) - 0.5 * (objective(&a) + objective(&b));
        if margin > worst {
            worst = margin;
        }
    }
    ConvexityReport { pass: worst <= tol, worst_margin: worst, trials, seed }
}

/// Numerically minimizes the transport cost over budgets by projected
/// gradient descent on the budget shares `u_e = |e| s(e)` (a simplex over the
/// flow-carrying edges), cross-checking the closed-form optimal budget.
pub fn budget_min_direct(
    tree: &EmbeddedTree,
    plan: &MailingPlan,
    alpha: f64,
    steps: usize,
) -> Result<OracleResult> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::ExponentOutOfRange(alpha));
    }
    let flows = compute_edge_flows(tree, plan)?;
    let active: Vec<usize> =
        (0..tree.num_edges()).filter(|&e| flows.total()[e] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::AllFlowsZero);
    }
    // H(u) = Σ coef_e · u_e^{−α} with coef_e = w_e |e|^{1+α}.
    let coef: Vec<f64> = active
        .iter()
        .map(|&e| flows.total()[e] * math::powf(tree.edge_length(e), 1.0 + alpha))
        .collect();
    let k = active.len();
    let objective = |u: &[f64]| -> f64 {
        let mut h = 0.0;
        for (c, &ue) in coef.iter().zip(u.iter()) {
            if ue <= 0.0 {
                return f64::INFINITY;
            }
            h += c * math::powf(ue, -alpha);
        }
        h
    };

    let mut u = vec![1.0 / k as f64; k];
    let mut value = objective(&u);
    let mut eta = 0.1;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..steps {
        iterations += 1;
        let grad: Vec<f64> = coef
            .iter()
            .zip(u.iter())
            .map(|(c, &ue)| -alpha * c * math::powf(ue, -alpha - 1.0))
            .collect();
        eta *= 2.0;
        let mut accepted = false;
        for _ in 0..80 {
            let trial_raw: Vec<f64> =
                u.iter().zip(grad.iter()).map(|(&ue, &g)| ue - eta * g).collect();
            let trial = project_simplex(&trial_raw);
            let trial_value = objective(&trial);
            if trial_value < value {
                u = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
    }

    let mut s = vec![0.0; tree.num_edges()];
    for (idx, &e) in active.iter().enumerate() {
        s[e] = u[idx] / tree.edge_length(e);
    }
    Ok(OracleResult {
        value,
        argument: s,
        iterations,
        method: OracleMethod::BudgetProjectedDescent,
        seed: None,
        converged,
    })
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &vj) in sorted.iter().enumerate() {
        cumulative += vj;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if vj - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}
