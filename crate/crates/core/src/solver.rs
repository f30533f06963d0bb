//! Entropic solver for the relaxed network problem.
//!
//! The outer minimization of `Σ_{i,j} π(i,j) max_φ W(m, φ; x_i, y_j)` over the
//! simplex is regularized by `(εp/p′) Σ_z m(z) ln m(z)`. For fixed potentials
//! the regularized minimum over `m` is the softmax
//!
//! ```text
//! m(z) = exp(c(z)/ε) / Σ_{z′} exp(c(z′)/ε),   c(z) = Σ_{i,j} π(i,j) Dφ_ij(z),
//! ```
//!
//! which substituted back gives a single concave dual to maximize over the
//! family of potentials:
//!
//! ```text
//! Hε({φ}) = −(εp/p′) ln Σ_z exp(c(z)/ε) + p Σ_{i,j} π(i,j) (φ_ij(x_i) − φ_ij(y_j)).
//! ```
//!
//! The triple (dual, softmax, entropic primal) above is mutually consistent:
//! at any `{φ}` the dual equals the entropic primal evaluated at the softmax
//! point, which the diagnostics track as the `consistency_gap`. The solver
//! anneals ε downward, warm-starting each stage, and recovers `m` at the
//! floor. [`ConstantsMode::PaperPrinted`] switches to an alternative constant
//! convention (softmax at `2ε`, no `p/p′` prefactor on the log-sum-exp) for
//! comparison runs; that convention does not satisfy the consistency
//! identity and is never the default.
//!
//! Everything is deterministic for a fixed seed. Per-pair energy and gradient
//! blocks may be computed concurrently through a [`BlockExecutor`]; results
//! are reduced in pair order, so the outcome is identical for any worker
//! count.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::grid::{GridSpec, MailingPlan, NodeIndex, SimplexWeights, TerminalSet};
use crate::math;
use crate::wasserstein::{
    dphi, grounded_laplacian_solve, inner_max, penalty_curv, penalty_grad, InnerOptions,
    PExponent,
};
use crate::Result;

/// Dual potential attached to one plan pair, gauged to zero at its sink node.
#[derive(Debug, Clone)]
pub struct Potential {
    values: Vec<f64>,
    pair: (usize, usize),
    source_node: NodeIndex,
    sink_node: NodeIndex,
}

impl Potential {
    /// Stores a potential, shifting it so the sink node sits exactly at zero.
    pub fn new(
        mut values: Vec<f64>,
        pair: (usize, usize),
        source_node: NodeIndex,
        sink_node: NodeIndex,
    ) -> Result<Self> {
        for (node, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NegativeWeight { node, value: v });
            }
        }
        let shift = values[sink_node];
        for v in values.iter_mut() {
            *v -= shift;
        }
        Ok(Potential { values, pair, source_node, sink_node })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Plan pair `(i, j)` this potential belongs to.
    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn source_node(&self) -> NodeIndex {
        self.source_node
    }

    pub fn sink_node(&self) -> NodeIndex {
        self.sink_node
    }
}

/// One potential per active plan pair, in plan-entry order.
#[derive(Debug, Clone)]
pub struct PotentialSet {
    entries: Vec<Potential>,
}

impl PotentialSet {
    pub fn zeros(grid: &GridSpec, terminals: &TerminalSet, plan: &MailingPlan) -> Self {
        let entries = plan
            .entries()
            .iter()
            .map(|e| Potential {
                values: vec![0.0; grid.num_nodes()],
                pair: (e.source, e.sink),
                source_node: terminals.source_node(e.source),
                sink_node: terminals.sink_node(e.sink),
            })
            .collect();
        PotentialSet { entries }
    }

    /// Builds a set from per-pair value vectors aligned with the plan
    /// entries; each vector is gauged to zero at its sink node.
    pub fn from_values(
        grid: &GridSpec,
        terminals: &TerminalSet,
        plan: &MailingPlan,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != plan.entries().len() {
            return Err(Error::EdgeLengthMismatch {
                expected: plan.entries().len(),
                got: values.len(),
            });
        }
        let entries = plan
            .entries()
            .iter()
            .zip(values)
            .map(|(e, vals)| {
                if vals.len() != grid.num_nodes() {
                    return Err(Error::WeightsLengthMismatch {
                        expected: grid.num_nodes(),
                        got: vals.len(),
                    });
                }
                Potential::new(
                    vals,
                    (e.source, e.sink),
                    terminals.source_node(e.source),
                    terminals.sink_node(e.sink),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PotentialSet { entries })
    }

    /// Exact inner maximizers at the uniform measure: the warm start.
    pub fn warm_start(
        grid: &GridSpec,
        terminals: &TerminalSet,
        plan: &MailingPlan,
        pexp: &PExponent,
        inner: &InnerOptions,
    ) -> Self {
        let uniform = SimplexWeights::uniform(grid);
        let entries = plan
            .entries()
            .iter()
            .map(|e| {
                let source_node = terminals.source_node(e.source);
                let sink_node = terminals.sink_node(e.sink);
                let solve = inner_max(grid, &uniform, source_node, sink_node, pexp, inner);
                Potential {
                    values: solve.potential,
                    pair: (e.source, e.sink),
                    source_node,
                    sink_node,
                }
            })
            .collect();
        PotentialSet { entries }
    }

    /// Adds a seeded gauge-respecting random perturbation, scaled by
    /// `amplitude` times each potential's own magnitude.
    pub fn perturbed(&self, seed: u64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = self
            .entries
            .iter()
            .map(|pot| {
                let scale = amplitude
                    * pot.values.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
                let mut values: Vec<f64> = pot
                    .values
                    .iter()
                    .map(|&v| v + scale * (rng.gen::<f64>() - 0.5))
                    .collect();
                let shift = values[pot.sink_node];
                for v in values.iter_mut() {
                    *v -= shift;
                }
                Potential {
                    values,
                    pair: pot.pair,
                    source_node: pot.source_node,
                    sink_node: pot.sink_node,
                }
            })
            .collect();
        PotentialSet { entries }
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Geometric ε schedule and per-stage ascent controls.
#[derive(Debug, Clone, Copy)]
pub struct AnnealSchedule {
    pub eps_start: f64,
    pub decay: f64,
    pub eps_floor: f64,
    /// Gradient sup-norm target per stage.
    pub inner_tol: f64,
    /// Ascent iteration budget per stage.
    pub max_iters: usize,
}

impl AnnealSchedule {
    /// Defaults: start 1.0, halve per stage down to 1e−3, tolerance `1e−6·p`,
    /// 2000 iterations per stage.
    pub fn default_for(pexp: &PExponent) -> Self {
        AnnealSchedule {
            eps_start: 1.0,
            decay: 0.5,
            eps_floor: 1e-3,
            inner_tol: 1e-6 * pexp.p(),
            max_iters: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_start > 0.0) || !self.eps_start.is_finite() {
            return Err(Error::BadSchedule("eps_start must be positive"));
        }
        if !(self.eps_floor > 0.0) {
            return Err(Error::BadSchedule("eps_floor must be positive"));
        }
        if self.eps_start < self.eps_floor {
            return Err(Error::BadSchedule("eps_start must be at least eps_floor"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::BadSchedule("decay factor must lie in (0, 1)"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::BadSchedule("inner tolerance must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::BadSchedule("max_iters must be positive"));
        }
        Ok(())
    }

    /// Strictly decreasing ε values, ending exactly at the floor.
    pub fn stages(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut eps = self.eps_start;
        while eps > self.eps_floor * (1.0 + 1e-12) {
            out.push(eps);
            eps *= self.decay;
        }
        out.push(self.eps_floor);
        out
    }
}

/// Constant conventions for the softmax / dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstantsMode {
    /// The mutually consistent triple; the consistency gap is an exact
    /// identity and is enforced as a correctness gate.
    #[default]
    Consistent,
    /// Softmax at `2ε` and a bare `−ε ln Σ exp` dual, for comparison runs
    /// only. The consistency gate does not apply.
    PaperPrinted,
}

/// Solver configuration.
///
/// Potentials start from the exact inner maximizers at the uniform measure,
/// which puts them on the correct scale; a seed adds a random perturbation on
/// top for uniqueness probes.
///
/// By default the ε schedule is instance-derived: annealing starts above the
/// warm-start energy scale `max c` (below it the first softmax is already a
/// hard argmax and annealing does nothing) and stops once ε falls under
/// `floor_rel` times the current objective scale. Tolerances follow the
/// objective scale for the same reason: absolute targets are not meaningful
/// across instances whose values range from `O(1)` to `O(10^20)`.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Explicit ε schedule with absolute floor and tolerance; overrides the
    /// instance-derived one.
    pub schedule: Option<AnnealSchedule>,
    /// Multiplier applied to ε between stages (derived schedule).
    pub decay: f64,
    /// Annealing stops once `ε ≤ floor_rel · max(1, |objective scale|)`.
    pub floor_rel: f64,
    /// Per-stage gradient target `tol_rel · p · max(1, |objective scale|)`.
    pub tol_rel: f64,
    /// Ascent iteration budget per stage (derived schedule).
    pub max_iters: usize,
    /// Relative smoothing width for `p > 2`, scaled per stage by the typical
    /// potential increment and annealed with ε. Ignored when `p ≤ 2`.
    pub delta_rel: f64,
    pub constants: ConstantsMode,
    /// Seed for a random perturbation of the warm start; deterministic
    /// warm start alone when absent.
    pub seed: Option<u64>,
    /// Relative amplitude of the random perturbation.
    pub init_amplitude: f64,
}

impl SolverOptions {
    pub fn default_for(_pexp: &PExponent) -> Self {
        SolverOptions {
            schedule: None,
            decay: 0.5,
            floor_rel: 1e-3,
            tol_rel: 1e-6,
            max_iters: 2000,
            delta_rel: 1e-3,
            constants: ConstantsMode::Consistent,
            seed: None,
            init_amplitude: 0.5,
        }
    }
}

/// Per-stage solve record.
#[derive(Debug, Clone)]
pub struct StageDiagnostics {
    pub eps: f64,
    /// Smoothing width used during the stage (zero for `p ≤ 2`).
    pub delta: f64,
    pub dual_value: f64,
    /// Dual value with the entropy offset `(εp/p′) ln |Z|` added back, which
    /// makes values comparable across ε stages.
    pub dual_value_offset: f64,
    pub grad_sup_norm: f64,
    /// Relaxed objective at the recovered weights.
    pub primal_value: f64,
    /// Entropic primal `Σ π W(m, φ) + (εp/p′) Σ m ln m` at the softmax point.
    pub entropic_primal: f64,
    /// `|dual − entropic primal|`; an exact identity under
    /// [`ConstantsMode::Consistent`], so a large gap indicates a bug.
    pub consistency_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Full solve record: one entry per ε stage.
#[derive(Debug, Clone)]
pub struct SolveDiagnostics {
    /// The schedule actually used (explicit or instance-derived).
    pub schedule: AnnealSchedule,
    pub stages: Vec<StageDiagnostics>,
    /// False when any stage exhausted its iteration budget or the
    /// consistency gate failed.
    pub converged: bool,
}

/// Output of [`solve`]: recovered weights, final potentials, diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub weights: SimplexWeights,
    pub potentials: PotentialSet,
    pub diagnostics: SolveDiagnostics,
}

/// Strategy for evaluating independent per-pair blocks. Implementations must
/// return blocks in index order; the solver reduces them serially, so results
/// do not depend on the worker count.
pub trait BlockExecutor: Sync {
    fn map_blocks(
        &self,
        count: usize,
        f: &(dyn Fn(usize) -> Vec<f64> + Sync),
    ) -> Vec<Vec<f64>>;
}

/// Runs blocks one after another on the calling thread.
pub struct SerialExecutor;

impl BlockExecutor for SerialExecutor {
    fn map_blocks(
        &self,
        count: usize,
        f: &(dyn Fn(usize) -> Vec<f64> + Sync),
    ) -> Vec<Vec<f64>> {
        (0..count).map(f).collect()
    }
}

/// Aggregated neighbor energy `c(z) = Σ_{i,j} π(i,j) Dφ_ij(z)`.
pub fn aggregate_energy(
    grid: &GridSpec,
    plan: &MailingPlan,
    potentials: &PotentialSet,
    pexp: &PExponent,
    delta: f64,
) -> Vec<f64> {
    let blocks: Vec<Vec<f64>> = potentials
        .potentials()
        .iter()
        .map(|pot| dphi(grid, pot.values(), pexp, delta))
        .collect();
    combine_energy(grid.num_nodes(), plan, &blocks)
}

fn combine_energy(n: usize, plan: &MailingPlan, blocks: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for (entry, block) in plan.entries().iter().zip(blocks.iter()) {
        for (cz, &dz) in c.iter_mut().zip(block.iter()) {
            *cz += entry.mass * dz;
        }
    }
    c
}

/// Softmax `m(z) ∝ exp(c(z)/ε)`, max-shifted so that adding a constant to the
/// energy changes nothing and no overflow can occur. Entries that underflow
/// are clamped to the smallest positive float, keeping the recovered point
/// strictly interior.
pub fn entropic_weights(energy: &[f64], eps: f64) -> SimplexWeights {
    let max = energy.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut values: Vec<f64> = energy.iter().map(|&c| math::exp((c - max) / eps)).collect();
    let mut total = math::CompensatedSum::default();
    for &v in values.iter() {
        total.add(v);
    }
    let total = total.value();
    for v in values.iter_mut() {
        *v = (*v / total).max(f64::MIN_POSITIVE);
    }
    SimplexWeights::from_normalized(values)
}

fn eps_effective(eps: f64, mode: ConstantsMode) -> f64 {
    match mode {
        ConstantsMode::Consistent => eps,
        ConstantsMode::PaperPrinted => 2.0 * eps,
    }
}

fn lse_prefactor(eps: f64, pexp: &PExponent, mode: ConstantsMode) -> f64 {
    match mode {
        ConstantsMode::Consistent => eps * pexp.p() / pexp.p_prime(),
        ConstantsMode::PaperPrinted => eps,
    }
}

/// Dual objective `Hε({φ})`; concave in the potentials.
pub fn dual_objective(
    grid: &GridSpec,
    plan: &MailingPlan,
    potentials: &PotentialSet,
    pexp: &PExponent,
    eps: f64,
    delta: f64,
    mode: ConstantsMode,
) -> f64 {
    let c = aggregate_energy(grid, plan, potentials, pexp, delta);
    dual_from_energy(&c, plan, potentials, pexp, eps, mode)
}

fn dual_from_energy(
    energy: &[f64],
    plan: &MailingPlan,
    potentials: &PotentialSet,
    pexp: &PExponent,
    eps: f64,
    mode: ConstantsMode,
) -> f64 {
    let eps_eff = eps_effective(eps, mode);
    let scaled: Vec<f64> = energy.iter().map(|&c| c / eps_eff).collect();
    let lse = math::log_sum_exp(&scaled);
    let mut linear = 0.0;
    for (entry, pot) in plan.entries().iter().zip(potentials.potentials().iter()) {
        linear += entry.mass * (pot.values()[pot.source_node()] - pot.values()[pot.sink_node()]);
    }
    -lse_prefactor(eps, pexp, mode) * lse + pexp.p() * linear
}

/// Gradient of [`dual_objective`] with respect to every potential, one block
/// per plan pair. The per-pair blocks each sum to zero (shift invariance).
pub fn dual_gradient(
    grid: &GridSpec,
    plan: &MailingPlan,
    potentials: &PotentialSet,
    pexp: &PExponent,
    eps: f64,
    delta: f64,
    mode: ConstantsMode,
) -> Vec<Vec<f64>> {
    let c = aggregate_energy(grid, plan, potentials, pexp, delta);
    let m = entropic_weights(&c, eps_effective(eps, mode));
    gradient_blocks(grid, plan, potentials, &m, pexp, delta, mode, &SerialExecutor).0
}

/// Shared gradient core: for pair `(i,j)`,
/// `∂Hε/∂φ_ij(u) = −κ π Σ_{v∈N(u)} k_uv g(φ(u) − φ(v)) + p π (1_{x_i} − 1_{y_j})`
/// with conductances `k_uv = m(u)/|N(u)| + m(v)/|N(v)|` at the softmax point
/// and `g` the penalty derivative (which carries the `p′` factor), so
/// `κ = p/p′` for the consistent triple and `1/2` for the printed constants.
///
/// Returns `(gradient blocks, preconditioned gradient blocks)`; the
/// preconditioner is the per-node diagonal curvature of the quadratic term,
/// with its dynamic range capped.
#[allow(clippy::too_many_arguments)]
fn gradient_blocks(
    grid: &GridSpec,
    plan: &MailingPlan,
    potentials: &PotentialSet,
    m: &SimplexWeights,
    pexp: &PExponent,
    delta: f64,
    mode: ConstantsMode,
    executor: &dyn BlockExecutor,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = grid.num_nodes();
    let pp = pexp.p_prime();
    let kappa = match mode {
        ConstantsMode::Consistent => pexp.p() / pp,
        ConstantsMode::PaperPrinted => 0.5,
    };
    let conductances: Vec<f64> = grid
        .edges()
        .iter()
        .map(|&(u, v)| {
            let (u, v) = (u as usize, v as usize);
            m.get(u) / grid.degree(u) as f64 + m.get(v) / grid.degree(v) as f64
        })
        .collect();
    let entries = plan.entries();
    let pots = potentials.potentials();
    let packed = executor.map_blocks(entries.len(), &|k| {
        let phi = pots[k].values();
        let mass = entries[k].mass;
        let mut block = vec![0.0; 2 * n];
        {
            let (grad, z) = block.split_at_mut(n);
            let mut weights = vec![0.0; grid.edges().len()];
            for (e, &(u, v)) in grid.edges().iter().enumerate() {
                let (u, v) = (u as usize, v as usize);
                let t = phi[u] - phi[v];
                let g = conductances[e] * penalty_grad(t, pp, delta);
                grad[u] -= kappa * mass * g;
                grad[v] += kappa * mass * g;
                let w = kappa * mass * conductances[e] * penalty_curv(t, pp, delta);
                weights[e] = if w.is_finite() { w } else { 0.0 };
            }
            grad[pots[k].source_node()] += pexp.p() * mass;
            grad[pots[k].sink_node()] -= pexp.p() * mass;
            // Precondition with the reweighted Laplacian (the quadratic
            // term's Hessian), the classical move for p-Laplacian problems.
            let grad_ref: &[f64] = grad;
            match grounded_laplacian_solve(grid, &weights, pots[k].sink_node(), grad_ref) {
                Some((solved, _retained)) => z.copy_from_slice(&solved),
                None => z.copy_from_slice(grad_ref),
            }
        }
        block
    });
    let mut grads = Vec::with_capacity(packed.len());
    let mut precons = Vec::with_capacity(packed.len());
    for mut block in packed {
        let precon = block.split_off(n);
        grads.push(block);
        precons.push(precon);
    }
    (grads, precons)
}

/// Entropic primal `Σ π W(m, φ) + (εp/p′) Σ m ln m`, evaluated through the
/// aggregated energy: `Σ_ij π Σ_z m Dφ_ij = Σ_z m c(z)`, so both sides of
/// the saddle identity share the same reduction of the energy terms and the
/// reported gap measures the identity rather than summation-order roundoff.
fn entropic_primal_from_energy(
    energy: &[f64],
    plan: &MailingPlan,
    potentials: &PotentialSet,
    m: &SimplexWeights,
    pexp: &PExponent,
    eps: f64,
) -> f64 {
    let mut weighted = math::CompensatedSum::default();
    for (&mz, &cz) in m.values().iter().zip(energy.iter()) {
        weighted.add(mz * cz);
    }
    let weighted = weighted.value();
    let mut linear = 0.0;
    for (entry, pot) in plan.entries().iter().zip(potentials.potentials().iter()) {
        linear += entry.mass * (pot.values()[pot.source_node()] - pot.values()[pot.sink_node()]);
    }
    let ratio = pexp.p() / pexp.p_prime();
    -ratio * weighted + pexp.p() * linear + eps * ratio * entropy_sum(m)
}

fn entropy_sum(m: &SimplexWeights) -> f64 {
    let mut total = math::CompensatedSum::default();
    for &v in m.values() {
        if v > 0.0 {
            total.add(v * math::ln(v));
        }
    }
    total.value()
}

/// Runs the annealed dual ascent serially.
pub fn solve(
    grid: &GridSpec,
    terminals: &TerminalSet,
    plan: &MailingPlan,
    pexp: &PExponent,
    options: &SolverOptions,
) -> Result<SolveOutput> {
    solve_with_executor(grid, terminals, plan, pexp, options, &SerialExecutor)
}

/// Runs the annealed dual ascent with a caller-supplied block executor.
///
/// For each ε the dual is maximized by conjugate ascent with Armijo
/// backtracking (halving factor 0.5, slope fraction 1e−4) from a warm start,
/// then the weights are recovered by [`entropic_weights`]. With a derived
/// schedule, ε keeps decaying until it falls below `floor_rel` times the
/// current objective scale, so instances whose values differ by many orders
/// of magnitude anneal equally deep in relative terms. Stages that exhaust
/// their iteration budget are recorded and the run continues; the final
/// output is flagged through `diagnostics.converged`.
pub fn solve_with_executor(
    grid: &GridSpec,
    terminals: &TerminalSet,
    plan: &MailingPlan,
    pexp: &PExponent,
    options: &SolverOptions,
    executor: &dyn BlockExecutor,
) -> Result<SolveOutput> {
    let n = grid.num_nodes();
    let mode = options.constants;
    let smoothing_active = pexp.p_prime() < 2.0;

    // Warm start: exact (p = 2) or ascended inner maximizers at the uniform
    // measure, putting every potential on the correct scale.
    let warm_inner = InnerOptions {
        delta: if smoothing_active { options.delta_rel } else { 0.0 },
        tol: 1e-8 * pexp.p(),
        max_iters: 4000,
    };
    let mut potentials = PotentialSet::warm_start(grid, terminals, plan, pexp, &warm_inner);
    if let Some(seed) = options.seed {
        potentials = potentials.perturbed(seed, options.init_amplitude);
    }

    let entries = plan.entries();
    let num_pairs = entries.len();
    let eval_energy = |pots: &PotentialSet, delta: f64| -> Vec<f64> {
        let blocks = executor.map_blocks(num_pairs, &|k| {
            dphi(grid, pots.potentials()[k].values(), pexp, delta)
        });
        combine_energy(n, plan, &blocks)
    };

    if let Some(explicit) = &options.schedule {
        explicit.validate()?;
    }
    // Scale estimate driving the derived annealing floor: the warm-start
    // objective to begin with, then the relaxed primal per stage.
    let mut objective_scale: f64 = {
        let mut linear = 0.0;
        for (entry, pot) in plan.entries().iter().zip(potentials.potentials().iter()) {
            linear += entry.mass
                * (pot.values()[pot.source_node()] - pot.values()[pot.sink_node()]);
        }
        linear.abs().max(1.0)
    };
    let (eps_start, decay, max_iters) = match &options.schedule {
        Some(s) => (s.eps_start, s.decay, s.max_iters),
        None => {
            let energy = eval_energy(&potentials, 0.0);
            let c_max = energy.iter().fold(0.0f64, |a, &b| a.max(b));
            ((2.0 * c_max).max(1.0), options.decay, options.max_iters)
        }
    };
    let tol = match &options.schedule {
        Some(s) => s.inner_tol,
        None => options.tol_rel * pexp.p(),
    };

    let mut records = Vec::new();
    let mut all_converged = true;
    let mut final_m = SimplexWeights::uniform(grid);
    let mut eps = eps_start;
    let mut at_floor = false;
    let mut realized_tol = 0.0;

    // Hard cap on stage count; the derived floor normally terminates the
    // annealing long before this.
    for _ in 0..400 {
        realized_tol = tol;
        // The smoothing width follows the typical potential increment, which
        // itself shrinks as the annealing descends; the relative bias stays
        // O(delta_rel²) throughout.
        let delta = if smoothing_active {
            let scale = potential_increment_scale(grid, &potentials).max(1.0);
            options.delta_rel * scale
        } else {
            0.0
        };

        let mut energy = eval_energy(&potentials, delta);
        let mut dual = dual_from_energy(&energy, plan, &potentials, pexp, eps, mode);
        let compute_step = |energy: &[f64], pots: &PotentialSet| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
            let m = entropic_weights(energy, eps_effective(eps, mode));
            gradient_blocks(grid, plan, pots, &m, pexp, delta, mode, executor)
        };

        // Diagonally preconditioned conjugate ascent (flexible
        // Polak–Ribière) with Armijo backtracking; first-order throughout.
        let (mut grads, mut precon) = compute_step(&energy, &potentials);
        let mut direction = precon.clone();
        let mut gz: f64 = dot_blocks(&grads, &precon);
        let mut grad_sup = sup_blocks(&grads);
        // The first trial displacement must be commensurate with the
        // potential scale, not with unity.
        let phi_scale = potential_increment_scale(grid, &potentials);
        let dir_scale = sup_blocks(&direction);
        let mut step = (phi_scale / dir_scale.max(1e-300)).max(1.0);
        let mut last_accepted_step = step;
        let mut iterations = 0;
        let mut converged = false;

        for _ in 0..max_iters {
            grad_sup = sup_blocks(&grads);
            if grad_sup < tol {
                converged = true;
                break;
            }
            let mut slope = dot_blocks(&grads, &direction);
            if slope <= 0.0 {
                direction = precon.clone();
                slope = gz;
            }
            if slope <= 0.0 {
                // Preconditioner froze every live coordinate; fall back to
                // the raw gradient.
                direction = grads.clone();
                slope = dot_blocks(&grads, &grads);
            }

            step *= 2.0;
            let mut accepted = false;
            for _ in 0..100 {
                let trial = step_potentials(&potentials, &direction, step);
                let trial_energy = eval_energy(&trial, delta);
                let trial_dual =
                    dual_from_energy(&trial_energy, plan, &trial, pexp, eps, mode);
                if trial_dual >= dual + 1e-4 * step * slope {
                    potentials = trial;
                    energy = trial_energy;
                    dual = trial_dual;
                    last_accepted_step = step;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
            if !accepted {
                // Line search exhausted: gains fell below the float
                // resolution of the dual, so this iterate is the certifiable
                // stage optimum. Accept it when the gradient sits at or below
                // the certification floor sqrt(2·resolution/step).
                let resolution = 1e-14 * (1.0 + dual.abs());
                let floor =
                    math::sqrt(2.0 * resolution / last_accepted_step.max(1e-300));
                converged = grad_sup <= floor.max(tol);
                step = last_accepted_step;
                break;
            }
            let (grads_next, precon_next) = compute_step(&energy, &potentials);
            let mut mixed = 0.0;
            for (bz, (bn, b)) in
                precon_next.iter().zip(grads_next.iter().zip(grads.iter()))
            {
                for (&z, (&gn, &g)) in bz.iter().zip(bn.iter().zip(b.iter())) {
                    mixed += z * (gn - g);
                }
            }
            let beta = (mixed / gz).max(0.0);
            for (d, bz) in direction.iter_mut().zip(precon_next.iter()) {
                for (dv, &z) in d.iter_mut().zip(bz.iter()) {
                    *dv = z + beta * *dv;
                }
            }
            gz = dot_blocks(&grads_next, &precon_next);
            grads = grads_next;
            precon = precon_next;
        }

        let m = entropic_weights(&energy, eps_effective(eps, mode));
        let ent_primal = entropic_primal_from_energy(&energy, plan, &potentials, &m, pexp, eps);
        let gap = (dual - ent_primal).abs();
        let inner_opts = InnerOptions { delta, tol, max_iters };
        let primal_value =
            primal_objective_warm(grid, terminals, plan, &m, pexp, &inner_opts, &potentials);
        let offset = lse_prefactor(eps, pexp, mode) * math::ln(n as f64);
        let gap_gate = 1e-8 * dual.abs().max(1.0);
        if !converged || (mode == ConstantsMode::Consistent && gap > gap_gate) {
            all_converged = false;
        }
        records.push(StageDiagnostics {
            eps,
            delta,
            dual_value: dual,
            dual_value_offset: dual + offset,
            grad_sup_norm: grad_sup,
            primal_value,
            entropic_primal: ent_primal,
            consistency_gap: gap,
            iterations,
            converged,
        });
        final_m = m;

        if primal_value.is_finite() {
            objective_scale = primal_value.max(1.0);
        }
        if at_floor {
            break;
        }
        let floor = match &options.schedule {
            Some(s) => s.eps_floor,
            None => options.floor_rel * objective_scale,
        };
        let next = eps * decay;
        if next <= floor {
            if eps <= floor * (1.0 + 1e-12) {
                break;
            }
            eps = floor;
            at_floor = true;
        } else {
            eps = next;
        }
    }

    let realized = AnnealSchedule {
        eps_start,
        decay,
        eps_floor: eps,
        inner_tol: realized_tol,
        max_iters,
    };
    Ok(SolveOutput {
        weights: final_m,
        potentials,
        diagnostics: SolveDiagnostics {
            schedule: realized,
            stages: records,
            converged: all_converged,
        },
    })
}

/// Relaxed objective at `m`, warm-starting each pair's inner ascent from the
/// current dual potential (which approximates the maximizer near the saddle).
fn primal_objective_warm(
    grid: &GridSpec,
    terminals: &TerminalSet,
    plan: &MailingPlan,
    m: &SimplexWeights,
    pexp: &PExponent,
    opts: &InnerOptions,
    potentials: &PotentialSet,
) -> f64 {
    let mut total = 0.0;
    for (entry, pot) in plan.entries().iter().zip(potentials.potentials().iter()) {
        let x = terminals.source_node(entry.source);
        let y = terminals.sink_node(entry.sink);
        if x == y {
            continue;
        }
        let solve = if pexp.is_quadratic() {
            inner_max(grid, m, x, y, pexp, opts)
        } else {
            let warm = crate::wasserstein::inner_max_warm(grid, m, x, y, pexp, opts, pot.values());
            if warm.value >= 0.0 || warm.value.is_infinite() {
                warm
            } else {
                // The warm start was worse than the zero potential; the cold
                // ascent is a valid (and here better) lower bound on the sup.
                inner_max(grid, m, x, y, pexp, opts)
            }
        };
        if solve.value.is_infinite() {
            return f64::INFINITY;
        }
        total += entry.mass * solve.value;
    }
    total
}

fn dot_blocks(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(&u, &v)| u * v).sum::<f64>())
        .sum()
}

fn sup_blocks(blocks: &[Vec<f64>]) -> f64 {
    blocks.iter().flat_map(|b| b.iter()).fold(0.0f64, |acc, &g| acc.max(g.abs()))
}

/// Typical per-edge potential increment, used to scale the smoothing width.
fn potential_increment_scale(grid: &GridSpec, potentials: &PotentialSet) -> f64 {
    let mut scale = 0.0f64;
    for pot in potentials.potentials() {
        let phi = pot.values();
        for &(u, v) in grid.edges() {
            scale = scale.max((phi[u as usize] - phi[v as usize]).abs());
        }
    }
    scale
}

fn step_potentials(potentials: &PotentialSet, grads: &[Vec<f64>], step: f64) -> PotentialSet {
    let entries = potentials
        .potentials()
        .iter()
        .zip(grads.iter())
        .map(|(pot, grad)| {
            let mut values: Vec<f64> =
                pot.values().iter().zip(grad.iter()).map(|(&f, &g)| f + step * g).collect();
            let shift = values[pot.sink_node()];
            for v in values.iter_mut() {
                *v -= shift;
            }
            Potential {
                values,
                pair: pot.pair(),
                source_node: pot.source_node(),
                sink_node: pot.sink_node(),
            }
        })
        .collect();
    PotentialSet { entries }
}
