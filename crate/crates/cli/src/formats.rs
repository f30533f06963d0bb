//! Versioned JSON file formats: results, trees, plans, oracle records.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use gilbert_core::extract::{ExtractionReport, PairOrbit, SupportGraph, TreeifyOutcome};
use gilbert_core::oracle::OracleResult;
use gilbert_core::solver::{SolveDiagnostics, SolveOutput, StageDiagnostics};
use gilbert_core::{EmbeddedTree, MailingPlan};

use crate::config::{ConfigFile, SnapReport};

pub const RESULT_SCHEMA: &str = "gilbert-result/1";
pub const TREE_SCHEMA: &str = "gilbert-tree/1";
pub const PLAN_SCHEMA: &str = "gilbert-plan/1";
pub const ORACLE_SCHEMA: &str = "gilbert-oracle/1";

/// Tree exchange format: vertex coordinates, edge index pairs, and the
/// vertices realizing each terminal (`null` when absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFile {
    #[serde(default = "default_tree_schema")]
    pub schema: String,
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize)>,
    pub sources: Vec<Option<usize>>,
    pub sinks: Vec<Option<usize>>,
}

fn default_tree_schema() -> String {
    TREE_SCHEMA.to_string()
}

impl TreeFile {
    pub fn from_tree(tree: &EmbeddedTree) -> Self {
        TreeFile {
            schema: TREE_SCHEMA.to_string(),
            vertices: tree.points().to_vec(),
            edges: tree.edges().to_vec(),
            sources: tree.source_vertices().to_vec(),
            sinks: tree.sink_vertices().to_vec(),
        }
    }

    pub fn into_tree(self) -> Result<EmbeddedTree> {
        if self.schema != TREE_SCHEMA {
            bail!("schema: expected {TREE_SCHEMA:?}, got {:?}", self.schema);
        }
        EmbeddedTree::new(self.vertices, self.edges, self.sources, self.sinks)
            .map_err(|e| anyhow!("tree: {e}"))
    }
}

/// Plan exchange format for `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    #[serde(default = "default_plan_schema")]
    pub schema: String,
    pub num_sources: usize,
    pub num_sinks: usize,
    pub entries: Vec<PlanFileEntry>,
}

fn default_plan_schema() -> String {
    PLAN_SCHEMA.to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFileEntry {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
}

impl PlanFile {
    pub fn from_plan(plan: &MailingPlan) -> Self {
        PlanFile {
            schema: PLAN_SCHEMA.to_string(),
            num_sources: plan.num_sources(),
            num_sinks: plan.num_sinks(),
            entries: plan
                .entries()
                .iter()
                .map(|e| PlanFileEntry { source: e.source, sink: e.sink, mass: e.mass })
                .collect(),
        }
    }

    pub fn into_plan(self) -> Result<MailingPlan> {
        if self.schema != PLAN_SCHEMA {
            bail!("schema: expected {PLAN_SCHEMA:?}, got {:?}", self.schema);
        }
        let entries = self
            .entries
            .iter()
            .map(|e| gilbert_core::grid::PlanEntry { source: e.source, sink: e.sink, mass: e.mass })
            .collect();
        MailingPlan::new(self.num_sources, self.num_sinks, entries)
            .map_err(|e| anyhow!("plan: {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub eps: f64,
    pub delta: f64,
    pub dual_value: f64,
    pub dual_value_offset: f64,
    pub grad_sup_norm: f64,
    pub primal_value: f64,
    pub entropic_primal: f64,
    pub consistency_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&StageDiagnostics> for StageRecord {
    fn from(s: &StageDiagnostics) -> Self {
        StageRecord {
            eps: s.eps,
            delta: s.delta,
            dual_value: s.dual_value,
            dual_value_offset: s.dual_value_offset,
            grad_sup_norm: s.grad_sup_norm,
            primal_value: s.primal_value,
            entropic_primal: s.entropic_primal,
            consistency_gap: s.consistency_gap,
            iterations: s.iterations,
            converged: s.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub schedule: ScheduleRecord,
    pub stages: Vec<StageRecord>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub eps_start: f64,
    pub decay: f64,
    pub eps_floor: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
}

impl From<&SolveDiagnostics> for DiagnosticsRecord {
    fn from(d: &SolveDiagnostics) -> Self {
        DiagnosticsRecord {
            schedule: ScheduleRecord {
                eps_start: d.schedule.eps_start,
                decay: d.schedule.decay,
                eps_floor: d.schedule.eps_floor,
                inner_tol: d.schedule.inner_tol,
                max_iters: d.schedule.max_iters,
            },
            stages: d.stages.iter().map(StageRecord::from).collect(),
            converged: d.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub source: usize,
    pub sink: usize,
    pub source_node: usize,
    pub sink_node: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairOrbitRecord {
    pub source: usize,
    pub sink: usize,
    pub grid_length: f64,
    pub straight_length: f64,
}

impl From<&PairOrbit> for PairOrbitRecord {
    fn from(o: &PairOrbit) -> Self {
        PairOrbitRecord {
            source: o.source,
            sink: o.sink,
            grid_length: o.grid_length,
            straight_length: o.straight_length,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub is_tree: bool,
    pub component_count: usize,
    pub cycle_count: usize,
    pub pruned_leaves: usize,
    pub pair_orbits: Vec<PairOrbitRecord>,
    pub gilbert_cost_grid: Option<f64>,
    pub gilbert_cost_straight: Option<f64>,
    pub oracle_value: Option<f64>,
    pub oracle_gap: Option<f64>,
    /// Support graph as grid nodes and index pairs into them.
    pub support_nodes: Vec<usize>,
    pub support_edges: Vec<(usize, usize)>,
    pub tree: Option<TreeFile>,
}

impl ExtractionRecord {
    pub fn new(report: &ExtractionReport, support: &SupportGraph, outcome: &TreeifyOutcome) -> Self {
        let tree = match outcome {
            TreeifyOutcome::Tree { tree, .. } => Some(TreeFile::from_tree(tree)),
            _ => None,
        };
        ExtractionRecord {
            is_tree: report.is_tree,
            component_count: report.component_count,
            cycle_count: report.cycle_count,
            pruned_leaves: report.pruned_leaves,
            pair_orbits: report.pair_orbits.iter().map(PairOrbitRecord::from).collect(),
            gilbert_cost_grid: report.gilbert_cost_grid,
            gilbert_cost_straight: report.gilbert_cost_straight,
            oracle_value: report.oracle_value,
            oracle_gap: report.oracle_gap,
            support_nodes: support.nodes().to_vec(),
            support_edges: support.edges().iter().map(|e| (e.a, e.b)).collect(),
            tree,
        }
    }
}

/// Persisted run result. Deterministic for a fixed config and seed: no
/// timestamps or environment data are stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema: String,
    pub config: ConfigFile,
    pub snaps: Vec<SnapReport>,
    pub weights: Vec<f64>,
    pub potentials: Vec<PotentialRecord>,
    pub diagnostics: DiagnosticsRecord,
    pub extraction: ExtractionRecord,
    /// Relaxed objective at the recovered weights.
    pub primal_value: f64,
}

impl ResultFile {
    pub fn from_solve(
        config: ConfigFile,
        snaps: Vec<SnapReport>,
        output: &SolveOutput,
        extraction: ExtractionRecord,
        primal_value: f64,
    ) -> Self {
        ResultFile {
            schema: RESULT_SCHEMA.to_string(),
            config,
            snaps,
            weights: output.weights.values().to_vec(),
            potentials: output
                .potentials
                .potentials()
                .iter()
                .map(|p| PotentialRecord {
                    source: p.pair().0,
                    sink: p.pair().1,
                    source_node: p.source_node(),
                    sink_node: p.sink_node(),
                    values: p.values().to_vec(),
                })
                .collect(),
            diagnostics: DiagnosticsRecord::from(&output.diagnostics),
            extraction,
            primal_value,
        }
    }
}

/// Persisted oracle output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleFile {
    pub schema: String,
    pub method: String,
    pub value: f64,
    pub argument: Vec<f64>,
    pub iterations: usize,
    pub seed: Option<u64>,
    pub converged: bool,
}

impl OracleFile {
    pub fn from_result(result: &OracleResult) -> Self {
        OracleFile {
            schema: ORACLE_SCHEMA.to_string(),
            method: result.method.to_string(),
            value: result.value,
            argument: result.argument.clone(),
            iterations: result.iterations,
            seed: result.seed,
            converged: result.converged,
        }
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing")?;
    std::fs::write(path, text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
