//! Subcommand orchestration: solve, eval, oracle, render.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use gilbert_core::extract::extract_network;
use gilbert_core::oracle::{
    branch_point_search, budget_min_direct, convexity_probe, primal_min_direct,
};
use gilbert_core::solver::solve_with_executor;
use gilbert_core::trees::{
    compute_edge_flows, gilbert_cost, min_transport_cost, optimal_budget, EmbeddedTree,
};
use gilbert_core::wasserstein::{InnerOptions, PExponent};
use gilbert_core::{GridSpec, MailingPlan, TerminalSet};

use crate::config::RunConfig;
use crate::exec::ThreadedExecutor;
use crate::formats::{
    load_json, save_json, ExtractionRecord, OracleFile, PlanFile, ResultFile, TreeFile,
};
use crate::render::{render_svg, weights_csv, RenderStyle};
use crate::Outcome;

pub struct SolveArtifacts {
    pub result_path: PathBuf,
    pub summary_path: PathBuf,
    pub tree_path: Option<PathBuf>,
    pub outcome: Outcome,
    pub summary: String,
}

/// Runs the full pipeline and persists result, summary, and (when the
/// support is a tree) the extracted network in the exchange format.
pub fn run_solve(config: &RunConfig, out_override: Option<&Path>) -> Result<SolveArtifacts> {
    let out_dir = out_override.unwrap_or(&config.output_dir).to_path_buf();
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let executor = ThreadedExecutor::from_env();
    let output = solve_with_executor(
        &config.grid,
        &config.terminals,
        &config.plan,
        &config.pexp,
        &config.options,
        &executor,
    )
    .map_err(|e| anyhow!("solve: {e}"))?;

    let extraction = extract_network(
        &config.grid,
        &output.weights,
        &config.terminals,
        &config.plan,
        config.pexp.sigma(),
        config.tau,
        None,
    )
    .map_err(|e| anyhow!("extraction: {e}"))?;
    let record = ExtractionRecord::new(&extraction.report, &extraction.support, &extraction.outcome);

    let primal_value =
        output.diagnostics.stages.last().map(|s| s.primal_value).unwrap_or(f64::NAN);
    let result = ResultFile::from_solve(
        config.echo.clone(),
        config.snaps.clone(),
        &output,
        record,
        primal_value,
    );

    let result_path = out_dir.join("result.json");
    save_json(&result_path, &result)?;

    let tree_path = match &result.extraction.tree {
        Some(tree) => {
            let path = out_dir.join("tree.json");
            save_json(&path, tree)?;
            Some(path)
        }
        None => None,
    };

    let summary = solve_summary(config, &result, executor.workers());
    let summary_path = out_dir.join("summary.txt");
    std::fs::write(&summary_path, summary.as_bytes())
        .with_context(|| format!("writing {}", summary_path.display()))?;

    let outcome = if result.diagnostics.converged {
        Outcome::Success
    } else {
        Outcome::ConvergenceWarning
    };
    Ok(SolveArtifacts { result_path, summary_path, tree_path, outcome, summary })
}

fn solve_summary(config: &RunConfig, result: &ResultFile, workers: usize) -> String {
    let mut s = String::new();
    let dims = config
        .grid
        .dims()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x");
    let _ = writeln!(s, "grid {dims}, spacing {}", config.grid.spacing());
    let _ = writeln!(
        s,
        "exponents: p = {}, p' = {}, sigma = {}",
        config.pexp.p(),
        config.pexp.p_prime(),
        config.pexp.sigma()
    );
    let _ = writeln!(s, "plan: {} pairs, workers: {workers}", config.plan.entries().len());
    for snap in &config.snaps {
        if snap.distance > 0.0 {
            let _ = writeln!(
                s,
                "snapped {}[{}] {:?} -> node {} {:?} (distance {:.6})",
                snap.kind, snap.index, snap.requested, snap.node, snap.snapped, snap.distance
            );
        }
    }
    let d = &result.diagnostics;
    let _ = writeln!(
        s,
        "schedule: eps {:.3e} -> {:.3e} (decay {}), tol {:.2e}, {} stages, converged: {}",
        d.schedule.eps_start,
        d.schedule.eps_floor,
        d.schedule.decay,
        d.schedule.inner_tol,
        d.stages.len(),
        d.converged
    );
    if let Some(last) = d.stages.last() {
        let _ = writeln!(
            s,
            "final stage: eps {:.3e}, dual {:.6e}, primal {:.6e}, gap {:.2e}",
            last.eps, last.dual_value, last.primal_value, last.consistency_gap
        );
    }
    let e = &result.extraction;
    let _ = writeln!(
        s,
        "extraction: is_tree = {}, components = {}, cycles = {}, pruned leaves = {}",
        e.is_tree, e.component_count, e.cycle_count, e.pruned_leaves
    );
    if let (Some(grid_cost), Some(straight)) = (e.gilbert_cost_grid, e.gilbert_cost_straight) {
        let _ = writeln!(
            s,
            "extracted cost: grid-path {grid_cost:.6}, straight-line {straight:.6}"
        );
    }
    s
}

/// Evaluates a stored tree against a plan at the given concentration
/// exponent: flow table, costs, and the optimal budget.
pub fn run_eval(tree_path: &Path, plan_path: &Path, sigma: f64) -> Result<String> {
    let tree: EmbeddedTree = load_json::<TreeFile>(tree_path)?.into_tree()?;
    let plan: MailingPlan = load_json::<PlanFile>(plan_path)?.into_plan()?;
    if !(0.0..1.0).contains(&sigma) {
        bail!("sigma: must lie in [0, 1), got {sigma}");
    }

    let flows = compute_edge_flows(&tree, &plan).map_err(|e| anyhow!("flows: {e}"))?;
    let g = gilbert_cost(&tree, &plan, sigma).map_err(|e| anyhow!("cost: {e}"))?;

    let mut out = String::new();
    let _ = writeln!(out, "tree: {} vertices, {} edges", tree.num_vertices(), tree.num_edges());
    let _ = writeln!(out, "edge table (endpoints, length, flow w, optimal s):");
    let budget = if sigma > 0.0 {
        let alpha = 1.0 / sigma - 1.0;
        optimal_budget(&tree, &plan, alpha).ok()
    } else {
        None
    };
    for e in 0..tree.num_edges() {
        let (a, b) = tree.edges()[e];
        let srow = budget
            .as_ref()
            .map(|bd| format!("{:.6}", bd.per_unit_costs()[e]))
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(
            out,
            "  e{e}: ({a}, {b})  |e| = {:.6}  w = {:.6}  s = {srow}",
            tree.edge_length(e),
            flows.total()[e]
        );
    }
    let _ = writeln!(out, "kirchhoff residual: {:.3e}", flows.kirchhoff_residual(&tree, &plan));
    let _ = writeln!(out, "G (sigma = {sigma}) = {g:.12}");
    if sigma > 0.0 {
        let alpha = 1.0 / sigma - 1.0;
        match min_transport_cost(&tree, &plan, alpha) {
            Ok(h) => {
                let _ = writeln!(out, "H (alpha = {alpha}) = {h:.12}");
                let power = libm_powf(g, 1.0 + alpha);
                let _ = writeln!(
                    out,
                    "identity H = G^(1+alpha): {power:.12} (relative gap {:.3e})",
                    (h - power).abs() / h.abs().max(1e-300)
                );
            }
            Err(e) => {
                let _ = writeln!(out, "H: not defined ({e})");
            }
        }
    }
    Ok(out)
}

fn libm_powf(x: f64, y: f64) -> f64 {
    x.powf(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Primal,
    Star,
    Budget,
    Convexity,
}

impl std::str::FromStr for OracleMethod {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal" => Ok(OracleMethod::Primal),
            "star" => Ok(OracleMethod::Star),
            "budget" => Ok(OracleMethod::Budget),
            "convexity" => Ok(OracleMethod::Convexity),
            other => bail!(
                "method: expected one of primal|star|budget|convexity, got {other:?}"
            ),
        }
    }
}

pub struct OracleArtifacts {
    pub path: PathBuf,
    pub outcome: Outcome,
    pub summary: String,
}

/// Runs an independent reference computation on the configured instance.
pub fn run_oracle(config: &RunConfig, method: OracleMethod) -> Result<OracleArtifacts> {
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating output directory {}", config.output_dir.display()))?;
    let inner = InnerOptions::default();
    let (file, summary) = match method {
        OracleMethod::Primal => {
            let result = primal_min_direct(
                &config.grid,
                &config.terminals,
                &config.plan,
                &config.pexp,
                4000,
                &inner,
            );
            let summary = format!(
                "primal mirror descent: value {:.9e} after {} steps (converged: {})",
                result.value, result.iterations, result.converged
            );
            (OracleFile::from_result(&result), summary)
        }
        OracleMethod::Star => {
            let result = branch_point_search(
                &config.grid,
                &config.terminals,
                &config.plan,
                config.pexp.sigma(),
            )
            .map_err(|e| anyhow!("star search: {e}"))?;
            let summary = format!(
                "star search: minimum {:.9} at {:?} over {} nodes",
                result.value, result.argument, result.iterations
            );
            (OracleFile::from_result(&result), summary)
        }
        OracleMethod::Budget => {
            let (tree, hub) = best_star_tree(&config.grid, &config.terminals, &config.plan, &config.pexp)?;
            let alpha = config.pexp.alpha();
            let result = budget_min_direct(&tree, &config.plan, alpha, 20_000)
                .map_err(|e| anyhow!("budget descent: {e}"))?;
            let closed = min_transport_cost(&tree, &config.plan, alpha)
                .map_err(|e| anyhow!("closed form: {e}"))?;
            let summary = format!(
                "budget descent on the best star (hub {hub:?}): value {:.9e} vs closed form \
                 {closed:.9e} (relative gap {:.3e})",
                result.value,
                (result.value - closed).abs() / closed.abs().max(1e-300)
            );
            (OracleFile::from_result(&result), summary)
        }
        OracleMethod::Convexity => {
            let seed = config.options.seed.unwrap_or(0);
            let report = convexity_probe(
                &config.grid,
                &config.terminals,
                &config.plan,
                &config.pexp,
                100,
                seed,
                1e-9,
                &inner,
            );
            let summary = format!(
                "convexity probe: {} over {} trials, worst midpoint margin {:.3e}",
                if report.pass { "pass" } else { "FAIL" },
                report.trials,
                report.worst_margin
            );
            let file = OracleFile {
                schema: crate::formats::ORACLE_SCHEMA.to_string(),
                method: "convexity-probe".to_string(),
                value: report.worst_margin,
                argument: Vec::new(),
                iterations: report.trials,
                seed: Some(report.seed),
                converged: report.pass,
            };
            (file, summary)
        }
    };

    let name = match method {
        OracleMethod::Primal => "oracle_primal.json",
        OracleMethod::Star => "oracle_star.json",
        OracleMethod::Budget => "oracle_budget.json",
        OracleMethod::Convexity => "oracle_convexity.json",
    };
    let path = config.output_dir.join(name);
    save_json(&path, &file)?;
    let outcome = if file.converged { Outcome::Success } else { Outcome::ConvergenceWarning };
    Ok(OracleArtifacts { path, outcome, summary })
}

/// Star tree over the active terminals, hubbed at the exhaustive-search
/// minimizer; the reference instance for the budget oracle.
pub fn best_star_tree(
    grid: &GridSpec,
    terminals: &TerminalSet,
    plan: &MailingPlan,
    pexp: &PExponent,
) -> Result<(EmbeddedTree, Vec<f64>)> {
    let star = branch_point_search(grid, terminals, plan, pexp.sigma())
        .map_err(|e| anyhow!("star search: {e}"))?;
    let hub = star.argument.clone();

    // Unique terminal nodes; a terminal sitting on the hub maps to the hub
    // vertex itself.
    let mut points: Vec<Vec<f64>> = vec![hub.clone()];
    let mut edges = Vec::new();
    let vertex_for_node = |node: usize, points: &mut Vec<Vec<f64>>, edges: &mut Vec<(usize, usize)>| -> usize {
        let pos = grid.position(node);
        if pos == points[0] {
            return 0;
        }
        for (v, existing) in points.iter().enumerate() {
            if *existing == pos {
                return v;
            }
        }
        points.push(pos);
        let v = points.len() - 1;
        edges.push((0, v));
        v
    };
    let sources = terminals
        .sources()
        .iter()
        .map(|&node| Some(vertex_for_node(node, &mut points, &mut edges)))
        .collect();
    let sinks = terminals
        .sinks()
        .iter()
        .map(|&node| Some(vertex_for_node(node, &mut points, &mut edges)))
        .collect();
    let tree = EmbeddedTree::new(points, edges, sources, sinks)
        .map_err(|e| anyhow!("star tree: {e}"))?;
    Ok((tree, hub))
}

pub struct RenderArtifacts {
    pub svg_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Renders a stored result to SVG plus a CSV dump of the weights.
pub fn run_render(result_path: &Path, style: RenderStyle) -> Result<RenderArtifacts> {
    let result: ResultFile = load_json(result_path)?;
    if result.schema != crate::formats::RESULT_SCHEMA {
        bail!("schema: expected {:?}, got {:?}", crate::formats::RESULT_SCHEMA, result.schema);
    }
    let stem = result_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("result")
        .to_string();
    let dir = result_path.parent().unwrap_or_else(|| Path::new("."));
    let style_name = match style {
        RenderStyle::Heatmap => "heatmap",
        RenderStyle::Network => "network",
    };
    let svg_path = dir.join(format!("{stem}.{style_name}.svg"));
    let csv_path = dir.join(format!("{stem}.weights.csv"));
    std::fs::write(&svg_path, render_svg(&result, style)?)
        .with_context(|| format!("writing {}", svg_path.display()))?;
    std::fs::write(&csv_path, weights_csv(&result))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(RenderArtifacts { svg_path, csv_path })
}
