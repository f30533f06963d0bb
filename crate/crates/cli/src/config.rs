//! Run configuration: schema, validation with field paths, terminal
//! snapping, and defaults.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use gilbert_core::extract::DEFAULT_TAU;
use gilbert_core::solver::{AnnealSchedule, ConstantsMode, SolverOptions};
use gilbert_core::wasserstein::PExponent;
use gilbert_core::{GridSpec, MailingPlan, TerminalSet};

pub const CONFIG_SCHEMA: &str = "gilbert-config/1";

/// On-disk configuration. Exactly one of `sigma` and `p` must be given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_config_schema")]
    pub schema: String,
    pub grid: GridSection,
    pub terminals: TerminalSection,
    pub plan: Vec<PlanEntrySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Explicit annealing schedule; the solver derives one from the instance
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extraction_tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_config_schema() -> String {
    CONFIG_SCHEMA.to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dims: Vec<usize>,
    pub spacing: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalSection {
    pub sources: Vec<Vec<f64>>,
    pub sinks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntrySection {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub eps_start: f64,
    pub decay: f64,
    pub eps_floor: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
}

/// Optional solver knobs with documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing_delta_rel: Option<f64>,
    /// "consistent" (default) or "paper-printed" (comparison runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_amplitude: Option<f64>,
}

/// Snap record for one terminal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapReport {
    pub kind: String,
    pub index: usize,
    pub requested: Vec<f64>,
    pub node: usize,
    pub snapped: Vec<f64>,
    pub distance: f64,
}

/// Fully validated and resolved run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub terminals: TerminalSet,
    pub plan: MailingPlan,
    pub pexp: PExponent,
    pub options: SolverOptions,
    pub tau: f64,
    pub output_dir: PathBuf,
    pub snaps: Vec<SnapReport>,
    /// Normalized configuration echoed into results.
    pub echo: ConfigFile,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    resolve_config(file)
}

pub fn resolve_config(file: ConfigFile) -> Result<RunConfig> {
    if file.schema != CONFIG_SCHEMA {
        bail!("schema: expected {CONFIG_SCHEMA:?}, got {:?}", file.schema);
    }
    let grid = GridSpec::new(&file.grid.dims, file.grid.spacing)
        .map_err(|e| anyhow!("grid: {e}"))?;

    let pexp = match (file.sigma, file.p) {
        (Some(_), Some(_)) => bail!("sigma, p: mutually exclusive, give exactly one"),
        (None, None) => bail!("sigma, p: one of the two is required"),
        (Some(sigma), None) => {
            PExponent::from_sigma(sigma).map_err(|e| anyhow!("sigma: {e}"))?
        }
        (None, Some(p)) => PExponent::from_p(p).map_err(|e| anyhow!("p: {e}"))?,
    };

    let mut snaps = Vec::new();
    let mut snap_list = |kind: &str, coords: &[Vec<f64>]| -> Result<Vec<usize>> {
        let mut nodes = Vec::with_capacity(coords.len());
        for (index, point) in coords.iter().enumerate() {
            let (node, distance) = grid.nearest_node(point).ok_or_else(|| {
                anyhow!(
                    "terminals.{kind}[{index}]: point has {} coordinates, grid has {} axes",
                    point.len(),
                    grid.dims().len()
                )
            })?;
            snaps.push(SnapReport {
                kind: kind.to_string(),
                index,
                requested: point.clone(),
                node,
                snapped: grid.position(node),
                distance,
            });
            nodes.push(node);
        }
        Ok(nodes)
    };
    let sources = snap_list("sources", &file.terminals.sources)?;
    let sinks = snap_list("sinks", &file.terminals.sinks)?;
    let terminals =
        TerminalSet::new(&grid, sources, sinks).map_err(|e| anyhow!("terminals: {e}"))?;

    let entries = file
        .plan
        .iter()
        .map(|e| gilbert_core::grid::PlanEntry { source: e.source, sink: e.sink, mass: e.mass })
        .collect();
    let plan = MailingPlan::new(
        file.terminals.sources.len(),
        file.terminals.sinks.len(),
        entries,
    )
    .map_err(|e| anyhow!("plan: {e}"))?;

    let mut options = SolverOptions::default_for(&pexp);
    if let Some(s) = &file.schedule {
        let schedule = AnnealSchedule {
            eps_start: s.eps_start,
            decay: s.decay,
            eps_floor: s.eps_floor,
            inner_tol: s.inner_tol,
            max_iters: s.max_iters,
        };
        schedule.validate().map_err(|e| anyhow!("schedule: {e}"))?;
        options.schedule = Some(schedule);
    }
    if let Some(s) = &file.solver {
        if let Some(v) = s.decay {
            if !(v > 0.0 && v < 1.0) {
                bail!("solver.decay: must lie in (0, 1), got {v}");
            }
            options.decay = v;
        }
        if let Some(v) = s.floor_rel {
            if !(v > 0.0) {
                bail!("solver.floor_rel: must be positive, got {v}");
            }
            options.floor_rel = v;
        }
        if let Some(v) = s.tol_rel {
            if !(v > 0.0) {
                bail!("solver.tol_rel: must be positive, got {v}");
            }
            options.tol_rel = v;
        }
        if let Some(v) = s.max_iters {
            if v == 0 {
                bail!("solver.max_iters: must be positive");
            }
            options.max_iters = v;
        }
        if let Some(v) = s.smoothing_delta_rel {
            if !(v > 0.0) {
                bail!("solver.smoothing_delta_rel: must be positive, got {v}");
            }
            options.delta_rel = v;
        }
        if let Some(v) = &s.constants {
            options.constants = match v.as_str() {
                "consistent" => ConstantsMode::Consistent,
                "paper-printed" => ConstantsMode::PaperPrinted,
                other => bail!(
                    "solver.constants: expected \"consistent\" or \"paper-printed\", got {other:?}"
                ),
            };
        }
        if let Some(v) = s.init_amplitude {
            options.init_amplitude = v;
        }
    }
    options.seed = file.seed;

    let tau = file.extraction_tau.unwrap_or(DEFAULT_TAU);
    if !(tau > 0.0 && tau <= 1.0) {
        bail!("extraction_tau: must lie in (0, 1], got {tau}");
    }

    let output_dir = PathBuf::from(file.output_dir.clone().unwrap_or_else(|| "out".to_string()));

    Ok(RunConfig {
        grid,
        terminals,
        plan,
        pexp,
        options,
        tau,
        output_dir,
        snaps,
        echo: file,
    })
}
