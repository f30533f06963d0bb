//! Static SVG renderings and CSV dumps of solved weights.
//!
//! Two styles: `heatmap` colors every grid cell by its weight on a log scale
//! (entropic weights span hundreds of orders of magnitude, so a linear ramp
//! would show a single dot) and overlays the extracted network; `network`
//! draws the support edges and the extracted tree on a plain background.
//! Both carry terminal markers: circles for sources, squares for sinks.

use anyhow::{bail, Result};
use std::fmt::Write as _;

use crate::formats::ResultFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    Heatmap,
    Network,
}

impl std::str::FromStr for RenderStyle {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heatmap" => Ok(RenderStyle::Heatmap),
            "network" => Ok(RenderStyle::Network),
            other => bail!("style: expected \"heatmap\" or \"network\", got {other:?}"),
        }
    }
}

const CELL: f64 = 14.0;
const MARGIN: f64 = 20.0;

/// Renders a solved result to an SVG document.
pub fn render_svg(result: &ResultFile, style: RenderStyle) -> Result<String> {
    let dims = &result.config.grid.dims;
    let (nx, ny) = match dims.len() {
        1 => (dims[0], 1),
        2 => (dims[0], dims[1]),
        _ => bail!("render supports 1-D and 2-D grids, got {} axes", dims.len()),
    };
    let width = MARGIN * 2.0 + ny as f64 * CELL;
    let height = MARGIN * 2.0 + nx as f64 * CELL;
    // Axis 0 runs down, axis 1 runs right; node (i, j) maps to cell centers.
    let cell_center = |node: usize| -> (f64, f64) {
        let (i, j) = (node / ny, node % ny);
        (MARGIN + (j as f64 + 0.5) * CELL, MARGIN + (i as f64 + 0.5) * CELL)
    };

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">"
    )?;
    writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>")?;

    if style == RenderStyle::Heatmap {
        let max_m = result.weights.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        for (node, &m) in result.weights.iter().enumerate() {
            let (cx, cy) = cell_center(node);
            let color = heat_color(m, max_m);
            writeln!(
                svg,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" \
                 fill=\"{color}\"/>",
                cx - CELL / 2.0,
                cy - CELL / 2.0,
            )?;
        }
    } else {
        // Support edges as the backdrop of the network view.
        for &(a, b) in &result.extraction.support_edges {
            let (x1, y1) = cell_center(result.extraction.support_nodes[a]);
            let (x2, y2) = cell_center(result.extraction.support_nodes[b]);
            writeln!(
                svg,
                "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" \
                 stroke=\"#bbbbbb\" stroke-width=\"2\"/>"
            )?;
        }
    }

    // Extracted network overlay in physical coordinates.
    if let Some(tree) = &result.extraction.tree {
        let spacing = result.config.grid.spacing;
        let to_px = |point: &[f64]| -> (f64, f64) {
            let i = point[0] / spacing;
            let j = if point.len() > 1 { point[1] / spacing } else { 0.0 };
            (MARGIN + (j + 0.5) * CELL, MARGIN + (i + 0.5) * CELL)
        };
        for &(a, b) in &tree.edges {
            let (x1, y1) = to_px(&tree.vertices[a]);
            let (x2, y2) = to_px(&tree.vertices[b]);
            writeln!(
                svg,
                "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" \
                 stroke=\"#d62728\" stroke-width=\"2.5\" stroke-linecap=\"round\"/>"
            )?;
        }
    }

    // Terminal markers.
    for snap in &result.snaps {
        let (cx, cy) = cell_center(snap.node);
        if snap.kind == "sources" {
            writeln!(
                svg,
                "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"{:.1}\" fill=\"none\" \
                 stroke=\"#1f77b4\" stroke-width=\"2.5\"/>",
                CELL * 0.45
            )?;
        } else {
            let r = CELL * 0.42;
            writeln!(
                svg,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
                 stroke=\"#2ca02c\" stroke-width=\"2.5\"/>",
                cx - r,
                cy - r,
                2.0 * r,
                2.0 * r
            )?;
        }
    }

    writeln!(svg, "</svg>")?;
    Ok(svg)
}

/// Log-scale heat ramp over eight decades below the maximum.
fn heat_color(m: f64, max_m: f64) -> String {
    let ratio = (m / max_m).max(1e-300);
    let t = (1.0 + ratio.log10() / 8.0).clamp(0.0, 1.0);
    // White -> yellow -> red -> near black.
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (255.0, 255.0 - 90.0 * u, 255.0 - 255.0 * u)
    } else {
        let u = (t - 0.5) / 0.5;
        (255.0 - 120.0 * u, 165.0 - 150.0 * u, 0.0)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// CSV dump of node weights: one row per node with its physical coordinates.
pub fn weights_csv(result: &ResultFile) -> String {
    let dims = &result.config.grid.dims;
    let spacing = result.config.grid.spacing;
    let axes = dims.len();
    let mut out = String::from("node");
    for a in 0..axes {
        let _ = write!(out, ",x{a}");
    }
    out.push_str(",m\n");
    let mut strides = vec![1usize; axes];
    for a in (0..axes.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    for (node, &m) in result.weights.iter().enumerate() {
        let _ = write!(out, "{node}");
        let mut rest = node;
        for a in 0..axes {
            let idx = rest / strides[a];
            rest %= strides[a];
            let _ = write!(out, ",{}", idx as f64 * spacing);
        }
        let _ = writeln!(out, ",{m}");
    }
    out
}
