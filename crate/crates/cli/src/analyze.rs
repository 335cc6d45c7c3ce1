//! Price-free summary of a structural analysis, so that the rendering of an
//! affine image of a series is byte-identical to that of the original.

use std::fmt::Write;

use qgms_core::hierarchy::Violation;
use qgms_core::{
    Direction, Exact, ExactNode, ExactZone, HierarchyConfig, DetectorConfig, Scalar, StructuralRole,
};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Coefficients {
    pub efficiency: f64,
    pub retracement: f64,
    pub balance: f64,
    pub skew: f64,
    pub degenerate: bool,
}

#[derive(Debug, Serialize)]
pub struct NodeSummary {
    pub start: usize,
    pub end: usize,
    pub direction: Direction,
    pub level: usize,
    pub role: StructuralRole,
    pub coefficient: Coefficients,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeSummary>,
}

#[derive(Debug, Serialize)]
pub struct ViolationSummary {
    pub path: Vec<usize>,
    pub component: &'static str,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct ZoneSummary {
    pub bar_index: usize,
    pub expected_direction: qgms_core::Side,
    pub parent_path: Vec<usize>,
    pub parent_saturation: f64,
    pub child_saturation: f64,
}

#[derive(Debug, Serialize)]
pub struct Settings {
    pub levels: usize,
    pub rho: f64,
    pub gamma: f64,
    pub min_bars: usize,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub bars: usize,
    pub settings: Settings,
    pub node_count: usize,
    pub tree: Vec<NodeSummary>,
    pub violations: Vec<ViolationSummary>,
    pub zones: Vec<ZoneSummary>,
}

fn summarize(node: &ExactNode) -> NodeSummary {
    let c = &node.coefficient;
    NodeSummary {
        start: node.segment.start_index,
        end: node.segment.end_index,
        direction: node.segment.direction,
        level: node.level,
        role: node.role,
        coefficient: Coefficients {
            efficiency: c.efficiency.to_f64(),
            retracement: c.retracement.to_f64(),
            balance: c.balance.to_f64(),
            skew: c.skew.to_f64(),
            degenerate: c.degenerate,
        },
        children: node.children.iter().map(summarize).collect(),
    }
}

pub fn report(
    bars: usize,
    hierarchy: &HierarchyConfig,
    detector: &DetectorConfig,
    roots: &[ExactNode],
    violations: &[Violation<Exact>],
    zones: &[ExactZone],
) -> AnalysisReport {
    AnalysisReport {
        bars,
        settings: Settings {
            levels: hierarchy.levels,
            rho: hierarchy.rho0,
            gamma: hierarchy.gamma,
            min_bars: hierarchy.min_bars,
            epsilon: detector.epsilon,
            delta: detector.delta,
        },
        node_count: roots.iter().map(ExactNode::node_count).sum(),
        tree: roots.iter().map(summarize).collect(),
        violations: violations
            .iter()
            .map(|v| ViolationSummary { path: v.path.clone(), component: v.component, score: v.score.to_f64() })
            .collect(),
        zones: zones
            .iter()
            .map(|z| ZoneSummary {
                bar_index: z.bar_index,
                expected_direction: z.expected_direction,
                parent_path: z.parent_path.clone(),
                parent_saturation: z.parent_saturation.to_f64(),
                child_saturation: z.child_saturation.to_f64(),
            })
            .collect(),
    }
}

fn lower<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn write_node(out: &mut String, node: &NodeSummary, depth: usize) {
    let c = &node.coefficient;
    let _ = writeln!(
        out,
        "{:indent$}[{}..{}] {:<5} {:<13} eff {:.3} ret {:.3} bal {:.3} skew {:.3}",
        "",
        node.start,
        node.end,
        lower(&node.direction),
        lower(&node.role),
        c.efficiency,
        c.retracement,
        c.balance,
        c.skew,
        indent = depth * 2
    );
    for child in &node.children {
        write_node(out, child, depth + 1);
    }
}

impl AnalysisReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} bars, {} nodes\n", self.bars, self.node_count);
        for root in &self.tree {
            write_node(&mut out, root, 0);
        }
        let _ = writeln!(out, "violations: {}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(out, "  {:?} {} {:.3}", v.path, v.component, v.score);
        }
        let _ = writeln!(out, "terminal zones: {}", self.zones.len());
        for z in &self.zones {
            let _ = writeln!(
                out,
                "  bar {} expect {} (parent {:?}, gauges {:.3}/{:.3})",
                z.bar_index,
                lower(&z.expected_direction),
                z.parent_path,
                z.parent_saturation,
                z.child_saturation
            );
        }
        out
    }
}
