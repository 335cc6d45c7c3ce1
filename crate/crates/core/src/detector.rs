//! Terminal-zone detection.
//!
//! A node `P` with children fires when
//! 1. `P` is within `epsilon` of the boundary of the region of its own parent's
//!    role (roots are scored against their own role's region),
//! 2. its last child `C` is within `delta` of the boundary of `A(P.role)`, and
//! 3. `C` moves in `P`'s direction.
//!
//! The zone sits at `P`'s last bar and expects a move against `P`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{admissible_region, saturation_score, RegionTable, StructureNode};
use crate::scalar::Scalar;
use crate::segmentation::Direction;

/// Expected direction of the move after a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Up,
    Down,
}

impl Side {
    /// `+1` for up, `-1` for down.
    pub fn sign(self) -> i8 {
        match self {
            Side::Up => 1,
            Side::Down => -1,
        }
    }

    pub fn reversal_of(direction: Direction) -> Option<Side> {
        match direction {
            Direction::Up => Some(Side::Down),
            Direction::Down => Some(Side::Up),
            Direction::Flat => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("epsilon and delta must lie in (0, 1)")]
    InvalidConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { epsilon: 0.15, delta: 0.15 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let ok = |v: f64| v > 0.0 && v < 1.0;
        if ok(self.epsilon) && ok(self.delta) {
            Ok(())
        } else {
            Err(DetectorError::InvalidConfig)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct TerminalZone<T: Scalar> {
    pub bar_index: usize,
    pub expected_direction: Side,
    pub parent_path: Vec<usize>,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub parent_saturation: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub child_saturation: T,
}

pub fn detect_terminal_zones<T: Scalar>(
    roots: &[StructureNode<T>],
    config: &DetectorConfig,
    table: &RegionTable,
) -> Result<Vec<TerminalZone<T>>, DetectorError> {
    config.validate()?;
    let parent_floor = T::one() - T::from_config(config.epsilon).expect("validated");
    let child_floor = T::one() - T::from_config(config.delta).expect("validated");
    let mut zones = Vec::new();
    for (i, root) in roots.iter().enumerate() {
        visit(root, root.role, &mut vec![i], &parent_floor, &child_floor, table, &mut zones);
    }
    zones.sort_by_key(|z| z.bar_index);
    Ok(zones)
}

fn visit<T: Scalar>(
    node: &StructureNode<T>,
    context_role: crate::encoding::StructuralRole,
    path: &mut Vec<usize>,
    parent_floor: &T,
    child_floor: &T,
    table: &RegionTable,
    zones: &mut Vec<TerminalZone<T>>,
) {
    if let (Some(last), Some(expected)) = (node.children.last(), Side::reversal_of(node.segment.direction)) {
        let own = saturation_score(&node.coefficient, &admissible_region(context_role, table));
        let child = saturation_score(&last.coefficient, &admissible_region(node.role, table));
        if let (Ok(own), Ok(child)) = (own, child) {
            if own >= *parent_floor && child >= *child_floor && last.segment.direction == node.segment.direction {
                zones.push(TerminalZone {
                    bar_index: node.segment.end_index,
                    expected_direction: expected,
                    parent_path: path.clone(),
                    parent_saturation: own,
                    child_saturation: child,
                });
            }
        }
    }
    for (i, child) in node.children.iter().enumerate() {
        path.push(i);
        visit(child, node.role, path, parent_floor, child_floor, table, zones);
        path.pop();
    }
}
