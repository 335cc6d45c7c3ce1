//! Multi-scale structure trees and the role-based admissibility constraint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{classify_role, encode_closes, RoleThresholds, StructuralCoefficient, StructuralRole, RETRACEMENT_CAP};
use crate::market_data::PriceSeries;
use crate::scalar::Scalar;
use crate::segmentation::{segment_closes, Segment, SegmentationConfig, SegmentationError};

pub const COMPONENT_NAMES: [&str; 4] = ["efficiency", "retracement", "balance", "skew"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("price series is empty")]
    EmptySeries,
    #[error("invalid hierarchy config: {0}")]
    InvalidConfig(String),
    #[error("admissible region has zero width on every component")]
    DegenerateRegion,
}

impl From<SegmentationError> for HierarchyError {
    fn from(e: SegmentationError) -> Self {
        match e {
            SegmentationError::EmptySeries => HierarchyError::EmptySeries,
            SegmentationError::InvalidConfig(msg) => HierarchyError::InvalidConfig(msg),
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }
}

/// Box in coefficient space, one interval per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    pub efficiency: Interval,
    pub retracement: Interval,
    pub balance: Interval,
    pub skew: Interval,
}

impl RegionBounds {
    pub const FULL: RegionBounds = RegionBounds {
        efficiency: Interval::new(0.0, 1.0),
        retracement: Interval::new(0.0, RETRACEMENT_CAP),
        balance: Interval::new(0.0, 1.0),
        skew: Interval::new(0.0, 1.0),
    };

    pub fn intervals(&self) -> [Interval; 4] {
        [self.efficiency, self.retracement, self.balance, self.skew]
    }

    pub fn validate(&self) -> Result<(), HierarchyError> {
        for ((iv, global), name) in self.intervals().iter().zip(Self::FULL.intervals()).zip(COMPONENT_NAMES) {
            if !(iv.lo <= iv.hi && iv.lo >= global.lo && iv.hi <= global.hi) {
                return Err(HierarchyError::InvalidConfig(format!(
                    "{name} interval [{}, {}] must be ordered and within [{}, {}]",
                    iv.lo, iv.hi, global.lo, global.hi
                )));
            }
        }
        Ok(())
    }
}

/// Admissible region per parent role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionTable {
    pub impulsive: RegionBounds,
    pub corrective: RegionBounds,
    pub consolidative: RegionBounds,
}

impl Default for RegionTable {
    fn default() -> Self {
        RegionTable {
            impulsive: RegionBounds {
                efficiency: Interval::new(0.1, 1.0),
                retracement: Interval::new(0.0, 2.0),
                balance: Interval::new(0.2, 1.0),
                skew: Interval::new(0.0, 1.0),
            },
            corrective: RegionBounds {
                efficiency: Interval::new(0.0, 0.9),
                retracement: Interval::new(0.0, 4.0),
                ..RegionBounds::FULL
            },
            consolidative: RegionBounds {
                efficiency: Interval::new(0.0, 0.7),
                retracement: Interval::new(0.0, 4.0),
                ..RegionBounds::FULL
            },
        }
    }
}

impl RegionTable {
    pub fn bounds(&self, role: StructuralRole) -> &RegionBounds {
        match role {
            StructuralRole::Impulsive => &self.impulsive,
            StructuralRole::Corrective => &self.corrective,
            StructuralRole::Consolidative => &self.consolidative,
        }
    }

    pub fn validate(&self) -> Result<(), HierarchyError> {
        StructuralRole::ALL.iter().try_for_each(|r| self.bounds(*r).validate())
    }
}

/// A region converted into the analysis scalar, with its center and half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleRegion<T> {
    pub lo: [T; 4],
    pub hi: [T; 4],
    pub center: [T; 4],
    pub halfwidth: [T; 4],
}

impl<T: Scalar> AdmissibleRegion<T> {
    pub fn from_bounds(bounds: &RegionBounds) -> Self {
        let conv = |v: f64| T::from_config(v).expect("finite bound");
        let two = T::from_count(2);
        let lo = bounds.intervals().map(|iv| conv(iv.lo));
        let hi = bounds.intervals().map(|iv| conv(iv.hi));
        let center = std::array::from_fn(|k| (lo[k].clone() + hi[k].clone()) / two.clone());
        let halfwidth = std::array::from_fn(|k| (hi[k].clone() - lo[k].clone()) / two.clone());
        AdmissibleRegion { lo, hi, center, halfwidth }
    }

    pub fn contains(&self, c: &StructuralCoefficient<T>) -> bool {
        c.components().iter().enumerate().all(|(k, v)| **v >= self.lo[k] && **v <= self.hi[k])
    }
}

pub fn admissible_region<T: Scalar>(parent_role: StructuralRole, table: &RegionTable) -> AdmissibleRegion<T> {
    AdmissibleRegion::from_bounds(table.bounds(parent_role))
}

/// Box gauge with the component attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Saturation<T> {
    pub score: T,
    pub component: usize,
}

/// `max_k |c_k - center_k| / halfwidth_k` over components with non-zero half-width:
/// 0 at the center, 1 on the boundary, above 1 outside.
pub fn saturation<T: Scalar>(
    c: &StructuralCoefficient<T>,
    region: &AdmissibleRegion<T>,
) -> Result<Saturation<T>, HierarchyError> {
    let mut best: Option<Saturation<T>> = None;
    for (k, value) in c.components().into_iter().enumerate() {
        if region.halfwidth[k].is_zero() {
            continue;
        }
        let score = (value.clone() - region.center[k].clone()).abs() / region.halfwidth[k].clone();
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(Saturation { score, component: k });
        }
    }
    best.ok_or(HierarchyError::DegenerateRegion)
}

pub fn saturation_score<T: Scalar>(c: &StructuralCoefficient<T>, region: &AdmissibleRegion<T>) -> Result<T, HierarchyError> {
    saturation(c, region).map(|s| s.score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub levels: usize,
    /// Threshold of the finest level.
    pub rho0: f64,
    /// Threshold ratio between consecutive levels.
    pub gamma: f64,
    pub min_bars: usize,
    pub thresholds: RoleThresholds,
    pub regions: RegionTable,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            levels: 3,
            rho0: 0.382,
            gamma: 1.6,
            min_bars: 2,
            thresholds: RoleThresholds::default(),
            regions: RegionTable::default(),
        }
    }
}

impl HierarchyConfig {
    /// Threshold used at `level` (0 = finest).
    pub fn rho_at(&self, level: usize) -> f64 {
        self.rho0 * self.gamma.powi(level as i32)
    }

    pub fn segmentation_at(&self, level: usize) -> SegmentationConfig {
        SegmentationConfig { rho: self.rho_at(level), min_bars: self.min_bars }
    }

    pub fn validate(&self) -> Result<(), HierarchyError> {
        if self.levels < 1 {
            return Err(HierarchyError::InvalidConfig("levels must be at least 1".into()));
        }
        if self.gamma.is_nan() || self.gamma <= 1.0 {
            return Err(HierarchyError::InvalidConfig(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        for level in 0..self.levels {
            self.segmentation_at(level).validate().map_err(|e| {
                HierarchyError::InvalidConfig(format!("level {level}: {e} (rho0 * gamma^level must stay below 1)"))
            })?;
        }
        self.regions.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct StructureNode<T: Scalar> {
    pub segment: Segment<T>,
    pub coefficient: StructuralCoefficient<T>,
    pub role: StructuralRole,
    pub level: usize,
    pub children: Vec<StructureNode<T>>,
}

impl<T: Scalar> StructureNode<T> {
    pub fn leaf(segment: Segment<T>, coefficient: StructuralCoefficient<T>, role: StructuralRole, level: usize) -> Self {
        StructureNode { segment, coefficient, role, level, children: Vec::new() }
    }

    /// Pre-order traversal with node paths (root index first).
    pub fn walk<'a>(&'a self, path: &mut Vec<usize>, visit: &mut impl FnMut(&[usize], &'a StructureNode<T>)) {
        visit(path, self);
        for (i, child) in self.children.iter().enumerate() {
            path.push(i);
            child.walk(path, visit);
            path.pop();
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Self::node_count).sum::<usize>()
    }
}

/// Builds one tree per coarsest-level segment. Each node's span is re-segmented
/// at the next finer threshold to produce its children.
pub fn build_tree<T: Scalar>(
    series: &PriceSeries<T>,
    config: &HierarchyConfig,
) -> Result<Vec<StructureNode<T>>, HierarchyError> {
    if series.is_empty() {
        return Err(HierarchyError::EmptySeries);
    }
    config.validate()?;
    let rhos: Vec<T> = (0..config.levels)
        .map(|l| T::from_config(config.rho_at(l)).expect("validated threshold"))
        .collect();
    let closes = series.closes();
    let top = config.levels - 1;
    Ok(segment_closes(&closes, &rhos[top], config.min_bars)
        .into_iter()
        .map(|seg| build_node(&closes, seg, top, &rhos, config))
        .collect())
}

fn build_node<T: Scalar>(
    closes: &[T],
    segment: Segment<T>,
    level: usize,
    rhos: &[T],
    config: &HierarchyConfig,
) -> StructureNode<T> {
    let (start, end) = segment.span();
    let coefficient = encode_closes(&closes[start..=end]);
    let role = classify_role(&coefficient, &config.thresholds);
    let mut node = StructureNode::leaf(segment, coefficient, role, level);
    if level == 0 {
        return node;
    }
    let parts = segment_closes(&closes[start..=end], &rhos[level - 1], config.min_bars);
    if parts.len() <= 1 {
        return node;
    }
    node.children = parts
        .into_iter()
        .map(|p| {
            let seg = Segment::new(p.start_index + start, p.end_index + start, p.start_price, p.end_price);
            build_node(closes, seg, level - 1, rhos, config)
        })
        .collect();
    node
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct Violation<T: Scalar> {
    pub path: Vec<usize>,
    pub component: &'static str,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub score: T,
}

/// Every child whose coefficient lies outside the region of its parent's role.
pub fn check_admissibility<T: Scalar>(roots: &[StructureNode<T>], table: &RegionTable) -> Vec<Violation<T>> {
    let mut out = Vec::new();
    for (i, root) in roots.iter().enumerate() {
        root.walk(&mut vec![i], &mut |path, node| {
            if node.children.is_empty() {
                return;
            }
            let region = admissible_region::<T>(node.role, table);
            for (ci, child) in node.children.iter().enumerate() {
                let Ok(sat) = saturation(&child.coefficient, &region) else { continue };
                if sat.score > T::one() {
                    let mut child_path = path.to_vec();
                    child_path.push(ci);
                    out.push(Violation { path: child_path, component: COMPONENT_NAMES[sat.component], score: sat.score });
                }
            }
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use crate::testing::series_from_closes;

    fn coef(e: f64, r: f64, b: f64, k: f64) -> StructuralCoefficient<f64> {
        StructuralCoefficient::from_components(e, r, b, k)
    }

    #[test]
    fn default_regions() {
        let imp: AdmissibleRegion<f64> = admissible_region(StructuralRole::Impulsive, &RegionTable::default());
        assert_eq!(imp.lo, [0.1, 0.0, 0.2, 0.0]);
        assert_eq!(imp.hi, [1.0, 2.0, 1.0, 1.0]);
        let cor: AdmissibleRegion<f64> = admissible_region(StructuralRole::Corrective, &RegionTable::default());
        assert_eq!(cor.lo, [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(cor.hi, [0.9, 4.0, 1.0, 1.0]);
        assert!(imp.contains(&coef(0.5, 1.0, 0.5, 0.5)));
        assert!(!imp.contains(&coef(0.05, 1.0, 0.5, 0.5)));
    }

    #[test]
    fn full_region_admits_everything() {
        let full = AdmissibleRegion::<f64>::from_bounds(&RegionBounds::FULL);
        for c in [coef(0.0, 0.0, 0.0, 0.0), coef(1.0, 10.0, 1.0, 1.0), coef(0.3, 7.0, 0.9, 0.1)] {
            assert!(full.contains(&c));
            assert!(saturation_score(&c, &full).unwrap() <= 1.0);
        }
    }

    #[test]
    fn gauge_values() {
        // exact arithmetic: the boundary scores exactly one
        let q = |v: f64| Exact::from_config(v).unwrap();
        let c = |e: f64, r: f64, b: f64, k: f64| StructuralCoefficient::from_components(q(e), q(r), q(b), q(k));
        let imp: AdmissibleRegion<Exact> = admissible_region(StructuralRole::Impulsive, &RegionTable::default());
        assert_eq!(saturation_score(&c(0.55, 1.0, 0.6, 0.5), &imp).unwrap(), q(0.0));
        assert_eq!(saturation_score(&c(1.0, 1.0, 0.6, 0.5), &imp).unwrap(), q(1.0));
        assert_eq!(saturation_score(&c(0.1, 1.0, 0.6, 0.5), &imp).unwrap(), q(1.0));
        assert_eq!(saturation_score(&c(0.55, 0.0, 0.6, 0.5), &imp).unwrap(), q(1.0));
        assert_eq!(saturation_score(&c(0.55, 1.0, 0.2, 0.5), &imp).unwrap(), q(1.0));
        assert_eq!(saturation_score(&c(0.55, 3.0, 0.6, 0.5), &imp).unwrap(), q(2.0));

        let bounds = RegionBounds {
            efficiency: Interval::new(0.0, 1.0),
            retracement: Interval::new(0.0, 0.0),
            balance: Interval::new(0.0, 0.0),
            skew: Interval::new(0.0, 0.0),
        };
        let one_dim = AdmissibleRegion::<Exact>::from_bounds(&bounds);
        assert_eq!(saturation_score(&c(0.75, 5.0, 1.0, 1.0), &one_dim).unwrap(), q(0.5));
    }

    #[test]
    fn all_zero_widths_is_degenerate() {
        let point = Interval::new(0.5, 0.5);
        let bounds = RegionBounds { efficiency: point, retracement: point, balance: point, skew: point };
        let region = AdmissibleRegion::<f64>::from_bounds(&bounds);
        assert_eq!(saturation_score(&coef(0.5, 0.5, 0.5, 0.5), &region), Err(HierarchyError::DegenerateRegion));
    }

    #[test]
    fn monotone_series_has_single_childless_root() {
        let closes: Vec<f64> = (0..30).map(|i| 100.0 + i as f64).collect();
        let roots = build_tree(&series_from_closes(&closes), &HierarchyConfig::default()).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0].children.is_empty());
        assert_eq!(roots[0].segment.span(), (0, 29));
    }

    #[test]
    fn single_level_matches_plain_segmentation() {
        let closes = [100.0, 110.0, 105.0, 115.0, 95.0, 99.0, 90.0];
        let series = series_from_closes(&closes);
        let config = HierarchyConfig { levels: 1, ..HierarchyConfig::default() };
        let roots = build_tree(&series, &config).unwrap();
        let plain = crate::segmentation::segment_series(&series, &config.segmentation_at(0)).unwrap();
        assert_eq!(roots.iter().map(|n| n.segment.clone()).collect::<Vec<_>>(), plain);
        assert!(roots.iter().all(|n| n.children.is_empty() && n.level == 0));
    }

    #[test]
    fn two_level_worked_example() {
        let series = series_from_closes(&[100.0, 110.0, 105.0, 115.0, 95.0]);
        let config = HierarchyConfig { levels: 2, ..HierarchyConfig::default() };
        let roots = build_tree(&series, &config).unwrap();
        let spans: Vec<_> = roots.iter().map(|n| n.segment.span()).collect();
        assert_eq!(spans, vec![(0, 3), (3, 4)]);
        let children: Vec<_> = roots[0].children.iter().map(|n| n.segment.span()).collect();
        assert_eq!(children, vec![(0, 1), (1, 2), (2, 3)]);
        assert!(roots[1].children.is_empty());
        assert!(roots[0].children.iter().all(|c| c.level == 0));
    }

    #[test]
    fn rejects_bad_configs() {
        let series = series_from_closes(&[1.0, 2.0]);
        for config in [
            HierarchyConfig { levels: 0, ..Default::default() },
            HierarchyConfig { gamma: 1.0, ..Default::default() },
            HierarchyConfig { levels: 4, ..Default::default() },
        ] {
            assert!(matches!(build_tree(&series, &config), Err(HierarchyError::InvalidConfig(_))), "{config:?}");
        }
        let empty = PriceSeries::<f64>::new("X", "1D", vec![]).unwrap();
        assert_eq!(build_tree(&empty, &HierarchyConfig::default()), Err(HierarchyError::EmptySeries));
        let mut bad_table = RegionTable::default();
        bad_table.corrective.retracement = Interval::new(0.0, 11.0);
        assert!(bad_table.validate().is_err());
    }

    fn fixture_tree(child: StructuralCoefficient<f64>) -> StructureNode<f64> {
        let seg = |s: usize, e: usize| Segment::new(s, e, s as f64, e as f64 + 1.0);
        let mut root = StructureNode::leaf(seg(0, 10), coef(0.9, 1.0, 0.6, 0.5), StructuralRole::Impulsive, 1);
        root.children = vec![
            StructureNode::leaf(seg(0, 5), coef(0.55, 1.0, 0.6, 0.5), StructuralRole::Impulsive, 0),
            StructureNode::leaf(seg(5, 10), child, StructuralRole::Consolidative, 0),
        ];
        root
    }

    #[test]
    fn centered_tree_has_no_violations() {
        let root = fixture_tree(coef(0.55, 1.0, 0.6, 0.5));
        assert!(check_admissibility(&[root], &RegionTable::default()).is_empty());
    }

    #[test]
    fn out_of_region_child_is_reported() {
        let root = fixture_tree(coef(0.05, 1.0, 0.6, 0.5));
        let v = check_admissibility(std::slice::from_ref(&root), &RegionTable::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, vec![0, 1]);
        assert_eq!(v[0].component, "efficiency");
        assert!((v[0].score - 0.5 / 0.45).abs() < 1e-12);

        // a childless root out of every region is still never reported
        let mut lone = root;
        lone.children.clear();
        lone.coefficient = coef(0.0, 10.0, 0.0, 0.0);
        assert!(check_admissibility(&[lone], &RegionTable::default()).is_empty());
    }
}
