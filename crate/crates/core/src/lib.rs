//! Market-structure analysis on OHLC series.
//!
//! Pipeline: [`segmentation`] splits closes into zigzag segments, [`encoding`]
//! maps each segment to a scale-free coefficient and role, [`hierarchy`]
//! nests segments across thresholds and scores them against role-indexed
//! admissible regions, and [`detector`] flags terminal zones where a parent
//! and its final leg are both pressed against their region boundaries.
//! [`blind_harness`] runs anonymized forward replays with a hash-chained call
//! ledger and [`metrics`] scores the calls after reveal.
//!
//! Everything analytical is generic over [`Scalar`]. Use [`Exact`] when the
//! result must be bit-for-bit invariant under positive affine price maps, and
//! `f64` when approximate invariance is enough.

pub mod blind_harness;
pub mod detector;
pub mod encoding;
pub mod hierarchy;
pub mod market_data;
pub mod metrics;
pub mod scalar;
pub mod segmentation;
pub mod serde_scalar;
#[doc(hidden)]
pub mod testing;

pub use detector::{detect_terminal_zones, DetectorConfig, Side, TerminalZone};
pub use encoding::{classify_role, encode, RoleThresholds, StructuralCoefficient, StructuralRole};
pub use hierarchy::{admissible_region, build_tree, check_admissibility, saturation_score, HierarchyConfig, StructureNode};
pub use market_data::{affine_transform, parse_csv, Bar, PriceSeries};
pub use metrics::{evaluate_predictions, max_drawdown, EvaluationConfig, MetricsReport};
pub use scalar::{Exact, Scalar};
pub use segmentation::{segment_series, Direction, Segment, SegmentationConfig};

pub type Series = PriceSeries<f64>;
pub type ExactSeries = PriceSeries<Exact>;
pub type Coefficient = StructuralCoefficient<f64>;
pub type ExactCoefficient = StructuralCoefficient<Exact>;
pub type Node = StructureNode<f64>;
pub type ExactNode = StructureNode<Exact>;
pub type Zone = TerminalZone<f64>;
pub type ExactZone = TerminalZone<Exact>;
pub type Session = blind_harness::BlindSession<f64>;
pub type ExactSession = blind_harness::BlindSession<Exact>;
