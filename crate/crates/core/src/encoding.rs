//! Reference structural encoder: maps a segment to a four-component coefficient.
//!
//! Every component is a ratio of close-price differences or of step counts, so
//! the coefficient is exactly invariant under `p -> a * p + b` with `a > 0`
//! whenever the scalar arithmetic is exact.
//!
//! | component     | definition                                                        | range        |
//! |---------------|-------------------------------------------------------------------|--------------|
//! | `efficiency`  | `|net displacement| / path length`                                | `[0, 1]`     |
//! | `retracement` | largest internal counter-excursion / `|net displacement|`         | `[0, 10]`    |
//! | `balance`     | share of steps moving with the segment (flat steps count half)    | `[0, 1]`     |
//! | `skew`        | relative bar position of the first in-direction extreme           | `[0, 1]`     |
//!
//! Degenerate segments:
//! * zero path (all closes equal): `(0, 0, 0.5, 0)`, flagged;
//! * zero net with non-zero path: efficiency `0`, retracement at the cap,
//!   balance `0.5`, skew `0`, flagged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::PriceSeries;
use crate::scalar::Scalar;
use crate::segmentation::{Direction, Segment};

/// Upper bound of the retracement component.
pub const RETRACEMENT_CAP: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("segment [{start}, {end}] is outside a series of {len} bars")]
    IndexOutOfRange { start: usize, end: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct StructuralCoefficient<T: Scalar> {
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub efficiency: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub retracement: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub balance: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub skew: T,
    pub degenerate: bool,
}

impl<T: Scalar> StructuralCoefficient<T> {
    pub fn components(&self) -> [&T; 4] {
        [&self.efficiency, &self.retracement, &self.balance, &self.skew]
    }

    pub fn to_f64(&self) -> [f64; 4] {
        self.components().map(Scalar::to_f64)
    }

    /// Builds a non-degenerate coefficient from component values, mostly for fixtures.
    pub fn from_components(efficiency: T, retracement: T, balance: T, skew: T) -> Self {
        StructuralCoefficient { efficiency, retracement, balance, skew, degenerate: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructuralRole {
    Impulsive,
    Corrective,
    Consolidative,
}

impl StructuralRole {
    pub const ALL: [StructuralRole; 3] =
        [StructuralRole::Impulsive, StructuralRole::Corrective, StructuralRole::Consolidative];
}

/// Role thresholds. These defaults are arbitrary and meant to be tuned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleThresholds {
    /// Minimum efficiency of an impulsive segment.
    pub impulsive_efficiency: f64,
    /// Maximum retracement of an impulsive segment.
    pub impulsive_retracement: f64,
    /// Maximum efficiency of a consolidative segment.
    pub consolidative_efficiency: f64,
}

impl Default for RoleThresholds {
    fn default() -> Self {
        RoleThresholds { impulsive_efficiency: 0.6, impulsive_retracement: 0.5, consolidative_efficiency: 0.2 }
    }
}

/// Encodes `segment` from the closes of `series`.
pub fn encode<T: Scalar>(
    segment: &Segment<T>,
    series: &PriceSeries<T>,
) -> Result<StructuralCoefficient<T>, EncodingError> {
    let len = series.len();
    let (start, end) = segment.span();
    if start > end || end >= len {
        return Err(EncodingError::IndexOutOfRange { start, end, len });
    }
    let closes: Vec<T> = series.bars()[start..=end].iter().map(|b| b.close.clone()).collect();
    Ok(encode_closes(&closes))
}

/// Encodes a contiguous run of closes taken as a single segment.
pub fn encode_closes<T: Scalar>(closes: &[T]) -> StructuralCoefficient<T> {
    let half = T::one() / T::from_count(2);
    let cap = T::from_config(RETRACEMENT_CAP).expect("finite constant");
    let first = closes.first().cloned().unwrap_or_else(T::zero);
    let last = closes.last().cloned().unwrap_or_else(T::zero);
    let net = last.clone() - first.clone();
    let path = closes
        .windows(2)
        .fold(T::zero(), |acc, w| acc + (w[1].clone() - w[0].clone()).abs());

    if path.is_zero() {
        return StructuralCoefficient {
            efficiency: T::zero(),
            retracement: T::zero(),
            balance: half,
            skew: T::zero(),
            degenerate: true,
        };
    }
    if net.is_zero() {
        return StructuralCoefficient {
            efficiency: T::zero(),
            retracement: cap,
            balance: half,
            skew: T::zero(),
            degenerate: true,
        };
    }

    let direction = Direction::of_move(&first, &last);
    let up = direction == Direction::Up;
    // signed so that "with the segment" is always positive
    let oriented = |v: &T| if up { v.clone() } else { -v.clone() };

    let efficiency = net.abs() / path;

    let mut peak = oriented(&closes[0]);
    let mut worst = T::zero();
    for c in &closes[1..] {
        let v = oriented(c);
        if v > peak {
            peak = v;
        } else if peak.clone() - v.clone() > worst {
            worst = peak.clone() - v;
        }
    }
    let mut retracement = worst / net.abs();
    if retracement > cap {
        retracement = cap;
    }

    let mut with_trend = T::zero();
    for w in closes.windows(2) {
        let step = oriented(&w[1]) - oriented(&w[0]);
        if step > T::zero() {
            with_trend = with_trend + T::one();
        } else if step.is_zero() {
            with_trend = with_trend + half.clone();
        }
    }
    let steps = T::from_count(closes.len() - 1);
    let balance = with_trend / steps.clone();

    let mut extreme_at = 0usize;
    for (i, c) in closes.iter().enumerate().skip(1) {
        if oriented(c) > oriented(&closes[extreme_at]) {
            extreme_at = i;
        }
    }
    let skew = T::from_count(extreme_at) / steps;

    StructuralCoefficient { efficiency, retracement, balance, skew, degenerate: false }
}

/// Impulsive when efficient and shallow, consolidative when inefficient, corrective otherwise.
pub fn classify_role<T: Scalar>(c: &StructuralCoefficient<T>, thresholds: &RoleThresholds) -> StructuralRole {
    let conv = |v: f64| T::from_config(v).expect("finite threshold");
    if c.efficiency >= conv(thresholds.impulsive_efficiency) && c.retracement <= conv(thresholds.impulsive_retracement)
    {
        StructuralRole::Impulsive
    } else if c.efficiency <= conv(thresholds.consolidative_efficiency) {
        StructuralRole::Consolidative
    } else {
        StructuralRole::Corrective
    }
}
