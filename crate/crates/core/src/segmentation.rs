//! Zigzag decomposition of close prices into contiguous directional segments.
//!
//! A pivot is confirmed at the running extremum of the current swing once the
//! counter-move from that extremum reaches `rho` times the swing amplitude
//! (previous pivot close to extremum close). Both quantities are price
//! differences, so the boundaries are unchanged by any positive affine price map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{MarketDataError, PriceSeries};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("price series is empty")]
    EmptySeries,
    #[error("invalid segmentation config: {0}")]
    InvalidConfig(String),
}

impl From<MarketDataError> for SegmentationError {
    fn from(_: MarketDataError) -> Self {
        SegmentationError::EmptySeries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Flat,
}

impl Direction {
    pub fn of_move<T: Scalar>(from: &T, to: &T) -> Self {
        if to > from {
            Direction::Up
        } else if to < from {
            Direction::Down
        } else {
            Direction::Flat
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct Segment<T: Scalar> {
    pub start_index: usize,
    pub end_index: usize,
    pub direction: Direction,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub start_price: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub end_price: T,
}

impl<T: Scalar> Segment<T> {
    pub fn new(start_index: usize, end_index: usize, start_price: T, end_price: T) -> Self {
        Segment {
            start_index,
            end_index,
            direction: Direction::of_move(&start_price, &end_price),
            start_price,
            end_price,
        }
    }

    pub fn span(&self) -> (usize, usize) {
        (self.start_index, self.end_index)
    }

    pub fn bar_count(&self) -> usize {
        self.end_index - self.start_index + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Reversal threshold as a fraction of the current swing amplitude.
    pub rho: f64,
    /// Minimum bars (inclusive of both pivots) in a confirmed segment.
    pub min_bars: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig { rho: 0.382, min_bars: 2 }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(SegmentationError::InvalidConfig(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.min_bars < 1 {
            return Err(SegmentationError::InvalidConfig("min_bars must be at least 1".into()));
        }
        Ok(())
    }
}

/// Segments a whole series on its closes.
pub fn segment_series<T: Scalar>(
    series: &PriceSeries<T>,
    config: &SegmentationConfig,
) -> Result<Vec<Segment<T>>, SegmentationError> {
    series.ensure_non_empty()?;
    config.validate()?;
    let rho = T::from_config(config.rho).ok_or_else(|| SegmentationError::InvalidConfig("rho".into()))?;
    Ok(segment_closes(&series.closes(), &rho, config.min_bars))
}

#[derive(Debug, Clone, Copy)]
enum Leg {
    /// No pivot yet: track both extremes measured from bar 0.
    Bootstrap { high: usize, low: usize },
    /// Swing away from `pivot` heading in `up` direction, extremum at `extreme`.
    Swing { pivot: usize, extreme: usize, up: bool },
}

/// Segments a raw close sequence. Indices in the result are relative to `closes`.
///
/// The trailing segment is still forming and is exempt from `min_bars`.
pub fn segment_closes<T: Scalar>(closes: &[T], rho: &T, min_bars: usize) -> Vec<Segment<T>> {
    let n = closes.len();
    if n == 0 {
        return Vec::new();
    }
    let c = closes;
    let long_enough = |from: usize, to: usize| to + 1 - from >= min_bars;
    // counter-move from extremum `e` at bar `i`, against amplitude measured from `p`
    let confirms = |p: usize, e: usize, i: usize, up: bool| -> bool {
        let (amp, counter) = if up {
            (c[e].clone() - c[p].clone(), c[e].clone() - c[i].clone())
        } else {
            (c[p].clone() - c[e].clone(), c[i].clone() - c[e].clone())
        };
        amp > T::zero() && counter >= rho.clone() * amp && long_enough(p, e)
    };

    let mut pivots = vec![0usize];
    let mut leg = Leg::Bootstrap { high: 0, low: 0 };
    for i in 1..n {
        leg = match leg {
            Leg::Bootstrap { mut high, mut low } => {
                if c[i] > c[high] {
                    high = i;
                }
                if c[i] < c[low] {
                    low = i;
                }
                let up_ok = confirms(0, high, i, true);
                let down_ok = confirms(0, low, i, false);
                match (up_ok, down_ok) {
                    (true, false) => start_swing(&mut pivots, c, high, i, false),
                    (false, true) => start_swing(&mut pivots, c, low, i, true),
                    (true, true) if high < low => start_swing(&mut pivots, c, high, i, false),
                    (true, true) => start_swing(&mut pivots, c, low, i, true),
                    (false, false) => Leg::Bootstrap { high, low },
                }
            }
            Leg::Swing { pivot, mut extreme, up } => {
                if (up && c[i] > c[extreme]) || (!up && c[i] < c[extreme]) {
                    extreme = i;
                }
                if confirms(pivot, extreme, i, up) {
                    start_swing(&mut pivots, c, extreme, i, !up)
                } else {
                    Leg::Swing { pivot, extreme, up }
                }
            }
        };
    }

    if n == 1 {
        return vec![Segment::new(0, 0, c[0].clone(), c[0].clone())];
    }
    pivots.push(n - 1);
    pivots
        .windows(2)
        .map(|w| Segment::new(w[0], w[1], c[w[0]].clone(), c[w[1]].clone()))
        .collect()
}

/// Records `pivot` and opens the next swing, whose extremum is sought over `(pivot, now]`.
fn start_swing<T: Scalar>(pivots: &mut Vec<usize>, c: &[T], pivot: usize, now: usize, up: bool) -> Leg {
    pivots.push(pivot);
    let mut extreme = pivot + 1;
    for j in pivot + 2..=now {
        if (up && c[j] > c[extreme]) || (!up && c[j] < c[extreme]) {
            extreme = j;
        }
    }
    Leg::Swing { pivot, extreme, up }
}
