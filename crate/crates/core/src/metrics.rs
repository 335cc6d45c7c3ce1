//! Post-reveal scoring of calls: excursions, risk/reward, ATR-relative hits, drawdown.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blind_harness::Prediction;
use crate::detector::Side;
use crate::market_data::PriceSeries;
use crate::scalar::{max_of, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("value at {0} is not positive")]
    NonPositiveValue(usize),
    #[error("prediction references bar {bar_index} of a {len}-bar series")]
    IndexOutOfRange { bar_index: usize, len: usize },
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub horizon_bars: usize,
    pub atr_window: usize,
    pub hit_multiplier: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { horizon_bars: 50, atr_window: 14, hit_multiplier: 2.0 }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.horizon_bars == 0 || self.atr_window == 0 || !self.hit_multiplier.is_finite() || self.hit_multiplier <= 0.0 {
            return Err(MetricsError::InvalidConfig("horizon, atr window and multiplier must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub bar_index: usize,
    pub direction: Side,
    pub mfe: f64,
    pub mae: f64,
    /// `mfe / mae`; `None` when there was no adverse excursion.
    pub rr: Option<f64>,
    pub no_adverse: bool,
    pub atr: f64,
    pub hit: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<PredictionRecord>,
    /// `None` when there are no records.
    pub hit_rate: Option<f64>,
    /// Mean of `rr` over records with an adverse excursion.
    pub mean_rr: Option<f64>,
    pub max_drawdown_over_series: f64,
}

impl MetricsReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>6} {:>5} {:>12} {:>12} {:>9} {:>5} {:>9}\n",
            "bar", "dir", "mfe", "mae", "rr", "hit", "truncated"
        );
        for r in &self.records {
            let dir = match r.direction {
                Side::Up => "up",
                Side::Down => "down",
            };
            let rr = r.rr.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
            out.push_str(&format!(
                "{:>6} {:>5} {:>12.6} {:>12.6} {:>9} {:>5} {:>9}\n",
                r.bar_index, dir, r.mfe, r.mae, rr, r.hit, r.truncated
            ));
        }
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}%", v * 100.0));
        out.push_str(&format!("hit rate: {}\n", pct(self.hit_rate)));
        out.push_str(&format!("mean rr: {}\n", self.mean_rr.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))));
        out.push_str(&format!("max drawdown: {:.2}%\n", self.max_drawdown_over_series * 100.0));
        out
    }
}

/// Largest peak-to-trough decline as a fraction of the peak.
pub fn max_drawdown<T: Scalar>(values: &[T]) -> Result<T, MetricsError> {
    let first = values.first().ok_or(MetricsError::EmptySequence)?;
    if let Some(i) = values.iter().position(|v| *v <= T::zero()) {
        return Err(MetricsError::NonPositiveValue(i));
    }
    let mut peak = first.clone();
    let mut worst = T::zero();
    for v in &values[1..] {
        if *v > peak {
            peak = v.clone();
        } else {
            let dd = (peak.clone() - v.clone()) / peak.clone();
            if dd > worst {
                worst = dd;
            }
        }
    }
    Ok(worst)
}

/// Mean true range over the `window` bars ending at `index` (fewer at the start of the series).
pub fn average_true_range<T: Scalar>(series: &PriceSeries<T>, index: usize, window: usize) -> T {
    let bars = series.bars();
    let from = (index + 1).saturating_sub(window);
    let mut total = T::zero();
    for j in from..=index {
        let b = &bars[j];
        let mut tr = b.high.clone() - b.low.clone();
        if j > 0 {
            let prev = &bars[j - 1].close;
            tr = max_of(tr, (b.high.clone() - prev.clone()).abs());
            tr = max_of(tr, (b.low.clone() - prev.clone()).abs());
        }
        total = total + tr;
    }
    total / T::from_count(index + 1 - from)
}

pub fn evaluate_predictions<T: Scalar>(
    series: &PriceSeries<T>,
    predictions: &[Prediction],
    config: &EvaluationConfig,
) -> Result<MetricsReport, MetricsError> {
    config.validate()?;
    let len = series.len();
    if let Some(p) = predictions.iter().find(|p| p.bar_index >= len) {
        return Err(MetricsError::IndexOutOfRange { bar_index: p.bar_index, len });
    }
    let closes = series.closes();
    let k = T::from_config(config.hit_multiplier).expect("validated multiplier");
    let mut records = Vec::with_capacity(predictions.len());
    for p in predictions {
        let i = p.bar_index;
        let up = p.expected_direction == Side::Up;
        let last = (i + config.horizon_bars).min(len - 1);
        let (mut mfe, mut mae) = (T::zero(), T::zero());
        for c in &closes[i + 1..=last] {
            let mut favourable = c.clone() - closes[i].clone();
            if !up {
                favourable = -favourable;
            }
            mfe = max_of(mfe, favourable.clone());
            mae = max_of(mae, -favourable);
        }
        let atr = average_true_range(series, i, config.atr_window);
        let hit = mfe > T::zero() && mfe >= k.clone() * atr.clone();
        let rr = (!mae.is_zero()).then(|| (mfe.clone() / mae.clone()).to_f64());
        records.push(PredictionRecord {
            bar_index: i,
            direction: p.expected_direction,
            mfe: mfe.to_f64(),
            mae: mae.to_f64(),
            rr,
            no_adverse: rr.is_none(),
            atr: atr.to_f64(),
            hit,
            truncated: i + config.horizon_bars > len - 1,
        });
    }
    let hit_rate =
        (!records.is_empty()).then(|| records.iter().filter(|r| r.hit).count() as f64 / records.len() as f64);
    let rrs: Vec<f64> = records.iter().filter_map(|r| r.rr).collect();
    let mean_rr = (!rrs.is_empty()).then(|| rrs.iter().sum::<f64>() / rrs.len() as f64);
    let max_drawdown_over_series = if closes.is_empty() { 0.0 } else { max_drawdown(&closes)?.to_f64() };
    Ok(MetricsReport { records, hit_rate, mean_rr, max_drawdown_over_series })
}
