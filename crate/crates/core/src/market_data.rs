//! OHLC bars, validated price series, CSV ingestion and positive-affine price maps.

use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::scalar::{max_of, min_of, Scalar};

/// Exact header of the CSV format, with optional trailing `,volume`.
pub const CSV_HEADER: &str = "timestamp,open,high,low,close";
pub const CSV_HEADER_WITH_VOLUME: &str = "timestamp,open,high,low,close,volume";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketDataError {
    #[error("bad header: expected `{CSV_HEADER}` or `{CSV_HEADER_WITH_VOLUME}`, got `{0}`")]
    BadHeader(String),
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    InvariantViolation { line: usize, reason: String },
    #[error("line {line}: timestamp does not strictly increase")]
    NonMonotonicTime { line: usize },
    #[error("scale factor must be positive")]
    NonPositiveScale,
    #[error("offset drives bar {index} to a non-positive price")]
    OffsetUnderflow { index: usize },
    #[error("price series is empty")]
    EmptySeries,
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bar<T> {
    pub timestamp: DateTime<Utc>,
    pub open: T,
    pub high: T,
    pub low: T,
    pub close: T,
    pub volume: Option<T>,
}

impl<T: Scalar> Bar<T> {
    /// Builds a bar after checking positivity and the high/low envelope.
    pub fn new(
        timestamp: DateTime<Utc>,
        open: T,
        high: T,
        low: T,
        close: T,
        volume: Option<T>,
    ) -> Result<Self, String> {
        let bar = Bar { timestamp, open, high, low, close, volume };
        bar.check()?;
        Ok(bar)
    }

    fn check(&self) -> Result<(), String> {
        let zero = T::zero();
        for (name, p) in [("open", &self.open), ("high", &self.high), ("low", &self.low), ("close", &self.close)] {
            if *p <= zero {
                return Err(format!("{name} must be strictly positive"));
            }
        }
        if self.low > min_of(self.open.clone(), self.close.clone()) {
            return Err("low exceeds min(open, close)".into());
        }
        if self.high < max_of(self.open.clone(), self.close.clone()) {
            return Err("high is below max(open, close)".into());
        }
        if let Some(v) = &self.volume {
            if *v < zero {
                return Err("volume must be non-negative".into());
            }
        }
        Ok(())
    }

    pub fn map_prices<U>(&self, mut f: impl FnMut(&T) -> U) -> Bar<U> {
        Bar {
            timestamp: self.timestamp,
            open: f(&self.open),
            high: f(&self.high),
            low: f(&self.low),
            close: f(&self.close),
            volume: None,
        }
    }
}

/// An ordered, validated OHLC series.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<T> {
    symbol: String,
    timeframe: String,
    bars: Vec<Bar<T>>,
}

impl<T: Scalar> PriceSeries<T> {
    pub fn new(
        symbol: impl Into<String>,
        timeframe: impl Into<String>,
        bars: Vec<Bar<T>>,
    ) -> Result<Self, MarketDataError> {
        for (i, bar) in bars.iter().enumerate() {
            bar.check()
                .map_err(|reason| MarketDataError::InvariantViolation { line: i + 2, reason })?;
            if i > 0 && bar.timestamp <= bars[i - 1].timestamp {
                return Err(MarketDataError::NonMonotonicTime { line: i + 2 });
            }
        }
        Ok(PriceSeries { symbol: symbol.into(), timeframe: timeframe.into(), bars })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn timeframe(&self) -> &str {
        &self.timeframe
    }

    pub fn bars(&self) -> &[Bar<T>] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<T> {
        self.bars.iter().map(|b| b.close.clone()).collect()
    }

    /// Rejects empty series; every analytical entry point goes through this.
    pub fn ensure_non_empty(&self) -> Result<(), MarketDataError> {
        if self.bars.is_empty() {
            Err(MarketDataError::EmptySeries)
        } else {
            Ok(())
        }
    }

    /// `max(high) - min(low)`, zero for an empty series.
    pub fn price_span(&self) -> T {
        let mut iter = self.bars.iter();
        let Some(first) = iter.next() else { return T::zero() };
        let (mut lo, mut hi) = (first.low.clone(), first.high.clone());
        for bar in iter {
            lo = min_of(lo, bar.low.clone());
            hi = max_of(hi, bar.high.clone());
        }
        hi - lo
    }

    pub fn min_low(&self) -> Option<T> {
        self.bars.iter().map(|b| b.low.clone()).reduce(min_of)
    }

    /// Converts every value through its plain decimal rendering.
    pub fn convert<U: Scalar>(&self) -> Option<PriceSeries<U>> {
        let conv = |v: &T| U::parse_decimal(&v.to_plain_string());
        let bars = self
            .bars
            .iter()
            .map(|b| {
                Some(Bar {
                    timestamp: b.timestamp,
                    open: conv(&b.open)?,
                    high: conv(&b.high)?,
                    low: conv(&b.low)?,
                    close: conv(&b.close)?,
                    volume: match &b.volume {
                        Some(v) => Some(conv(v)?),
                        None => None,
                    },
                })
            })
            .collect::<Option<Vec<_>>>()?;
        PriceSeries::new(self.symbol.clone(), self.timeframe.clone(), bars).ok()
    }

    /// Canonical CSV rendering: fixed header, RFC 3339 UTC timestamps, shortest decimals, LF endings.
    pub fn to_csv(&self) -> String {
        let with_volume = self.bars.iter().any(|b| b.volume.is_some());
        let mut out = String::from(if with_volume { CSV_HEADER_WITH_VOLUME } else { CSV_HEADER });
        out.push('\n');
        for b in &self.bars {
            out.push_str(&format_timestamp(&b.timestamp));
            for p in [&b.open, &b.high, &b.low, &b.close] {
                out.push(',');
                out.push_str(&p.to_plain_string());
            }
            if with_volume {
                out.push(',');
                if let Some(v) = &b.volume {
                    out.push_str(&v.to_plain_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Parses the CSV format. Symbol and timeframe are supplied by the caller.
pub fn parse_csv<T: Scalar>(
    text: &str,
    symbol: &str,
    timeframe: &str,
) -> Result<PriceSeries<T>, MarketDataError> {
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or("");
    let with_volume = match header {
        CSV_HEADER => false,
        CSV_HEADER_WITH_VOLUME => true,
        other => return Err(MarketDataError::BadHeader(other.to_string())),
    };
    let expected_cols = if with_volume { 6 } else { 5 };
    let body: Vec<&str> = lines.collect();
    let mut bars: Vec<Bar<T>> = Vec::with_capacity(body.len());
    for (offset, row) in body.iter().enumerate() {
        let line = offset + 2;
        if row.is_empty() && offset + 1 == body.len() {
            break; // trailing newline
        }
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != expected_cols {
            return Err(MarketDataError::MalformedRow {
                line,
                reason: format!("expected {expected_cols} columns, found {}", cols.len()),
            });
        }
        let timestamp = DateTime::parse_from_rfc3339(cols[0])
            .map_err(|e| MarketDataError::MalformedRow { line, reason: format!("timestamp: {e}") })?
            .with_timezone(&Utc);
        let num = |idx: usize, name: &str| {
            T::parse_decimal(cols[idx]).ok_or_else(|| MarketDataError::MalformedRow {
                line,
                reason: format!("{name} is not a number: `{}`", cols[idx]),
            })
        };
        let volume = if with_volume && !cols[5].is_empty() { Some(num(5, "volume")?) } else { None };
        let bar = Bar::new(timestamp, num(1, "open")?, num(2, "high")?, num(3, "low")?, num(4, "close")?, volume)
            .map_err(|reason| MarketDataError::InvariantViolation { line, reason })?;
        if let Some(prev) = bars.last() {
            if bar.timestamp <= prev.timestamp {
                return Err(MarketDataError::NonMonotonicTime { line });
            }
        }
        bars.push(bar);
    }
    Ok(PriceSeries { symbol: symbol.to_string(), timeframe: timeframe.to_string(), bars })
}

/// Splits a `SYMBOL_TIMEFRAME.csv` file stem; falls back to the whole stem and `"unknown"`.
pub fn symbol_timeframe_from_path(path: &Path) -> (String, String) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    match stem.rsplit_once('_') {
        Some((symbol, timeframe)) if !symbol.is_empty() && !timeframe.is_empty() => {
            (symbol.to_string(), timeframe.to_string())
        }
        _ => (stem.to_string(), "unknown".to_string()),
    }
}

/// Reads a CSV file; explicit symbol/timeframe override the filename convention.
pub fn read_csv_file<T: Scalar>(
    path: &Path,
    symbol: Option<&str>,
    timeframe: Option<&str>,
) -> Result<PriceSeries<T>, MarketDataError> {
    let text = std::fs::read_to_string(path).map_err(|e| MarketDataError::Io(format!("{}: {e}", path.display())))?;
    let (file_symbol, file_timeframe) = symbol_timeframe_from_path(path);
    parse_csv(&text, symbol.unwrap_or(&file_symbol), timeframe.unwrap_or(&file_timeframe))
}

/// Maps every price `p` to `a * p + b`. Timestamps and volume are untouched.
pub fn affine_transform<T: Scalar>(series: &PriceSeries<T>, a: &T, b: &T) -> Result<PriceSeries<T>, MarketDataError> {
    if *a <= T::zero() {
        return Err(MarketDataError::NonPositiveScale);
    }
    let map = |p: &T| a.clone() * p.clone() + b.clone();
    let mut bars = Vec::with_capacity(series.len());
    for (index, bar) in series.bars.iter().enumerate() {
        let mut out = bar.map_prices(&map);
        if out.low <= T::zero() {
            return Err(MarketDataError::OffsetUnderflow { index });
        }
        out.volume = bar.volume.clone();
        bars.push(out);
    }
    Ok(PriceSeries { symbol: series.symbol.clone(), timeframe: series.timeframe.clone(), bars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    const ROW: &str = "2015-01-15T09:30:00Z,1.2000,1.2010,1.1980,1.1990";

    fn doc(rows: &[&str]) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_single_row() {
        let s: PriceSeries<f64> = parse_csv(&doc(&[ROW]), "EURCHF", "1D").unwrap();
        let b = &s.bars()[0];
        assert_eq!((b.open, b.high, b.low, b.close), (1.2, 1.201, 1.198, 1.199));
        assert_eq!(b.volume, None);
        assert_eq!(format_timestamp(&b.timestamp), "2015-01-15T09:30:00Z");
    }

    #[test]
    fn high_below_low_is_rejected() {
        let err = parse_csv::<f64>(&doc(&["2015-01-15T09:30:00Z,1.2,1.0,1.5,1.2"]), "X", "1D").unwrap_err();
        assert!(matches!(err, MarketDataError::InvariantViolation { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn non_positive_price_is_rejected() {
        let err = parse_csv::<f64>(&doc(&["2015-01-15T09:30:00Z,0,1,0,0.5"]), "X", "1D").unwrap_err();
        assert!(matches!(err, MarketDataError::InvariantViolation { .. }));
    }

    #[test]
    fn header_only_document_parses_empty() {
        let s: PriceSeries<f64> = parse_csv(&doc(&[]), "X", "1D").unwrap();
        assert!(s.is_empty());
        assert_eq!(s.ensure_non_empty(), Err(MarketDataError::EmptySeries));
    }

    #[test]
    fn malformed_rows() {
        let err = parse_csv::<f64>(&doc(&["2015-01-15T09:30:00Z,1.2,1.3,1.1"]), "X", "1D").unwrap_err();
        assert!(matches!(err, MarketDataError::MalformedRow { line: 2, .. }));
        let err = parse_csv::<f64>(&doc(&["2015-01-15T09:30:00Z,1.2,abc,1.1,1.2"]), "X", "1D").unwrap_err();
        assert!(matches!(err, MarketDataError::MalformedRow { .. }));
        let err = parse_csv::<f64>(&doc(&["yesterday,1.2,1.3,1.1,1.2"]), "X", "1D").unwrap_err();
        assert!(matches!(err, MarketDataError::MalformedRow { .. }));
        // CRLF endings are not part of the format
        let err = parse_csv::<f64>(&format!("{CSV_HEADER}\r\n{ROW}\r\n"), "X", "1D").unwrap_err();
        assert!(matches!(err, MarketDataError::BadHeader(_)));
    }

    #[test]
    fn time_must_increase() {
        let err = parse_csv::<f64>(&doc(&[ROW, ROW]), "X", "1D").unwrap_err();
        assert_eq!(err, MarketDataError::NonMonotonicTime { line: 3 });
    }

    #[test]
    fn volume_column_is_optional_per_row() {
        let text = format!(
            "{CSV_HEADER_WITH_VOLUME}\n2015-01-15T09:30:00Z,1,2,0.5,1.5,100\n2015-01-16T09:30:00Z,1,2,0.5,1.5,\n"
        );
        let s: PriceSeries<f64> = parse_csv(&text, "X", "1D").unwrap();
        assert_eq!(s.bars()[0].volume, Some(100.0));
        assert_eq!(s.bars()[1].volume, None);
        let err = parse_csv::<f64>(&text.replace(",100", ",-1"), "X", "1D").unwrap_err();
        assert!(matches!(err, MarketDataError::InvariantViolation { .. }));
    }

    #[test]
    fn affine_examples() {
        let s: PriceSeries<f64> = parse_csv(&doc(&["2015-01-15T09:30:00Z,1,2,0.5,1.5"]), "X", "1D").unwrap();
        assert_eq!(affine_transform(&s, &1.0, &0.0).unwrap(), s);
        let t = affine_transform(&s, &2.0, &10.0).unwrap();
        let b = &t.bars()[0];
        assert_eq!((b.open, b.high, b.low, b.close), (12.0, 14.0, 11.0, 13.0));
        assert_eq!(affine_transform(&s, &-1.0, &0.0), Err(MarketDataError::NonPositiveScale));
        assert_eq!(affine_transform(&s, &0.0, &0.0), Err(MarketDataError::NonPositiveScale));
        assert_eq!(affine_transform(&s, &1.0, &-0.5), Err(MarketDataError::OffsetUnderflow { index: 0 }));
    }

    #[test]
    fn csv_round_trips_through_canonical_rendering() {
        let text = doc(&[ROW, "2015-01-16T09:30:00+01:00,1.1990,1.2500,1.1000,1.2400"]);
        let s: PriceSeries<Exact> = parse_csv(&text, "X", "1D").unwrap();
        let rendered = s.to_csv();
        assert!(rendered.contains("2015-01-16T08:30:00Z,1.199,1.25,1.1,1.24\n"));
        assert_eq!(parse_csv::<Exact>(&rendered, "X", "1D").unwrap(), s);
    }

    #[test]
    fn filename_convention() {
        assert_eq!(
            symbol_timeframe_from_path(Path::new("/data/EURCHF_1D.csv")),
            ("EURCHF".to_string(), "1D".to_string())
        );
        assert_eq!(
            symbol_timeframe_from_path(Path::new("bars.csv")),
            ("bars".to_string(), "unknown".to_string())
        );
    }
}
