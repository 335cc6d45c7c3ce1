//! Fixture builders shared by unit and integration tests.

use chrono::{Duration, TimeZone, Utc};

use crate::market_data::{Bar, PriceSeries};
use crate::scalar::{max_of, min_of, Scalar};

/// Daily bars whose open is the previous close and whose body is the whole range.
pub fn series_from_closes<T: Scalar>(closes: &[T]) -> PriceSeries<T> {
    let start = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let bars = closes
        .iter()
        .enumerate()
        .map(|(i, close)| {
            let open = if i == 0 { close.clone() } else { closes[i - 1].clone() };
            Bar {
                timestamp: start + Duration::days(i as i64),
                high: max_of(open.clone(), close.clone()),
                low: min_of(open.clone(), close.clone()),
                open,
                close: close.clone(),
                volume: None,
            }
        })
        .collect();
    PriceSeries::new("TEST", "1D", bars).expect("positive closes form a valid series")
}
