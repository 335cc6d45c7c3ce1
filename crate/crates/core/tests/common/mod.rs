//! Independent oracles and random fixtures for the integration suites.
#![allow(dead_code)]

use qgms_core::market_data::parse_csv;
use qgms_core::scalar::{Exact, Scalar};
use qgms_core::PriceSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random OHLC document with 4-decimal prices. Closes follow a random walk
/// with occasional flat steps; base level is log-uniform in `[1, 1e6]`.
pub fn random_csv(rng: &mut ChaCha8Rng, len: usize) -> String {
    let base = 10f64.powf(rng.random_range(0.0..6.0));
    let unit = 1e-4;
    let mut close = (base / unit).round().max(1.0) as i64;
    let mut out = String::from("timestamp,open,high,low,close\n");
    let fmt = |units: i64| format!("{}.{:04}", units / 10_000, units % 10_000);
    let start = chrono::DateTime::parse_from_rfc3339("2010-01-04T00:00:00Z").unwrap();
    for i in 0..len {
        let open = close;
        if i > 0 && !rng.random_bool(0.1) {
            let vol = rng.random_range(0.001..0.05);
            let step = (close as f64 * vol * rng.random_range(-1.0..1.0)).round() as i64;
            close = (close + step).max(close / 2).max(1);
        }
        let body_hi = open.max(close);
        let body_lo = open.min(close);
        let wick = |rng: &mut ChaCha8Rng| (body_hi as f64 * rng.random_range(0.0..0.01)).round() as i64;
        let high = body_hi + wick(rng);
        let low = (body_lo - wick(rng)).max(1);
        let ts = start + chrono::Duration::hours(i as i64);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            ts.format("%Y-%m-%dT%H:%M:%SZ"),
            fmt(open),
            fmt(high),
            fmt(low),
            fmt(close)
        ));
    }
    out
}

pub fn random_series<T: Scalar>(rng: &mut ChaCha8Rng, len: usize) -> PriceSeries<T> {
    parse_csv(&random_csv(rng, len), "RND", "1H").expect("generated document is valid")
}

pub fn q(text: &str) -> Exact {
    Exact::parse_decimal(text).unwrap()
}

/// Pivot scan written directly from the rule: for every candidate confirmation
/// bar, recompute the swing extremum from scratch and test the threshold.
pub fn oracle_segments<T: Scalar>(c: &[T], rho: &T, min_bars: usize) -> Vec<(usize, usize)> {
    let n = c.len();
    if n == 1 {
        return vec![(0, 0)];
    }
    let argext = |from: usize, to: usize, up: bool| -> usize {
        let mut best = from;
        for k in from..=to {
            let better = if up { c[k] > c[best] } else { c[k] < c[best] };
            if better {
                best = k;
            }
        }
        best
    };
    let fires = |p: usize, e: usize, i: usize, up: bool| -> bool {
        let amp = if up { c[e].clone() - c[p].clone() } else { c[p].clone() - c[e].clone() };
        let counter = if up { c[e].clone() - c[i].clone() } else { c[i].clone() - c[e].clone() };
        amp > T::zero() && counter >= rho.clone() * amp && e - p + 1 >= min_bars
    };

    let mut pivots = vec![0usize];
    let mut confirmed_at = 0usize;
    let mut seeking_high: Option<bool> = None;
    loop {
        let mut found = None;
        for i in confirmed_at + 1..n {
            match seeking_high {
                None => {
                    let hi = argext(0, i, true);
                    let lo = argext(0, i, false);
                    let up = fires(0, hi, i, true);
                    let down = fires(0, lo, i, false);
                    let pick = match (up, down) {
                        (true, true) => Some(if hi < lo { (hi, true) } else { (lo, false) }),
                        (true, false) => Some((hi, true)),
                        (false, true) => Some((lo, false)),
                        _ => None,
                    };
                    if let Some((e, was_high)) = pick {
                        found = Some((e, i, was_high));
                    }
                }
                Some(high) => {
                    let p = *pivots.last().unwrap();
                    let e = argext(p + 1, i, high);
                    if fires(p, e, i, high) {
                        found = Some((e, i, high));
                    }
                }
            }
            if found.is_some() {
                break;
            }
        }
        match found {
            Some((e, i, was_high)) => {
                pivots.push(e);
                confirmed_at = i;
                seeking_high = Some(!was_high);
            }
            None => break,
        }
    }
    pivots.push(n - 1);
    pivots.windows(2).map(|w| (w[0], w[1])).collect()
}

/// `max_{i <= j} (v_i - v_j) / v_i`, floored at zero.
pub fn oracle_drawdown(v: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..v.len() {
        for j in i..v.len() {
            worst = worst.max((v[i] - v[j]) / v[i]);
        }
    }
    worst
}

/// Exhaustive favourable/adverse excursions of a call at `i` over `(i, i + h]`.
pub fn oracle_excursions(closes: &[f64], i: usize, h: usize, up: bool) -> (f64, f64) {
    let sign = if up { 1.0 } else { -1.0 };
    let mut mfe = 0.0f64;
    let mut mae = 0.0f64;
    for j in i + 1..closes.len() {
        if j > i + h {
            break;
        }
        mfe = mfe.max(sign * (closes[j] - closes[i]));
        mae = mae.max(-sign * (closes[j] - closes[i]));
    }
    (mfe, mae)
}
