use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::canonical::to_canonical_string;
use super::ledger::{sha256_hex, CommitmentLedger, LedgerEntry, Prediction};
use super::HarnessError;
use crate::market_data::{format_timestamp, Bar, PriceSeries};
use crate::scalar::Scalar;

const SCALE_MIN: f64 = 0.25;
const SCALE_MAX: f64 = 4.0;
const OFFSET_SPAN_MULTIPLE: f64 = 10.0;
const OFFSET_DRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Created,
    Running,
    Sealed,
    Revealed,
}

/// Everything needed to undo the anonymization. Sealed until reveal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizationManifest {
    pub symbol: String,
    pub timeframe: String,
    pub start_timestamp: String,
    pub end_timestamp: String,
    pub affine_a: f64,
    pub affine_b: f64,
    pub rng_seed: u64,
    pub series_digest: String,
}

impl AnonymizationManifest {
    pub fn canonical_json(&self) -> String {
        to_canonical_string(self).expect("manifest serializes")
    }

    pub fn commitment(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    /// Maps an anonymized price back to the original scale.
    pub fn deanonymize(&self, price: f64) -> f64 {
        (price - self.affine_b) / self.affine_a
    }

    pub fn matches_series<T: Scalar>(&self, series: &PriceSeries<T>) -> bool {
        series_digest(series) == self.series_digest
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::MalformedManifest(e.to_string()))
    }
}

/// SHA-256 of the canonical CSV rendering.
pub fn series_digest<T: Scalar>(series: &PriceSeries<T>) -> String {
    sha256_hex(series.to_csv().as_bytes())
}

/// A served bar: ordinal position and transformed prices only.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct AnonymizedBar<T: Scalar> {
    pub index: usize,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub open: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub high: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub low: T,
    #[serde(serialize_with = "crate::serde_scalar::serialize")]
    pub close: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub chain_ok: bool,
    pub commitment_ok: bool,
    pub first_broken_link: Option<u64>,
    pub no_lookahead: bool,
}

impl Verification {
    pub fn all_ok(&self) -> bool {
        self.chain_ok && self.commitment_ok && self.no_lookahead
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reveal {
    pub manifest: AnonymizationManifest,
    pub verification: Verification,
}

#[derive(Debug, Clone)]
pub struct BlindSession<T: Scalar> {
    id: String,
    state: SessionState,
    cursor: usize,
    series: PriceSeries<T>,
    anonymized: Vec<AnonymizedBar<T>>,
    manifest: AnonymizationManifest,
    commitment: String,
    ledger: CommitmentLedger,
}

/// Derives `(a, b)` from the seed: `a` log-uniform in `[0.25, 4]`, `b` uniform in
/// `[-s, s]` with `s` ten times the price span, both rounded to 6 significant
/// digits; `b` is re-drawn until every transformed price stays positive.
fn derive_affine<T: Scalar>(series: &PriceSeries<T>, seed: u64) -> (f64, f64) {
    let round6 = |x: f64| -> f64 { format!("{x:.5e}").parse().expect("formatted float parses") };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.random();
    let a = round6((SCALE_MIN.ln() + u * (SCALE_MAX / SCALE_MIN).ln()).exp()).clamp(SCALE_MIN, SCALE_MAX);
    let span = series.price_span().to_f64() * OFFSET_SPAN_MULTIPLE;
    let min_low = series.min_low().expect("non-empty series");
    let a_exact = T::from_config(a).expect("finite scale");
    for _ in 0..OFFSET_DRAWS {
        let v: f64 = rng.random_range(-1.0..=1.0);
        let b = round6(v * span);
        let b_exact = T::from_config(b).expect("finite offset");
        if a_exact.clone() * min_low.clone() + b_exact > T::zero() {
            return (a, if b == 0.0 { 0.0 } else { b });
        }
    }
    (a, 0.0)
}

/// Builds a session and returns it with its published commitment.
pub fn create_session<T: Scalar>(series: PriceSeries<T>, seed: u64) -> Result<(BlindSession<T>, String), HarnessError> {
    let session = BlindSession::new(series, seed)?;
    let commitment = session.commitment.clone();
    Ok((session, commitment))
}

impl<T: Scalar> BlindSession<T> {
    pub fn new(series: PriceSeries<T>, seed: u64) -> Result<Self, HarnessError> {
        let (first, last) = match (series.bars().first(), series.bars().last()) {
            (Some(f), Some(l)) => (f.timestamp, l.timestamp),
            _ => return Err(HarnessError::EmptySeries),
        };
        let (a, b) = derive_affine(&series, seed);
        let manifest = AnonymizationManifest {
            symbol: series.symbol().to_string(),
            timeframe: series.timeframe().to_string(),
            start_timestamp: format_timestamp(&first),
            end_timestamp: format_timestamp(&last),
            affine_a: a,
            affine_b: b,
            rng_seed: seed,
            series_digest: series_digest(&series),
        };
        let a_exact = T::from_config(a).expect("finite scale");
        let b_exact = T::from_config(b).expect("finite offset");
        let map = |p: &T| a_exact.clone() * p.clone() + b_exact.clone();
        let anonymized = series
            .bars()
            .iter()
            .enumerate()
            .map(|(index, bar)| AnonymizedBar {
                index,
                open: map(&bar.open),
                high: map(&bar.high),
                low: map(&bar.low),
                close: map(&bar.close),
            })
            .collect();
        let commitment = manifest.commitment();
        let id = format!("s-{}", &commitment[..16]);
        Ok(BlindSession {
            id,
            state: SessionState::Created,
            cursor: 0,
            series,
            anonymized,
            manifest,
            commitment,
            ledger: CommitmentLedger::new(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Rebuilds persisted state; fails if the re-derived manifest does not hash
    /// to `commitment` or the state/cursor pair is impossible.
    pub fn restore(
        id: impl Into<String>,
        series: PriceSeries<T>,
        seed: u64,
        commitment: &str,
        state: SessionState,
        cursor: usize,
        ledger: CommitmentLedger,
    ) -> Result<Self, HarnessError> {
        let mut session = BlindSession::new(series, seed)?.with_id(id);
        if session.commitment != commitment || cursor > session.anonymized.len() {
            return Err(HarnessError::CommitmentMismatch);
        }
        if (state == SessionState::Created) != (cursor == 0) {
            return Err(HarnessError::CommitmentMismatch);
        }
        session.state = state;
        session.cursor = cursor;
        session.ledger = ledger;
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn bar_count(&self) -> usize {
        self.anonymized.len()
    }

    pub fn commitment(&self) -> &str {
        &self.commitment
    }

    pub fn ledger(&self) -> &CommitmentLedger {
        &self.ledger
    }

    /// Bars served so far.
    pub fn served(&self) -> &[AnonymizedBar<T>] {
        &self.anonymized[..self.cursor]
    }

    /// Served bars as a series with ordinal timestamps, for structural analysis.
    pub fn served_series(&self) -> PriceSeries<T> {
        let epoch = Utc.timestamp_opt(0, 0).unwrap();
        let bars = self
            .served()
            .iter()
            .map(|b| Bar {
                timestamp: epoch + chrono::Duration::seconds(b.index as i64),
                open: b.open.clone(),
                high: b.high.clone(),
                low: b.low.clone(),
                close: b.close.clone(),
                volume: None,
            })
            .collect();
        PriceSeries::new("ANON", self.series.timeframe(), bars).expect("affine image of a valid series")
    }

    /// Manifest, available once revealed.
    pub fn manifest(&self) -> Option<&AnonymizationManifest> {
        (self.state == SessionState::Revealed).then_some(&self.manifest)
    }

    /// Original series, available once revealed.
    pub fn revealed_series(&self) -> Option<&PriceSeries<T>> {
        (self.state == SessionState::Revealed).then_some(&self.series)
    }

    fn ensure_open(&self) -> Result<(), HarnessError> {
        match self.state {
            SessionState::Sealed => Err(HarnessError::SessionSealed),
            SessionState::Revealed => Err(HarnessError::SessionRevealed),
            _ => Ok(()),
        }
    }

    /// Serves the next bar, or `None` once the stream is exhausted.
    pub fn next_bar(&mut self) -> Result<Option<&AnonymizedBar<T>>, HarnessError> {
        self.ensure_open()?;
        self.state = SessionState::Running;
        if self.cursor == self.anonymized.len() {
            return Ok(None);
        }
        self.cursor += 1;
        Ok(Some(&self.anonymized[self.cursor - 1]))
    }

    pub fn submit_prediction(&mut self, prediction: &Prediction) -> Result<&LedgerEntry, HarnessError> {
        self.submit_prediction_at(prediction, Utc::now())
    }

    /// Records a call stamped with `at`; the bar must already have been served.
    pub fn submit_prediction_at(
        &mut self,
        prediction: &Prediction,
        at: DateTime<Utc>,
    ) -> Result<&LedgerEntry, HarnessError> {
        self.ensure_open()?;
        if prediction.bar_index >= self.cursor {
            return Err(HarnessError::LookaheadRejected { bar_index: prediction.bar_index, cursor: self.cursor });
        }
        self.ledger.append(prediction, self.cursor - 1, at)
    }

    /// Running -> Sealed. Sealing twice is a no-op.
    pub fn seal(&mut self) -> Result<(), HarnessError> {
        match self.state {
            SessionState::Created => Err(HarnessError::NotStarted),
            SessionState::Running | SessionState::Sealed => {
                self.state = SessionState::Sealed;
                Ok(())
            }
            SessionState::Revealed => Err(HarnessError::SessionRevealed),
        }
    }

    /// Seals if needed, discloses the manifest and checks chain and commitment.
    pub fn seal_and_reveal(&mut self) -> Result<Reveal, HarnessError> {
        match self.state {
            SessionState::Revealed => return Err(HarnessError::AlreadyRevealed),
            SessionState::Created => return Err(HarnessError::NotStarted),
            _ => {}
        }
        self.state = SessionState::Revealed;
        let chain = self.ledger.verify();
        Ok(Reveal {
            manifest: self.manifest.clone(),
            verification: Verification {
                chain_ok: chain.chain_ok,
                commitment_ok: self.manifest.commitment() == self.commitment,
                first_broken_link: chain.first_broken_link,
                no_lookahead: chain.no_lookahead,
            },
        })
    }
}

/// Offline re-verification from the persisted ledger and manifest.
pub fn verify_ledger(ledger_jsonl: &str, manifest_json: &str, commitment: &str) -> Result<Verification, HarnessError> {
    let ledger = CommitmentLedger::from_jsonl(ledger_jsonl)?;
    let manifest = AnonymizationManifest::from_json(manifest_json)?;
    let chain = ledger.verify();
    Ok(Verification {
        chain_ok: chain.chain_ok,
        commitment_ok: manifest.commitment() == commitment.trim().to_ascii_lowercase(),
        first_broken_link: chain.first_broken_link,
        no_lookahead: chain.no_lookahead,
    })
}
