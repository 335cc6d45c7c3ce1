//! Hash-chained prediction ledger.
//!
//! `hash_i = SHA-256(prev_hash_i bytes || payload_i bytes || index_i as u64 big-endian)`,
//! with `prev_hash_0` all zeros. The payload is canonical JSON holding the
//! prediction together with the serving cursor and harness timestamp, so every
//! field of an entry is covered by its hash.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::canonical::to_canonical_string;
use super::HarnessError;
use crate::detector::Side;

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

/// A call made by the analyst while replaying.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub bar_index: usize,
    pub expected_direction: Side,
    #[serde(default)]
    pub note: String,
}

/// What the hash commits to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommittedPrediction {
    pub bar_index: usize,
    pub expected_direction: Side,
    pub note: String,
    /// Index of the last bar served when the call was recorded.
    pub cursor_index: usize,
    pub timestamp_utc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub index: u64,
    pub cursor_index: usize,
    pub payload: String,
    pub timestamp_utc: String,
    pub prev_hash: String,
    pub hash: String,
}

impl LedgerEntry {
    pub fn committed(&self) -> Option<CommittedPrediction> {
        serde_json::from_str(&self.payload).ok()
    }

    pub fn prediction(&self) -> Option<Prediction> {
        self.committed().map(|c| Prediction {
            bar_index: c.bar_index,
            expected_direction: c.expected_direction,
            note: c.note,
        })
    }
}

pub fn chain_hash(prev_hash_hex: &str, payload: &[u8], index: u64) -> Option<String> {
    let prev = hex::decode(prev_hash_hex).ok().filter(|b| b.len() == 32)?;
    let mut hasher = Sha256::new();
    hasher.update(&prev);
    hasher.update(payload);
    hasher.update(index.to_be_bytes());
    Some(hex::encode(hasher.finalize()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Outcome of a chain check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub chain_ok: bool,
    pub first_broken_link: Option<u64>,
    /// Every committed call references an already-served bar.
    pub no_lookahead: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentLedger {
    entries: Vec<LedgerEntry>,
}

impl CommitmentLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<LedgerEntry>) -> Self {
        CommitmentLedger { entries }
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head_hash(&self) -> &str {
        self.entries.last().map_or(GENESIS_HASH, |e| e.hash.as_str())
    }

    /// Appends a call recorded while the last served bar was `cursor_index`.
    pub fn append(
        &mut self,
        prediction: &Prediction,
        cursor_index: usize,
        at: DateTime<Utc>,
    ) -> Result<&LedgerEntry, HarnessError> {
        let timestamp_utc = at.to_rfc3339_opts(SecondsFormat::Millis, true);
        let committed = CommittedPrediction {
            bar_index: prediction.bar_index,
            expected_direction: prediction.expected_direction,
            note: prediction.note.clone(),
            cursor_index,
            timestamp_utc: timestamp_utc.clone(),
        };
        let payload = to_canonical_string(&committed).map_err(|e| HarnessError::Serialization(e.to_string()))?;
        let index = self.entries.len() as u64;
        let prev_hash = self.head_hash().to_string();
        let hash = chain_hash(&prev_hash, payload.as_bytes(), index).expect("well-formed head hash");
        self.entries.push(LedgerEntry { index, cursor_index, payload, timestamp_utc, prev_hash, hash });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Re-derives every link. The first entry whose position, back-link,
    /// hash or payload cross-check fails is reported.
    pub fn verify(&self) -> ChainCheck {
        let mut expected_prev = GENESIS_HASH.to_string();
        let mut no_lookahead = true;
        for (pos, entry) in self.entries.iter().enumerate() {
            let committed = entry.committed();
            let link_ok = entry.index == pos as u64
                && entry.prev_hash == expected_prev
                && chain_hash(&entry.prev_hash, entry.payload.as_bytes(), entry.index).as_deref()
                    == Some(entry.hash.as_str())
                && committed.as_ref().is_some_and(|c| {
                    c.cursor_index == entry.cursor_index && c.timestamp_utc == entry.timestamp_utc
                });
            if !link_ok {
                return ChainCheck { chain_ok: false, first_broken_link: Some(pos as u64), no_lookahead: false };
            }
            if let Some(c) = committed {
                no_lookahead &= c.bar_index <= c.cursor_index;
            }
            expected_prev = entry.hash.clone();
        }
        ChainCheck { chain_ok: true, first_broken_link: None, no_lookahead }
    }

    /// One JSON object per line, LF-terminated.
    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("entry serializes") + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, HarnessError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| {
                serde_json::from_str::<LedgerEntry>(line)
                    .map_err(|e| HarnessError::MalformedLedger(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CommitmentLedger { entries })
    }

    pub fn predictions(&self) -> Vec<Prediction> {
        self.entries.iter().filter_map(LedgerEntry::prediction).collect()
    }
}
