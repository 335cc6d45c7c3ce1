//! Blind forward-replay protocol.
//!
//! A session hides the symbol, dates and price level of a series behind a
//! seed-derived positive affine map, serves the transformed bars one at a
//! time, records calls in a hash-chained ledger that refuses lookahead, and
//! only discloses the manifest once sealed. The SHA-256 of the canonical
//! manifest is published at creation so the reveal can be checked.

pub mod canonical;
pub mod ledger;
mod session;

use thiserror::Error;

pub use ledger::{
    chain_hash, sha256_hex, ChainCheck, CommitmentLedger, CommittedPrediction, LedgerEntry, Prediction, GENESIS_HASH,
};
pub use session::{
    create_session, verify_ledger, AnonymizationManifest, AnonymizedBar, BlindSession, Reveal, SessionState,
    Verification,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("price series is empty")]
    EmptySeries,
    #[error("session is sealed")]
    SessionSealed,
    #[error("session is revealed")]
    SessionRevealed,
    #[error("session already revealed")]
    AlreadyRevealed,
    #[error("session has not started")]
    NotStarted,
    #[error("bar {bar_index} has not been served yet (cursor {cursor})")]
    LookaheadRejected { bar_index: usize, cursor: usize },
    #[error("malformed ledger: {0}")]
    MalformedLedger(String),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("restored session does not match its commitment")]
    CommitmentMismatch,
    #[error("serialization failed: {0}")]
    Serialization(String),
}
