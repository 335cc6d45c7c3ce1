//! On-disk session records: one directory per session holding the source
//! series, a state snapshot, the ledger and (after reveal) the manifest.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use qgms_core::blind_harness::{verify_ledger, CommitmentLedger, LedgerEntry, Reveal, SessionState};
use qgms_core::market_data::parse_csv;
use qgms_core::{ExactSeries, ExactSession};
use serde::{Deserialize, Serialize};

const SERIES_FILE: &str = "series.csv";
const META_FILE: &str = "meta.json";
const LEDGER_FILE: &str = "ledger.jsonl";
const MANIFEST_FILE: &str = "manifest.json";
const REVEAL_FILE: &str = "reveal.json";

/// State snapshot rewritten atomically after every transition.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    id: String,
    seed: u64,
    commitment: String,
    symbol: String,
    timeframe: String,
    state: SessionState,
    cursor: usize,
}

pub struct SessionRecord {
    pub session: ExactSession,
    pub reveal: Option<Reveal>,
    seed: u64,
    symbol: String,
    timeframe: String,
    dir: PathBuf,
}

impl SessionRecord {
    fn meta(&self) -> Meta {
        let s = &self.session;
        Meta {
            id: s.id().to_string(),
            seed: self.seed,
            commitment: s.commitment().to_string(),
            symbol: self.symbol.clone(),
            timeframe: self.timeframe.clone(),
            state: s.state(),
            cursor: s.cursor(),
        }
    }

    /// Persists the current state and cursor.
    pub fn save_state(&self) -> io::Result<()> {
        write_meta(&self.dir, &self.meta())
    }

    /// Appends the newest ledger entry and syncs it to disk.
    pub fn append_entry(&self, entry: &LedgerEntry) -> io::Result<()> {
        let line = serde_json::to_string(entry).map_err(io::Error::other)? + "\n";
        let mut file = OpenOptions::new().create(true).append(true).open(self.dir.join(LEDGER_FILE))?;
        file.write_all(line.as_bytes())?;
        file.sync_data()
    }

    /// Re-verifies the ledger as stored on disk against the disclosed manifest.
    pub fn verify_on_disk(&self, reveal: &Reveal) -> io::Result<Reveal> {
        let jsonl = fs::read_to_string(self.dir.join(LEDGER_FILE)).or_else(|e| match e.kind() {
            io::ErrorKind::NotFound => Ok(String::new()),
            _ => Err(e),
        })?;
        let manifest_json = reveal.manifest.canonical_json();
        let verification = match verify_ledger(&jsonl, &manifest_json, self.session.commitment()) {
            Ok(v) => v,
            Err(_) => qgms_core::blind_harness::Verification {
                chain_ok: false,
                commitment_ok: reveal.manifest.commitment() == self.session.commitment(),
                first_broken_link: None,
                no_lookahead: false,
            },
        };
        Ok(Reveal { manifest: reveal.manifest.clone(), verification })
    }

    pub fn save_reveal(&self, reveal: &Reveal) -> io::Result<()> {
        write_atomic(&self.dir.join(MANIFEST_FILE), reveal.manifest.canonical_json().as_bytes())?;
        let body = serde_json::to_vec(reveal).map_err(io::Error::other)?;
        write_atomic(&self.dir.join(REVEAL_FILE), &body)?;
        self.save_state()
    }
}

fn write_meta(dir: &Path, meta: &Meta) -> io::Result<()> {
    let body = serde_json::to_vec_pretty(meta).map_err(io::Error::other)?;
    write_atomic(&dir.join(META_FILE), &body)
}

/// Write to a sibling temp file, sync, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        // Directory sync is best effort; not every platform supports it.
        let _ = File::open(parent).and_then(|d| d.sync_all());
    }
    Ok(())
}

pub type Slot = Arc<Mutex<SessionRecord>>;

/// All sessions, keyed by id. Each session has its own lock so requests for
/// different sessions never wait on each other.
pub struct SessionStore {
    root: PathBuf,
    sessions: RwLock<HashMap<String, Slot>>,
}

impl SessionStore {
    /// Opens `data_dir`, creating it if needed, and reloads every persisted session.
    pub fn open(data_dir: &Path) -> io::Result<Self> {
        let root = data_dir.join("sessions");
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if !dir.is_dir() {
                continue;
            }
            match load(&dir) {
                Ok(record) => {
                    sessions.insert(record.session.id().to_string(), Arc::new(Mutex::new(record)));
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipping unreadable session"),
            }
        }
        tracing::info!(count = sessions.len(), "sessions loaded");
        Ok(SessionStore { root, sessions: RwLock::new(sessions) })
    }

    pub fn get(&self, id: &str) -> Option<Slot> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes a new session to disk, then registers it.
    pub fn insert(&self, session: ExactSession, series: &ExactSeries, seed: u64) -> io::Result<Slot> {
        let dir = self.root.join(session.id());
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(SERIES_FILE), series.to_csv().as_bytes())?;
        File::create(dir.join(LEDGER_FILE))?.sync_all()?;
        let id = session.id().to_string();
        let record = SessionRecord {
            session,
            reveal: None,
            seed,
            symbol: series.symbol().to_string(),
            timeframe: series.timeframe().to_string(),
            dir,
        };
        record.save_state()?;
        let slot = Arc::new(Mutex::new(record));
        self.sessions.write().expect("store lock").insert(id, slot.clone());
        Ok(slot)
    }
}

fn load(dir: &Path) -> io::Result<SessionRecord> {
    let bad = |e: &dyn std::fmt::Display| io::Error::new(io::ErrorKind::InvalidData, e.to_string());
    let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?).map_err(|e| bad(&e))?;
    let series: ExactSeries =
        parse_csv(&fs::read_to_string(dir.join(SERIES_FILE))?, &meta.symbol, &meta.timeframe).map_err(|e| bad(&e))?;
    let ledger_text = fs::read_to_string(dir.join(LEDGER_FILE)).unwrap_or_default();
    let ledger = CommitmentLedger::from_jsonl(&ledger_text).map_err(|e| bad(&e))?;
    let session = ExactSession::restore(
        meta.id.clone(),
        series,
        meta.seed,
        &meta.commitment,
        meta.state,
        meta.cursor,
        ledger,
    )
    .map_err(|e| bad(&e))?;
    let reveal = if meta.state == SessionState::Revealed {
        let text = fs::read_to_string(dir.join(REVEAL_FILE))?;
        Some(serde_json::from_str(&text).map_err(|e| bad(&e))?)
    } else {
        None
    };
    Ok(SessionRecord {
        session,
        reveal,
        seed: meta.seed,
        symbol: meta.symbol,
        timeframe: meta.timeframe,
        dir: dir.to_path_buf(),
    })
}
