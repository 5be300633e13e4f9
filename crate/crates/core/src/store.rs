//! Flat-file persistence for sessions, runs, trajectory frames and the
//! leaderboard.
//!
//! Layout under the data directory:
//!
//! ```text
//! sessions/<id>.jsonl      append-only action log
//! sessions/<id>.meta.json  committed log length, current design, best result
//! runs/<id>.json           evolutionary run state
//! frames/<id>.jsonl        trajectory frames
//! leaderboard.json
//! ```
//!
//! Every whole-file write goes to a temporary file that is then renamed. A
//! log append only counts once the meta file records the new log length, so
//! an interrupted append leaves either both the entry and the new design or
//! neither.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::challenges::{ChallengeId, EpisodeResult};
use crate::evolve::{self, RunState};
use crate::physics::{read_frames, write_frames, Frame};
use crate::shape::{
    apply_action, design_to_wire, replay, Action, ActionLog, ActorId, BrickChain, DesignWire,
    LogEntry, ShapeError,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("unknown frames {0}")]
    UnknownFrames(String),
    #[error("invalid action: {0}")]
    InvalidAction(#[source] ShapeError),
    #[error("seq {seq} out of range (last is {last:?})")]
    SeqOutOfRange { seq: u64, last: Option<u64> },
    #[error("invalid result: {0}")]
    InvalidResult(String),
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionMeta {
    format_version: u32,
    session_id: String,
    actor: ActorId,
    challenge_id: ChallengeId,
    /// Length of the committed prefix of the log file.
    log_bytes: u64,
    entries: u64,
    final_design: DesignWire,
    best_result: Option<EpisodeResult>,
    created_at: u64,
    updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogLine {
    format_version: u32,
    #[serde(flatten)]
    entry: LogEntry,
}

/// A session as read back from the store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub actor: ActorId,
    pub challenge_id: ChallengeId,
    pub log: ActionLog,
    pub final_design: Option<BrickChain>,
    pub best_result: Option<EpisodeResult>,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub challenge_id: ChallengeId,
    pub actor: ActorId,
    pub score: f64,
    pub design_hash: String,
    pub recorded_at: u64,
    /// Store-wide insertion counter; orders entries recorded in the same millisecond.
    pub order: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LeaderboardFile {
    format_version: u32,
    next_order: u64,
    entries: Vec<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub challenge_id: ChallengeId,
    pub generation: u64,
    pub status: evolve::RunStatus,
    pub best: Option<f64>,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let bytes = serde_json::to_vec_pretty(value).expect("store values serialize");
    Ok(write_atomic(path, &bytes)?)
}

fn corrupt(path: &Path, message: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Handle on a data directory. Writers are serialized internally.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    write_lock: Mutex<()>,
    counter: AtomicU64,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in ["sessions", "runs", "frames"] {
            fs::create_dir_all(root.join(dir))?;
        }
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
            counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ()> {
        self.write_lock.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn fresh_id(&self, prefix: &str) -> String {
        let mut h = Sha256::new();
        h.update(
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_nanos())
                .unwrap_or(0)
                .to_le_bytes(),
        );
        h.update(self.counter.fetch_add(1, Ordering::Relaxed).to_le_bytes());
        h.update(std::process::id().to_le_bytes());
        format!("{prefix}{}", &hex::encode(h.finalize())[..16])
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.meta.json"))
    }

    fn run_path(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(format!("{id}.json"))
    }

    fn frames_path(&self, id: &str) -> PathBuf {
        self.root.join("frames").join(format!("{id}.jsonl"))
    }

    fn leaderboard_path(&self) -> PathBuf {
        self.root.join("leaderboard.json")
    }

    // ---- sessions ----

    pub fn create_session(&self, actor: ActorId, challenge_id: ChallengeId) -> Result<SessionRecord, StoreError> {
        let _guard = self.lock();
        let id = self.fresh_id("s-");
        let now = now_ms();
        let meta = SessionMeta {
            format_version: FORMAT_VERSION,
            session_id: id.clone(),
            actor,
            challenge_id,
            log_bytes: 0,
            entries: 0,
            final_design: DesignWire::empty(),
            best_result: None,
            created_at: now,
            updated_at: now,
        };
        File::create(self.log_path(&id))?;
        write_json(&self.meta_path(&id), &meta)?;
        self.record_from(meta)
    }

    fn load_meta(&self, id: &str) -> Result<SessionMeta, StoreError> {
        let path = self.meta_path(id);
        if !valid_id(id) || !path.exists() {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        let meta: SessionMeta = read_json(&path)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(corrupt(&path, format!("format_version {}", meta.format_version)));
        }
        Ok(meta)
    }

    fn read_log(&self, meta: &SessionMeta) -> Result<ActionLog, StoreError> {
        let path = self.log_path(&meta.session_id);
        let mut bytes = Vec::with_capacity(meta.log_bytes as usize);
        File::open(&path)?.take(meta.log_bytes).read_to_end(&mut bytes)?;
        if (bytes.len() as u64) < meta.log_bytes {
            return Err(corrupt(&path, "log shorter than committed length"));
        }
        let mut log = ActionLog::new(meta.session_id.clone(), meta.challenge_id.as_str());
        for line in bytes.split(|b| *b == b'\n').filter(|l| !l.is_empty()) {
            let parsed: LogLine = serde_json::from_slice(line).map_err(|e| corrupt(&path, e.to_string()))?;
            log.entries.push(parsed.entry);
        }
        Ok(log)
    }

    fn final_design(meta: &SessionMeta, path: &Path) -> Result<Option<BrickChain>, StoreError> {
        if meta.final_design.angles.is_empty() {
            Ok(None)
        } else {
            BrickChain::from_wire(&meta.final_design)
                .map(Some)
                .map_err(|e| corrupt(path, e.to_string()))
        }
    }

    fn record_from(&self, meta: SessionMeta) -> Result<SessionRecord, StoreError> {
        let log = self.read_log(&meta)?;
        let final_design = Self::final_design(&meta, &self.meta_path(&meta.session_id))?;
        Ok(SessionRecord {
            session_id: meta.session_id,
            actor: meta.actor,
            challenge_id: meta.challenge_id,
            log,
            final_design,
            best_result: meta.best_result,
            created_at: meta.created_at,
            updated_at: meta.updated_at,
        })
    }

    pub fn get_session(&self, id: &str) -> Result<SessionRecord, StoreError> {
        let meta = self.load_meta(id)?;
        self.record_from(meta)
    }

    pub fn list_sessions(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("sessions"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".meta.json"))
                    .map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Validates `action` against the session's current design and appends
    /// it. Returns the new entry's sequence number and resulting design.
    pub fn append_action(
        &self,
        id: &str,
        action: Action,
        actor: ActorId,
    ) -> Result<(u64, Option<BrickChain>), StoreError> {
        let _guard = self.lock();
        let mut meta = self.load_meta(id)?;
        let meta_path = self.meta_path(id);
        let current = Self::final_design(&meta, &meta_path)?;
        let next = apply_action(current.as_ref(), &action).map_err(StoreError::InvalidAction)?;
        let seq = meta.entries;
        let mut line = serde_json::to_vec(&LogLine {
            format_version: FORMAT_VERSION,
            entry: LogEntry { seq, actor, action },
        })
        .expect("log entries serialize");
        line.push(b'\n');

        let log_path = self.log_path(id);
        let mut log = OpenOptions::new().write(true).open(&log_path)?;
        // Drop any tail left by an append that never committed.
        log.set_len(meta.log_bytes)?;
        log.seek(SeekFrom::Start(meta.log_bytes))?;
        log.write_all(&line)?;
        log.sync_all()?;

        meta.log_bytes += line.len() as u64;
        meta.entries += 1;
        meta.final_design = design_to_wire(next.as_ref());
        meta.updated_at = now_ms();
        write_json(&meta_path, &meta)?;
        Ok((seq, next))
    }

    /// The log up to and including `upto` (default: all of it) and the design
    /// it replays to.
    pub fn get_replay(&self, id: &str, upto: Option<u64>) -> Result<(ActionLog, Option<BrickChain>), StoreError> {
        let meta = self.load_meta(id)?;
        let log = self.read_log(&meta)?;
        let last = log.entries.last().map(|e| e.seq);
        let prefix = match upto {
            None => log,
            Some(seq) if last.is_some_and(|l| seq <= l) => log.prefix(seq),
            Some(seq) => return Err(StoreError::SeqOutOfRange { seq, last }),
        };
        let design = replay(&prefix).map_err(|e| corrupt(&self.log_path(id), e.to_string()))?;
        Ok((prefix, design))
    }

    /// Keeps `result` as the session's best if it scores higher. The result
    /// must belong to a design the session's log passed through.
    pub fn record_session_result(&self, id: &str, result: &EpisodeResult) -> Result<bool, StoreError> {
        let _guard = self.lock();
        let mut meta = self.load_meta(id)?;
        let log = self.read_log(&meta)?;
        let reachable = (0..log.entries.len() as u64).any(|seq| {
            replay(&log.prefix(seq))
                .ok()
                .flatten()
                .is_some_and(|d| d.content_hash() == result.design_hash)
        });
        if !reachable {
            return Err(StoreError::InvalidResult(
                "design was never produced in this session".into(),
            ));
        }
        if meta.best_result.as_ref().is_some_and(|b| b.score >= result.score) {
            return Ok(false);
        }
        let mut stored = result.clone();
        stored.frames = None;
        meta.best_result = Some(stored);
        meta.updated_at = now_ms();
        write_json(&self.meta_path(id), &meta)?;
        Ok(true)
    }

    // ---- leaderboard ----

    fn load_leaderboard(&self) -> Result<LeaderboardFile, StoreError> {
        let path = self.leaderboard_path();
        if !path.exists() {
            return Ok(LeaderboardFile {
                format_version: FORMAT_VERSION,
                next_order: 0,
                entries: Vec::new(),
            });
        }
        read_json(&path)
    }

    /// Best-first entries for one challenge; ties go to the earlier record.
    pub fn leaderboard(&self, challenge_id: ChallengeId) -> Result<Vec<LeaderboardEntry>, StoreError> {
        let mut entries: Vec<LeaderboardEntry> = self
            .load_leaderboard()?
            .entries
            .into_iter()
            .filter(|e| e.challenge_id == challenge_id)
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.recorded_at.cmp(&b.recorded_at))
                .then(a.order.cmp(&b.order))
        });
        Ok(entries)
    }

    /// Keeps the per-(challenge, actor) maximum and returns the actor's
    /// 1-based rank on that challenge.
    pub fn record_result(
        &self,
        challenge_id: ChallengeId,
        actor: &ActorId,
        result: &EpisodeResult,
    ) -> Result<usize, StoreError> {
        if !(0.0..=1.0).contains(&result.score) {
            return Err(StoreError::InvalidResult(format!("score {} outside [0, 1]", result.score)));
        }
        {
            let _guard = self.lock();
            let mut board = self.load_leaderboard()?;
            let existing = board
                .entries
                .iter_mut()
                .find(|e| e.challenge_id == challenge_id && &e.actor == actor);
            let order = board.next_order;
            let fresh = LeaderboardEntry {
                challenge_id,
                actor: actor.clone(),
                score: result.score,
                design_hash: result.design_hash.clone(),
                recorded_at: now_ms(),
                order,
            };
            let changed = match existing {
                Some(e) if e.score >= result.score => false,
                Some(e) => {
                    *e = fresh;
                    true
                }
                None => {
                    board.entries.push(fresh);
                    true
                }
            };
            if changed {
                board.next_order += 1;
                write_json(&self.leaderboard_path(), &board)?;
            }
        }
        let rank = self
            .leaderboard(challenge_id)?
            .iter()
            .position(|e| &e.actor == actor)
            .expect("actor has an entry")
            + 1;
        Ok(rank)
    }

    // ---- runs ----

    pub fn save_run(&self, state: &RunState) -> Result<(), StoreError> {
        if !valid_id(&state.run_id) {
            return Err(StoreError::UnknownRun(state.run_id.clone()));
        }
        let _guard = self.lock();
        write_json(&self.run_path(&state.run_id), state)
    }

    pub fn load_run(&self, id: &str) -> Result<RunState, StoreError> {
        let path = self.run_path(id);
        if !valid_id(id) || !path.exists() {
            return Err(StoreError::UnknownRun(id.to_string()));
        }
        let json = fs::read_to_string(&path)?;
        evolve::load_run(&json).map_err(|e| corrupt(&path, e.to_string()))
    }

    pub fn list_runs(&self) -> Result<Vec<RunSummary>, StoreError> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("runs"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_string))
            .collect();
        ids.sort();
        ids.iter()
            .map(|id| {
                let s = self.load_run(id)?;
                Ok(RunSummary {
                    run_id: s.run_id.clone(),
                    challenge_id: s.challenge.id,
                    generation: s.generation,
                    status: s.status,
                    best: s.best_ever.fitness,
                })
            })
            .collect()
    }

    pub fn new_run_id(&self) -> String {
        self.fresh_id("r-")
    }

    // ---- frames ----

    /// Stores frames under a content-derived id and returns that id.
    pub fn save_frames(&self, frames: &[Frame]) -> Result<String, StoreError> {
        let mut bytes = Vec::new();
        write_frames(&mut bytes, frames)?;
        let id = format!("f-{}", &hex::encode(Sha256::digest(&bytes))[..24]);
        let path = self.frames_path(&id);
        if !path.exists() {
            write_atomic(&path, &bytes)?;
        }
        Ok(id)
    }

    /// Path where [`Store::save_frames`] put the frames with this id.
    pub fn frames_file(&self, id: &str) -> Result<PathBuf, StoreError> {
        let path = self.frames_path(id);
        if !valid_id(id) || !path.exists() {
            return Err(StoreError::UnknownFrames(id.to_string()));
        }
        Ok(path)
    }

    pub fn load_frames(&self, id: &str) -> Result<Vec<Frame>, StoreError> {
        let path = self.frames_file(id)?;
        Ok(read_frames(BufReader::new(File::open(path)?))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_restricted() {
        assert!(valid_id("s-0123abcd"));
        assert!(!valid_id("../etc"));
        assert!(!valid_id(""));
        assert!(!valid_id("a/b"));
    }
}
