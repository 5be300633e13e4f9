use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, MutexGuard};

use coevo_core::challenges::ChallengeId;
use coevo_core::evolve::{inject, next_generation, EvoParams, HistoryRow, Individual, RunState, RunStatus};
use coevo_core::store::Store;
use coevo_core::{ActorId, BrickChain};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ErrorCode};

#[derive(Debug)]
pub struct RunEntry {
    pub state: RunState,
    /// Generations requested but not yet computed.
    pub pending: u64,
    /// Injections waiting for the next generation boundary.
    pub injections: VecDeque<(BrickChain, ActorId)>,
    pub worker_active: bool,
    pub last_error: Option<String>,
}

/// Client view of a run: everything except the generator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunView {
    pub run_id: String,
    pub challenge_id: ChallengeId,
    pub generation: u64,
    pub status: RunStatus,
    pub busy: bool,
    pub pending_generations: u64,
    pub pending_injections: usize,
    pub params: EvoParams,
    pub history: Vec<HistoryRow>,
    pub best_ever: Individual,
    pub population: Vec<Individual>,
    pub archive_size: usize,
    pub last_error: Option<String>,
}

impl RunEntry {
    pub fn new(state: RunState) -> Self {
        Self {
            state,
            pending: 0,
            injections: VecDeque::new(),
            worker_active: false,
            last_error: None,
        }
    }

    pub fn view(&self) -> RunView {
        let s = &self.state;
        RunView {
            run_id: s.run_id.clone(),
            challenge_id: s.challenge.id,
            generation: s.generation,
            status: s.status,
            busy: self.worker_active,
            pending_generations: self.pending,
            pending_injections: self.injections.len(),
            params: s.params.clone(),
            history: s.history.clone(),
            best_ever: s.best_ever.clone(),
            population: s.population.clone(),
            archive_size: s.archive.len(),
            last_error: self.last_error.clone(),
        }
    }

    /// Applies queued injections in arrival order.
    fn drain_injections(&mut self) {
        while let Some((design, actor)) = self.injections.pop_front() {
            match inject(self.state.clone(), Some(design), actor) {
                Ok(next) => self.state = next,
                Err(e) => self.last_error = Some(e.to_string()),
            }
        }
    }
}

pub type SharedEntry = Arc<Mutex<RunEntry>>;

pub fn lock(entry: &SharedEntry) -> MutexGuard<'_, RunEntry> {
    entry.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Default)]
pub struct Runs {
    map: Mutex<HashMap<String, SharedEntry>>,
}

impl Runs {
    pub fn insert(&self, state: RunState) -> SharedEntry {
        let id = state.run_id.clone();
        let entry = Arc::new(Mutex::new(RunEntry::new(state)));
        self.map
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, entry.clone());
        entry
    }

    /// The live entry, loading it from the store on first access.
    pub fn get(&self, id: &str, store: &Store) -> Result<SharedEntry, ApiError> {
        let mut map = self.map.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(e) = map.get(id) {
            return Ok(e.clone());
        }
        let state = store.load_run(id)?;
        let entry = Arc::new(Mutex::new(RunEntry::new(state)));
        map.insert(id.to_string(), entry.clone());
        Ok(entry)
    }
}

fn persist(store: &Store, entry: &mut RunEntry) {
    if let Err(e) = store.save_run(&entry.state) {
        entry.last_error = Some(e.to_string());
    }
}

/// Computes pending generations until none are left or the run stops
/// running. Each generation is computed on a snapshot and swapped in whole,
/// so readers never see a half-built population.
pub async fn drive(store: Arc<Store>, entry: SharedEntry) {
    loop {
        let snapshot = {
            let mut e = lock(&entry);
            e.drain_injections();
            if e.state.status != RunStatus::Running || e.pending == 0 {
                e.worker_active = false;
                persist(&store, &mut e);
                return;
            }
            e.state.clone()
        };
        let result = tokio::task::spawn_blocking(move || next_generation(snapshot)).await;
        let mut e = lock(&entry);
        match result {
            Ok(Ok(mut next)) => {
                if e.state.status == RunStatus::Done {
                    e.pending = 0;
                    continue;
                }
                next.status = e.state.status;
                e.state = next;
                e.pending -= 1;
                persist(&store, &mut e);
            }
            Ok(Err(err)) => {
                e.pending = 0;
                e.last_error = Some(err.to_string());
            }
            Err(join) => {
                e.pending = 0;
                e.last_error = Some(join.to_string());
            }
        }
    }
}

/// Starts a worker for the entry unless one is already running.
pub fn ensure_worker(store: &Arc<Store>, entry: &SharedEntry) {
    let start = {
        let mut e = lock(entry);
        let start = !e.worker_active && e.pending > 0 && e.state.status == RunStatus::Running;
        if start {
            e.worker_active = true;
        }
        start
    };
    if start {
        tokio::spawn(drive(store.clone(), entry.clone()));
    }
}

pub fn require_active(entry: &RunEntry) -> Result<(), ApiError> {
    if entry.state.status == RunStatus::Done {
        Err(ApiError::new(ErrorCode::RunDone, "run is done"))
    } else {
        Ok(())
    }
}
