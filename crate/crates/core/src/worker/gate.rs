use std::sync::{Arc, Mutex, MutexGuard};

use super::WorkerError;
use crate::clock::{Clock, Parker};
use crate::txkv::{Item, KvError, Query, Store, WriteAction};

#[derive(Default)]
struct GateState {
    killed: bool,
    paused: bool,
    waiters: Vec<Parker>,
}

/// Every storage call of a worker passes through its gate. Killing the
/// worker makes all later calls fail; pausing blocks them until resumed,
/// which is how tests produce a stale owner.
pub struct Gate {
    clock: Clock,
    state: Mutex<GateState>,
}

impl Gate {
    pub fn new(clock: Clock) -> Self {
        Gate {
            clock,
            state: Mutex::new(GateState::default()),
        }
    }

    fn lock(&self) -> MutexGuard<'_, GateState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn is_killed(&self) -> bool {
        self.lock().killed
    }

    pub fn is_paused(&self) -> bool {
        self.lock().paused
    }

    pub fn kill(&self) {
        let waiters = {
            let mut st = self.lock();
            st.killed = true;
            std::mem::take(&mut st.waiters)
        };
        for p in waiters {
            self.clock.unpark(&p);
        }
    }

    pub fn pause(&self) {
        self.lock().paused = true;
    }

    pub fn resume(&self) {
        let waiters = {
            let mut st = self.lock();
            st.paused = false;
            std::mem::take(&mut st.waiters)
        };
        for p in waiters {
            self.clock.unpark(&p);
        }
    }

    pub fn pass(&self) -> Result<(), WorkerError> {
        let parker = Parker::new();
        loop {
            {
                let mut st = self.lock();
                if st.killed {
                    return Err(WorkerError::Killed);
                }
                if !st.paused {
                    return Ok(());
                }
                if !st.waiters.iter().any(|w| w.same(&parker)) {
                    st.waiters.push(parker.clone());
                }
            }
            self.clock.park_until(&parker, None);
        }
    }
}

/// Store handle of one worker.
#[derive(Clone)]
pub struct GatedStore {
    store: Arc<Store>,
    gate: Arc<Gate>,
}

impl GatedStore {
    pub fn new(store: Arc<Store>, gate: Arc<Gate>) -> Self {
        GatedStore { store, gate }
    }

    /// Ungated handle; used by processing reads.
    pub fn raw(&self) -> &Store {
        &self.store
    }

    pub fn gate(&self) -> &Gate {
        &self.gate
    }

    pub fn clock(&self) -> &Clock {
        self.store.clock()
    }

    fn call<T>(&self, f: impl FnOnce(&Store) -> Result<T, KvError>) -> Result<T, WorkerError> {
        self.gate.pass()?;
        Ok(f(&self.store)?)
    }

    pub fn get(&self, table: &str, key: &crate::txkv::ItemKey) -> Result<Option<Item>, WorkerError> {
        self.call(|s| s.get(table, key))
    }

    pub fn query(&self, q: &Query) -> Result<Vec<Item>, WorkerError> {
        self.call(|s| s.query(q))
    }

    pub fn scan(&self, table: &str) -> Result<Vec<Item>, WorkerError> {
        self.call(|s| s.scan(table))
    }

    pub fn write(&self, action: WriteAction) -> Result<Option<Item>, WorkerError> {
        self.call(|s| s.write(action))
    }

    pub fn transact_write(&self, actions: Vec<WriteAction>) -> Result<(), WorkerError> {
        self.call(|s| s.transact_write(actions))
    }
}
