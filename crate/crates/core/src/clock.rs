//! Injectable time source.
//!
//! Every component that reads time or waits goes through [`Clock`]. The real
//! clock maps directly onto `Instant` and condition variables. The simulated
//! clock is an auto-advancing virtual clock: time only moves forward when every
//! registered participant thread is parked, and then it jumps straight to the
//! earliest pending deadline. Compute between waits takes zero simulated time,
//! which makes latency measurements independent of host load.
//!
//! Threads that interact with a simulated clock must be registered, either by
//! being started through [`Clock::spawn`] or by holding a [`Participation`]
//! guard from [`Clock::participate`]. Blocking on anything other than the clock
//! (mutexes held for short critical sections are fine) while other participants
//! wait for time to advance will stall the simulation.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

/// Wall-clock milliseconds the simulated clock reports at time zero.
pub const SIM_EPOCH_MS: u64 = 1_700_000_000_000;

#[derive(Clone)]
pub struct Clock {
    inner: Arc<Inner>,
}

enum Inner {
    Real { origin: Instant, epoch_ms: u64 },
    Sim(Mutex<SimState>),
}

struct SimState {
    now: Duration,
    running: usize,
    seq: u64,
    sleepers: BTreeMap<(Duration, u64), Parker>,
}

/// A per-thread wake-up handle with a single saved token, like
/// `std::thread::park`: an `unpark` that arrives before `park` makes the next
/// `park` return immediately.
#[derive(Clone)]
pub struct Parker(Arc<ParkerInner>);

struct ParkerInner {
    state: Mutex<ParkState>,
    cv: Condvar,
}

#[derive(Default)]
struct ParkState {
    token: bool,
    waiting: bool,
    sleeper: Option<(Duration, u64)>,
}

impl Default for Parker {
    fn default() -> Self {
        Parker::new()
    }
}

impl Parker {
    pub fn new() -> Self {
        Parker(Arc::new(ParkerInner {
            state: Mutex::new(ParkState::default()),
            cv: Condvar::new(),
        }))
    }

    pub fn same(&self, other: &Parker) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn lock(&self) -> MutexGuard<'_, ParkState> {
        self.0.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl std::fmt::Debug for Clock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &*self.inner {
            Inner::Real { .. } => f.write_str("Clock::Real"),
            Inner::Sim(_) => write!(f, "Clock::Sim({:?})", self.now()),
        }
    }
}

impl Clock {
    pub fn real() -> Self {
        let epoch_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Clock {
            inner: Arc::new(Inner::Real {
                origin: Instant::now(),
                epoch_ms,
            }),
        }
    }

    pub fn simulated() -> Self {
        Clock {
            inner: Arc::new(Inner::Sim(Mutex::new(SimState {
                now: Duration::ZERO,
                running: 0,
                seq: 0,
                sleepers: BTreeMap::new(),
            }))),
        }
    }

    pub fn is_simulated(&self) -> bool {
        matches!(&*self.inner, Inner::Sim(_))
    }

    fn sim(&self) -> Option<MutexGuard<'_, SimState>> {
        match &*self.inner {
            Inner::Sim(m) => Some(m.lock().unwrap_or_else(|e| e.into_inner())),
            Inner::Real { .. } => None,
        }
    }

    /// Time elapsed since the clock was created.
    pub fn now(&self) -> Duration {
        match &*self.inner {
            Inner::Real { origin, .. } => origin.elapsed(),
            Inner::Sim(_) => self.sim().map(|s| s.now).unwrap_or_default(),
        }
    }

    /// Wall-clock milliseconds, monotone for the lifetime of the clock.
    pub fn now_millis(&self) -> u64 {
        let base = match &*self.inner {
            Inner::Real { epoch_ms, .. } => *epoch_ms,
            Inner::Sim(_) => SIM_EPOCH_MS,
        };
        base + self.now().as_millis() as u64
    }

    pub fn sleep(&self, d: Duration) {
        if d.is_zero() {
            return;
        }
        let deadline = self.now() + d;
        let parker = Parker::new();
        while self.now() < deadline {
            self.park_until(&parker, Some(deadline));
        }
    }

    /// Blocks until `parker` is unparked or the clock reaches `deadline`
    /// (absolute, in clock time). May return early; callers re-check their
    /// condition.
    pub fn park_until(&self, parker: &Parker, deadline: Option<Duration>) {
        match &*self.inner {
            Inner::Real { origin, .. } => {
                let mut st = parker.lock();
                if st.token {
                    st.token = false;
                    return;
                }
                st.waiting = true;
                loop {
                    if !st.waiting {
                        break;
                    }
                    match deadline {
                        Some(dl) => {
                            let elapsed = origin.elapsed();
                            if elapsed >= dl {
                                break;
                            }
                            st = parker
                                .0
                                .cv
                                .wait_timeout(st, dl - elapsed)
                                .unwrap_or_else(|e| e.into_inner())
                                .0;
                        }
                        None => {
                            st = parker.0.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                        }
                    }
                }
                st.waiting = false;
            }
            Inner::Sim(_) => {
                let mut g = self.sim().expect("sim clock");
                if let Some(dl) = deadline {
                    if dl <= g.now {
                        return;
                    }
                }
                {
                    let mut st = parker.lock();
                    if st.token {
                        st.token = false;
                        return;
                    }
                    st.waiting = true;
                    if let Some(dl) = deadline {
                        g.seq += 1;
                        let key = (dl, g.seq);
                        st.sleeper = Some(key);
                        g.sleepers.insert(key, parker.clone());
                    }
                }
                g.running = g.running.saturating_sub(1);
                advance(&mut g);
                drop(g);
                let mut st = parker.lock();
                while st.waiting {
                    st = parker.0.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                }
            }
        }
    }

    pub fn unpark(&self, parker: &Parker) {
        match &*self.inner {
            Inner::Real { .. } => {
                let mut st = parker.lock();
                if st.waiting {
                    st.waiting = false;
                    parker.0.cv.notify_all();
                } else {
                    st.token = true;
                }
            }
            Inner::Sim(_) => {
                let mut g = self.sim().expect("sim clock");
                let mut st = parker.lock();
                if st.waiting {
                    if let Some(key) = st.sleeper.take() {
                        g.sleepers.remove(&key);
                    }
                    st.waiting = false;
                    g.running += 1;
                    parker.0.cv.notify_all();
                } else {
                    st.token = true;
                }
            }
        }
    }

    /// Registers the calling thread as a participant of a simulated clock.
    /// No-op for the real clock.
    pub fn participate(&self) -> Participation {
        if let Some(mut g) = self.sim() {
            g.running += 1;
        }
        Participation { clock: self.clone() }
    }

    /// Spawns a thread registered with this clock.
    pub fn spawn<F>(&self, name: &str, f: F) -> ClockThread
    where
        F: FnOnce() + Send + 'static,
    {
        if let Some(mut g) = self.sim() {
            g.running += 1;
        }
        let done = Arc::new(AtomicBool::new(false));
        let exit = Parker::new();
        let clock = self.clone();
        let (done2, exit2) = (done.clone(), exit.clone());
        let handle = std::thread::Builder::new()
            .name(name.to_string())
            .spawn(move || {
                let guard = Participation { clock: clock.clone() };
                let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
                done2.store(true, Ordering::SeqCst);
                clock.unpark(&exit2);
                drop(guard);
                if let Err(p) = result {
                    std::panic::resume_unwind(p);
                }
            })
            .expect("spawn thread");
        ClockThread {
            handle: Some(handle),
            done,
            exit,
        }
    }
}

fn advance(g: &mut SimState) {
    while g.running == 0 {
        let Some((&(t, _), _)) = g.sleepers.first_key_value() else {
            return;
        };
        if t > g.now {
            g.now = t;
        }
        while let Some((&(dl, seq), _)) = g.sleepers.first_key_value() {
            if dl > g.now {
                break;
            }
            let p = g.sleepers.remove(&(dl, seq)).expect("present");
            let mut st = p.lock();
            if st.waiting {
                st.waiting = false;
                st.sleeper = None;
                g.running += 1;
                p.0.cv.notify_all();
            }
        }
    }
}

/// Keeps the owning thread counted as runnable by a simulated clock.
pub struct Participation {
    clock: Clock,
}

impl Drop for Participation {
    fn drop(&mut self) {
        if let Some(mut g) = self.clock.sim() {
            g.running = g.running.saturating_sub(1);
            advance(&mut g);
        }
    }
}

pub struct ClockThread {
    handle: Option<JoinHandle<()>>,
    done: Arc<AtomicBool>,
    exit: Parker,
}

impl ClockThread {
    pub fn is_finished(&self) -> bool {
        self.done.load(Ordering::SeqCst)
    }

    /// Waits for the thread to exit. Under a simulated clock the caller is
    /// parked meanwhile so that time can keep advancing.
    pub fn join(mut self, clock: &Clock) {
        while !self.done.load(Ordering::SeqCst) {
            clock.park_until(&self.exit, None);
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
