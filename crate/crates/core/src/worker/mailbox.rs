use std::collections::VecDeque;
use std::sync::{Mutex, MutexGuard};
use std::time::Duration;

use crate::clock::{Clock, Parker};

struct Inner<T> {
    items: VecDeque<T>,
    waiters: Vec<Parker>,
}

/// Queue between stations. Consumers wait on the clock, so a simulated clock
/// can advance while they are idle.
pub struct Mailbox<T> {
    inner: Mutex<Inner<T>>,
}

impl<T> Default for Mailbox<T> {
    fn default() -> Self {
        Mailbox {
            inner: Mutex::new(Inner {
                items: VecDeque::new(),
                waiters: Vec::new(),
            }),
        }
    }
}

impl<T> Mailbox<T> {
    fn lock(&self) -> MutexGuard<'_, Inner<T>> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, clock: &Clock, item: T) {
        let waiters = {
            let mut g = self.lock();
            g.items.push_back(item);
            std::mem::take(&mut g.waiters)
        };
        for p in waiters {
            clock.unpark(&p);
        }
    }

    /// Wakes every waiting consumer without enqueuing anything.
    pub fn notify(&self, clock: &Clock) {
        let waiters = std::mem::take(&mut self.lock().waiters);
        for p in waiters {
            clock.unpark(&p);
        }
    }

    pub fn try_pop(&self) -> Option<T> {
        self.lock().items.pop_front()
    }

    pub fn len(&self) -> usize {
        self.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pops an item, waiting until `deadline` (absolute clock time) at most.
    /// May return `None` early after a `notify`.
    pub fn pop_until(&self, clock: &Clock, parker: &Parker, deadline: Option<Duration>) -> Option<T> {
        {
            let mut g = self.lock();
            if let Some(x) = g.items.pop_front() {
                return Some(x);
            }
            if deadline.is_some_and(|d| clock.now() >= d) {
                return None;
            }
            if !g.waiters.iter().any(|w| w.same(parker)) {
                g.waiters.push(parker.clone());
            }
        }
        clock.park_until(parker, deadline);
        self.try_pop()
    }
}
