//! Counting semaphore shared by the remote clients.

use parking_lot::{Condvar, Mutex};

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub(crate) struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    pub(crate) fn new(n: usize) -> Gate {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    pub(crate) fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock();
        while *free == 0 {
            self.cv.wait(&mut free);
        }
        *free -= 1;
        GateGuard(self)
    }
}

pub(crate) struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock() += 1;
        self.0.cv.notify_one();
    }
}
