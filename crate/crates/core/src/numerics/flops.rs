//! Scalar floating-point operation accounting.
//!
//! Every kernel in this crate reports its work to a thread-local counter.
//! The model is fixed: add, subtract, multiply, divide and square root cost
//! one FLOP each; a transcendental evaluation (`exp`, `ln`) costs
//! [`TRANSCENDENTAL`].
//!
//! Counting is per thread, so concurrent recovery runs on different threads
//! never see each other's work. Use [`counter_scope`] to measure a
//! computation; scopes nest and inner work is always included in the
//! enclosing scope.

use std::cell::Cell;

/// Cost charged for one `exp` or `ln` evaluation.
pub const TRANSCENDENTAL: u64 = 10;

thread_local! {
    static COUNTER: Cell<u64> = const { Cell::new(0) };
}

/// Charge `n` FLOPs to the current thread.
#[inline]
pub fn add(n: u64) {
    COUNTER.with(|c| c.set(c.get() + n));
}

/// Total FLOPs charged on this thread since it started.
#[inline]
pub fn total() -> u64 {
    COUNTER.with(Cell::get)
}

/// Runs `f` and returns its result together with the FLOPs it consumed.
pub fn counter_scope<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let start = total();
    let out = f();
    (out, total() - start)
}

/// Running FLOP tally for an iterative algorithm. Each [`FlopCounter::lap`]
/// adds the work done since the previous lap.
#[derive(Debug, Clone)]
pub struct FlopCounter {
    mark: u64,
    count: u64,
}

impl FlopCounter {
    pub fn start() -> Self {
        Self {
            mark: total(),
            count: 0,
        }
    }

    /// Fold in the work done since the last lap and return the cumulative
    /// count.
    pub fn lap(&mut self) -> u64 {
        let now = total();
        self.count += now - self.mark;
        self.mark = now;
        self.count
    }

    /// Drop anything charged since the last lap without counting it.
    pub fn skip(&mut self) {
        self.mark = total();
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn reset(&mut self) {
        self.mark = total();
        self.count = 0;
    }
}
