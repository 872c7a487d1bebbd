use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

/// Millisecond clock shared by pipeline stages and backends.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
    /// Blocks (or, for a simulated clock, jumps) until `t_ms`.
    fn sleep_until(&self, t_ms: u64);

    fn sleep_for(&self, ms: u64) {
        self.sleep_until(self.now_ms() + ms);
    }
}

/// Deterministic clock: sleeping advances time instantly.
#[derive(Debug, Default)]
pub struct SimClock {
    now: AtomicU64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(ms: u64) -> Self {
        Self { now: AtomicU64::new(ms) }
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_until(&self, t_ms: u64) {
        self.now.fetch_max(t_ms, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }

    fn sleep_until(&self, t_ms: u64) {
        let now = self.now_ms();
        if t_ms > now {
            std::thread::sleep(Duration::from_millis(t_ms - now));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_clock_never_goes_back() {
        let c = SimClock::new();
        c.sleep_until(100);
        c.sleep_until(50);
        assert_eq!(c.now_ms(), 100);
        c.sleep_for(5);
        assert_eq!(c.now_ms(), 105);
    }
}
