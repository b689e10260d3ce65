use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

/// Millisecond time source for resource accounting.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Real elapsed time since construction.
#[derive(Debug)]
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
}

/// Advances by one millisecond per reading, so recorded durations are a pure
/// function of the call sequence. Used where run files must be reproducible.
#[derive(Debug, Default)]
pub struct LogicalClock {
    ticks: AtomicU64,
}

impl LogicalClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.ticks.fetch_add(1, Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logical_clock_is_reproducible() {
        let a = LogicalClock::new();
        let b = LogicalClock::new();
        let xs: Vec<u64> = (0..5).map(|_| a.now_ms()).collect();
        let ys: Vec<u64> = (0..5).map(|_| b.now_ms()).collect();
        assert_eq!(xs, ys);
        assert_eq!(xs, vec![0, 1, 2, 3, 4]);
    }
}
