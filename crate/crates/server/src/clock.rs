//! The fixed-period tick clock.
//!
//! A tick that finishes early sleeps out the rest of its slot. A tick
//! that overruns is not "caught up" with a burst of back-to-back ticks:
//! the next tick starts immediately and the deadline is re-based one
//! period from that start, so one slow tick delays the timeline instead
//! of distorting the ticks after it.

use std::time::{Duration, Instant};

#[derive(Debug)]
pub struct TickClock {
    period: Duration,
    deadline: Instant,
}

impl TickClock {
    pub fn new(period: Duration) -> TickClock {
        TickClock { period, deadline: Instant::now() + period }
    }

    pub fn period(&self) -> Duration {
        self.period
    }

    /// Wait out the remainder of the current tick slot, if any, and arm
    /// the next deadline. Returns how long it slept.
    pub fn wait(&mut self) -> Duration {
        let now = Instant::now();
        if now < self.deadline {
            let slack = self.deadline - now;
            std::thread::sleep(slack);
            self.deadline += self.period;
            slack
        } else {
            // Overrun: rebase rather than accumulate debt.
            self.deadline = now + self.period;
            Duration::ZERO
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_ticks_sleep_out_their_slot() {
        let period = Duration::from_millis(20);
        let mut clock = TickClock::new(period);
        let start = Instant::now();
        for _ in 0..5 {
            clock.wait();
        }
        let elapsed = start.elapsed();
        assert!(elapsed >= Duration::from_millis(95), "{elapsed:?}");
        assert!(elapsed < Duration::from_millis(200), "{elapsed:?}");
    }

    #[test]
    fn overruns_rebase_instead_of_bursting() {
        let period = Duration::from_millis(10);
        let mut clock = TickClock::new(period);
        std::thread::sleep(Duration::from_millis(35)); // blow through 3 slots
        assert_eq!(clock.wait(), Duration::ZERO, "late tick must not sleep");
        // The next slot is a full period from the overrun, not a burst.
        let start = Instant::now();
        clock.wait();
        assert!(start.elapsed() >= Duration::from_millis(9), "{:?}", start.elapsed());
    }
}
