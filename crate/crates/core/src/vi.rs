//! The Variability Index: normalized cycle-to-cycle jitter of tick durations.
//!
//! VI = (Σ_{n=1..N_a-1} |max(b, t_n) - max(b, t_{n-1})|) / (N_e · 2b)
//!
//! where t_i is the busy duration of tick i, b the overloaded threshold,
//! N_a the actual tick count and N_e = floor(wall / b) the expected tick
//! count for the window. The first tick contributes difference 0. A trace
//! whose ticks never exceed b, or whose ticks all share one duration ≥ b,
//! scores exactly 0. The sum is accumulated in integers so the streaming
//! and batch evaluations are bit-for-bit identical.

use crate::{MetricsError, TickTrace};

/// A tick is overloaded when its compute time strictly exceeds the
/// threshold; a tick of exactly `b` still keeps the schedule.
pub fn is_overloaded(busy_ns: u64, threshold_ns: u64) -> bool {
    busy_ns > threshold_ns
}

/// Streaming evaluator for the Variability Index numerator.
///
/// Push busy durations in tick order; the absolute-difference sum is exact
/// integer arithmetic, so feeding a trace through this accumulator equals
/// the batch [`compute_vi`] bit-for-bit.
#[derive(Clone, Debug)]
pub struct ViAccumulator {
    threshold_ns: u64,
    prev_clamped: Option<u64>,
    diff_sum: u128,
    count: u64,
}

impl ViAccumulator {
    pub fn new(threshold_ns: u64) -> Self {
        ViAccumulator { threshold_ns, prev_clamped: None, diff_sum: 0, count: 0 }
    }

    pub fn push(&mut self, busy_ns: u64) {
        let clamped = busy_ns.max(self.threshold_ns);
        if let Some(prev) = self.prev_clamped {
            self.diff_sum += u128::from(clamped.abs_diff(prev));
        }
        self.prev_clamped = Some(clamped);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Finish against a measurement window of `wall_duration_ns`.
    pub fn finish(&self, wall_duration_ns: u64) -> Result<f64, MetricsError> {
        if self.count == 0 {
            return Err(MetricsError::EmptyTrace);
        }
        if wall_duration_ns < self.threshold_ns {
            return Err(MetricsError::WindowTooShort);
        }
        let expected_ticks = wall_duration_ns / self.threshold_ns;
        let denom = 2.0 * expected_ticks as f64 * self.threshold_ns as f64;
        let vi = self.diff_sum as f64 / denom;
        if vi > 1.0 {
            log::warn!(
                "variability index {vi} exceeds 1 before clamping (diff sum {}, N_e {expected_ticks})",
                self.diff_sum
            );
            return Ok(1.0);
        }
        Ok(vi)
    }
}

/// Batch Variability Index of a trace at overloaded threshold `threshold_ns`.
pub fn compute_vi(trace: &TickTrace, threshold_ns: u64) -> Result<f64, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let mut acc = ViAccumulator::new(threshold_ns);
    for busy in trace.busy_durations() {
        acc.push(busy);
    }
    acc.finish(trace.wall_duration_ns)
}
