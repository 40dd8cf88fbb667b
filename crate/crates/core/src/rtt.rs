//! Round-trip latency samples and player-experience classification.

use crate::MetricsError;
use serde::{Deserialize, Serialize};

/// Round-trip above this is noticeable to an interacting player.
pub const NOTICEABLE_RTT_NS: u64 = 60_000_000;
/// Round-trip above this makes interaction effectively unplayable.
pub const UNPLAYABLE_RTT_NS: u64 = 118_000_000;

/// One request/response timing pair, in nanoseconds on a shared
/// monotonic clock.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Serialize)]
pub struct RttSample {
    pub sent_ns: u64,
    pub recv_ns: u64,
}

impl RttSample {
    pub fn rtt_ns(&self) -> u64 {
        self.recv_ns.saturating_sub(self.sent_ns)
    }
}

/// Latency distribution summary over a set of round-trip samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RttStats {
    pub count: usize,
    pub mean_ns: f64,
    pub median_ns: u64,
    pub max_ns: u64,
    /// Fraction of samples strictly above [`NOTICEABLE_RTT_NS`].
    pub fraction_noticeable: f64,
    /// Fraction of samples strictly above [`UNPLAYABLE_RTT_NS`].
    pub fraction_unplayable: f64,
}

pub fn classify_rtt(samples: &[RttSample]) -> Result<RttStats, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mut sorted: Vec<u64> = samples.iter().map(RttSample::rtt_ns).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let total: u128 = sorted.iter().map(|&v| u128::from(v)).sum();
    let noticeable = sorted.iter().filter(|&&v| v > NOTICEABLE_RTT_NS).count();
    let unplayable = sorted.iter().filter(|&&v| v > UNPLAYABLE_RTT_NS).count();
    // Nearest-rank median: the value at 1-based rank ceil(n/2).
    let median_ns = sorted[(n + 1) / 2 - 1];
    Ok(RttStats {
        count: n,
        mean_ns: total as f64 / n as f64,
        median_ns,
        max_ns: sorted[n - 1],
        fraction_noticeable: noticeable as f64 / n as f64,
        fraction_unplayable: unplayable as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rtt_ms: u64) -> RttSample {
        RttSample { sent_ns: 1_000, recv_ns: 1_000 + rtt_ms * 1_000_000 }
    }

    #[test]
    fn thresholds_are_strict() {
        // Exactly at each threshold does not count as above it.
        let stats = classify_rtt(&[sample(60), sample(118)]).unwrap();
        assert_eq!(stats.fraction_noticeable, 0.5);
        assert_eq!(stats.fraction_unplayable, 0.0);

        let stats = classify_rtt(&[sample(61), sample(119)]).unwrap();
        assert_eq!(stats.fraction_noticeable, 1.0);
        assert_eq!(stats.fraction_unplayable, 0.5);
    }

    #[test]
    fn mixed_population_fractions() {
        let samples: Vec<_> = [5, 10, 30, 59, 60, 61, 100, 118, 119, 200]
            .iter()
            .map(|&ms| sample(ms))
            .collect();
        let stats = classify_rtt(&samples).unwrap();
        assert_eq!(stats.count, 10);
        assert_eq!(stats.fraction_noticeable, 0.5);
        assert_eq!(stats.fraction_unplayable, 0.2);
        assert_eq!(stats.max_ns, 200_000_000);
        // Nearest-rank median of 10 values is the 5th smallest.
        assert_eq!(stats.median_ns, 60_000_000);
    }

    #[test]
    fn single_sample() {
        let stats = classify_rtt(&[sample(42)]).unwrap();
        assert_eq!(stats.count, 1);
        assert_eq!(stats.mean_ns, 42_000_000.0);
        assert_eq!(stats.median_ns, 42_000_000);
        assert_eq!(stats.max_ns, 42_000_000);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(classify_rtt(&[]), Err(MetricsError::EmptySamples)));
    }

    #[test]
    fn clock_skew_saturates_to_zero() {
        let s = RttSample { sent_ns: 500, recv_ns: 100 };
        assert_eq!(s.rtt_ns(), 0);
    }
}
