//! Whole-trace summaries: busy-duration statistics and component shares.

use crate::trace::{ComponentKind, ComponentShares};
use crate::{compute_vi, is_overloaded, MetricsError, TickTrace};

/// Summary statistics of one tick trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariabilityReport {
    pub vi: f64,
    pub mean_busy_ns: f64,
    pub median_busy_ns: u64,
    pub p95_busy_ns: u64,
    pub max_busy_ns: u64,
    pub overloaded_fraction: f64,
    pub threshold_ns: u64,
}

/// Nearest-rank percentile of a sorted slice: the value at rank
/// ceil(p/100 · n), 1-based.
fn nearest_rank(sorted: &[u64], percentile: u32) -> u64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len() as u64;
    let rank = (u64::from(percentile) * n).div_ceil(100).max(1);
    sorted[(rank - 1) as usize]
}

pub fn summarize_trace(trace: &TickTrace, threshold_ns: u64) -> Result<VariabilityReport, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let vi = compute_vi(trace, threshold_ns)?;
    let mut sorted: Vec<u64> = trace.busy_durations().collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let total: u128 = sorted.iter().map(|&b| u128::from(b)).sum();
    let overloaded = trace.busy_durations().filter(|&b| is_overloaded(b, threshold_ns)).count();
    Ok(VariabilityReport {
        vi,
        mean_busy_ns: total as f64 / n as f64,
        median_busy_ns: nearest_rank(&sorted, 50),
        p95_busy_ns: nearest_rank(&sorted, 95),
        max_busy_ns: sorted[n - 1],
        overloaded_fraction: overloaded as f64 / n as f64,
        threshold_ns,
    })
}

/// Busy-time-weighted average of per-tick component shares.
///
/// Errors when the trace records no computation at all (total busy = 0).
pub fn component_shares(trace: &TickTrace) -> Result<ComponentShares, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let total: f64 = trace.busy_durations().map(|b| b as f64).sum();
    if total == 0.0 {
        return Err(MetricsError::NoComputation);
    }
    let mut out = ComponentShares::default();
    for tick in &trace.ticks {
        let weight = tick.busy_ns as f64 / total;
        for kind in ComponentKind::ALL {
            out.set(kind, out.get(kind) + weight * tick.shares.get(kind));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TickRecord;

    const B: u64 = 50_000_000;

    fn tick(index: u64, busy_ns: u64, shares: ComponentShares) -> TickRecord {
        TickRecord { index, start_ns: index * B, busy_ns, shares }
    }

    fn only(kind: ComponentKind) -> ComponentShares {
        let mut s = ComponentShares::default();
        s.set(kind, 1.0);
        s
    }

    #[test]
    fn constant_trace_summary() {
        let ticks: Vec<_> = (0..200).map(|i| tick(i, B, only(ComponentKind::Other))).collect();
        let trace = TickTrace::new(ticks, 10_000_000_000, B).unwrap();
        let report = summarize_trace(&trace, B).unwrap();
        assert_eq!(report.vi, 0.0);
        assert_eq!(report.mean_busy_ns, B as f64);
        assert_eq!(report.median_busy_ns, B);
        assert_eq!(report.max_busy_ns, B);
        assert_eq!(report.overloaded_fraction, 0.0);
    }

    #[test]
    fn paper_three_tick_summary() {
        let filler = 100 * B - 2 * B;
        let ticks = vec![
            tick(0, B, only(ComponentKind::Other)),
            tick(1, filler, only(ComponentKind::Other)),
            tick(2, B, only(ComponentKind::Other)),
        ];
        let trace = TickTrace::new(ticks, 100 * B, B).unwrap();
        let report = summarize_trace(&trace, B).unwrap();
        assert!((report.vi - 0.97).abs() < 1e-9);
        assert_eq!(report.max_busy_ns, 4_900_000_000);
        assert!((report.overloaded_fraction - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn percentile_ordering_invariant() {
        let ticks: Vec<_> =
            (0..37).map(|i| tick(i, (i * 7 % 23 + 1) * 1_000_000, only(ComponentKind::Other))).collect();
        let trace = TickTrace::from_records(ticks, B).unwrap();
        let r = summarize_trace(&trace, B).unwrap();
        assert!(r.max_busy_ns >= r.p95_busy_ns);
        assert!(r.p95_busy_ns >= r.median_busy_ns);
    }

    #[test]
    fn single_tick_shares_pass_through() {
        let trace =
            TickTrace::from_records(vec![tick(0, 1000, only(ComponentKind::Entities))], B).unwrap();
        let shares = component_shares(&trace).unwrap();
        assert_eq!(shares.entities, 1.0);
    }

    #[test]
    fn equal_busy_ticks_average_equally() {
        let ticks = vec![
            tick(0, 100_000_000, only(ComponentKind::Entities)),
            tick(1, 100_000_000, only(ComponentKind::TerrainRules)),
        ];
        let trace = TickTrace::from_records(ticks, B).unwrap();
        let shares = component_shares(&trace).unwrap();
        assert!((shares.entities - 0.5).abs() < 1e-12);
        assert!((shares.terrain_rules - 0.5).abs() < 1e-12);
        assert!((shares.sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn all_idle_trace_has_no_shares() {
        let ticks = vec![tick(0, 0, ComponentShares::default())];
        let trace = TickTrace::from_records(ticks, B).unwrap();
        assert!(matches!(component_shares(&trace), Err(MetricsError::NoComputation)));
    }
}
