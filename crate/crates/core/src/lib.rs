//! Trace-level statistics for tick-based game servers.
//!
//! Everything in this crate is pure computation over recorded data: tick
//! traces, round-trip samples, and the derived Variability Index. No I/O,
//! no shared state; all functions are safe to call concurrently.

mod error;
pub mod rtt;
pub mod summary;
pub mod trace;
pub mod vi;

pub use error::MetricsError;
pub use rtt::{classify_rtt, RttSample, RttStats, NOTICEABLE_RTT_NS, UNPLAYABLE_RTT_NS};
pub use summary::{component_shares, summarize_trace, VariabilityReport};
pub use trace::{
    decode_tick_frames, encode_tick_frame, parse_rtt_csv, parse_ticks_csv, write_rtt_csv,
    write_ticks_csv, ComponentKind, ComponentShares, TickRecord, TickTrace,
    DEFAULT_TICK_PERIOD_NS, RTT_CSV_HEADER, TICKS_CSV_HEADER,
};
pub use vi::{compute_vi, is_overloaded, ViAccumulator};
