//! Player emulation: bot swarms that hold real game connections.
//!
//! The emulator drives N concurrent bot sessions against a running
//! server. Every bot paces one action per tick period (20 Hz) over its
//! own connection, and one designated bot doubles as the latency probe:
//! it says something in chat and times how long the server takes to
//! echo it back. Probe samples, censored-probe counts, and the total
//! action volume come back in an [`EmulationOutcome`].
//!
//! All round-trip times are measured on a single monotonic clock shared
//! by every session of one emulation, so samples are comparable and
//! never negative.

mod session;
mod swarm;

pub use session::{
    connect_bots, Clock, EmulatorError, NonceAllocator, ProbeOutcome, BotSession,
    CONNECT_RETRIES, DEFAULT_STAGGER, PROBE_TIMEOUT,
};
pub use swarm::{run_emulation, Behavior, EmulationOutcome, EmulatorConfig};
