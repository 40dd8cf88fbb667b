//! A reference tick-based voxel game server with an instrumented loop.
//!
//! The server simulates the bundled voxel world at a fixed 20 Hz tick
//! rate, speaks a newline-delimited-JSON protocol to game clients, and
//! publishes one timing record per tick on a metrics side channel. Per
//! tick it reports busy time split across phases — player handling,
//! terrain rules, entities, persistence, networking, other — which is
//! the raw material for downstream variability analysis.
//!
//! Two run modes share one simulation core:
//! - [`server::Server`] binds real sockets and paces ticks with a wall
//!   clock, with work-proportional cost floors realized as CPU spin.
//! - [`lockstep::run_lockstep`] drives the same core and in-process
//!   clients on a virtual clock, producing bit-reproducible traces.

pub mod clock;
pub mod costs;
pub mod game;
pub mod lockstep;
pub mod metrics;
pub mod net;
pub mod protocol;
pub mod server;

pub use costs::{CostModel, TickWork};
pub use game::{GameCore, InEvent, SessionId, TickOutput};
pub use lockstep::{run_lockstep, LockstepConfig, LockstepRun};
pub use metrics::{request_snapshot, MetricsHub, MetricsMeta, METRICS_RING_CAP};
pub use protocol::{decode_action, decode_update, encode_line, PlayerAction, StateUpdate};
pub use server::{Server, ServerConfig, ServerError, WorldSource};
