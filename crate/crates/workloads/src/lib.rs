//! Benchmark workload definitions: five repeatable load shapes for a
//! tick-based voxel server, and the behavior program bots follow in the
//! player-driven one.
//!
//! Every world is generated, never hand-built, so a (kind, scale, seed)
//! triple pins the exact same bytes on every machine. Load dynamics ride
//! along inside the world as schedules; the hosting server is expected
//! to treat "first player joined" as schedule time zero, which is what
//! makes a delayed fuse fire a fixed interval after the run starts
//! rather than after an arbitrary amount of server idle time.

mod bot;
mod gen;

use thiserror::Error;

pub use bot::{Bot, BotAction, DEFAULT_PROBE_INTERVAL};
pub use gen::{build_world, plan, Rect, WorkloadPlan, PLAYER_AREA};

/// The five workload shapes: an idle baseline, three environment-driven
/// load generators, and a player-driven one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WorkloadKind {
    /// Flat terrain, no constructs, one idle probe player.
    Control,
    /// A cuboid of explosive blocks on a delayed fuse.
    Tnt,
    /// Entity, block, and plant farms with item collection.
    Farm,
    /// A lattice of signal oscillators that floods the rule queue.
    Lag,
    /// The control world plus a crowd of wandering bots.
    Players,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 5] = [
        WorkloadKind::Control,
        WorkloadKind::Tnt,
        WorkloadKind::Farm,
        WorkloadKind::Lag,
        WorkloadKind::Players,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Control => "control",
            WorkloadKind::Tnt => "tnt",
            WorkloadKind::Farm => "farm",
            WorkloadKind::Lag => "lag",
            WorkloadKind::Players => "players",
        }
    }

    pub fn parse(name: &str) -> Option<WorkloadKind> {
        WorkloadKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Ticks between the first join and the explosive workload's ignition:
/// 20 seconds at 20 Hz.
pub const DEFAULT_TNT_DELAY_TICKS: u64 = 400;

/// Bots driven against the player workload by default.
pub const DEFAULT_BOT_COUNT: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Construct multiplier; only 1, 2, and 4 are meaningful tilings.
    pub scale: u32,
    pub seed: u64,
    /// Player-workload crowd size; other kinds attach a single probe.
    pub bot_count: usize,
    /// Ignition delay for the explosive workload, in ticks after the
    /// first join.
    pub tnt_delay_ticks: u64,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, scale: u32, seed: u64) -> Self {
        WorkloadSpec {
            kind,
            scale,
            seed,
            bot_count: DEFAULT_BOT_COUNT,
            tnt_delay_ticks: DEFAULT_TNT_DELAY_TICKS,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !matches!(self.scale, 1 | 2 | 4) {
            return Err(WorkloadError::InvalidScale(self.scale));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("scale must be 1, 2, or 4, got {0}")]
    InvalidScale(u32),
}
