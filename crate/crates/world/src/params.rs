//! The tunable constant table for the simulation kernels.
//!
//! Every numeric rule constant lives here so tests can pin them and
//! experiments can tune them in one place.

#[derive(Clone, Copy, Debug)]
pub struct SimParams {
    /// Downward acceleration applied to unsupported entities, cells/tick².
    pub gravity: f64,
    /// Cap on downward speed, cells/tick.
    pub terminal_velocity: f64,
    /// Horizontal speed of a walking npc, cells/tick.
    pub npc_speed: f64,
    /// Highest water level; a fresh source spreads at this level.
    pub water_max_level: u8,
    /// Strength emitted by a live signal source.
    pub signal_max: u8,
    /// Kelp advances one growth step every this many ticks.
    pub kelp_interval: u64,
    /// Inclusive fuse range for chained TNT, in ticks.
    pub fuse_min: u16,
    pub fuse_max: u16,
    /// Euclidean blast radius, in cells.
    pub blast_radius: f64,
    /// A block change within this Chebyshev distance of an npc makes its
    /// path stale.
    pub staleness_radius: i32,
    /// Paths older than this are recomputed even without nearby changes.
    pub path_max_age_ticks: u64,
    /// Node-expansion cap for one pathfinding call.
    pub path_max_expansions: usize,
    /// Spawn candidates must be this close to some player (inclusive).
    pub spawn_min_dist: f64,
    pub spawn_max_dist: f64,
    /// Columns probed per spawn-point computation.
    pub spawn_column_budget: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            gravity: 0.08,
            terminal_velocity: 3.92,
            npc_speed: 0.25,
            water_max_level: 7,
            signal_max: 15,
            kelp_interval: 80,
            fuse_min: 10,
            fuse_max: 30,
            blast_radius: 4.0,
            staleness_radius: 8,
            path_max_age_ticks: 200,
            path_max_expansions: 4096,
            spawn_min_dist: 8.0,
            spawn_max_dist: 32.0,
            spawn_column_budget: 64,
        }
    }
}
