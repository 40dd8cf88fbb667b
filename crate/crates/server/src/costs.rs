//! The simulator's work-cost model.
//!
//! The simulation kernels are deliberately cheap in native code, so raw
//! phase timings on a fast machine would compress every workload toward
//! zero and drown the differences between them in scheduler noise. To
//! behave like a production server under load, each tick is charged a
//! cost floor computed from the work it actually did (rules evaluated,
//! entities moved, messages sent, ...), and the loop spins until the
//! measured phase time reaches its floor. On a machine slower than the
//! floors the measured time simply wins.
//!
//! The same floors drive the deterministic run mode, where no wall
//! clock is consulted at all: there the floor *is* the busy time, which
//! is what makes traces reproducible bit-for-bit across runs.

use meterstick_core::{ComponentKind, ComponentShares, TickRecord};
use std::time::{Duration, Instant};

/// Counts of everything a tick did, the input to the cost model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TickWork {
    /// Actions drained and handled, malformed ones included.
    pub actions: u64,
    /// Scheduled world events that fired.
    pub schedule_fires: u64,
    /// Rule-queue entries dequeued and evaluated.
    pub evaluations: u64,
    /// Entities present at the entity phase.
    pub entities_total: u64,
    /// Entities whose position changed.
    pub entities_moved: u64,
    /// Route searches performed.
    pub pathfinds: u64,
    /// Spawn-point scans performed (0 or 1 per tick).
    pub spawn_scans: u64,
    /// Outbound messages by family.
    pub block_updates_sent: u64,
    pub entity_updates_sent: u64,
    pub events_sent: u64,
}

/// Per-unit charges, in nanoseconds. One instance per server; the
/// defaults are tuned so the bundled workloads occupy distinct points
/// on the load spectrum at a 50 ms tick budget.
#[derive(Clone, Copy, Debug)]
pub struct CostModel {
    pub action_ns: u64,
    pub schedule_fire_ns: u64,
    pub evaluation_ns: u64,
    /// A moving entity: upkeep plus kinematics and collision checks.
    pub entity_moved_ns: u64,
    /// Per-entity simulation upkeep even when nothing moves — armed
    /// charges, resting items, and idle workers all pay it.
    pub entity_idle_ns: u64,
    pub pathfind_ns: u64,
    pub spawn_scan_ns: u64,
    pub block_update_ns: u64,
    pub entity_update_ns: u64,
    pub event_ns: u64,
    /// Constant charge per tick, attributed to loop bookkeeping.
    pub tick_base_ns: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            action_ns: 40_000,
            schedule_fire_ns: 350_000,
            evaluation_ns: 13_000,
            entity_moved_ns: 55_000,
            entity_idle_ns: 45_000,
            pathfind_ns: 4_000_000,
            spawn_scan_ns: 960_000,
            block_update_ns: 6_000,
            entity_update_ns: 10_000,
            event_ns: 30_000,
            tick_base_ns: 150_000,
        }
    }
}

impl CostModel {
    /// The cost floor of each loop phase for the given work, indexed by
    /// [`ComponentKind`] order.
    pub fn floors(&self, work: &TickWork) -> [u64; 6] {
        let mut f = [0u64; 6];
        f[ComponentKind::PlayerHandling as usize] = work.actions * self.action_ns;
        f[ComponentKind::TerrainRules as usize] =
            work.schedule_fires * self.schedule_fire_ns + work.evaluations * self.evaluation_ns;
        f[ComponentKind::Entities as usize] = work.entities_moved * self.entity_moved_ns
            + work.entities_total.saturating_sub(work.entities_moved) * self.entity_idle_ns
            + work.pathfinds * self.pathfind_ns;
        f[ComponentKind::Persistence as usize] = 0;
        f[ComponentKind::Networking as usize] = work.block_updates_sent * self.block_update_ns
            + work.entity_updates_sent * self.entity_update_ns
            + work.events_sent * self.event_ns;
        f[ComponentKind::Other as usize] =
            self.tick_base_ns + work.spawn_scans * self.spawn_scan_ns;
        f
    }

    /// Deterministic busy time: the floors alone, no clock involved.
    pub fn lockstep_busy_ns(&self, work: &TickWork) -> u64 {
        self.floors(work).iter().sum()
    }

    /// Combine measured phase durations with their floors into a tick
    /// record: each phase is the larger of what was measured and what
    /// the work costs. Returns the record and the deficit the caller
    /// must still burn to make wall time match.
    pub fn amortize(
        &self,
        index: u64,
        start_ns: u64,
        native_ns: [u64; 6],
        work: &TickWork,
    ) -> (TickRecord, u64) {
        let floors = self.floors(work);
        let mut phase = [0u64; 6];
        let mut deficit = 0u64;
        for i in 0..6 {
            phase[i] = native_ns[i].max(floors[i]);
            deficit += phase[i] - native_ns[i];
        }
        let busy: u64 = phase.iter().sum();
        let mut shares = ComponentShares::default();
        if busy > 0 {
            for kind in ComponentKind::ALL {
                shares.set(kind, phase[kind as usize] as f64 / busy as f64);
            }
        }
        (TickRecord { index, start_ns, busy_ns: busy, shares }, deficit)
    }
}

/// Busy-wait for the given duration. Used to realize cost floors as
/// actual CPU time; sleeping would free the core and misrepresent the
/// server as idle to an external resource monitor.
pub fn spin_for(duration: Duration) {
    let target = Instant::now() + duration;
    while Instant::now() < target {
        std::hint::spin_loop();
    }
}
