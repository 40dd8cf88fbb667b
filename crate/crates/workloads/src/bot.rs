//! The behavior program for emulated players: a bounded random walk
//! with a periodic latency probe.

use rand::Rng;

use crate::gen::PLAYER_AREA;

/// Actions between latency probes: one probe every two seconds at a
/// 20 Hz action rate.
pub const DEFAULT_PROBE_INTERVAL: u64 = 40;

/// One step of the program: either walk to an adjacent cell or send a
/// chat probe (the transport attaches the nonce).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BotAction {
    /// Absolute cell the bot now stands in.
    Move { x: i32, z: i32 },
    Probe,
}

const DIRECTIONS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// A wandering player confined to the shared area. The walk draws a
/// uniform direction each step; a step that would leave the area is
/// reflected (taken in the opposite direction), so the bot never exits
/// and never stands still. A bot whose spawn landed outside the area
/// first walks straight toward it, one cell per step, then wanders.
#[derive(Clone, Debug)]
pub struct Bot {
    x: i32,
    z: i32,
    actions: u64,
    probe_interval: u64,
}

impl Bot {
    /// Start at the given cell — the spawn the server assigned, which
    /// is not necessarily inside the shared area.
    pub fn new(x: i32, z: i32) -> Self {
        Bot { x, z, actions: 0, probe_interval: DEFAULT_PROBE_INTERVAL }
    }

    pub fn with_probe_interval(mut self, interval: u64) -> Self {
        assert!(interval > 0, "probe interval must be positive");
        self.probe_interval = interval;
        self
    }

    pub fn pos(&self) -> (i32, i32) {
        (self.x, self.z)
    }

    pub fn step(&mut self, rng: &mut impl Rng) -> BotAction {
        self.actions += 1;
        if self.actions % self.probe_interval == 0 {
            return BotAction::Probe;
        }
        if !PLAYER_AREA.contains(self.x, self.z) {
            // Head for the area first; wandering starts once inside.
            let tx = self.x.clamp(PLAYER_AREA.x0, PLAYER_AREA.x1 - 1);
            let tz = self.z.clamp(PLAYER_AREA.z0, PLAYER_AREA.z1 - 1);
            self.x += (tx - self.x).signum();
            self.z += (tz - self.z).signum();
            return BotAction::Move { x: self.x, z: self.z };
        }
        let (mut dx, mut dz) = DIRECTIONS[rng.gen_range(0..DIRECTIONS.len())];
        if !(PLAYER_AREA.x0..PLAYER_AREA.x1).contains(&(self.x + dx)) {
            dx = -dx;
        }
        if !(PLAYER_AREA.z0..PLAYER_AREA.z1).contains(&(self.z + dz)) {
            dz = -dz;
        }
        self.x += dx;
        self.z += dz;
        BotAction::Move { x: self.x, z: self.z }
    }
}
