//! World builders for the benchmark workloads.
//!
//! Every builder is a pure function of the spec: base terrain comes from
//! seeded lattice noise, constructs go into a fixed slot grid, and all
//! dynamics are expressed as schedules whose start ticks are relative to
//! the hosting server's schedule epoch (the first player join). Worlds
//! are built silently — the rule queue is empty at rest, so an idle
//! world performs no simulation work until a schedule fires.

use meterstick_world::{
    Block, BlockKind, BlockPos, EntityKind, Payload, Schedule, ScheduleEffect, SimParams,
    WorldState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{WorkloadError, WorkloadKind, WorkloadSpec};

/// World edge in chunks; all workloads share this footprint.
const WORLD_CHUNKS: i32 = 8;
const WORLD_EDGE: i32 = WORLD_CHUNKS * 16;

/// Terrain height of flattened ground; the walking level is one above.
const FLAT_HEIGHT: i32 = 4;
const WALK_Y: i32 = FLAT_HEIGHT + 1;

/// The shared square the player crowd wanders, centered on world spawn.
pub const PLAYER_AREA: Rect = Rect { x0: 48, z0: 48, x1: 80, z1: 80 };

/// Construct slot edge; slots tile the world outside the player area.
const SLOT: i32 = 12;

/// Farm activation cadence in ticks (4 seconds at 20 Hz).
const FARM_PERIOD: u64 = 80;
/// Shared phase of every entity farm's churn cycle (see [`entity_farm`]).
const CHURN_PHASE: u64 = 40;

/// Signal oscillators packed into one slot.
const OSC_PER_SLOT: usize = 6;

/// Oscillators per unit of scale; each runs a 7-cell wire line on a
/// 2-tick clock.
const OSC_PER_SCALE: usize = 96;

/// Half-open axis-aligned cell rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x0: i32,
    pub z0: i32,
    pub x1: i32,
    pub z1: i32,
}

impl Rect {
    pub fn contains(&self, x: i32, z: i32) -> bool {
        x >= self.x0 && x < self.x1 && z >= self.z0 && z < self.z1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.z0 < other.z1 && other.z0 < self.z1
    }

    pub fn center(&self) -> (i32, i32) {
        ((self.x0 + self.x1) / 2, (self.z0 + self.z1) / 2)
    }
}

/// Where everything went: slot anchors per construct family. Mostly for
/// tests and tooling; the world itself is the deliverable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkloadPlan {
    pub entity_farms: Vec<(i32, i32)>,
    pub stone_farms: Vec<(i32, i32)>,
    pub kelp_farms: Vec<(i32, i32)>,
    pub sorters: Vec<(i32, i32)>,
    pub oscillator_slots: Vec<(i32, i32)>,
    pub tnt_tiles: Vec<(i32, i32)>,
}

impl WorkloadPlan {
    /// Every ground rectangle that must be flattened so constructs sit
    /// on level terrain.
    fn flatten_rects(&self) -> Vec<Rect> {
        let slot_rect = |&(x, z): &(i32, i32)| Rect { x0: x, z0: z, x1: x + SLOT, z1: z + SLOT };
        let mut rects: Vec<Rect> = Vec::new();
        // Inflated by two cells so the crowd never walks against a cliff.
        rects.push(Rect {
            x0: PLAYER_AREA.x0 - 2,
            z0: PLAYER_AREA.z0 - 2,
            x1: PLAYER_AREA.x1 + 2,
            z1: PLAYER_AREA.z1 + 2,
        });
        rects.extend(self.entity_farms.iter().map(slot_rect));
        rects.extend(self.stone_farms.iter().map(slot_rect));
        rects.extend(self.kelp_farms.iter().map(slot_rect));
        rects.extend(self.sorters.iter().map(slot_rect));
        rects.extend(self.oscillator_slots.iter().map(slot_rect));
        rects.extend(
            self.tnt_tiles
                .iter()
                .map(|&(x, z)| Rect { x0: x - 2, z0: z - 2, x1: x + 18, z1: z + 18 }),
        );
        rects
    }
}

/// Slot anchors in row-major order, skipping any slot that touches the
/// (inflated) player area.
fn free_slots() -> Vec<(i32, i32)> {
    let keep_out = Rect {
        x0: PLAYER_AREA.x0 - 2,
        z0: PLAYER_AREA.z0 - 2,
        x1: PLAYER_AREA.x1 + 2,
        z1: PLAYER_AREA.z1 + 2,
    };
    let mut slots = Vec::new();
    for zi in 0..10 {
        for xi in 0..10 {
            let (x, z) = (4 + xi * SLOT, 4 + zi * SLOT);
            let rect = Rect { x0: x, z0: z, x1: x + SLOT, z1: z + SLOT };
            if !rect.intersects(&keep_out) {
                slots.push((x, z));
            }
        }
    }
    slots
}

/// Decide construct placement for a spec without building anything.
pub fn plan(spec: &WorkloadSpec) -> Result<WorkloadPlan, WorkloadError> {
    spec.validate()?;
    let scale = spec.scale as usize;
    let mut out = WorkloadPlan::default();
    match spec.kind {
        WorkloadKind::Control | WorkloadKind::Players => {}
        WorkloadKind::Tnt => {
            let anchors = [(16, 16), (96, 16), (16, 96), (96, 96)];
            out.tnt_tiles = anchors[..scale].to_vec();
        }
        WorkloadKind::Farm => {
            let mut slots = free_slots().into_iter();
            let mut take = |n: usize| -> Vec<(i32, i32)> { slots.by_ref().take(n).collect() };
            out.entity_farms = take(12 * scale);
            out.stone_farms = take(4 * scale);
            out.kelp_farms = take(4 * scale);
            out.sorters = take(scale);
            let wanted = 21 * scale;
            let got = out.entity_farms.len()
                + out.stone_farms.len()
                + out.kelp_farms.len()
                + out.sorters.len();
            assert_eq!(got, wanted, "slot grid too small for farm scale {scale}");
        }
        WorkloadKind::Lag => {
            let slots_needed = (OSC_PER_SCALE * scale).div_ceil(OSC_PER_SLOT);
            out.oscillator_slots = free_slots().into_iter().take(slots_needed).collect();
            assert_eq!(
                out.oscillator_slots.len(),
                slots_needed,
                "slot grid too small for lag scale {scale}"
            );
        }
    }
    Ok(out)
}

/// Generate the world for a spec: terrain, constructs, and the schedules
/// that animate them.
pub fn build_world(spec: &WorkloadSpec) -> Result<WorldState, WorkloadError> {
    let plan = plan(spec)?;
    let mut world = WorldState::new(spec.seed, SimParams::default());
    world.allocate_chunks(WORLD_CHUNKS, WORLD_CHUNKS);

    base_terrain(&mut world, spec.seed, &plan.flatten_rects());

    for (i, &a) in plan.entity_farms.iter().enumerate() {
        entity_farm(&mut world, a, i);
    }
    for (i, &a) in plan.stone_farms.iter().enumerate() {
        stone_farm(&mut world, a, i);
    }
    for (i, &a) in plan.kelp_farms.iter().enumerate() {
        kelp_farm(&mut world, a, i);
    }
    for (i, &a) in plan.sorters.iter().enumerate() {
        sorter(&mut world, a, i);
    }
    for (i, &a) in plan.oscillator_slots.iter().enumerate() {
        oscillator_slot(&mut world, a, i);
    }
    for &a in &plan.tnt_tiles {
        tnt_tile(&mut world, a, spec.tnt_delay_ticks);
    }
    if spec.kind == WorkloadKind::Farm {
        probe_platform(&mut world);
    }
    Ok(world)
}

/// Gently rolling terrain from bilinear lattice noise, forced flat
/// inside the given rectangles. Columns are stone with a soil cap.
fn base_terrain(world: &mut WorldState, seed: u64, flat: &[Rect]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7465_7272_6169_6e00);
    let mut lattice = [[0.0f64; 9]; 9];
    for row in &mut lattice {
        for v in row.iter_mut() {
            *v = rng.gen_range(3.0..=6.0);
        }
    }
    for x in 0..WORLD_EDGE {
        for z in 0..WORLD_EDGE {
            let h = if flat.iter().any(|r| r.contains(x, z)) {
                FLAT_HEIGHT
            } else {
                lattice_height(&lattice, x, z)
            };
            for y in 0..h {
                set(world, x, y, z, Block::of(BlockKind::Stone));
            }
            set(world, x, h, z, Block::of(BlockKind::Soil));
        }
    }
}

fn lattice_height(lattice: &[[f64; 9]; 9], x: i32, z: i32) -> i32 {
    let (gx, gz) = ((x / 16) as usize, (z / 16) as usize);
    let (fx, fz) = (f64::from(x % 16) / 16.0, f64::from(z % 16) / 16.0);
    let top = lattice[gx][gz] * (1.0 - fx) + lattice[gx + 1][gz] * fx;
    let bot = lattice[gx][gz + 1] * (1.0 - fx) + lattice[gx + 1][gz + 1] * fx;
    (top * (1.0 - fz) + bot * fz).round() as i32
}

fn set(world: &mut WorldState, x: i32, y: i32, z: i32, block: Block) {
    world
        .set_block_silent(BlockPos::new(x, y, z), block)
        .expect("construct cell in bounds");
}

/// Spawner pad, collection hopper, a water trough, and a churn cell
/// whose break/replace cycle keeps invalidating nearby routes. The
/// churn phase is shared by every farm on purpose: all the workers
/// re-route in the same tick, and that stampede is the farm workload's
/// load spike. Two workers are present from the start so the first
/// spike does not wait on the spawner.
fn entity_farm(world: &mut WorldState, (ax, az): (i32, i32), index: usize) {
    let (cx, cz) = (ax + 5, az + 5);
    set(world, cx, WALK_Y, cz, Block::of(BlockKind::Hopper));
    for x in ax + 1..ax + 5 {
        set(world, x, FLAT_HEIGHT, az + 2, Block::with_aux(BlockKind::Water, 0));
    }
    let churn = BlockPos::new(ax + 8, WALK_Y, cz);
    set(world, churn.x, churn.y, churn.z, Block::of(BlockKind::Soil));

    for w in 0..2 {
        let x = f64::from(ax + 3) + 0.5 + f64::from(w);
        world.spawn_entity(
            EntityKind::Npc,
            [x, f64::from(WALK_Y), f64::from(cz) + 0.5],
            Payload::None,
        );
    }

    let s = (index as u64 * 13) % FARM_PERIOD;
    world.schedules.push(Schedule {
        start_tick: s,
        period: FARM_PERIOD,
        effect: ScheduleEffect::SpawnEntity {
            kind: EntityKind::Item,
            pos: BlockPos::new(cx, WALK_Y + 3, cz),
            payload: Payload::ItemKind(BlockKind::Soil),
        },
    });
    world.schedules.push(Schedule {
        start_tick: s + 3,
        period: FARM_PERIOD * 2,
        effect: ScheduleEffect::SpawnEntity {
            kind: EntityKind::Npc,
            pos: BlockPos::new(ax + 3, WALK_Y, cz),
            payload: Payload::None,
        },
    });
    world.schedules.push(Schedule {
        start_tick: CHURN_PHASE,
        period: FARM_PERIOD,
        effect: ScheduleEffect::BreakToItem { pos: churn },
    });
    world.schedules.push(Schedule {
        start_tick: CHURN_PHASE + 1,
        period: FARM_PERIOD,
        effect: ScheduleEffect::PlaceBlock { pos: churn, block: Block::of(BlockKind::Soil) },
    });
}

/// A block that is broken into an item over a hopper and regrown a tick
/// later.
fn stone_farm(world: &mut WorldState, (ax, az): (i32, i32), index: usize) {
    let (cx, cz) = (ax + 5, az + 5);
    set(world, cx, WALK_Y, cz, Block::of(BlockKind::Hopper));
    let ore = BlockPos::new(cx, WALK_Y + 2, cz);
    set(world, ore.x, ore.y, ore.z, Block::of(BlockKind::Stone));

    let s = (index as u64 * 19 + 5) % FARM_PERIOD;
    world.schedules.push(Schedule {
        start_tick: s,
        period: FARM_PERIOD,
        effect: ScheduleEffect::BreakToItem { pos: ore },
    });
    world.schedules.push(Schedule {
        start_tick: s + 1,
        period: FARM_PERIOD,
        effect: ScheduleEffect::PlaceBlock { pos: ore, block: Block::of(BlockKind::Stone) },
    });
}

/// A walled water column with a kelp stalk; harvest chops mid-stalk and
/// refills the cell with still water so growth resumes.
fn kelp_farm(world: &mut WorldState, (ax, az): (i32, i32), index: usize) {
    let (cx, cz) = (ax + 5, az + 5);
    set(world, cx, WALK_Y, cz, Block::of(BlockKind::Hopper));
    set(world, cx, WALK_Y + 1, cz, Block::of(BlockKind::Kelp));
    for y in WALK_Y + 2..WALK_Y + 7 {
        set(world, cx, y, cz, Block::with_aux(BlockKind::Water, 0));
    }
    for y in WALK_Y..WALK_Y + 7 {
        for dx in -1..=1 {
            for dz in -1..=1 {
                if (dx, dz) != (0, 0) {
                    set(world, cx + dx, y, cz + dz, Block::of(BlockKind::Stone));
                }
            }
        }
    }

    let harvest = BlockPos::new(cx, WALK_Y + 3, cz);
    let s = (index as u64 * 23 + 11) % FARM_PERIOD;
    world.schedules.push(Schedule {
        start_tick: s + 20,
        period: FARM_PERIOD,
        effect: ScheduleEffect::BreakToItem { pos: harvest },
    });
    world.schedules.push(Schedule {
        start_tick: s + 21,
        period: FARM_PERIOD,
        effect: ScheduleEffect::PlaceBlock {
            pos: harvest,
            block: Block::with_aux(BlockKind::Water, 0),
        },
    });
}

/// A hopper row fed by staggered item drops.
fn sorter(world: &mut WorldState, (ax, az): (i32, i32), index: usize) {
    let cz = az + 5;
    for j in 0..8 {
        let x = ax + 2 + j;
        set(world, x, WALK_Y, cz, Block::of(BlockKind::Hopper));
        world.schedules.push(Schedule {
            start_tick: (index as u64 * 7 + j as u64 * 10) % FARM_PERIOD,
            period: FARM_PERIOD,
            effect: ScheduleEffect::SpawnEntity {
                kind: EntityKind::Item,
                pos: BlockPos::new(x, WALK_Y + 2, cz),
                payload: Payload::ItemKind(BlockKind::Stone),
            },
        });
    }
}

/// Six source-plus-wire lines on synchronized 2-tick clocks. Each toggle
/// re-propagates the whole line, which is the rule-queue flood the lag
/// workload exists to produce. The clocks deliberately share a phase:
/// every toggle tick is a burst and every other tick is near-idle, so the
/// load alternates instead of averaging out into a steady hum.
fn oscillator_slot(world: &mut WorldState, (ax, az): (i32, i32), _slot_index: usize) {
    for j in 0..OSC_PER_SLOT {
        let z = az + 1 + 2 * j as i32;
        let source = BlockPos::new(ax + 1, WALK_Y, z);
        set(world, source.x, source.y, source.z, Block::with_aux(BlockKind::SignalSource, 0));
        for x in ax + 2..ax + 9 {
            set(world, x, WALK_Y, z, Block::of(BlockKind::SignalWire));
        }
        world.schedules.push(Schedule {
            start_tick: 0,
            period: 2,
            effect: ScheduleEffect::ToggleSource { pos: source },
        });
    }
}

/// A 16x16x14 block of explosive on a one-shot delayed igniter.
fn tnt_tile(world: &mut WorldState, (ax, az): (i32, i32), delay_ticks: u64) {
    for x in ax..ax + 16 {
        for z in az..az + 16 {
            for y in WALK_Y..WALK_Y + 14 {
                set(world, x, y, z, Block::of(BlockKind::TntBlock));
            }
        }
    }
    let igniter = BlockPos::new(ax - 1, WALK_Y, az);
    set(world, igniter.x, igniter.y, igniter.z, Block::with_aux(BlockKind::SignalSource, 0));
    world.schedules.push(Schedule {
        start_tick: delay_ticks,
        period: 0,
        effect: ScheduleEffect::ToggleSource { pos: igniter },
    });
}

/// A raised platform over world spawn with no ramp up: the probe player
/// standing on it is unreachable, so farm workers' route searches run to
/// their expansion budget instead of finishing early.
fn probe_platform(world: &mut WorldState) {
    let (cx, cz) = PLAYER_AREA.center();
    for dx in -1..=1 {
        for dz in -1..=1 {
            set(world, cx + dx, WALK_Y + 4, cz + dz, Block::of(BlockKind::Stone));
        }
    }
}
