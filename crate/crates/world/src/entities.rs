//! Per-tick entity simulation: kinematics, collisions, npc routing,
//! hoppers, and fuse countdowns.

use crate::block::{BlockKind, BlockPos};
use crate::detonate::blast;
use crate::entity::{EntityKind, Payload};
use crate::pathfind::pathfind;
use crate::world::WorldState;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EntityReport {
    /// Entities whose position changed this tick.
    pub moved: u64,
    /// Entities that hit a solid cell on some axis this tick.
    pub collided: u64,
    /// Entities removed (hoppers, blasts, fuses, falling out of the world).
    pub despawned: u64,
    /// Route searches performed this tick, successful or not.
    pub pathfinds: u64,
}

/// Advance every entity one tick, in id order. New entities spawned by
/// side effects (chained TNT, debris) first act on the next tick.
pub fn step_entities(world: &mut WorldState) -> EntityReport {
    let mut report = EntityReport::default();
    let ids: Vec<u64> = world.entities.keys().copied().collect();

    for id in ids {
        // A blast earlier in this loop may have consumed this entity.
        let Some(entity) = world.entities.get(&id) else {
            continue;
        };
        match entity.kind {
            EntityKind::Npc => step_npc(world, id, &mut report),
            EntityKind::Item => step_item(world, id, &mut report),
            EntityKind::TntPrimed => step_charge(world, id, &mut report),
        }
    }
    report
}

fn step_item(world: &mut WorldState, id: u64, report: &mut EntityReport) {
    apply_physics(world, id, report);
    let entity = &world.entities[&id];
    let cell = entity.cell();
    if cell.y < 0 {
        world.entities.remove(&id);
        report.despawned += 1;
        return;
    }
    if world.kind_at(cell) == BlockKind::Hopper {
        world.entities.remove(&id);
        report.despawned += 1;
    }
}

/// An armed charge is inert: it neither falls nor drifts, so the blast
/// lands exactly where the charge was set. Chained explosions rely on
/// this — see the chaining arm in the blast scan.
fn step_charge(world: &mut WorldState, id: u64, report: &mut EntityReport) {
    let entity = world.entities.get_mut(&id).expect("charge exists");
    let Payload::FuseTicks(fuse) = entity.payload else {
        // A charge without a fuse is a construction bug; drop it rather
        // than ticking forever.
        log::warn!("primed charge {id} has no fuse; despawning");
        world.entities.remove(&id);
        report.despawned += 1;
        return;
    };
    if fuse == 0 {
        let cell = entity.cell();
        world.entities.remove(&id);
        report.despawned += 1;
        blast(world, cell);
    } else {
        entity.payload = Payload::FuseTicks(fuse - 1);
    }
}

fn step_npc(world: &mut WorldState, id: u64, report: &mut EntityReport) {
    maintain_path(world, id, report);

    let entity = world.entities.get_mut(&id).expect("npc exists");
    if let Some(path) = entity.path.clone() {
        // Kinematic walk along the route; waypoints are walkable by
        // construction so no collision resolution is needed.
        if entity.path_cursor >= path.len() {
            entity.path = None;
            return;
        }
        let wp = path[entity.path_cursor];
        let target = [f64::from(wp.x) + 0.5, f64::from(wp.y), f64::from(wp.z) + 0.5];
        let speed = world.params.npc_speed;
        let d: Vec<f64> = (0..3).map(|i| target[i] - entity.pos[i]).collect();
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if dist <= speed {
            entity.pos = target;
            entity.path_cursor += 1;
            if entity.path_cursor >= path.len() {
                entity.path = None;
            }
        } else {
            for i in 0..3 {
                entity.pos[i] += d[i] / dist * speed;
            }
        }
        report.moved += 1;
    } else {
        apply_physics(world, id, report);
    }
}

/// Decide whether the npc needs a fresh route this tick, and compute it
/// if so. At most one search per npc per tick.
fn maintain_path(world: &mut WorldState, id: u64, report: &mut EntityReport) {
    let entity = &world.entities[&id];
    let cell = entity.cell();
    let Some(target) = nearest_player_cell(world, entity.pos) else {
        return;
    };

    let age = world.tick_counter.saturating_sub(entity.path_tick);
    let radius = world.params.staleness_radius;
    // Only changes strictly after the search count: the change that
    // triggered a re-route must not keep re-triggering it.
    let stale = age > world.params.path_max_age_ticks
        || world.changed_near(cell, radius, entity.path_tick + 1);
    let needs_search = if entity.path.is_some() || entity.path_failed {
        // Re-route when the world shifted nearby or the route is old;
        // a cached failure likewise waits for the world to change
        // rather than burning a search every tick on an unreachable
        // target.
        stale
    } else {
        cell != target
    };
    if !needs_search {
        return;
    }

    report.pathfinds += 1;
    let path = pathfind(world, cell, target, world.params.path_max_expansions);
    let entity = world.entities.get_mut(&id).expect("npc exists");
    entity.path_tick = world.tick_counter;
    match path {
        Some(p) => {
            entity.path_failed = false;
            // Skip the leading cell we already stand in.
            entity.path_cursor = usize::from(p.len() > 1);
            entity.path = Some(p);
        }
        None => {
            entity.path_failed = true;
            entity.path = None;
        }
    }
}

fn nearest_player_cell(world: &WorldState, from: [f64; 3]) -> Option<BlockPos> {
    world
        .players
        .iter()
        .min_by(|(ia, a), (ib, b)| {
            let da = dist2(from, **a);
            let db = dist2(from, **b);
            da.partial_cmp(&db).unwrap().then(ia.cmp(ib))
        })
        .map(|(_, p)| BlockPos::new(p[0].floor() as i32, p[1].floor() as i32, p[2].floor() as i32))
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Gravity plus axis-by-axis movement with collision clamping.
fn apply_physics(world: &mut WorldState, id: u64, report: &mut EntityReport) {
    let (mut pos, mut vel) = {
        let e = &world.entities[&id];
        (e.pos, e.vel)
    };
    let old_pos = pos;

    let standing = pos[1].fract() == 0.0
        && world.is_solid_at(BlockPos::new(
            pos[0].floor() as i32,
            pos[1].floor() as i32 - 1,
            pos[2].floor() as i32,
        ));
    // At rest on a solid surface: skip the gravity round-trip entirely
    // so resting entities report no motion or collisions.
    if vel == [0.0; 3] && standing {
        return;
    }
    if !standing {
        vel[1] = (vel[1] - world.params.gravity).max(-world.params.terminal_velocity);
    }

    let mut collided = false;
    for axis in [0usize, 2, 1] {
        let v = vel[axis];
        if v == 0.0 {
            continue;
        }
        let mut next = pos;
        next[axis] += v;
        let cell = BlockPos::new(
            next[0].floor() as i32,
            next[1].floor() as i32,
            next[2].floor() as i32,
        );
        if world.is_solid_at(cell) {
            // Clamp to the near face of the solid cell.
            let face = match axis {
                0 => cell.x,
                1 => cell.y,
                _ => cell.z,
            };
            pos[axis] = f64::from(if v > 0.0 { face } else { face + 1 });
            vel[axis] = 0.0;
            collided = true;
        } else {
            pos = next;
        }
    }

    let e = world.entities.get_mut(&id).expect("entity exists");
    e.pos = pos;
    e.vel = vel;
    if pos != old_pos {
        report.moved += 1;
    }
    if collided {
        report.collided += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::Block;
    use crate::params::SimParams;
    use crate::terrain::step_terrain;

    fn arena() -> WorldState {
        let mut w = WorldState::new(31, SimParams::default());
        w.allocate_chunks(2, 2);
        for x in 0..32 {
            for z in 0..32 {
                w.set_block_silent(BlockPos::new(x, 0, z), Block::of(BlockKind::Stone)).unwrap();
            }
        }
        w
    }

    fn tick(w: &mut WorldState) -> EntityReport {
        let r = step_entities(w);
        w.advance_tick();
        r
    }

    #[test]
    fn resting_item_does_not_move() {
        let mut w = arena();
        w.spawn_entity(EntityKind::Item, [5.5, 1.0, 5.5], Payload::ItemKind(BlockKind::Sand));
        for _ in 0..10 {
            let r = tick(&mut w);
            assert_eq!(r.moved, 0);
            assert_eq!(r.collided, 0);
        }
        assert_eq!(w.entities.values().next().unwrap().pos, [5.5, 1.0, 5.5]);
    }

    #[test]
    fn falling_item_lands_when_kinematics_say_so() {
        let mut w = arena();
        // Three cells of air under the item; floor surface at y = 1.
        w.spawn_entity(EntityKind::Item, [5.5, 4.0, 5.5], Payload::ItemKind(BlockKind::Sand));

        // Reference kinematics: v accumulates gravity with a terminal
        // cap, and the fall ends on the tick the position would cross
        // the floor surface.
        let (g, vmax) = (w.params.gravity, w.params.terminal_velocity);
        let (mut v, mut y) = (0.0f64, 4.0f64);
        let mut expected_landing_tick = 0;
        for n in 1..1000 {
            v = (v - g).max(-vmax);
            if y + v < 1.0 {
                expected_landing_tick = n;
                break;
            }
            y += v;
        }
        assert_eq!(expected_landing_tick, 9, "closed form: first n with 0.04·n(n+1) ≥ 3");

        for n in 1..=expected_landing_tick {
            let r = tick(&mut w);
            let e = w.entities.values().next().unwrap();
            if n < expected_landing_tick {
                assert!(e.pos[1] > 1.0, "tick {n}: still falling at {}", e.pos[1]);
                assert_eq!(r.collided, 0, "tick {n}");
            } else {
                assert_eq!(e.pos[1], 1.0, "lands exactly on the surface");
                assert_eq!(r.collided, 1);
                assert_eq!(e.vel, [0.0; 3]);
            }
        }
    }

    #[test]
    fn hopper_swallows_items() {
        let mut w = arena();
        w.set_block_silent(BlockPos::new(8, 1, 8), Block::of(BlockKind::Hopper)).unwrap();
        w.spawn_entity(EntityKind::Item, [8.5, 3.0, 8.5], Payload::ItemKind(BlockKind::Kelp));
        let mut despawned = 0;
        for _ in 0..60 {
            despawned += tick(&mut w).despawned;
        }
        assert_eq!(despawned, 1);
        assert!(w.entities.is_empty());
    }

    #[test]
    fn fuse_counts_down_then_blast_fires() {
        let mut w = arena();
        w.spawn_entity(EntityKind::TntPrimed, [16.5, 1.0, 16.5], Payload::FuseTicks(3));
        for t in 0..3 {
            let r = tick(&mut w);
            assert_eq!(r.despawned, 0, "tick {t}");
        }
        let r = tick(&mut w);
        assert_eq!(r.despawned, 1);
        assert_eq!(w.total_detonations, 1);
        assert!(w.entities.is_empty());
    }

    #[test]
    fn npc_paths_toward_nearest_player_once() {
        let mut w = arena();
        w.set_player(1, [20.5, 1.0, 5.5]);
        w.spawn_entity(EntityKind::Npc, [5.5, 1.0, 5.5], Payload::None);
        let r = tick(&mut w);
        assert_eq!(r.pathfinds, 1, "one search on the first tick");
        let r = tick(&mut w);
        assert_eq!(r.pathfinds, 0, "route cached while the world is quiet");
        assert!(r.moved > 0, "npc walks its route");
    }

    #[test]
    fn placed_block_invalidates_path_once() {
        let mut w = arena();
        w.set_player(1, [20.5, 1.0, 5.5]);
        w.spawn_entity(EntityKind::Npc, [5.5, 1.0, 5.5], Payload::None);
        tick(&mut w); // initial route

        w.apply_block_update(BlockPos::new(7, 1, 5), Block::of(BlockKind::Stone)).unwrap();
        step_terrain(&mut w, 1000);
        let r = tick(&mut w);
        assert_eq!(r.pathfinds, 1, "staleness triggers exactly one re-route");
        let r = tick(&mut w);
        assert_eq!(r.pathfinds, 0);
    }

    #[test]
    fn failed_search_is_not_retried_until_world_changes() {
        let mut w = arena();
        // Player on an unreachable pedestal: a floating platform.
        for x in 15..=17 {
            for z in 15..=17 {
                w.set_block_silent(BlockPos::new(x, 10, z), Block::of(BlockKind::Stone)).unwrap();
            }
        }
        w.set_player(1, [16.5, 11.0, 16.5]);
        w.spawn_entity(EntityKind::Npc, [5.5, 1.0, 5.5], Payload::None);

        let r = tick(&mut w);
        assert_eq!(r.pathfinds, 1);
        for _ in 0..20 {
            assert_eq!(tick(&mut w).pathfinds, 0, "failure is cached");
        }

        // A nearby change wakes the npc up for one more try.
        w.apply_block_update(BlockPos::new(6, 1, 6), Block::of(BlockKind::Stone)).unwrap();
        assert_eq!(tick(&mut w).pathfinds, 1);
    }

    #[test]
    fn charge_holds_position_until_blast() {
        let mut w = arena();
        // Armed in mid-air with nothing below: stays put anyway.
        let id = w.spawn_entity(EntityKind::TntPrimed, [10.5, 5.0, 10.5], Payload::FuseTicks(20));
        let soil = BlockPos::new(10, 7, 10);
        w.set_block_silent(soil, crate::block::Block::of(BlockKind::Soil)).unwrap();
        for _ in 0..20 {
            tick(&mut w);
            if let Some(e) = w.entities.get(&id) {
                assert_eq!(e.pos, [10.5, 5.0, 10.5], "charge must not drift");
            }
        }
        tick(&mut w);
        assert_eq!(w.total_detonations, 1);
        // The blast happened at the armed cell, high enough to take the
        // soil two cells above with it.
        assert_eq!(w.kind_at(soil), BlockKind::Air);
    }
}
