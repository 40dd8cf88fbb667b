//! Dynamic spawn-point selection near players.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::block::{BlockKind, BlockPos};
use crate::chunk::WORLD_HEIGHT;
use crate::world::WorldState;

/// A column cell qualifies when it has solid footing, is open itself,
/// and has open headroom.
pub fn is_spawnable(world: &WorldState, pos: BlockPos) -> bool {
    pos.y + 1 < WORLD_HEIGHT
        && world.is_solid_at(pos.below())
        && world.kind_at(pos) == BlockKind::Air
        && world.kind_at(pos.above()) == BlockKind::Air
}

/// Scan for up to `cap` spawn candidates in the ring around the current
/// players. The scan is seeded from the world seed and tick, probes a
/// fixed number of columns, and never returns an obstructed cell, so
/// repeated terrain damage makes the search work harder, not misbehave.
pub fn compute_spawn_points(world: &WorldState, players: &[[f64; 3]], cap: usize) -> Vec<BlockPos> {
    let mut found = Vec::new();
    if players.is_empty() || cap == 0 {
        return found;
    }
    let p = world.params;
    let mut rng = ChaCha8Rng::seed_from_u64(world.rng_seed ^ world.tick_counter.rotate_left(17));
    let max = p.spawn_max_dist.ceil() as i32;

    for _ in 0..p.spawn_column_budget {
        if found.len() >= cap {
            break;
        }
        let anchor = players[rng.gen_range(0..players.len())];
        // Rejection-sample a ring offset; the square is at most ~4x the
        // ring area so a handful of draws nearly always lands.
        let mut offset = None;
        for _ in 0..16 {
            let dx = rng.gen_range(-max..=max);
            let dz = rng.gen_range(-max..=max);
            let d = f64::from(dx * dx + dz * dz).sqrt();
            if d >= p.spawn_min_dist && d <= p.spawn_max_dist {
                offset = Some((dx, dz));
                break;
            }
        }
        let Some((dx, dz)) = offset else {
            continue;
        };
        let x = anchor[0].floor() as i32 + dx;
        let z = anchor[2].floor() as i32 + dz;

        // Topmost valid cell in the column.
        let candidate = (1..WORLD_HEIGHT - 1)
            .rev()
            .map(|y| BlockPos::new(x, y, z))
            .find(|&pos| world.in_bounds(pos) && is_spawnable(world, pos));
        if let Some(pos) = candidate {
            if !found.contains(&pos) && in_ring_of_some_player(world, players, pos) {
                found.push(pos);
            }
        }
    }
    found
}

fn in_ring_of_some_player(world: &WorldState, players: &[[f64; 3]], pos: BlockPos) -> bool {
    let p = world.params;
    players.iter().any(|pl| {
        let dx = f64::from(pos.x) + 0.5 - pl[0];
        let dz = f64::from(pos.z) + 0.5 - pl[2];
        let d = (dx * dx + dz * dz).sqrt();
        d >= p.spawn_min_dist && d <= p.spawn_max_dist
    })
}
