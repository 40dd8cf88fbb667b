//! Grid pathfinding over walkable cells.
//!
//! A cell is walkable when it is air resting on a solid block. Moves go
//! to the four horizontal neighbors, optionally stepping one cell up or
//! down. All moves cost 1, and the heuristic |dx| + |dz| is admissible
//! (every move changes horizontal distance by at most 1), so the result
//! is as short as breadth-first search would find.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::block::{BlockKind, BlockPos};
use crate::world::WorldState;

pub fn is_walkable(world: &WorldState, pos: BlockPos) -> bool {
    world.kind_at(pos) == BlockKind::Air && world.is_solid_at(pos.below())
}

/// Walkable successors of a walkable cell, in a fixed order.
fn successors(world: &WorldState, pos: BlockPos) -> impl Iterator<Item = BlockPos> + '_ {
    pos.horizontal_neighbors().into_iter().flat_map(move |h| {
        [0, 1, -1].into_iter().filter_map(move |dy| {
            let cand = BlockPos::new(h.x, h.y + dy, h.z);
            is_walkable(world, cand).then_some(cand)
        })
    })
}

fn heuristic(a: BlockPos, b: BlockPos) -> u32 {
    a.x.abs_diff(b.x) + a.z.abs_diff(b.z)
}

/// Shortest walkable route from `from` to `to`, inclusive of both ends;
/// `None` when unreachable or when the search would expand more than
/// `max_expansions` cells. `from == to` yields the single-cell path.
pub fn pathfind(
    world: &WorldState,
    from: BlockPos,
    to: BlockPos,
    max_expansions: usize,
) -> Option<Vec<BlockPos>> {
    if !is_walkable(world, from) || !is_walkable(world, to) {
        return None;
    }
    if from == to {
        return Some(vec![from]);
    }

    // Min-heap on (f, goal-ward preference, position): ties prefer the
    // node with more distance already covered, then a fixed positional
    // order, so exploration is deterministic.
    let mut open: BinaryHeap<Reverse<(u32, u32, BlockPos)>> = BinaryHeap::new();
    let mut best_g: HashMap<BlockPos, u32> = HashMap::new();
    let mut parent: HashMap<BlockPos, BlockPos> = HashMap::new();

    best_g.insert(from, 0);
    open.push(Reverse((heuristic(from, to), u32::MAX, from)));
    let mut expansions = 0usize;

    while let Some(Reverse((_, neg_g, pos))) = open.pop() {
        let g = u32::MAX - neg_g;
        if best_g.get(&pos).is_some_and(|&b| g > b) {
            continue; // superseded entry
        }
        if pos == to {
            let mut path = vec![pos];
            let mut cur = pos;
            while let Some(&p) = parent.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        expansions += 1;
        if expansions > max_expansions {
            return None;
        }
        for next in successors(world, pos) {
            let ng = g + 1;
            if best_g.get(&next).map_or(true, |&b| ng < b) {
                best_g.insert(next, ng);
                parent.insert(next, pos);
                open.push(Reverse((ng + heuristic(next, to), u32::MAX - ng, next)));
            }
        }
    }
    None
}
