//! TNT blasts: block destruction, chained charges, and flung debris.

use rand::Rng;

use crate::block::{Block, BlockKind, BlockPos};
use crate::entity::{EntityKind, Payload};
use crate::terrain::cell_center;
use crate::world::{WorldError, WorldState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DetonationReport {
    pub blocks_destroyed: u64,
    /// TNT blocks in the blast that became primed charges.
    pub tnt_chained: u64,
}

/// Speed given to debris items flung from a blast, cells/tick.
const DEBRIS_SPEED: f64 = 0.5;

/// Detonate the TNT at `pos` — either a TNT block in the terrain or a
/// primed charge entity standing in that cell. Everything within the
/// blast radius except stone is destroyed; TNT blocks chain into primed
/// charges with fresh fuses that blast in place, other blocks fling
/// debris items outward, and loose items caught in the blast are
/// consumed by it.
pub fn detonate(world: &mut WorldState, pos: BlockPos) -> Result<DetonationReport, WorldError> {
    let block_is_tnt = world.kind_at(pos) == BlockKind::TntBlock;
    let charge_id = world
        .entities
        .iter()
        .find(|(_, e)| e.kind == EntityKind::TntPrimed && e.cell() == pos)
        .map(|(&id, _)| id);
    if !block_is_tnt && charge_id.is_none() {
        return Err(WorldError::NotTnt(pos.x, pos.y, pos.z));
    }
    if let Some(id) = charge_id {
        world.entities.remove(&id);
    }
    if block_is_tnt {
        let _ = world.apply_block_update(pos, Block::AIR);
    }
    Ok(blast(world, pos))
}

/// Detonate a primed charge that is already removed from the entity map.
pub(crate) fn blast(world: &mut WorldState, center: BlockPos) -> DetonationReport {
    let mut report = DetonationReport::default();
    world.total_detonations += 1;

    let radius = world.params.blast_radius;
    let r = radius.ceil() as i32;
    let r2 = radius * radius;

    // The blast consumes loose items caught in it; without this, chained
    // explosions in dense fields would snowball debris without bound.
    // Runs first so the debris flung below survives its own blast.
    let center_point = cell_center(center);
    let doomed: Vec<u64> = world
        .entities
        .iter()
        .filter(|(_, e)| {
            e.kind == EntityKind::Item && {
                let dx = e.pos[0] - center_point[0];
                let dy = e.pos[1] - center_point[1];
                let dz = e.pos[2] - center_point[2];
                dx * dx + dy * dy + dz * dz <= r2
            }
        })
        .map(|(&id, _)| id)
        .collect();
    for id in doomed {
        world.entities.remove(&id);
    }

    for dx in -r..=r {
        for dy in -r..=r {
            for dz in -r..=r {
                let d2 = f64::from(dx * dx + dy * dy + dz * dz);
                if d2 > r2 {
                    continue;
                }
                let p = BlockPos::new(center.x + dx, center.y + dy, center.z + dz);
                let Some(block) = world.get_block(p) else {
                    continue;
                };
                match block.kind {
                    BlockKind::Air | BlockKind::Stone => {}
                    BlockKind::TntBlock => {
                        let _ = world.apply_block_update(p, Block::AIR);
                        let (lo, hi) = (world.params.fuse_min, world.params.fuse_max);
                        let fuse = world.rng.gen_range(lo..=hi);
                        // The charge is armed in the cell the block
                        // occupied and blasts right there: an in-place
                        // chain is what lets one ignition consume a
                        // connected structure completely, top layers
                        // included, instead of stranding cells the
                        // thrown debris happened to miss.
                        world.spawn_entity(
                            EntityKind::TntPrimed,
                            cell_center(p),
                            Payload::FuseTicks(fuse),
                        );
                        report.blocks_destroyed += 1;
                        report.tnt_chained += 1;
                    }
                    kind => {
                        let _ = world.apply_block_update(p, Block::AIR);
                        let vel = debris_velocity(center, p);
                        let id = world.spawn_entity(
                            EntityKind::Item,
                            cell_center(p),
                            Payload::ItemKind(kind),
                        );
                        world.entities.get_mut(&id).expect("just spawned").vel = vel;
                        report.blocks_destroyed += 1;
                    }
                }
            }
        }
    }

    report
}

fn debris_velocity(center: BlockPos, p: BlockPos) -> [f64; 3] {
    let d = [
        f64::from(p.x - center.x),
        f64::from(p.y - center.y),
        f64::from(p.z - center.z),
    ];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if len == 0.0 {
        return [0.0, DEBRIS_SPEED, 0.0];
    }
    [
        d[0] / len * DEBRIS_SPEED,
        d[1] / len * DEBRIS_SPEED,
        d[2] / len * DEBRIS_SPEED,
    ]
}
