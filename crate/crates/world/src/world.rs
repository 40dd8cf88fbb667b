//! The mutable world: chunked blocks, entities, players, and the
//! rule-evaluation queue.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::block::{Block, BlockKind, BlockPos};
use crate::chunk::{chunk_coord, local_coord, Chunk, CHUNK_SIZE, WORLD_HEIGHT};
use crate::entity::{Entity, EntityId, EntityKind, Payload};
use crate::params::SimParams;
use crate::terrain::Schedule;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("position ({0}, {1}, {2}) is out of bounds")]
    OutOfBounds(i32, i32, i32),
    #[error("no TNT at ({0}, {1}, {2})")]
    NotTnt(i32, i32, i32),
    #[error("invalid block: {0} with aux {1}")]
    InvalidBlock(&'static str, u8),
}

/// Complete simulation state. Single-writer: exactly one logical actor
/// mutates it per tick. Identical seed + identical action sequence gives
/// an identical state evolution.
pub struct WorldState {
    chunks: BTreeMap<(i32, i32), Chunk>,
    pub entities: BTreeMap<EntityId, Entity>,
    /// Connected player positions, fed in by the hosting game loop.
    pub players: BTreeMap<u64, [f64; 3]>,
    /// Positions awaiting rule evaluation, oldest first, no duplicates.
    update_queue: VecDeque<BlockPos>,
    queued: HashSet<BlockPos>,
    pub schedules: Vec<Schedule>,
    pub rng_seed: u64,
    pub rng: ChaCha8Rng,
    pub params: SimParams,
    pub tick_counter: u64,
    pub total_detonations: u64,
    next_entity_id: EntityId,
    /// Block changes with the tick they happened on, newest last; kept
    /// for the path-staleness horizon.
    recent_changes: VecDeque<(u64, BlockPos)>,
    /// Net block changes since the last drain, for observers.
    change_log: BTreeMap<BlockPos, Block>,
    /// All kelp cells, so growth can self-schedule without scans.
    kelp_cells: BTreeSet<BlockPos>,
    last_kelp_tick: Option<u64>,
}

impl fmt::Debug for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WorldState")
            .field("tick", &self.tick_counter)
            .field("chunks", &self.chunks.len())
            .field("entities", &self.entities.len())
            .field("players", &self.players.len())
            .field("queued", &self.update_queue.len())
            .field("detonations", &self.total_detonations)
            .finish_non_exhaustive()
    }
}

impl WorldState {
    pub fn new(seed: u64, params: SimParams) -> Self {
        WorldState {
            chunks: BTreeMap::new(),
            entities: BTreeMap::new(),
            players: BTreeMap::new(),
            update_queue: VecDeque::new(),
            queued: HashSet::new(),
            schedules: Vec::new(),
            rng_seed: seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            params,
            tick_counter: 0,
            total_detonations: 0,
            next_entity_id: 1,
            recent_changes: VecDeque::new(),
            change_log: BTreeMap::new(),
            kelp_cells: BTreeSet::new(),
            last_kelp_tick: None,
        }
    }

    /// Allocate an all-air chunk rectangle: chunk x in [0, chunks_x),
    /// chunk z in [0, chunks_z).
    pub fn allocate_chunks(&mut self, chunks_x: i32, chunks_z: i32) {
        for cx in 0..chunks_x {
            for cz in 0..chunks_z {
                self.chunks.entry((cx, cz)).or_default();
            }
        }
    }

    pub fn ensure_chunk(&mut self, cx: i32, cz: i32) {
        self.chunks.entry((cx, cz)).or_default();
    }

    pub fn chunk_coords(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        self.chunks.keys().copied()
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn in_bounds(&self, pos: BlockPos) -> bool {
        (0..WORLD_HEIGHT).contains(&pos.y) && self.chunks.contains_key(&chunk_coord(pos))
    }

    pub fn get_block(&self, pos: BlockPos) -> Option<Block> {
        if !(0..WORLD_HEIGHT).contains(&pos.y) {
            return None;
        }
        let chunk = self.chunks.get(&chunk_coord(pos))?;
        let (lx, lz) = local_coord(pos);
        Some(chunk.get(lx, pos.y, lz))
    }

    /// Block kind with out-of-bounds treated as air (for physics probes).
    pub fn kind_at(&self, pos: BlockPos) -> BlockKind {
        self.get_block(pos).map_or(BlockKind::Air, |b| b.kind)
    }

    pub fn is_solid_at(&self, pos: BlockPos) -> bool {
        self.kind_at(pos).is_solid()
    }

    /// Write a cell and record the change. Returns false when the cell
    /// already held `block`. Does not touch the update queue.
    pub fn set_block(&mut self, pos: BlockPos, block: Block) -> Result<bool, WorldError> {
        if !self.in_bounds(pos) {
            return Err(WorldError::OutOfBounds(pos.x, pos.y, pos.z));
        }
        if !block.is_valid() {
            return Err(WorldError::InvalidBlock(block.kind.name(), block.aux));
        }
        let chunk = self.chunks.get_mut(&chunk_coord(pos)).expect("bounds checked");
        let (lx, lz) = local_coord(pos);
        if chunk.get(lx, pos.y, lz) == block {
            return Ok(false);
        }
        chunk.set(lx, pos.y, lz, block);
        if block.kind == BlockKind::Kelp {
            self.kelp_cells.insert(pos);
        } else {
            self.kelp_cells.remove(&pos);
        }
        self.recent_changes.push_back((self.tick_counter, pos));
        self.change_log.insert(pos, block);
        Ok(true)
    }

    /// Write a cell without recording a change; for world construction
    /// and snapshot loading only.
    pub fn set_block_silent(&mut self, pos: BlockPos, block: Block) -> Result<(), WorldError> {
        if !self.in_bounds(pos) {
            return Err(WorldError::OutOfBounds(pos.x, pos.y, pos.z));
        }
        if !block.is_valid() {
            return Err(WorldError::InvalidBlock(block.kind.name(), block.aux));
        }
        let chunk = self.chunks.get_mut(&chunk_coord(pos)).expect("bounds checked");
        let (lx, lz) = local_coord(pos);
        chunk.set(lx, pos.y, lz, block);
        if block.kind == BlockKind::Kelp {
            self.kelp_cells.insert(pos);
        } else {
            self.kelp_cells.remove(&pos);
        }
        Ok(())
    }

    /// Replace a cell and queue the surroundings for rule evaluation.
    /// The changed position itself is queued first so rules that read
    /// their own cell run, then the six face neighbors. The returned
    /// count covers only the face neighbors actually enqueued (in-bounds
    /// and not already queued).
    pub fn apply_block_update(&mut self, pos: BlockPos, block: Block) -> Result<usize, WorldError> {
        self.set_block(pos, block)?;
        self.enqueue(pos);
        let mut enqueued = 0;
        for n in pos.face_neighbors() {
            if self.enqueue(n) {
                enqueued += 1;
            }
        }
        Ok(enqueued)
    }

    /// Append a position to the rule queue unless out of bounds or
    /// already queued.
    pub fn enqueue(&mut self, pos: BlockPos) -> bool {
        if !self.in_bounds(pos) || !self.queued.insert(pos) {
            return false;
        }
        self.update_queue.push_back(pos);
        true
    }

    pub fn dequeue_update(&mut self) -> Option<BlockPos> {
        let pos = self.update_queue.pop_front()?;
        self.queued.remove(&pos);
        Some(pos)
    }

    pub fn queue_len(&self) -> usize {
        self.update_queue.len()
    }

    /// Allocated world size in cells along x and z.
    pub fn extent(&self) -> (i32, i32) {
        let (mut mx, mut mz) = (0, 0);
        for &(cx, cz) in self.chunks.keys() {
            mx = mx.max(cx + 1);
            mz = mz.max(cz + 1);
        }
        (mx * CHUNK_SIZE as i32, mz * CHUNK_SIZE as i32)
    }

    pub fn kelp_cells(&self) -> impl Iterator<Item = BlockPos> + '_ {
        self.kelp_cells.iter().copied()
    }

    pub(crate) fn kelp_due(&mut self) -> bool {
        if self.tick_counter % self.params.kelp_interval != 0
            || self.last_kelp_tick == Some(self.tick_counter)
        {
            return false;
        }
        self.last_kelp_tick = Some(self.tick_counter);
        true
    }

    pub(crate) fn next_entity_id(&self) -> EntityId {
        self.next_entity_id
    }

    pub(crate) fn set_next_entity_id(&mut self, id: EntityId) {
        self.next_entity_id = id;
    }

    pub fn spawn_entity(&mut self, kind: EntityKind, pos: [f64; 3], payload: Payload) -> EntityId {
        let id = self.next_entity_id;
        self.next_entity_id += 1;
        let mut e = Entity::new(id, kind, pos);
        e.payload = payload;
        self.entities.insert(id, e);
        id
    }

    pub fn set_player(&mut self, id: u64, pos: [f64; 3]) {
        self.players.insert(id, pos);
    }

    pub fn remove_player(&mut self, id: u64) {
        self.players.remove(&id);
    }

    /// True when any block changed within Chebyshev `radius` of `center`
    /// on or after `since_tick`.
    pub fn changed_near(&self, center: BlockPos, radius: i32, since_tick: u64) -> bool {
        // Entries are appended in tick order, so scan newest-first and
        // stop at the horizon.
        for &(tick, pos) in self.recent_changes.iter().rev() {
            if tick < since_tick {
                return false;
            }
            let d = (pos.x - center.x)
                .abs()
                .max((pos.y - center.y).abs())
                .max((pos.z - center.z).abs());
            if d <= radius {
                return true;
            }
        }
        false
    }

    /// Net block changes since the last call, for observers (e.g. update
    /// broadcasts). Last write per position wins.
    pub fn drain_changes(&mut self) -> BTreeMap<BlockPos, Block> {
        std::mem::take(&mut self.change_log)
    }

    /// Close out the current tick: bump the counter and drop staleness
    /// entries past the horizon anything could still ask about.
    pub fn advance_tick(&mut self) {
        self.tick_counter += 1;
        let horizon = self.tick_counter.saturating_sub(self.params.path_max_age_ticks);
        while let Some(&(tick, _)) = self.recent_changes.front() {
            if tick >= horizon {
                break;
            }
            self.recent_changes.pop_front();
        }
    }

    /// FNV-1a digest of the dynamic state, for determinism checks.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.tick_counter);
        h.write_u64(self.total_detonations);
        h.write_u64(self.next_entity_id);
        for (&(cx, cz), chunk) in &self.chunks {
            h.write_u64(cx as u64);
            h.write_u64(cz as u64);
            for (lx, y, lz, block) in chunk.iter_non_air() {
                h.write_u64(((lx as u64) << 32) | ((y as u64) << 16) | lz as u64);
                h.write(block.kind.name().as_bytes());
                h.write(&[block.aux]);
            }
        }
        for (id, e) in &self.entities {
            h.write_u64(*id);
            h.write(e.kind.name().as_bytes());
            for v in e.pos.iter().chain(e.vel.iter()) {
                h.write_u64(v.to_bits());
            }
            match e.payload {
                Payload::None => h.write(b"-"),
                Payload::ItemKind(k) => h.write(k.name().as_bytes()),
                Payload::FuseTicks(f) => h.write_u64(u64::from(f)),
            }
            h.write_u64(e.path_cursor as u64);
            h.write_u64(e.path_tick);
            h.write(&[e.path_failed as u8]);
            if let Some(path) = &e.path {
                for p in path {
                    h.write_u64(((p.x as u64) << 40) ^ ((p.y as u64) << 20) ^ p.z as u64);
                }
            }
        }
        for (id, pos) in &self.players {
            h.write_u64(*id);
            for v in pos {
                h.write_u64(v.to_bits());
            }
        }
        h.finish()
    }
}

/// FNV-1a, 64-bit.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world() -> WorldState {
        let mut w = WorldState::new(7, SimParams::default());
        w.allocate_chunks(1, 1);
        w
    }

    #[test]
    fn interior_update_enqueues_six_neighbors() {
        let mut w = small_world();
        let n = w
            .apply_block_update(BlockPos::new(8, 30, 8), Block::of(BlockKind::Stone))
            .unwrap();
        assert_eq!(n, 6);
        // The cell itself is queued too.
        assert_eq!(w.queue_len(), 7);
    }

    #[test]
    fn corner_update_enqueues_three_neighbors() {
        let mut w = small_world();
        let n = w
            .apply_block_update(BlockPos::new(0, 0, 0), Block::of(BlockKind::Stone))
            .unwrap();
        assert_eq!(n, 3);
    }

    #[test]
    fn out_of_bounds_update_is_rejected() {
        let mut w = small_world();
        let err = w
            .apply_block_update(BlockPos::new(16, 0, 0), Block::of(BlockKind::Stone))
            .unwrap_err();
        assert_eq!(err, WorldError::OutOfBounds(16, 0, 0));
        assert!(w
            .apply_block_update(BlockPos::new(0, 64, 0), Block::of(BlockKind::Stone))
            .is_err());
    }

    #[test]
    fn queue_is_fifo_with_dedup() {
        let mut w = small_world();
        let a = BlockPos::new(1, 1, 1);
        let b = BlockPos::new(2, 2, 2);
        assert!(w.enqueue(a));
        assert!(w.enqueue(b));
        assert!(!w.enqueue(a), "duplicate enqueue must be a no-op");
        assert_eq!(w.dequeue_update(), Some(a));
        assert_eq!(w.dequeue_update(), Some(b));
        assert_eq!(w.dequeue_update(), None);
        // Once dequeued, a position may be queued again.
        assert!(w.enqueue(a));
    }

    #[test]
    fn digest_tracks_block_and_entity_changes() {
        let mut a = small_world();
        let mut b = small_world();
        assert_eq!(a.digest(), b.digest());

        a.set_block(BlockPos::new(1, 2, 3), Block::of(BlockKind::Sand)).unwrap();
        assert_ne!(a.digest(), b.digest());
        b.set_block(BlockPos::new(1, 2, 3), Block::of(BlockKind::Sand)).unwrap();
        assert_eq!(a.digest(), b.digest());

        a.spawn_entity(EntityKind::Item, [1.0, 2.0, 3.0], Payload::ItemKind(BlockKind::Sand));
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn change_log_keeps_last_write_per_position() {
        let mut w = small_world();
        let p = BlockPos::new(4, 4, 4);
        w.set_block(p, Block::of(BlockKind::Sand)).unwrap();
        w.set_block(p, Block::of(BlockKind::Stone)).unwrap();
        let changes = w.drain_changes();
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[&p], Block::of(BlockKind::Stone));
        assert!(w.drain_changes().is_empty());
    }

    #[test]
    fn staleness_horizon_prunes_old_changes() {
        let mut w = small_world();
        let p = BlockPos::new(3, 3, 3);
        w.set_block(p, Block::of(BlockKind::Stone)).unwrap();
        assert!(w.changed_near(BlockPos::new(5, 5, 5), 8, 0));
        assert!(!w.changed_near(BlockPos::new(15, 3, 15), 8, 0), "outside radius");
        assert!(!w.changed_near(BlockPos::new(5, 5, 5), 8, 1), "change was on tick 0");

        for _ in 0..=w.params.path_max_age_ticks {
            w.advance_tick();
        }
        assert!(!w.changed_near(BlockPos::new(5, 5, 5), 8, 0), "pruned past horizon");
    }
}
