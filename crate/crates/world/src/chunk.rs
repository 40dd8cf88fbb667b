//! Dense 16×16×64 block storage.

use crate::block::{Block, BlockPos};

pub const CHUNK_SIZE: i32 = 16;
pub const WORLD_HEIGHT: i32 = 64;

const CELLS: usize = (CHUNK_SIZE * CHUNK_SIZE * WORLD_HEIGHT) as usize;

/// One 16×16 column of cells, full world height, all cells initialized.
#[derive(Clone)]
pub struct Chunk {
    cells: Box<[Block; CELLS]>,
}

impl Chunk {
    pub fn new() -> Self {
        Chunk { cells: Box::new([Block::AIR; CELLS]) }
    }

    fn index(local_x: i32, y: i32, local_z: i32) -> usize {
        debug_assert!((0..CHUNK_SIZE).contains(&local_x));
        debug_assert!((0..WORLD_HEIGHT).contains(&y));
        debug_assert!((0..CHUNK_SIZE).contains(&local_z));
        ((y * CHUNK_SIZE + local_z) * CHUNK_SIZE + local_x) as usize
    }

    pub fn get(&self, local_x: i32, y: i32, local_z: i32) -> Block {
        self.cells[Self::index(local_x, y, local_z)]
    }

    pub fn set(&mut self, local_x: i32, y: i32, local_z: i32, block: Block) {
        self.cells[Self::index(local_x, y, local_z)] = block;
    }

    /// Iterate non-air cells as (local_x, y, local_z, block) in index order.
    pub fn iter_non_air(&self) -> impl Iterator<Item = (i32, i32, i32, Block)> + '_ {
        self.cells.iter().enumerate().filter_map(|(i, &b)| {
            if b == Block::AIR {
                return None;
            }
            let i = i as i32;
            let x = i % CHUNK_SIZE;
            let z = (i / CHUNK_SIZE) % CHUNK_SIZE;
            let y = i / (CHUNK_SIZE * CHUNK_SIZE);
            Some((x, y, z, b))
        })
    }
}

impl Default for Chunk {
    fn default() -> Self {
        Chunk::new()
    }
}

/// Chunk grid coordinate of a cell position (floor division by 16).
pub fn chunk_coord(pos: BlockPos) -> (i32, i32) {
    (pos.x.div_euclid(CHUNK_SIZE), pos.z.div_euclid(CHUNK_SIZE))
}

/// Cell coordinate within its chunk.
pub fn local_coord(pos: BlockPos) -> (i32, i32) {
    (pos.x.rem_euclid(CHUNK_SIZE), pos.z.rem_euclid(CHUNK_SIZE))
}
