//! Voxel world state and the simulation kernels that act on it.
//!
//! The world is a dense chunked block grid plus a set of entities. All
//! mutation flows through a single logical writer per tick; the kernels
//! here (terrain rules, entity physics, spawning, pathfinding,
//! detonation) are deterministic functions of the world seed and the
//! sequence of external actions applied.

mod block;
mod chunk;
mod detonate;
mod entity;
pub mod entities;
pub mod params;
pub mod pathfind;
pub mod snapshot;
pub mod spawn;
pub mod terrain;
mod world;

pub use block::{Block, BlockKind, BlockPos};
pub use chunk::{Chunk, CHUNK_SIZE, WORLD_HEIGHT};
pub use detonate::{detonate, DetonationReport};
pub use entities::{step_entities, EntityReport};
pub use entity::{Entity, EntityId, EntityKind, Payload};
pub use params::SimParams;
pub use pathfind::pathfind;
pub use snapshot::{load_snapshot, save_snapshot};
pub use spawn::compute_spawn_points;
pub use terrain::{
    step_schedules, step_schedules_at, step_terrain, Schedule, ScheduleEffect, TerrainReport,
};
pub use world::{WorldError, WorldState};
