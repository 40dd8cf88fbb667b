//! Entities: moving objects that are neither terrain nor players.

use crate::block::{BlockKind, BlockPos};
use serde::{Deserialize, Serialize};

pub type EntityId = u64;

#[derive(Clone, Copy, Debug, Deserialize, Eq, Hash, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Npc,
    Item,
    TntPrimed,
}

impl EntityKind {
    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Npc => "npc",
            EntityKind::Item => "item",
            EntityKind::TntPrimed => "tnt_primed",
        }
    }

    pub fn parse(name: &str) -> Option<EntityKind> {
        match name {
            "npc" => Some(EntityKind::Npc),
            "item" => Some(EntityKind::Item),
            "tnt_primed" => Some(EntityKind::TntPrimed),
            _ => None,
        }
    }
}

/// Kind-dependent entity state: what an item is made of, or how long a
/// primed charge has left.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    None,
    ItemKind(BlockKind),
    FuseTicks(u16),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    /// Continuous position in cells.
    pub pos: [f64; 3],
    /// Velocity in cells/tick.
    pub vel: [f64; 3],
    pub payload: Payload,
    /// Current route for an npc, newest goal last.
    pub path: Option<Vec<BlockPos>>,
    /// Index of the next path waypoint to walk toward.
    pub path_cursor: usize,
    /// Tick the current path (or failed attempt) was computed on.
    pub path_tick: u64,
    /// Set when the last pathfind came up empty, so the npc waits for the
    /// world to change instead of re-searching every tick.
    pub path_failed: bool,
}

impl Entity {
    pub fn new(id: EntityId, kind: EntityKind, pos: [f64; 3]) -> Self {
        Entity {
            id,
            kind,
            pos,
            vel: [0.0; 3],
            payload: Payload::None,
            path: None,
            path_cursor: 0,
            path_tick: 0,
            path_failed: false,
        }
    }

    /// The cell this entity currently occupies.
    pub fn cell(&self) -> BlockPos {
        BlockPos::new(
            self.pos[0].floor() as i32,
            self.pos[1].floor() as i32,
            self.pos[2].floor() as i32,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_floors_continuous_position() {
        let mut e = Entity::new(1, EntityKind::Item, [2.9, 5.0, -0.1]);
        assert_eq!(e.cell(), BlockPos::new(2, 5, -1));
        e.pos = [-2.5, 0.99, 16.0];
        assert_eq!(e.cell(), BlockPos::new(-3, 0, 16));
    }
}
