//! Block cells and integer cell coordinates.

use serde::{Deserialize, Serialize};

/// Integer cell coordinate. `y` is height.
#[derive(Clone, Copy, Debug, Deserialize, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize)]
pub struct BlockPos {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl BlockPos {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        BlockPos { x, y, z }
    }

    /// The six face-adjacent positions, in a fixed order.
    pub fn face_neighbors(self) -> [BlockPos; 6] {
        let BlockPos { x, y, z } = self;
        [
            BlockPos::new(x - 1, y, z),
            BlockPos::new(x + 1, y, z),
            BlockPos::new(x, y - 1, z),
            BlockPos::new(x, y + 1, z),
            BlockPos::new(x, y, z - 1),
            BlockPos::new(x, y, z + 1),
        ]
    }

    pub fn below(self) -> BlockPos {
        BlockPos::new(self.x, self.y - 1, self.z)
    }

    pub fn above(self) -> BlockPos {
        BlockPos::new(self.x, self.y + 1, self.z)
    }

    /// The four horizontal face neighbors, in a fixed order.
    pub fn horizontal_neighbors(self) -> [BlockPos; 4] {
        let BlockPos { x, y, z } = self;
        [
            BlockPos::new(x - 1, y, z),
            BlockPos::new(x + 1, y, z),
            BlockPos::new(x, y, z - 1),
            BlockPos::new(x, y, z + 1),
        ]
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Eq, Hash, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Air,
    Stone,
    Soil,
    Sand,
    Water,
    Kelp,
    TntBlock,
    SignalWire,
    SignalSource,
    Hopper,
    SupportSensitive,
}

impl BlockKind {
    pub const ALL: [BlockKind; 11] = [
        BlockKind::Air,
        BlockKind::Stone,
        BlockKind::Soil,
        BlockKind::Sand,
        BlockKind::Water,
        BlockKind::Kelp,
        BlockKind::TntBlock,
        BlockKind::SignalWire,
        BlockKind::SignalSource,
        BlockKind::Hopper,
        BlockKind::SupportSensitive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Air => "air",
            BlockKind::Stone => "stone",
            BlockKind::Soil => "soil",
            BlockKind::Sand => "sand",
            BlockKind::Water => "water",
            BlockKind::Kelp => "kelp",
            BlockKind::TntBlock => "tnt_block",
            BlockKind::SignalWire => "signal_wire",
            BlockKind::SignalSource => "signal_source",
            BlockKind::Hopper => "hopper",
            BlockKind::SupportSensitive => "support_sensitive",
        }
    }

    pub fn parse(name: &str) -> Option<BlockKind> {
        BlockKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Solid cells block movement and support blocks/entities above them.
    /// Water, kelp and wires are passable; hoppers swallow what enters
    /// them, so they are passable too.
    pub fn is_solid(self) -> bool {
        !matches!(
            self,
            BlockKind::Air
                | BlockKind::Water
                | BlockKind::Kelp
                | BlockKind::SignalWire
                | BlockKind::Hopper
        )
    }

    /// Upper bound for the aux value of this kind (water level, signal
    /// strength, growth stage).
    pub fn max_aux(self) -> u8 {
        match self {
            BlockKind::Air => 0,
            BlockKind::Water => 7,
            _ => 15,
        }
    }
}

/// One world cell: a kind plus a small kind-dependent auxiliary value.
#[derive(Clone, Copy, Debug, Deserialize, Eq, Hash, PartialEq, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    pub aux: u8,
}

impl Block {
    pub const AIR: Block = Block { kind: BlockKind::Air, aux: 0 };

    pub const fn of(kind: BlockKind) -> Block {
        Block { kind, aux: 0 }
    }

    pub const fn with_aux(kind: BlockKind, aux: u8) -> Block {
        Block { kind, aux }
    }

    pub fn is_valid(&self) -> bool {
        self.aux <= self.kind.max_aux()
    }
}

impl Default for Block {
    fn default() -> Self {
        Block::AIR
    }
}
