//! The game wire protocol: newline-delimited JSON, one message per line.
//!
//! Clients send [`PlayerAction`] lines; the server replies with
//! [`StateUpdate`] lines. Every update carries `origin_tick`, the tick
//! on which the server produced it, so a client can correlate what it
//! sees with the server's own timeline.

use meterstick_world::{Block, BlockKind, EntityKind};
use serde::{Deserialize, Serialize};

/// Hard cap on chat text, in bytes. Longer messages are malformed.
pub const MAX_CHAT_BYTES: usize = 256;

/// Hard cap on one inbound line, in bytes. A peer that sends more
/// without a newline is hostile or broken; the connection is dropped.
pub const MAX_LINE_BYTES: usize = 64 * 1024;

/// What a connected client can ask of the server.
#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlayerAction {
    /// Enter the world. Must be the first action on a connection.
    Join { name: String },
    /// Walk to an adjacent cell. `x`/`z` are absolute cell coordinates;
    /// the server resolves the standing height and rejects moves that
    /// are too far or into solid terrain.
    Move { x: i32, z: i32 },
    PlaceBlock { x: i32, y: i32, z: i32, block: BlockKind, aux: u8 },
    BreakBlock { x: i32, y: i32, z: i32 },
    /// Say something. The echo (a `chat_event` carrying the same nonce)
    /// doubles as the round-trip probe for latency measurement.
    Chat { nonce: u64, text: String },
    Ping { nonce: u64 },
}

/// What the server tells clients.
#[derive(Clone, Debug, Deserialize, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateUpdate {
    JoinAck {
        origin_tick: u64,
        player_id: u64,
        x: f64,
        y: f64,
        z: f64,
    },
    BlockUpdate {
        origin_tick: u64,
        x: i32,
        y: i32,
        z: i32,
        block: BlockKind,
        aux: u8,
    },
    EntityUpdate {
        origin_tick: u64,
        id: u64,
        entity: EntityKind,
        x: f64,
        y: f64,
        z: f64,
        vx: f64,
        vy: f64,
        vz: f64,
    },
    ChatEvent {
        origin_tick: u64,
        player: String,
        nonce: u64,
        text: String,
    },
    Pong { origin_tick: u64, nonce: u64 },
}

impl StateUpdate {
    pub fn block_update(origin_tick: u64, x: i32, y: i32, z: i32, block: Block) -> StateUpdate {
        StateUpdate::BlockUpdate { origin_tick, x, y, z, block: block.kind, aux: block.aux }
    }
}

/// Encode one message as a wire line (no trailing newline).
pub fn encode_line<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol types serialize infallibly")
}

/// Decode one wire line. `None` means the line is malformed; per the
/// connection contract that rejects the message but keeps the session.
pub fn decode_action(line: &str) -> Option<PlayerAction> {
    serde_json::from_str(line).ok()
}

pub fn decode_update(line: &str) -> Option<StateUpdate> {
    serde_json::from_str(line).ok()
}
