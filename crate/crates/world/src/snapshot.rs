//! The world snapshot format: versioned, line-tagged CSV.
//!
//! One logical record per line, first field is the record tag:
//!
//! ```text
//! worldsnap,1
//! seed,42
//! tick,0
//! detonations,0
//! next_entity,1
//! chunk,0,0
//! block,3,1,4,stone,0
//! entity,1,item,3.5,1.0,4.5,0,0,0,item,sand
//! schedule,400,0,place_block,8,1,8,signal_source,15
//! end
//! ```
//!
//! Only non-air cells are dumped; chunk records carry the world bounds.
//! Snapshots capture worlds at rest (between runs): live npc routes and
//! the pending rule queue are not persisted.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::block::{Block, BlockKind, BlockPos};
use crate::chunk::CHUNK_SIZE;
use crate::entity::{Entity, EntityKind, Payload};
use crate::params::SimParams;
use crate::terrain::{Schedule, ScheduleEffect};
use crate::world::WorldState;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("snapshot line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub fn save_snapshot<W: Write>(world: &WorldState, out: &mut W) -> io::Result<()> {
    writeln!(out, "worldsnap,{SNAPSHOT_VERSION}")?;
    writeln!(out, "seed,{}", world.rng_seed)?;
    writeln!(out, "tick,{}", world.tick_counter)?;
    writeln!(out, "detonations,{}", world.total_detonations)?;
    writeln!(out, "next_entity,{}", world.next_entity_id())?;
    for (cx, cz) in world.chunk_coords() {
        writeln!(out, "chunk,{cx},{cz}")?;
    }
    for (cx, cz) in world.chunk_coords() {
        for x in 0..CHUNK_SIZE {
            for y in 0..crate::chunk::WORLD_HEIGHT {
                for z in 0..CHUNK_SIZE {
                    let pos = BlockPos::new(cx * CHUNK_SIZE + x, y, cz * CHUNK_SIZE + z);
                    let b = world.get_block(pos).expect("chunk cell");
                    if b.kind != BlockKind::Air {
                        writeln!(
                            out,
                            "block,{},{},{},{},{}",
                            pos.x,
                            pos.y,
                            pos.z,
                            b.kind.name(),
                            b.aux
                        )?;
                    }
                }
            }
        }
    }
    for e in world.entities.values() {
        let (tag, val) = payload_fields(&e.payload);
        writeln!(
            out,
            "entity,{},{},{},{},{},{},{},{},{tag},{val}",
            e.id,
            e.kind.name(),
            e.pos[0],
            e.pos[1],
            e.pos[2],
            e.vel[0],
            e.vel[1],
            e.vel[2],
        )?;
    }
    for s in &world.schedules {
        write!(out, "schedule,{},{},", s.start_tick, s.period)?;
        match &s.effect {
            ScheduleEffect::ToggleSource { pos } => {
                writeln!(out, "toggle_source,{},{},{}", pos.x, pos.y, pos.z)?;
            }
            ScheduleEffect::PlaceBlock { pos, block } => {
                writeln!(
                    out,
                    "place_block,{},{},{},{},{}",
                    pos.x,
                    pos.y,
                    pos.z,
                    block.kind.name(),
                    block.aux
                )?;
            }
            ScheduleEffect::BreakToItem { pos } => {
                writeln!(out, "break_to_item,{},{},{}", pos.x, pos.y, pos.z)?;
            }
            ScheduleEffect::SpawnEntity { kind, pos, payload } => {
                let (tag, val) = payload_fields(payload);
                writeln!(
                    out,
                    "spawn_entity,{},{},{},{},{tag},{val}",
                    kind.name(),
                    pos.x,
                    pos.y,
                    pos.z,
                )?;
            }
            ScheduleEffect::EnqueuePos { pos } => {
                writeln!(out, "enqueue,{},{},{}", pos.x, pos.y, pos.z)?;
            }
        }
    }
    writeln!(out, "end")?;
    Ok(())
}

fn payload_fields(p: &Payload) -> (&'static str, String) {
    match p {
        Payload::None => ("none", "-".to_string()),
        Payload::ItemKind(k) => ("item", k.name().to_string()),
        Payload::FuseTicks(f) => ("fuse", f.to_string()),
    }
}

pub fn load_snapshot<R: BufRead>(input: R, params: SimParams) -> Result<WorldState, SnapshotError> {
    let mut world: Option<WorldState> = None;
    let mut saw_header = false;
    let mut saw_end = false;
    let mut pending: Vec<(usize, String)> = Vec::new();

    let err = |line: usize, reason: String| SnapshotError::Parse { line, reason };

    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if idx == 0 {
            let rest = line
                .strip_prefix("worldsnap,")
                .ok_or_else(|| err(1, "missing worldsnap header".into()))?;
            let version: u32 =
                rest.parse().map_err(|_| err(1, format!("bad version {rest:?}")))?;
            if version != SNAPSHOT_VERSION {
                return Err(err(1, format!("unsupported snapshot version {version}")));
            }
            saw_header = true;
            continue;
        }
        if line == "end" {
            saw_end = true;
            continue;
        }
        if saw_end {
            return Err(err(lineno, "content after end marker".into()));
        }
        let (tag, rest) = line.split_once(',').ok_or_else(|| err(lineno, "untagged line".into()))?;
        if tag == "seed" {
            let seed: u64 =
                rest.parse().map_err(|_| err(lineno, format!("bad seed {rest:?}")))?;
            world = Some(WorldState::new(seed, params));
            continue;
        }
        let Some(w) = world.as_mut() else {
            // Tolerate records ahead of the seed by deferring them.
            pending.push((lineno, line.to_string()));
            continue;
        };
        apply_record(w, lineno, tag, rest)?;
    }

    if !saw_header {
        return Err(err(1, "empty snapshot".into()));
    }
    if !saw_end {
        return Err(err(0, "missing end marker (truncated snapshot)".into()));
    }
    let mut w = world.ok_or_else(|| err(0, "no seed record".into()))?;
    for (lineno, line) in pending {
        let (tag, rest) = line.split_once(',').expect("checked above");
        apply_record(&mut w, lineno, tag, rest)?;
    }
    Ok(w)
}

fn apply_record(
    world: &mut WorldState,
    lineno: usize,
    tag: &str,
    rest: &str,
) -> Result<(), SnapshotError> {
    let err =
        |reason: String| SnapshotError::Parse { line: lineno, reason };
    let fields: Vec<&str> = rest.split(',').collect();
    let int = |s: &str| -> Result<i64, SnapshotError> {
        s.parse().map_err(|_| err(format!("bad integer {s:?}")))
    };
    let float = |s: &str| -> Result<f64, SnapshotError> {
        s.parse().map_err(|_| err(format!("bad number {s:?}")))
    };

    match tag {
        "tick" => world.tick_counter = int(rest)? as u64,
        "detonations" => world.total_detonations = int(rest)? as u64,
        "next_entity" => world.set_next_entity_id(int(rest)? as u64),
        "chunk" => {
            if fields.len() != 2 {
                return Err(err("chunk needs cx,cz".into()));
            }
            world.ensure_chunk(int(fields[0])? as i32, int(fields[1])? as i32);
        }
        "block" => {
            if fields.len() != 5 {
                return Err(err("block needs x,y,z,kind,aux".into()));
            }
            let pos =
                BlockPos::new(int(fields[0])? as i32, int(fields[1])? as i32, int(fields[2])? as i32);
            let kind = BlockKind::parse(fields[3])
                .ok_or_else(|| err(format!("unknown block kind {:?}", fields[3])))?;
            let aux = int(fields[4])? as u8;
            world
                .set_block_silent(pos, Block::with_aux(kind, aux))
                .map_err(|e| err(e.to_string()))?;
        }
        "entity" => {
            if fields.len() != 10 {
                return Err(err("entity needs 10 fields".into()));
            }
            let id = int(fields[0])? as u64;
            let kind = EntityKind::parse(fields[1])
                .ok_or_else(|| err(format!("unknown entity kind {:?}", fields[1])))?;
            let mut e = Entity::new(
                id,
                kind,
                [float(fields[2])?, float(fields[3])?, float(fields[4])?],
            );
            e.vel = [float(fields[5])?, float(fields[6])?, float(fields[7])?];
            e.payload = parse_payload(fields[8], fields[9]).map_err(err)?;
            world.entities.insert(id, e);
        }
        "schedule" => {
            if fields.len() < 3 {
                return Err(err("schedule needs start,period,effect".into()));
            }
            let start_tick = int(fields[0])? as u64;
            let period = int(fields[1])? as u64;
            let effect = parse_effect(fields[2], &fields[3..]).map_err(err)?;
            world.schedules.push(Schedule { start_tick, period, effect });
        }
        other => return Err(err(format!("unknown record tag {other:?}"))),
    }
    Ok(())
}

fn parse_payload(tag: &str, val: &str) -> Result<Payload, String> {
    match tag {
        "none" => Ok(Payload::None),
        "item" => BlockKind::parse(val)
            .map(Payload::ItemKind)
            .ok_or_else(|| format!("unknown item kind {val:?}")),
        "fuse" => val
            .parse()
            .map(Payload::FuseTicks)
            .map_err(|_| format!("bad fuse {val:?}")),
        other => Err(format!("unknown payload tag {other:?}")),
    }
}

fn parse_effect(name: &str, args: &[&str]) -> Result<ScheduleEffect, String> {
    let pos3 = |args: &[&str]| -> Result<BlockPos, String> {
        if args.len() < 3 {
            return Err(format!("effect {name} needs a position"));
        }
        let mut parts = [0i32; 3];
        for (i, a) in args[..3].iter().enumerate() {
            parts[i] = a.parse().map_err(|_| format!("bad coordinate {a:?}"))?;
        }
        Ok(BlockPos::new(parts[0], parts[1], parts[2]))
    };
    match name {
        "toggle_source" => Ok(ScheduleEffect::ToggleSource { pos: pos3(args)? }),
        "break_to_item" => Ok(ScheduleEffect::BreakToItem { pos: pos3(args)? }),
        "enqueue" => Ok(ScheduleEffect::EnqueuePos { pos: pos3(args)? }),
        "place_block" => {
            if args.len() != 5 {
                return Err("place_block needs x,y,z,kind,aux".into());
            }
            let pos = pos3(args)?;
            let kind =
                BlockKind::parse(args[3]).ok_or_else(|| format!("unknown kind {:?}", args[3]))?;
            let aux: u8 = args[4].parse().map_err(|_| format!("bad aux {:?}", args[4]))?;
            Ok(ScheduleEffect::PlaceBlock { pos, block: Block::with_aux(kind, aux) })
        }
        "spawn_entity" => {
            if args.len() != 6 {
                return Err("spawn_entity needs kind,x,y,z,payload_tag,payload_val".into());
            }
            let kind =
                EntityKind::parse(args[0]).ok_or_else(|| format!("unknown kind {:?}", args[0]))?;
            let pos = pos3(&args[1..4])?;
            let payload = parse_payload(args[4], args[5])?;
            Ok(ScheduleEffect::SpawnEntity { kind, pos, payload })
        }
        other => Err(format!("unknown effect {other:?}")),
    }
}
