//! The game core: one tick of simulation, from drained inputs to
//! per-session outbound updates.
//!
//! The core is deliberately free of IO and wall-clock policy. The real
//! server wraps it in sockets and a tick clock; the deterministic run
//! mode drives it directly with a virtual clock. Both get identical
//! world behavior because everything stateful happens in here.
//!
//! Phase order within a tick is fixed: handle player actions, fire
//! scheduled events and terrain rules, step entities, refresh spawn
//! points (every 20th tick), then build the outbound update fan-out.

use std::collections::BTreeMap;
use std::time::Instant;

use meterstick_core::ComponentKind;
use meterstick_world::{
    compute_spawn_points, pathfind::is_walkable, step_entities, step_schedules_at, step_terrain,
    Block, BlockKind, BlockPos, EntityKind, Payload, WorldError, WorldState, WORLD_HEIGHT,
};

use crate::costs::TickWork;
use crate::protocol::{PlayerAction, StateUpdate, MAX_CHAT_BYTES};

pub type SessionId = u64;

/// How many ticks pass between spawn-point refreshes.
const SPAWN_REFRESH_TICKS: u64 = 20;
/// Spawn candidates kept warm for joins.
const SPAWN_CACHE_CAP: usize = 8;

/// One inbound connection event, as seen by the game loop.
#[derive(Clone, Debug, PartialEq)]
pub enum InEvent {
    Opened(SessionId),
    Action(SessionId, PlayerAction),
    /// A line that failed to decode. Costs handling work and a log
    /// line, nothing else; the connection stays up.
    Malformed(SessionId),
    Closed(SessionId),
}

/// Everything one tick produced for the outside world.
#[derive(Debug, Default)]
pub struct TickOutput {
    /// Updates per session, in session order, each in emission order.
    pub outbound: Vec<(SessionId, Vec<StateUpdate>)>,
    pub work: TickWork,
    /// Measured phase durations, indexed by [`ComponentKind`].
    pub native_ns: [u64; 6],
    pub rejected: u64,
}

struct PlayerSession {
    player_id: Option<u64>,
    name: String,
    pos: [f64; 3],
}

/// Why an action was turned away. Only logged — the protocol carries
/// no negative acknowledgements, matching the thin real-game wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rejection {
    NotJoined,
    AlreadyJoined,
    TooFar,
    Obstructed,
    Occupied,
    Empty,
    OutOfBounds,
    Malformed,
}

pub struct GameCore {
    pub world: WorldState,
    rule_budget: usize,
    interest_radius: i32,
    entity_update_cap: usize,
    concurrent: bool,
    sessions: BTreeMap<SessionId, PlayerSession>,
    /// Tick of the first join; schedule time zero. Worlds hold their
    /// scripted events until someone is there to observe them.
    epoch: Option<u64>,
    spawn_cache: Vec<BlockPos>,
    prev_entity_pos: BTreeMap<u64, [f64; 3]>,
    next_player_id: u64,
}

impl GameCore {
    pub fn new(world: WorldState, rule_budget: usize, concurrent: bool) -> GameCore {
        GameCore {
            world,
            rule_budget,
            interest_radius: 64,
            entity_update_cap: 256,
            concurrent,
            sessions: BTreeMap::new(),
            epoch: None,
            spawn_cache: Vec::new(),
            prev_entity_pos: BTreeMap::new(),
            next_player_id: 1,
        }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn player_count(&self) -> usize {
        self.sessions.values().filter(|s| s.player_id.is_some()).count()
    }

    /// Run one full tick. `events` is everything drained from the
    /// network since the previous tick, in arrival order.
    pub fn run_tick(&mut self, events: Vec<InEvent>) -> TickOutput {
        let tick = self.world.tick_counter;
        let mut out = TickOutput::default();
        let mut buffers: BTreeMap<SessionId, Vec<StateUpdate>> = BTreeMap::new();
        let mut chats: Vec<(String, u64, String)> = Vec::new();

        // Player handling: apply every drained event in arrival order.
        let t = Instant::now();
        for event in events {
            match event {
                InEvent::Opened(sid) => {
                    self.sessions.insert(
                        sid,
                        PlayerSession { player_id: None, name: String::new(), pos: [0.0; 3] },
                    );
                }
                InEvent::Closed(sid) => {
                    if let Some(session) = self.sessions.remove(&sid) {
                        if let Some(pid) = session.player_id {
                            self.world.remove_player(pid);
                        }
                    }
                }
                InEvent::Malformed(sid) => {
                    out.work.actions += 1;
                    out.rejected += 1;
                    log::debug!("session {sid}: rejected(malformed)");
                }
                InEvent::Action(sid, action) => {
                    out.work.actions += 1;
                    if let Err(why) =
                        self.handle_action(sid, action, tick, &mut buffers, &mut chats, &mut out)
                    {
                        out.rejected += 1;
                        log::debug!("session {sid}: rejected({why:?})");
                    }
                }
            }
        }
        out.native_ns[ComponentKind::PlayerHandling as usize] = t.elapsed().as_nanos() as u64;

        // Terrain: scheduled events (anchored to the first join), then
        // queued rule evaluation.
        let t = Instant::now();
        if let Some(epoch) = self.epoch {
            out.work.schedule_fires = step_schedules_at(&mut self.world, tick - epoch) as u64;
        }
        let terrain = step_terrain(&mut self.world, self.rule_budget);
        out.work.evaluations = terrain.evaluations;
        out.native_ns[ComponentKind::TerrainRules as usize] = t.elapsed().as_nanos() as u64;

        // Entities.
        let t = Instant::now();
        out.work.entities_total = self.world.entities.len() as u64;
        let entities = step_entities(&mut self.world);
        out.work.entities_moved = entities.moved;
        out.work.pathfinds = entities.pathfinds;
        out.native_ns[ComponentKind::Entities as usize] = t.elapsed().as_nanos() as u64;

        // Spawn-point upkeep.
        let t = Instant::now();
        if tick % SPAWN_REFRESH_TICKS == 0 && !self.world.players.is_empty() {
            let players: Vec<[f64; 3]> = self.world.players.values().copied().collect();
            self.spawn_cache = compute_spawn_points(&self.world, &players, SPAWN_CACHE_CAP);
            out.work.spawn_scans = 1;
        }
        out.native_ns[ComponentKind::Other as usize] = t.elapsed().as_nanos() as u64;

        // Networking: per-session world diffs plus the chat fan-out.
        let t = Instant::now();
        self.fan_out(tick, chats, &mut buffers, &mut out);
        out.native_ns[ComponentKind::Networking as usize] += t.elapsed().as_nanos() as u64;

        self.world.advance_tick();
        out.outbound = buffers.into_iter().collect();
        out
    }

    fn handle_action(
        &mut self,
        sid: SessionId,
        action: PlayerAction,
        tick: u64,
        buffers: &mut BTreeMap<SessionId, Vec<StateUpdate>>,
        chats: &mut Vec<(String, u64, String)>,
        out: &mut TickOutput,
    ) -> Result<(), Rejection> {
        let Some(session) = self.sessions.get_mut(&sid) else {
            return Err(Rejection::NotJoined);
        };
        match action {
            PlayerAction::Join { name } => {
                if session.player_id.is_some() {
                    return Err(Rejection::AlreadyJoined);
                }
                let pid = self.next_player_id;
                self.next_player_id += 1;
                let cell = self.pick_spawn();
                let pos = [f64::from(cell.x) + 0.5, f64::from(cell.y), f64::from(cell.z) + 0.5];
                let session = self.sessions.get_mut(&sid).expect("checked above");
                session.player_id = Some(pid);
                session.name = name;
                session.pos = pos;
                self.world.set_player(pid, pos);
                self.epoch.get_or_insert(tick);
                buffers.entry(sid).or_default().push(StateUpdate::JoinAck {
                    origin_tick: tick,
                    player_id: pid,
                    x: pos[0],
                    y: pos[1],
                    z: pos[2],
                });
                out.work.events_sent += 1;
                Ok(())
            }
            PlayerAction::Move { x, z } => {
                let Some(pid) = session.player_id else {
                    return Err(Rejection::NotJoined);
                };
                let cx = session.pos[0].floor() as i32;
                let cy = session.pos[1].floor() as i32;
                let cz = session.pos[2].floor() as i32;
                if (x - cx).abs() > 1 || (z - cz).abs() > 1 {
                    return Err(Rejection::TooFar);
                }
                // Resolve the standing height: level first, then one
                // step up or down.
                let y = [cy, cy + 1, cy - 1]
                    .into_iter()
                    .find(|&y| is_walkable(&self.world, BlockPos::new(x, y, z)))
                    .ok_or(Rejection::Obstructed)?;
                let pos = [f64::from(x) + 0.5, f64::from(y), f64::from(z) + 0.5];
                session.pos = pos;
                self.world.set_player(pid, pos);
                Ok(())
            }
            PlayerAction::PlaceBlock { x, y, z, block, aux } => {
                if session.player_id.is_none() {
                    return Err(Rejection::NotJoined);
                }
                let pos = BlockPos::new(x, y, z);
                match self.world.kind_at(pos) {
                    BlockKind::Air => {}
                    _ if !self.world.in_bounds(pos) => return Err(Rejection::OutOfBounds),
                    _ => return Err(Rejection::Occupied),
                }
                self.world.apply_block_update(pos, Block { kind: block, aux }).map_err(
                    |e| match e {
                        WorldError::InvalidBlock(..) => Rejection::Malformed,
                        _ => Rejection::OutOfBounds,
                    },
                )?;
                Ok(())
            }
            PlayerAction::BreakBlock { x, y, z } => {
                if session.player_id.is_none() {
                    return Err(Rejection::NotJoined);
                }
                let pos = BlockPos::new(x, y, z);
                if !self.world.in_bounds(pos) {
                    return Err(Rejection::OutOfBounds);
                }
                let kind = self.world.kind_at(pos);
                if kind == BlockKind::Air {
                    return Err(Rejection::Empty);
                }
                self.world.apply_block_update(pos, Block::AIR).expect("bounds checked");
                self.world.spawn_entity(
                    EntityKind::Item,
                    [f64::from(x) + 0.5, f64::from(y), f64::from(z) + 0.5],
                    Payload::ItemKind(kind),
                );
                Ok(())
            }
            PlayerAction::Chat { nonce, text } => {
                if session.player_id.is_none() {
                    return Err(Rejection::NotJoined);
                }
                if text.len() > MAX_CHAT_BYTES {
                    return Err(Rejection::Malformed);
                }
                chats.push((session.name.clone(), nonce, text));
                Ok(())
            }
            PlayerAction::Ping { nonce } => {
                buffers
                    .entry(sid)
                    .or_default()
                    .push(StateUpdate::Pong { origin_tick: tick, nonce });
                out.work.events_sent += 1;
                Ok(())
            }
        }
    }

    /// Spawn cell for a joining player: a cached candidate near the
    /// crowd, else a fresh scan, else the top of the world's center
    /// column for the very first arrival.
    fn pick_spawn(&mut self) -> BlockPos {
        if let Some(cell) = self.spawn_cache.pop() {
            return cell;
        }
        if !self.world.players.is_empty() {
            let players: Vec<[f64; 3]> = self.world.players.values().copied().collect();
            if let Some(&cell) = compute_spawn_points(&self.world, &players, 1).first() {
                return cell;
            }
        }
        let (ex, ez) = self.world.extent();
        let (x, z) = (ex / 2, ez / 2);
        for y in (0..WORLD_HEIGHT as i32 - 1).rev() {
            if self.world.is_solid_at(BlockPos::new(x, y, z)) {
                return BlockPos::new(x, y + 1, z);
            }
        }
        BlockPos::new(x, 1, z)
    }

    /// Build the outbound updates for every joined session: block diffs
    /// and entity motion within the interest radius, chat to everyone.
    fn fan_out(
        &mut self,
        tick: u64,
        chats: Vec<(String, u64, String)>,
        buffers: &mut BTreeMap<SessionId, Vec<StateUpdate>>,
        out: &mut TickOutput,
    ) {
        let changes: Vec<(BlockPos, Block)> = self.world.drain_changes().into_iter().collect();

        // Entity motion diff against the previous tick's positions.
        let mut moved: Vec<(u64, EntityKind, [f64; 3], [f64; 3])> = Vec::new();
        let mut current: BTreeMap<u64, [f64; 3]> = BTreeMap::new();
        for (&id, e) in &self.world.entities {
            current.insert(id, e.pos);
            if self.prev_entity_pos.get(&id) != Some(&e.pos) {
                moved.push((id, e.kind, e.pos, e.vel));
            }
        }
        self.prev_entity_pos = current;

        let joined: Vec<(SessionId, [f64; 3])> = self
            .sessions
            .iter()
            .filter_map(|(&sid, s)| s.player_id.map(|_| (sid, s.pos)))
            .collect();

        let build = |sid: SessionId, pos: [f64; 3]| -> (SessionId, Vec<StateUpdate>, u64, u64) {
            let px = pos[0].floor() as i32;
            let pz = pos[2].floor() as i32;
            let near = |x: i32, z: i32| {
                (x - px).abs() <= self.interest_radius && (z - pz).abs() <= self.interest_radius
            };
            let mut buf = Vec::new();
            let mut blocks = 0;
            for &(bpos, block) in &changes {
                if near(bpos.x, bpos.z) {
                    buf.push(StateUpdate::block_update(tick, bpos.x, bpos.y, bpos.z, block));
                    blocks += 1;
                }
            }
            let mut ents = 0;
            for &(id, kind, epos, evel) in &moved {
                if ents as usize >= self.entity_update_cap {
                    break;
                }
                if near(epos[0].floor() as i32, epos[2].floor() as i32) {
                    buf.push(StateUpdate::EntityUpdate {
                        origin_tick: tick,
                        id,
                        entity: kind,
                        x: epos[0],
                        y: epos[1],
                        z: epos[2],
                        vx: evel[0],
                        vy: evel[1],
                        vz: evel[2],
                    });
                    ents += 1;
                }
            }
            (sid, buf, blocks, ents)
        };

        // The per-session fan-out touches no shared mutable state, so
        // the optional concurrent mode splits sessions across two
        // helper threads. The output is identical either way.
        let built: Vec<(SessionId, Vec<StateUpdate>, u64, u64)> =
            if self.concurrent && joined.len() >= 2 {
                let mid = joined.len() / 2;
                let (lo, hi) = joined.split_at(mid);
                std::thread::scope(|scope| {
                    let hi_half = scope.spawn(|| {
                        hi.iter().map(|&(sid, pos)| build(sid, pos)).collect::<Vec<_>>()
                    });
                    let mut all: Vec<_> = lo.iter().map(|&(sid, pos)| build(sid, pos)).collect();
                    all.extend(hi_half.join().expect("fan-out half panicked"));
                    all
                })
            } else {
                joined.iter().map(|&(sid, pos)| build(sid, pos)).collect()
            };

        for (sid, buf, blocks, ents) in built {
            out.work.block_updates_sent += blocks;
            out.work.entity_updates_sent += ents;
            buffers.entry(sid).or_default().extend(buf);
        }

        if !chats.is_empty() {
            for &(sid, _) in &joined {
                let buf = buffers.entry(sid).or_default();
                for (player, nonce, text) in &chats {
                    buf.push(StateUpdate::ChatEvent {
                        origin_tick: tick,
                        player: player.clone(),
                        nonce: *nonce,
                        text: text.clone(),
                    });
                    out.work.events_sent += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use meterstick_world::SimParams;

    const BUDGET: usize = 4096;

    fn flat_world() -> WorldState {
        let mut w = WorldState::new(11, SimParams::default());
        w.allocate_chunks(2, 2);
        for x in 0..32 {
            for z in 0..32 {
                w.set_block_silent(BlockPos::new(x, 0, z), Block::of(BlockKind::Stone)).unwrap();
            }
        }
        w.drain_changes();
        w
    }

    fn join(core: &mut GameCore, sid: SessionId, name: &str) -> TickOutput {
        core.run_tick(vec![
            InEvent::Opened(sid),
            InEvent::Action(sid, PlayerAction::Join { name: name.into() }),
        ])
    }

    #[test]
    fn join_gets_an_ack_at_the_world_spawn() {
        let mut core = GameCore::new(flat_world(), BUDGET, false);
        let out = join(&mut core, 1, "alice");
        assert_eq!(out.rejected, 0);
        let (sid, updates) = &out.outbound[0];
        assert_eq!(*sid, 1);
        match updates[0] {
            StateUpdate::JoinAck { origin_tick, player_id, x, y, z } => {
                assert_eq!(origin_tick, 0);
                assert_eq!(player_id, 1);
                assert_eq!((x, y, z), (16.5, 1.0, 16.5), "top of the center column");
            }
            ref other => panic!("expected a join ack, got {other:?}"),
        }
        assert_eq!(core.player_count(), 1);
    }

    #[test]
    fn moves_are_bounded_and_collide_with_terrain() {
        let mut core = GameCore::new(flat_world(), BUDGET, false);
        join(&mut core, 1, "alice");

        // Legal step to an adjacent cell.
        let out = core.run_tick(vec![InEvent::Action(1, PlayerAction::Move { x: 17, z: 16 })]);
        assert_eq!(out.rejected, 0);
        assert_eq!(core.world.players[&1], [17.5, 1.0, 16.5]);

        // Two cells in one action is too far.
        let out = core.run_tick(vec![InEvent::Action(1, PlayerAction::Move { x: 19, z: 16 })]);
        assert_eq!(out.rejected, 1);
        assert_eq!(core.world.players[&1], [17.5, 1.0, 16.5]);

        // A wall two cells tall blocks the way.
        core.world
            .set_block_silent(BlockPos::new(18, 1, 16), Block::of(BlockKind::Stone))
            .unwrap();
        core.world
            .set_block_silent(BlockPos::new(18, 2, 16), Block::of(BlockKind::Stone))
            .unwrap();
        let out = core.run_tick(vec![InEvent::Action(1, PlayerAction::Move { x: 18, z: 16 })]);
        assert_eq!(out.rejected, 1, "move into solid terrain is rejected");

        // A single step up is climbable.
        core.world
            .set_block_silent(BlockPos::new(16, 1, 17), Block::of(BlockKind::Stone))
            .unwrap();
        let out = core.run_tick(vec![InEvent::Action(1, PlayerAction::Move { x: 16, z: 16 })]);
        assert_eq!(out.rejected, 0);
        let out = core.run_tick(vec![InEvent::Action(1, PlayerAction::Move { x: 16, z: 17 })]);
        assert_eq!(out.rejected, 0);
        assert_eq!(core.world.players[&1], [16.5, 2.0, 17.5]);
    }

    #[test]
    fn place_on_occupied_and_break_on_air_are_rejected() {
        let mut core = GameCore::new(flat_world(), BUDGET, false);
        join(&mut core, 1, "alice");

        let place = |x| PlayerAction::PlaceBlock { x, y: 3, z: 5, block: BlockKind::Soil, aux: 0 };
        let out = core.run_tick(vec![InEvent::Action(1, place(4))]);
        assert_eq!(out.rejected, 0);
        let out = core.run_tick(vec![InEvent::Action(1, place(4))]);
        assert_eq!(out.rejected, 1, "cell is occupied now");

        let out = core.run_tick(vec![InEvent::Action(
            1,
            PlayerAction::BreakBlock { x: 9, y: 3, z: 9 },
        )]);
        assert_eq!(out.rejected, 1, "breaking air is rejected");
        let out = core.run_tick(vec![InEvent::Action(
            1,
            PlayerAction::BreakBlock { x: 4, y: 3, z: 5 },
        )]);
        assert_eq!(out.rejected, 0);
        assert!(
            core.world.entities.values().any(|e| e.kind == EntityKind::Item),
            "broken blocks drop items"
        );
    }

    #[test]
    fn accepted_changes_reach_nearby_sessions_as_block_updates() {
        let mut core = GameCore::new(flat_world(), BUDGET, false);
        join(&mut core, 1, "alice");
        join(&mut core, 2, "bob");

        let out = core.run_tick(vec![InEvent::Action(
            1,
            PlayerAction::PlaceBlock { x: 20, y: 5, z: 20, block: BlockKind::Stone, aux: 0 },
        )]);
        for sid in [1, 2] {
            let updates = &out.outbound.iter().find(|(s, _)| *s == sid).unwrap().1;
            assert!(
                updates.iter().any(|u| matches!(
                    u,
                    StateUpdate::BlockUpdate { x: 20, y: 5, z: 20, block: BlockKind::Stone, .. }
                )),
                "session {sid} missed the diff: {updates:?}"
            );
        }
        assert_eq!(out.work.block_updates_sent, 2);
    }

    #[test]
    fn chat_reaches_every_joined_session_with_the_nonce() {
        let mut core = GameCore::new(flat_world(), BUDGET, false);
        join(&mut core, 1, "alice");
        join(&mut core, 2, "bob");
        core.run_tick(vec![InEvent::Opened(3)]); // connected, never joined

        let out = core.run_tick(vec![InEvent::Action(
            2,
            PlayerAction::Chat { nonce: 4242, text: "ahoy".into() },
        )]);
        for sid in [1, 2] {
            let updates = &out.outbound.iter().find(|(s, _)| *s == sid).unwrap().1;
            assert!(
                updates.iter().any(|u| matches!(
                    u,
                    StateUpdate::ChatEvent { nonce: 4242, .. }
                )),
                "session {sid} missed the chat"
            );
        }
        assert!(
            !out.outbound.iter().any(|(s, _)| *s == 3),
            "unjoined connections get no world traffic"
        );
        assert_eq!(out.work.events_sent, 2);
    }

    #[test]
    fn oversized_chat_is_rejected_but_the_session_lives() {
        let mut core = GameCore::new(flat_world(), BUDGET, false);
        join(&mut core, 1, "alice");
        let out = core.run_tick(vec![InEvent::Action(
            1,
            PlayerAction::Chat { nonce: 1, text: "x".repeat(MAX_CHAT_BYTES + 1) },
        )]);
        assert_eq!(out.rejected, 1);
        let out = core.run_tick(vec![InEvent::Action(1, PlayerAction::Ping { nonce: 2 })]);
        assert_eq!(out.rejected, 0, "session still serviced");
        assert!(matches!(
            out.outbound[0].1[0],
            StateUpdate::Pong { nonce: 2, .. }
        ));
    }

    #[test]
    fn interest_radius_filters_far_changes() {
        // A 9x9-chunk world is 144 cells across: a player in one corner
        // is out of range of the opposite corner (Chebyshev > 64).
        let mut w = WorldState::new(5, SimParams::default());
        w.allocate_chunks(9, 9);
        for x in 0..144 {
            for z in 0..144 {
                w.set_block_silent(BlockPos::new(x, 0, z), Block::of(BlockKind::Stone)).unwrap();
            }
        }
        w.drain_changes();
        let mut core = GameCore::new(w, BUDGET, false);
        join(&mut core, 1, "alice"); // spawns at the center (72, 72)

        // Walk the player into the low corner so the far corner drops
        // out of interest range.
        for step in 0..8 {
            let x = 71 - step;
            core.run_tick(vec![InEvent::Action(1, PlayerAction::Move { x, z: 71 - step })]);
        }
        assert_eq!(core.world.players[&1][0], 64.5);

        let near = PlayerAction::PlaceBlock { x: 10, y: 4, z: 10, block: BlockKind::Stone, aux: 0 };
        let far = PlayerAction::PlaceBlock { x: 143, y: 4, z: 143, block: BlockKind::Stone, aux: 0 };
        let out = core.run_tick(vec![InEvent::Action(1, near), InEvent::Action(1, far)]);
        let updates = &out.outbound[0].1;
        assert!(updates.iter().any(|u| matches!(u, StateUpdate::BlockUpdate { x: 10, .. })));
        assert!(
            !updates.iter().any(|u| matches!(u, StateUpdate::BlockUpdate { x: 143, .. })),
            "a change 79 cells away must not be sent"
        );
        assert_eq!(out.work.block_updates_sent, 1);
    }

    #[test]
    fn concurrent_fan_out_matches_serial_exactly() {
        let mut setup = |concurrent: bool| {
            let mut core = GameCore::new(flat_world(), BUDGET, concurrent);
            for sid in 1..=5 {
                join(&mut core, sid, &format!("bot-{sid}"));
            }
            // Kick off some motion and chatter so there is traffic.
            core.run_tick(vec![
                InEvent::Action(1, PlayerAction::PlaceBlock {
                    x: 20,
                    y: 8,
                    z: 20,
                    block: BlockKind::Sand,
                    aux: 0,
                }),
                InEvent::Action(2, PlayerAction::Chat { nonce: 9, text: "hi".into() }),
            ]);
            let mut transcript = Vec::new();
            for _ in 0..10 {
                let out = core.run_tick(Vec::new());
                transcript.push(out.outbound);
            }
            (core.world.digest(), transcript)
        };
        let (serial_digest, serial) = setup(false);
        let (concurrent_digest, concurrent) = setup(true);
        assert_eq!(serial_digest, concurrent_digest);
        assert_eq!(serial, concurrent);
    }

    #[test]
    fn first_join_anchors_schedule_time() {
        use meterstick_world::{Schedule, ScheduleEffect};
        let mut w = flat_world();
        w.schedules.push(Schedule {
            start_tick: 0,
            period: 0,
            effect: ScheduleEffect::PlaceBlock {
                pos: BlockPos::new(3, 3, 3),
                block: Block::of(BlockKind::Stone),
            },
        });
        let mut core = GameCore::new(w, BUDGET, false);

        // Ticks pass with nobody joined: the event stays pending.
        for _ in 0..50 {
            core.run_tick(Vec::new());
        }
        assert_eq!(core.world.kind_at(BlockPos::new(3, 3, 3)), BlockKind::Air);

        // It fires on the tick of the first join.
        let out = join(&mut core, 1, "alice");
        assert_eq!(out.work.schedule_fires, 1);
        assert_eq!(core.world.kind_at(BlockPos::new(3, 3, 3)), BlockKind::Stone);
    }
}
