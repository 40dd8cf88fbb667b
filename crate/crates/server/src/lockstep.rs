//! Deterministic run mode: the whole experiment — server loop, bots,
//! probes — executed in one thread on a virtual clock.
//!
//! No socket, no wall clock, no scheduler. Tick busy times come
//! straight from the cost floors and the virtual clock advances by the
//! same early/late rules as the paced loop, so two runs with the same
//! spec and seed produce byte-identical traces. This is the mode used
//! for reproducibility checks and for tests that would otherwise be
//! hostage to machine noise.

use std::collections::BTreeMap;

use meterstick_core::{RttSample, TickRecord, DEFAULT_TICK_PERIOD_NS};
use meterstick_workloads::{Bot, BotAction, WorkloadKind, WorkloadSpec, DEFAULT_PROBE_INTERVAL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::costs::CostModel;
use crate::game::{GameCore, InEvent, SessionId};
use crate::protocol::{PlayerAction, StateUpdate};
use crate::server::{ServerError, RULE_BUDGET};

#[derive(Clone, Debug)]
pub struct LockstepConfig {
    pub spec: WorkloadSpec,
    pub duration_ticks: u64,
    pub tick_period_ns: u64,
    pub cost: CostModel,
    pub rule_budget: usize,
    pub concurrent_phases: bool,
    /// Ticks between latency probes from the designated prober.
    pub probe_interval_ticks: u64,
}

impl LockstepConfig {
    pub fn new(spec: WorkloadSpec, duration_ticks: u64) -> LockstepConfig {
        LockstepConfig {
            spec,
            duration_ticks,
            tick_period_ns: DEFAULT_TICK_PERIOD_NS,
            cost: CostModel::default(),
            rule_budget: RULE_BUDGET,
            concurrent_phases: false,
            probe_interval_ticks: DEFAULT_PROBE_INTERVAL,
        }
    }
}

/// Everything a deterministic run yields.
#[derive(Clone, Debug)]
pub struct LockstepRun {
    pub ticks: Vec<TickRecord>,
    pub rtt: Vec<RttSample>,
    /// World digest at the end of the run.
    pub digest: u64,
    /// Final entity count, handy for workload assertions.
    pub entities: usize,
    /// Total explosive charges detonated over the run.
    pub detonations: u64,
}

/// One emulated client inside the deterministic run.
struct VirtualClient {
    sid: SessionId,
    join_tick: u64,
    /// Set once the join acknowledgement shows up.
    bot: Option<Bot>,
    /// Ticks the environment prober has been in the world (it idles
    /// between probes instead of walking).
    ticks_since_join: u64,
    joined: bool,
    prober: bool,
    rng: ChaCha8Rng,
}

/// Run the given workload start to finish on the virtual clock.
pub fn run_lockstep(config: &LockstepConfig) -> Result<LockstepRun, ServerError> {
    config
        .spec
        .validate()
        .map_err(|e| ServerError::WorldSource(format!("{:?}", config.spec), e.to_string()))?;
    let world = crate::server::WorldSource::Workload(config.spec).build()?;
    let mut core = GameCore::new(world, config.rule_budget, config.concurrent_phases);

    let mut clients = plan_clients(&config.spec);
    let period = config.tick_period_ns.max(1);
    let mut ticks = Vec::with_capacity(config.duration_ticks as usize);
    let mut rtt = Vec::new();
    let mut pending: Vec<InEvent> = Vec::new();
    let mut outstanding: BTreeMap<u64, u64> = BTreeMap::new(); // nonce -> sent_ns
    let mut next_nonce: u64 = 1;

    let mut start_ns: u64 = 0;
    let mut deadline_ns: u64 = period;
    for index in 0..config.duration_ticks {
        let mut events = Vec::new();
        for client in clients.iter_mut() {
            if client.join_tick == index {
                events.push(InEvent::Opened(client.sid));
                events.push(InEvent::Action(
                    client.sid,
                    PlayerAction::Join { name: format!("bot-{:02}", client.sid) },
                ));
            }
        }
        events.append(&mut pending);

        let output = core.run_tick(events);
        let (record, _) = config.cost.amortize(index, start_ns, [0u64; 6], &output.work);
        let busy_ns = record.busy_ns;

        // Deliver this tick's updates to the virtual clients.
        for (sid, updates) in &output.outbound {
            let Some(client) = clients.iter_mut().find(|c| c.sid == *sid) else { continue };
            for update in updates {
                match update {
                    StateUpdate::JoinAck { x, z, .. } => {
                        client.joined = true;
                        client.bot = Some(Bot::new(x.floor() as i32, z.floor() as i32));
                    }
                    StateUpdate::ChatEvent { nonce, .. } if client.prober => {
                        if let Some(sent_ns) = outstanding.remove(nonce) {
                            rtt.push(RttSample { sent_ns, recv_ns: start_ns + busy_ns });
                        }
                    }
                    _ => {}
                }
            }
        }

        // Each client acts once during this tick's slot; the actions
        // land in the next tick's drain, like a real socket would.
        let action_sent_ns = start_ns + period / 2;
        for client in clients.iter_mut() {
            if !client.joined {
                continue;
            }
            client.ticks_since_join += 1;
            let action = match client.bot.as_mut() {
                Some(bot) if config.spec.kind == WorkloadKind::Players => {
                    match bot.step(&mut client.rng) {
                        BotAction::Move { x, z } => Some(PlayerAction::Move { x, z }),
                        BotAction::Probe => Some(probe(&mut next_nonce)),
                    }
                }
                // Environment prober: idle except for the periodic probe.
                _ => (client.ticks_since_join % config.probe_interval_ticks == 0)
                    .then(|| probe(&mut next_nonce)),
            };
            if let Some(action) = action {
                if let PlayerAction::Chat { nonce, .. } = &action {
                    if client.prober {
                        outstanding.insert(*nonce, action_sent_ns);
                    }
                }
                pending.push(InEvent::Action(client.sid, action));
            }
        }

        ticks.push(record);
        let end_ns = start_ns + busy_ns;
        if end_ns < deadline_ns {
            start_ns = deadline_ns;
            deadline_ns += period;
        } else {
            start_ns = end_ns;
            deadline_ns = end_ns + period;
        }
    }

    Ok(LockstepRun {
        ticks,
        rtt,
        digest: core.world.digest(),
        entities: core.world.entities.len(),
        detonations: core.world.total_detonations,
    })
}

fn probe(next_nonce: &mut u64) -> PlayerAction {
    let nonce = *next_nonce;
    *next_nonce += 1;
    PlayerAction::Chat { nonce, text: "probe".into() }
}

fn plan_clients(spec: &WorkloadSpec) -> Vec<VirtualClient> {
    let count = if spec.kind == WorkloadKind::Players { spec.bot_count.max(1) } else { 1 };
    (0..count)
        .map(|i| VirtualClient {
            sid: i as SessionId + 1,
            // Joins are staggered two ticks apart, like the emulator's
            // connection ramp.
            join_tick: i as u64 * 2,
            bot: None,
            ticks_since_join: 0,
            joined: false,
            prober: i == 0,
            rng: ChaCha8Rng::seed_from_u64(spec.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        })
        .collect()
}
