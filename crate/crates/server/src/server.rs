//! The real-time server: sockets, tick pacing, and metric publication
//! wrapped around [`GameCore`].

use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use meterstick_core::{ComponentKind, DEFAULT_TICK_PERIOD_NS};
use meterstick_workloads::{build_world, WorkloadKind, WorkloadSpec};
use meterstick_world::{load_snapshot, SimParams, WorldState};
use thiserror::Error;

use crate::clock::TickClock;
use crate::costs::{spin_for, CostModel};
use crate::game::{GameCore, InEvent};
use crate::metrics::{MetricsHub, MetricsMeta};
use crate::net::{serve_connections, Inbox, Outboxes};
use crate::protocol::encode_line;

/// Rule evaluations allowed per tick before terrain work carries over.
pub const RULE_BUDGET: usize = 4096;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("world source {0:?}: {1}")]
    WorldSource(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the server's world comes from: a snapshot file, or a
/// generated workload written as `kind:scale:seed` with an optional
/// fourth `:delay_ticks` field for the explosive workload's igniter.
#[derive(Clone, Debug, PartialEq)]
pub enum WorldSource {
    File(PathBuf),
    Workload(WorkloadSpec),
}

impl WorldSource {
    pub fn parse(arg: &str) -> Result<WorldSource, ServerError> {
        let parts: Vec<&str> = arg.split(':').collect();
        if let Some(kind) = WorkloadKind::parse(parts[0]) {
            let bad = |why: &str| ServerError::WorldSource(arg.into(), why.into());
            if !(3..=4).contains(&parts.len()) {
                return Err(bad("expected kind:scale:seed[:delay_ticks]"));
            }
            let scale: u32 = parts[1].parse().map_err(|_| bad("scale is not a number"))?;
            let seed: u64 = parts[2].parse().map_err(|_| bad("seed is not a number"))?;
            let mut spec = WorkloadSpec::new(kind, scale, seed);
            if let Some(delay) = parts.get(3) {
                spec.tnt_delay_ticks =
                    delay.parse().map_err(|_| bad("delay_ticks is not a number"))?;
            }
            spec.validate().map_err(|e| bad(&e.to_string()))?;
            return Ok(WorldSource::Workload(spec));
        }
        Ok(WorldSource::File(PathBuf::from(arg)))
    }

    pub fn build(&self) -> Result<WorldState, ServerError> {
        match self {
            WorldSource::File(path) => {
                let named = |e: &dyn std::fmt::Display| {
                    ServerError::WorldSource(path.display().to_string(), e.to_string())
                };
                let file = std::fs::File::open(path).map_err(|e| named(&e))?;
                load_snapshot(std::io::BufReader::new(file), SimParams::default())
                    .map_err(|e| named(&e))
            }
            WorldSource::Workload(spec) => build_world(spec)
                .map_err(|e| ServerError::WorldSource(format!("{spec:?}"), e.to_string())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub world: WorldSource,
    /// Game port; 0 binds an ephemeral port.
    pub port: u16,
    /// Metrics port; 0 binds an ephemeral port.
    pub metrics_port: u16,
    pub tick_ms: u64,
    pub concurrent_phases: bool,
    /// Address-space cap applied at startup; 0 leaves it unlimited.
    pub memory_limit_mb: u64,
    /// Injected anomaly for latency testing: sleep `stall_ms` inside
    /// the given tick.
    pub stall_at_tick: Option<u64>,
    pub stall_ms: u64,
    /// Stop on its own after this many ticks; `None` runs until
    /// signalled.
    pub max_ticks: Option<u64>,
}

impl ServerConfig {
    pub fn new(world: WorldSource) -> ServerConfig {
        ServerConfig {
            world,
            port: 0,
            metrics_port: 0,
            tick_ms: DEFAULT_TICK_PERIOD_NS / 1_000_000,
            concurrent_phases: false,
            memory_limit_mb: 0,
            stall_at_tick: None,
            stall_ms: 0,
            max_ticks: None,
        }
    }
}

/// A running server: bound addresses plus the means to stop it.
pub struct Server {
    pub game_addr: SocketAddr,
    pub metrics_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    loop_thread: Option<JoinHandle<()>>,
}

impl Server {
    /// Bind both ports, build the world, and start ticking.
    pub fn launch(config: ServerConfig) -> Result<Server, ServerError> {
        if config.memory_limit_mb > 0 {
            apply_memory_limit(config.memory_limit_mb);
        }
        let world = config.world.build()?;
        let game_listener = TcpListener::bind(("127.0.0.1", config.port))?;
        let metrics_listener = TcpListener::bind(("127.0.0.1", config.metrics_port))?;
        let game_addr = game_listener.local_addr()?;
        let metrics_addr = metrics_listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let hub = MetricsHub::new();

        let inbox: Inbox = Arc::default();
        let outboxes: Outboxes = Arc::default();
        {
            let (inbox, outboxes, stop) =
                (Arc::clone(&inbox), Arc::clone(&outboxes), Arc::clone(&stop));
            std::thread::spawn(move || serve_connections(game_listener, inbox, outboxes, stop));
        }
        {
            let (hub, stop) = (hub.clone(), Arc::clone(&stop));
            std::thread::spawn(move || hub.serve(metrics_listener, stop));
        }

        let loop_stop = Arc::clone(&stop);
        let loop_thread = std::thread::Builder::new()
            .name("game-loop".into())
            .spawn(move || game_loop(config, world, inbox, outboxes, hub, loop_stop))
            .expect("spawn game loop");

        log::info!("serving game on {game_addr}, metrics on {metrics_addr}");
        Ok(Server { game_addr, metrics_addr, stop, loop_thread: Some(loop_thread) })
    }

    /// Ask the loop to stop and wait for it.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.loop_thread.take() {
            let _ = handle.join();
        }
    }

    /// Block until the loop ends on its own (`max_ticks` or a signal
    /// routed to the stop flag).
    pub fn wait(mut self) {
        if let Some(handle) = self.loop_thread.take() {
            let _ = handle.join();
        }
    }

    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }
}

fn game_loop(
    config: ServerConfig,
    world: WorldState,
    inbox: Inbox,
    outboxes: Outboxes,
    hub: MetricsHub,
    stop: Arc<AtomicBool>,
) {
    let model = CostModel::default();
    let mut core = GameCore::new(world, RULE_BUDGET, config.concurrent_phases);
    let period = Duration::from_millis(config.tick_ms.max(1));
    let mut clock = TickClock::new(period);
    let origin = Instant::now();
    let mut actions_total: u64 = 0;
    let mut index: u64 = 0;

    while !stop.load(Ordering::Relaxed) {
        let tick_start = Instant::now();
        let start_ns = (tick_start - origin).as_nanos() as u64;

        let events = drain_inbox(&inbox);
        let mut output = core.run_tick(events);
        actions_total += output.work.actions;

        // An injected stall lands mid-tick, before the flush: the tick's
        // own responses ship late, the way a real pause is felt.
        if config.stall_at_tick == Some(index) && config.stall_ms > 0 {
            log::warn!("injected stall: {} ms at tick {index}", config.stall_ms);
            let stall_started = Instant::now();
            std::thread::sleep(Duration::from_millis(config.stall_ms));
            output.native_ns[ComponentKind::Other as usize] +=
                stall_started.elapsed().as_nanos() as u64;
        }

        // Hand the produced updates to the writer threads.
        let flush_started = Instant::now();
        flush_outbound(&outboxes, &output);
        output.native_ns[ComponentKind::Networking as usize] +=
            flush_started.elapsed().as_nanos() as u64;

        // Realize the work-proportional cost floors as busy time.
        let (record, deficit) = model.amortize(index, start_ns, output.native_ns, &output.work);
        spin_for(Duration::from_nanos(deficit));

        hub.push(
            record,
            MetricsMeta {
                tick_counter: index + 1,
                entity_count: core.world.entities.len() as u64,
                player_count: core.world.players.len() as u64,
                actions_total,
                queue_depth: core.world.queue_len() as u64,
                records: 0,
            },
        );

        index += 1;
        if config.max_ticks == Some(index) {
            break;
        }
        clock.wait();
    }
    log::info!("game loop stopped after {index} ticks");
}

fn drain_inbox(inbox: &Inbox) -> Vec<InEvent> {
    std::mem::take(&mut *inbox.lock().expect("inbox lock"))
}

fn flush_outbound(outboxes: &Outboxes, output: &crate::game::TickOutput) {
    let senders = outboxes.lock().expect("outboxes lock");
    for (sid, updates) in &output.outbound {
        if updates.is_empty() {
            continue;
        }
        let Some(sender) = senders.get(sid) else {
            continue; // session closed mid-tick
        };
        let mut batch = String::with_capacity(updates.len() * 64);
        for update in updates {
            batch.push_str(&encode_line(update));
            batch.push('\n');
        }
        let _ = sender.send(batch);
    }
}

/// Cap the address space the way a managed-runtime heap flag would.
fn apply_memory_limit(mb: u64) {
    let bytes = mb.saturating_mul(1024 * 1024);
    let limit = libc::rlimit { rlim_cur: bytes, rlim_max: bytes };
    let rc = unsafe { libc::setrlimit(libc::RLIMIT_AS, &limit) };
    if rc != 0 {
        log::warn!("memory limit of {mb} MiB not applied: {}", std::io::Error::last_os_error());
    }
}

/// Global stop flag used by the signal handler in binary mode.
static SIGNALLED: AtomicBool = AtomicBool::new(false);
static SIGNAL_TARGET: Mutex<Option<Arc<AtomicBool>>> = Mutex::new(None);

extern "C" fn on_terminate(_sig: libc::c_int) {
    SIGNALLED.store(true, Ordering::Relaxed);
    // The handler must be async-signal-safe: only flip flags here. The
    // actual stop propagates through the already-registered Arc.
    if let Ok(guard) = SIGNAL_TARGET.try_lock() {
        if let Some(flag) = guard.as_ref() {
            flag.store(true, Ordering::Relaxed);
        }
    }
}

/// Route SIGTERM/SIGINT to this server's stop flag. Used by the
/// command-line entry point so process managers can stop a run cleanly.
pub fn stop_on_signals(server: &Server) {
    *SIGNAL_TARGET.lock().expect("signal target lock") = Some(server.stop_flag());
    let handler = on_terminate as *const () as usize;
    unsafe {
        libc::signal(libc::SIGTERM, handler);
        libc::signal(libc::SIGINT, handler);
    }
}
