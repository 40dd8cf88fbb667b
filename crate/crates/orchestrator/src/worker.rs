//! The worker side of the control protocol.
//!
//! One worker process runs on each node.  [`serve_worker`] accepts controller
//! connections on a listening socket and applies verbs through the state
//! machine in [`crate::state`]; [`RealEffects`] implements the side effects —
//! launching and supervising the server under test, capturing tick traces and
//! system metrics, driving the bot swarm, and converting raw captures into
//! the iteration's CSV artifacts.
//!
//! In lockstep mode nothing external is spawned: `initialize` runs the whole
//! deterministic simulation in-process on the server node and `convert`
//! writes its artifacts, while the emulation node's verbs become no-ops so
//! the controller can speak the same script in both modes.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use meterstick_core::{encode_tick_frame, write_rtt_csv, write_ticks_csv, TickRecord};
use meterstick_emulator::{run_emulation, Behavior, EmulationOutcome, EmulatorConfig};
use meterstick_server::{request_snapshot, run_lockstep, LockstepConfig, LockstepRun};

use crate::artifacts::{
    self, IterationMeta, RTT_CSV, SERVER_LOG, STATUS_COMPLETE, SYSMETRICS_CSV, TICKS_BIN, TICKS_CSV,
};
use crate::config::{ExperimentConfig, LaunchMode, PlanEntry, RunMode, ServerEntry};
use crate::control::{ControlMessage, WorkerRole};
use crate::state::{handle_control_message, Phase, RunState, WorkerEffects};
use crate::sysmetrics::{write_empty_sysmetrics, Sampler};

/// How long `stop_server` waits after SIGTERM before escalating to SIGKILL.
const STOP_GRACE: Duration = Duration::from_secs(3);
/// Tick trace polling cadence.
const TICK_POLL_INTERVAL: Duration = Duration::from_secs(1);
/// Per-connection timeout when polling the metrics listener.
const METRICS_IO_TIMEOUT: Duration = Duration::from_secs(2);

/// Environment variable naming the benchmark binary for builtin server
/// launches; defaults to the currently running executable.
pub const BIN_ENV: &str = "METERSTICK_BIN";

/// Serve control sessions until an `exit` verb arrives.
///
/// The worker survives controller disconnects: state is kept across
/// connections, so a controller may reconnect and carry on.  After replying
/// to `exit` the worker waits for the controller to close the connection
/// first, which parks the TIME_WAIT on the controller's side and leaves this
/// node's ports immediately rebindable.
pub fn serve_worker(
    listener: TcpListener,
    role: WorkerRole,
    config: ExperimentConfig,
) -> std::io::Result<()> {
    let mut state = RunState::idle();
    let mut effects = RealEffects::new(role, config);
    loop {
        let (stream, peer) = listener.accept()?;
        log::info!("{}: controller connected from {peer}", role.name());
        let _ = stream.set_nodelay(true);
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = stream;
        let mut line = String::new();
        loop {
            line.clear();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    log::info!("{}: controller disconnected", role.name());
                    break;
                }
                Ok(_) => {}
                Err(e) => {
                    log::warn!("{}: control read failed: {e}", role.name());
                    break;
                }
            }
            let reply = match ControlMessage::parse(&line) {
                Err(_) => ControlMessage::err("parse"),
                Ok(message) => {
                    log::debug!("{}: <- {}", role.name(), message.encode());
                    let (next, reply) =
                        handle_control_message(&state, &message, role, &mut effects);
                    state = next;
                    reply
                }
            };
            if let Err(e) = writeln!(writer, "{}", reply.encode()) {
                log::warn!("{}: control write failed: {e}", role.name());
                break;
            }
            if state.phase == Phase::Done {
                wait_for_peer_close(&mut reader);
                effects.shutdown();
                return Ok(());
            }
        }
    }
}

fn wait_for_peer_close(reader: &mut BufReader<TcpStream>) {
    let _ = reader.get_ref().set_read_timeout(Some(Duration::from_secs(5)));
    let mut sink = [0u8; 256];
    while matches!(reader.read(&mut sink), Ok(n) if n > 0) {}
}

/// Production side effects for one worker.
pub struct RealEffects {
    role: WorkerRole,
    config: ExperimentConfig,
    plan: Vec<PlanEntry>,
    ordinal: u64,
    server_name: Option<String>,
    metrics_endpoint: Option<String>,
    child: Option<Child>,
    tick_logger: Option<TickLogger>,
    sampler: Option<Sampler>,
    emulation: Option<EmulationJob>,
    lockstep: Option<LockstepRun>,
}

struct EmulationJob {
    handle: JoinHandle<Result<EmulationOutcome, meterstick_emulator::EmulatorError>>,
}

impl RealEffects {
    pub fn new(role: WorkerRole, config: ExperimentConfig) -> RealEffects {
        let plan = crate::config::plan(&config);
        RealEffects {
            role,
            config,
            plan,
            ordinal: 0,
            server_name: None,
            metrics_endpoint: None,
            child: None,
            tick_logger: None,
            sampler: None,
            emulation: None,
            lockstep: None,
        }
    }

    fn entry(&self) -> Result<&PlanEntry, String> {
        self.plan
            .get(self.ordinal as usize)
            .ok_or_else(|| format!("ordinal {} outside a plan of {}", self.ordinal, self.plan.len()))
    }

    fn iteration_dir(&self) -> Result<PathBuf, String> {
        let entry = self.entry()?;
        Ok(artifacts::iteration_dir(
            &self.config.results_dir,
            &entry.server,
            entry.workload.name(),
            entry.iteration,
        ))
    }

    fn server_entry(&self) -> Result<&ServerEntry, String> {
        let name = self.server_name.as_deref().ok_or("no-server-selected")?;
        self.config
            .servers
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| format!("unknown server {name:?}"))
    }

    /// Abandon anything a previous iteration may have left behind.
    fn reset_iteration(&mut self) {
        if let Some(mut child) = self.child.take() {
            log::warn!("cleaning up a leftover server process");
            let _ = child.kill();
            let _ = child.wait();
        }
        if let Some(logger) = self.tick_logger.take() {
            let _ = logger.stop();
        }
        if let Some(sampler) = self.sampler.take() {
            let _ = sampler.stop();
        }
        if let Some(job) = self.emulation.take() {
            // The swarm dies with its server; joining here could block for
            // the remaining emulation time, so the thread is left to run out.
            log::warn!("abandoning a leftover emulation thread");
            drop(job);
        }
        self.lockstep = None;
    }

    /// The command line that launches the selected server for this ordinal.
    fn launch_command(&self) -> Result<Vec<String>, String> {
        let entry = self.entry()?;
        let server = self.server_entry()?;
        let game_port = self.config.game_port_for(self.ordinal);
        let metrics_port = self
            .metrics_endpoint
            .as_deref()
            .and_then(|e| e.rsplit_once(':'))
            .and_then(|(_, port)| port.parse::<u16>().ok())
            .ok_or("no-metrics-endpoint")?;
        let spec = self.config.workload_spec(entry.workload, entry.iteration);
        let workload_arg = format!(
            "{}:{}:{}:{}",
            entry.workload.name(),
            spec.scale,
            spec.seed,
            spec.tnt_delay_ticks
        );
        let dir = self.iteration_dir()?;

        if server.command.is_empty() {
            // The bundled simulator, hosted by the benchmark binary itself.
            let bin = std::env::var(BIN_ENV).map(PathBuf::from).unwrap_or(
                std::env::current_exe().map_err(|e| format!("cannot locate own binary: {e}"))?,
            );
            return Ok(vec![
                bin.to_string_lossy().into_owned(),
                "simserver".to_string(),
                "--workload".to_string(),
                workload_arg,
                "--port".to_string(),
                game_port.to_string(),
                "--metrics-port".to_string(),
                metrics_port.to_string(),
                "--tick-ms".to_string(),
                self.config.tick_ms.to_string(),
                "--memory-limit-mb".to_string(),
                self.config.memory_limit_mb.to_string(),
            ]);
        }

        let substitutions = [
            ("{port}", game_port.to_string()),
            ("{metrics_port}", metrics_port.to_string()),
            ("{workload}", workload_arg),
            ("{tick_ms}", self.config.tick_ms.to_string()),
            ("{memory_limit_mb}", self.config.memory_limit_mb.to_string()),
            ("{iteration_dir}", dir.to_string_lossy().into_owned()),
        ];
        Ok(server
            .command
            .iter()
            .map(|arg| {
                let mut arg = arg.clone();
                for (key, value) in &substitutions {
                    arg = arg.replace(key, value);
                }
                arg
            })
            .collect())
    }

    fn initialize_realtime(&mut self) -> Result<(), String> {
        let dir = self.iteration_dir()?;
        fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let command = self.launch_command()?;
        log::info!("launching server under test: {}", command.join(" "));

        let log_file = fs::File::create(dir.join(SERVER_LOG))
            .map_err(|e| format!("cannot create server log: {e}"))?;
        let log_clone = log_file.try_clone().map_err(|e| e.to_string())?;
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::null())
            .stdout(log_file)
            .stderr(log_clone)
            .spawn()
            .map_err(|e| format!("cannot launch {:?}: {e}", command[0]))?;

        if !self.config.cpu_affinity.is_empty() {
            if let Err(e) = pin_to_cores(child.id(), &self.config.cpu_affinity) {
                log::warn!("cpu pinning failed: {e}");
            }
        }

        // Readiness: the server is up once its game port accepts a
        // connection.  A child that dies first is a launch failure.
        let game_port = self.config.game_port_for(self.ordinal);
        let deadline = Instant::now() + Duration::from_secs(self.config.init_timeout_secs);
        loop {
            if let Some(status) = child.try_wait().map_err(|e| e.to_string())? {
                return Err(format!("server exited before accepting connections ({status})"));
            }
            match TcpStream::connect(("127.0.0.1", game_port)) {
                Ok(_) => break,
                Err(_) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(100))
                }
                Err(e) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!(
                        "server not accepting connections after {} s: {e}",
                        self.config.init_timeout_secs
                    ));
                }
            }
        }
        self.child = Some(child);
        Ok(())
    }

    fn initialize_lockstep(&mut self) -> Result<(), String> {
        let entry = self.entry()?;
        let spec = self.config.workload_spec(entry.workload, entry.iteration);
        let ticks = self.config.duration_secs * 1000 / self.config.tick_ms.max(1);
        let mut lockstep = LockstepConfig::new(spec, ticks);
        lockstep.tick_period_ns = self.config.tick_ms * 1_000_000;
        let run = run_lockstep(&lockstep).map_err(|e| format!("deterministic run failed: {e}"))?;
        self.lockstep = Some(run);
        let dir = self.iteration_dir()?;
        fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        Ok(())
    }

    fn convert_server_node(&mut self) -> Result<(), String> {
        let entry = self.entry()?.clone();
        let dir = self.iteration_dir()?;
        let spec = self.config.workload_spec(entry.workload, entry.iteration);

        let ticks: Vec<TickRecord> = match self.config.mode {
            RunMode::Lockstep => {
                let run = self.lockstep.take().ok_or("no captured run to convert")?;
                artifacts::write_ticks_bin(&dir.join(TICKS_BIN), &run.ticks)
                    .map_err(|e| format!("cannot write raw ticks: {e}"))?;
                let mut rtt = Vec::new();
                write_rtt_csv(&mut rtt, entry.iteration, &run.rtt)
                    .map_err(|e| e.to_string())?;
                fs::write(dir.join(RTT_CSV), rtt).map_err(|e| e.to_string())?;
                write_empty_sysmetrics(&dir.join(SYSMETRICS_CSV)).map_err(|e| e.to_string())?;
                run.ticks
            }
            RunMode::Realtime => artifacts::read_ticks_bin(&dir.join(TICKS_BIN))
                .map_err(|e| format!("raw tick capture unreadable: {e}"))?,
        };

        let mut csv = Vec::new();
        write_ticks_csv(&mut csv, entry.iteration, &ticks).map_err(|e| e.to_string())?;
        fs::write(dir.join(TICKS_CSV), csv).map_err(|e| e.to_string())?;

        IterationMeta {
            status: STATUS_COMPLETE.to_string(),
            server: entry.server.clone(),
            workload: entry.workload.name().to_string(),
            iteration: entry.iteration,
            ordinal: entry.ordinal,
            mode: match self.config.mode {
                RunMode::Realtime => "realtime".to_string(),
                RunMode::Lockstep => "lockstep".to_string(),
            },
            scale: spec.scale,
            seed: spec.seed,
            duration_secs: self.config.duration_secs,
            tick_ms: self.config.tick_ms,
            ticks_recorded: ticks.len() as u64,
            error: None,
        }
        .write(&dir)
        .map_err(|e| format!("cannot write meta: {e}"))
    }

    fn convert_emulation_node(&mut self) -> Result<(), String> {
        if self.config.mode == RunMode::Lockstep {
            // The deterministic run owns the probe log; nothing to do here.
            return Ok(());
        }
        let entry = self.entry()?.clone();
        let dir = self.iteration_dir()?;
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let job = self.emulation.take().ok_or("no emulation to convert")?;
        let outcome = job
            .handle
            .join()
            .map_err(|_| "emulation thread panicked".to_string())?
            .map_err(|e| format!("emulation failed: {e}"))?;

        let mut body = Vec::new();
        write_rtt_csv(&mut body, entry.iteration, &outcome.samples).map_err(|e| e.to_string())?;
        // Probes that never came back are reported as a count, not as rows.
        writeln!(body, "#censored={}", outcome.censored).map_err(|e| e.to_string())?;
        fs::write(dir.join(RTT_CSV), body).map_err(|e| e.to_string())?;
        log::info!(
            "emulation done: {} samples, {} censored, {} actions",
            outcome.samples.len(),
            outcome.censored,
            outcome.actions_sent
        );
        Ok(())
    }
}

impl WorkerEffects for RealEffects {
    fn set_server(&mut self, name: &str) -> Result<(), String> {
        if !self.config.servers.iter().any(|s| s.name == name) {
            return Err(format!("unknown server {name:?}"));
        }
        self.server_name = Some(name.to_string());
        Ok(())
    }

    fn set_metrics_endpoint(&mut self, endpoint: &str) -> Result<(), String> {
        self.metrics_endpoint = Some(endpoint.to_string());
        Ok(())
    }

    fn set_iteration(&mut self, ordinal: u64) -> Result<(), String> {
        if ordinal as usize >= self.plan.len() {
            return Err(format!("ordinal {ordinal} outside a plan of {}", self.plan.len()));
        }
        self.reset_iteration();
        self.ordinal = ordinal;
        Ok(())
    }

    fn initialize(&mut self) -> Result<(), String> {
        match self.config.mode {
            RunMode::Realtime => self.initialize_realtime(),
            RunMode::Lockstep => self.initialize_lockstep(),
        }
    }

    fn log_start(&mut self) -> Result<(), String> {
        if self.config.mode == RunMode::Lockstep {
            return Ok(());
        }
        let dir = self.iteration_dir()?;
        let endpoint = self.metrics_endpoint.clone().ok_or("no-metrics-endpoint")?;
        let pid = self.child.as_ref().ok_or("no server running")?.id();
        self.tick_logger = Some(TickLogger::start(endpoint, dir.join(TICKS_BIN))?);
        self.sampler = Some(
            Sampler::start(pid, dir.join(SYSMETRICS_CSV))
                .map_err(|e| format!("cannot start system sampler: {e}"))?,
        );
        Ok(())
    }

    fn log_stop(&mut self) -> Result<(), String> {
        if self.config.mode == RunMode::Lockstep {
            return Ok(());
        }
        let logger = self.tick_logger.take().ok_or("capture never started")?;
        let recorded = logger.stop()?;
        log::info!("tick capture stopped after {recorded} records");
        if let Some(sampler) = self.sampler.take() {
            sampler.stop().map_err(|e| format!("sampler failed: {e}"))?;
        }
        Ok(())
    }

    fn stop_server(&mut self) -> Result<(), String> {
        if self.config.mode == RunMode::Lockstep {
            return Ok(());
        }
        let mut child = self.child.take().ok_or("no server running")?;
        // A server that died on its own is a failed iteration, not a stop.
        if let Some(status) = child.try_wait().map_err(|e| e.to_string())? {
            return Err(format!("server exited on its own ({status})"));
        }
        unsafe {
            libc::kill(child.id() as libc::pid_t, libc::SIGTERM);
        }
        let deadline = Instant::now() + STOP_GRACE;
        loop {
            match child.try_wait().map_err(|e| e.to_string())? {
                Some(_) => return Ok(()),
                None if Instant::now() >= deadline => {
                    log::warn!("server ignored SIGTERM; killing it");
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(());
                }
                None => std::thread::sleep(Duration::from_millis(50)),
            }
        }
    }

    fn connect(&mut self) -> Result<(), String> {
        if self.config.mode == RunMode::Lockstep {
            return Ok(());
        }
        let entry = self.entry()?;
        let endpoint =
            format!("{}:{}", self.config.server_host(), self.config.game_port_for(self.ordinal));
        let mut emulator = EmulatorConfig::new(endpoint);
        emulator.duration = Duration::from_secs(self.config.duration_secs);
        emulator.seed = self.config.effective_seed(entry.iteration);
        if entry.workload == meterstick_workloads::WorkloadKind::Players {
            emulator.bots = self.config.bots;
            emulator.behavior =
                Behavior::parse(&self.config.behavior).ok_or("unknown behavior")?;
        } else {
            // Environment workloads get a single probing observer, so the
            // swarm itself never contributes load.
            emulator.bots = 1;
            emulator.behavior = Behavior::Idle;
        }
        emulator.validate().map_err(|e| e.to_string())?;
        let handle = std::thread::Builder::new()
            .name(format!("emulation-{}", self.ordinal))
            .spawn(move || run_emulation(&emulator))
            .map_err(|e| e.to_string())?;
        self.emulation = Some(EmulationJob { handle });
        Ok(())
    }

    fn convert(&mut self) -> Result<(), String> {
        match self.role {
            WorkerRole::ServerNode => self.convert_server_node(),
            WorkerRole::EmulationNode => self.convert_emulation_node(),
        }
    }

    fn shutdown(&mut self) {
        self.reset_iteration();
    }
}

/// Pin a process to the given CPU cores.
fn pin_to_cores(pid: u32, cores: &[usize]) -> Result<(), String> {
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        for &core in cores {
            if core >= libc::CPU_SETSIZE as usize {
                return Err(format!("core {core} out of range"));
            }
            libc::CPU_SET(core, &mut set);
        }
        if libc::sched_setaffinity(pid as libc::pid_t, std::mem::size_of::<libc::cpu_set_t>(), &set)
            != 0
        {
            return Err(std::io::Error::last_os_error().to_string());
        }
    }
    Ok(())
}

/// Background capture of tick records from a metrics listener.
///
/// Polls once per second, starting immediately, and appends every record not
/// seen before as a length-prefixed frame.  The first snapshot fixes the
/// baseline: ticks completed before capture started are excluded so a
/// long-running server does not leak its warm-up into the trace.  Poll
/// failures are tolerated — the ring on the server side holds several
/// minutes of ticks, so a missed poll costs nothing — and a final poll on
/// stop picks up the tail.
struct TickLogger {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<std::io::Result<u64>>,
}

impl TickLogger {
    fn start(endpoint: String, out: PathBuf) -> Result<TickLogger, String> {
        let file = fs::File::create(&out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
        // The baseline snapshot runs synchronously so an unreachable metrics
        // listener fails log_start instead of producing an empty capture.
        let (meta, _) = poll_metrics(&endpoint)
            .map_err(|e| format!("metrics endpoint {endpoint} unreachable: {e}"))?;
        let baseline = meta.tick_counter;

        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let handle = std::thread::Builder::new()
            .name("tick-capture".to_string())
            .spawn(move || capture_loop(&endpoint, BufWriter::new(file), baseline, &stop_flag))
            .map_err(|e| e.to_string())?;
        Ok(TickLogger { stop, handle })
    }

    /// Stop capturing; returns how many records were written.
    fn stop(self) -> Result<u64, String> {
        self.stop.store(true, Ordering::SeqCst);
        self.handle
            .join()
            .map_err(|_| "capture thread panicked".to_string())?
            .map_err(|e| format!("tick capture failed: {e}"))
    }
}

fn capture_loop(
    endpoint: &str,
    mut out: BufWriter<fs::File>,
    baseline: u64,
    stop: &AtomicBool,
) -> std::io::Result<u64> {
    let origin = Instant::now();
    let mut next_index = baseline;
    let mut written = 0u64;
    let mut frame = Vec::with_capacity(64 * 1024);
    for poll in 1u32.. {
        let deadline = origin + TICK_POLL_INTERVAL * poll;
        let mut stopping = false;
        while Instant::now() < deadline {
            if stop.load(Ordering::SeqCst) {
                stopping = true;
                break;
            }
            std::thread::sleep(Duration::from_millis(20));
        }

        match poll_metrics(endpoint) {
            Ok((_, records)) => {
                frame.clear();
                for record in records.iter().filter(|r| r.index >= next_index) {
                    encode_tick_frame(record, &mut frame);
                    written += 1;
                    next_index = record.index + 1;
                }
                out.write_all(&frame)?;
                out.flush()?;
            }
            Err(e) if stopping => {
                log::warn!("final metrics poll failed: {e}");
            }
            Err(e) => log::warn!("metrics poll failed (will retry): {e}"),
        }
        if stopping {
            break;
        }
    }
    out.flush()?;
    Ok(written)
}

/// One snapshot round trip against a metrics listener.
fn poll_metrics(
    endpoint: &str,
) -> std::io::Result<(meterstick_server::MetricsMeta, Vec<TickRecord>)> {
    let address = endpoint
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "endpoint resolves to nothing"))?;
    let stream = TcpStream::connect_timeout(&address, METRICS_IO_TIMEOUT)?;
    stream.set_read_timeout(Some(METRICS_IO_TIMEOUT))?;
    stream.set_write_timeout(Some(METRICS_IO_TIMEOUT))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    request_snapshot(&mut reader, &mut writer)
}

/// Spawn both workers locally, as `meterstick worker` child processes.
///
/// Returns the children so the controller can reap them after `exit`.
pub fn launch_local_workers(
    config: &ExperimentConfig,
    config_path: &std::path::Path,
) -> Result<Vec<Child>, String> {
    assert_eq!(config.launch, LaunchMode::Local);
    let bin = std::env::var(BIN_ENV)
        .map(PathBuf::from)
        .or_else(|_| std::env::current_exe())
        .map_err(|e| format!("cannot locate own binary: {e}"))?;
    let mut children = Vec::new();
    for (role, listen) in [
        (WorkerRole::ServerNode, &config.nodes.server),
        (WorkerRole::EmulationNode, &config.nodes.emulation),
    ] {
        let child = Command::new(&bin)
            .args([
                "worker",
                "--role",
                role.name(),
                "--listen",
                listen,
                "--config",
                &config_path.to_string_lossy(),
            ])
            .stdin(Stdio::null())
            .spawn()
            .map_err(|e| format!("cannot launch {} worker: {e}", role.name()))?;
        children.push(child);
    }
    Ok(children)
}
