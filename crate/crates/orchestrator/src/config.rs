//! Experiment configuration: the TOML schema, its defaults, validation, and
//! the deterministic run plan derived from it.

use std::path::{Path, PathBuf};

use meterstick_workloads::{WorkloadKind, WorkloadSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use meterstick_emulator::Behavior;

/// How iterations execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Real server process, real sockets, wall-clock pacing.
    Realtime,
    /// In-process deterministic run: virtual clock, virtual clients.
    Lockstep,
}

/// Who starts the two worker processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LaunchMode {
    /// The controller spawns both workers on this machine.
    Local,
    /// Workers are already listening at the configured node addresses.
    External,
}

/// Control endpoints of the two workers.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NodesConfig {
    /// Control address of the node hosting the server under test.
    pub server: String,
    /// Control address of the node hosting the bot swarm.
    #[serde(default = "default_emulation_node")]
    pub emulation: String,
}

/// One server under test.  An empty command means the bundled simulator.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ServerEntry {
    pub name: String,
    /// Command template; `{port}`, `{metrics_port}`, `{workload}`,
    /// `{tick_ms}`, `{memory_limit_mb}` and `{iteration_dir}` are substituted
    /// into each element.
    #[serde(default)]
    pub command: Vec<String>,
}

/// The whole experiment, as parsed from TOML.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nodes: NodesConfig,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default = "default_launch")]
    pub launch: LaunchMode,
    /// Emulation length per iteration, in seconds.
    #[serde(default = "default_duration")]
    pub duration_secs: u64,
    /// Repetitions of every (server, workload) cell.
    #[serde(default = "default_iterations")]
    pub iterations: u32,
    /// Swarm size for the player workload.
    #[serde(default = "default_bots")]
    pub bots: usize,
    /// Workload intensity multiplier.
    #[serde(default = "default_scale")]
    pub scale: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Bot movement policy for the player workload.
    #[serde(default = "default_behavior")]
    pub behavior: String,
    /// Workload names to run, in order.
    #[serde(default = "default_workloads")]
    pub workloads: Vec<String>,
    /// Servers under test, in order.
    #[serde(default = "default_servers")]
    pub servers: Vec<ServerEntry>,
    #[serde(default = "default_results_dir")]
    pub results_dir: PathBuf,
    /// Skip iterations whose artifacts are already complete.
    #[serde(default)]
    pub resume: bool,
    /// Base port the server under test listens on; rotated per iteration.
    #[serde(default = "default_game_port")]
    pub game_port: u16,
    /// Metrics listener ports are drawn from this inclusive range.
    #[serde(default = "default_metrics_port_lo")]
    pub metrics_port_lo: u16,
    #[serde(default = "default_metrics_port_hi")]
    pub metrics_port_hi: u16,
    #[serde(default = "default_memory_limit_mb")]
    pub memory_limit_mb: u64,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    /// Fuse length for the explosive workload, in ticks.
    #[serde(default = "default_tnt_delay")]
    pub tnt_delay_ticks: u64,
    /// CPU cores the server under test is pinned to; empty means all cores.
    #[serde(default)]
    pub cpu_affinity: Vec<usize>,
    /// How long `initialize` waits for the server to accept connections.
    #[serde(default = "default_init_timeout")]
    pub init_timeout_secs: u64,
}

fn default_emulation_node() -> String {
    "127.0.0.1:25556".to_string()
}
fn default_mode() -> RunMode {
    RunMode::Realtime
}
fn default_launch() -> LaunchMode {
    LaunchMode::Local
}
fn default_duration() -> u64 {
    60
}
fn default_iterations() -> u32 {
    1
}
fn default_bots() -> usize {
    25
}
fn default_scale() -> u32 {
    1
}
fn default_seed() -> u64 {
    1
}
fn default_behavior() -> String {
    Behavior::BoundedRandom.name().to_string()
}
fn default_workloads() -> Vec<String> {
    WorkloadKind::ALL.iter().map(|k| k.name().to_string()).collect()
}
fn default_servers() -> Vec<ServerEntry> {
    vec![ServerEntry { name: "simserver".to_string(), command: Vec::new() }]
}
fn default_results_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_game_port() -> u16 {
    25565
}
fn default_metrics_port_lo() -> u16 {
    25585
}
fn default_metrics_port_hi() -> u16 {
    25635
}
fn default_memory_limit_mb() -> u64 {
    4096
}
fn default_tick_ms() -> u64 {
    50
}
fn default_tnt_delay() -> u64 {
    400
}
fn default_init_timeout() -> u64 {
    10
}

/// Scales an experiment may legally request.
pub const ALLOWED_SCALES: [u32; 3] = [1, 2, 4];

/// Game ports rotate through this many consecutive slots so that back-to-back
/// iterations never rebind a socket the kernel still holds in TIME_WAIT.  The
/// window is kept small enough that the rotation never collides with the
/// metrics port range just above it.
pub const GAME_PORT_SLOTS: u64 = 16;

/// What went wrong while reading or checking a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid experiment config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid experiment config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    /// Parse and validate a TOML document.
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Read, parse and validate a config file.
    pub fn from_path(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        ExperimentConfig::from_toml(&text)
    }

    /// Canonical serialized form; parsing it back yields an equal value.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |detail: String| Err(ConfigError::Invalid(detail));
        if !ALLOWED_SCALES.contains(&self.scale) {
            return invalid(format!(
                "scale must be one of {ALLOWED_SCALES:?}, got {}",
                self.scale
            ));
        }
        if self.duration_secs == 0 {
            return invalid("duration_secs must be at least 1".to_string());
        }
        if self.iterations == 0 {
            return invalid("iterations must be at least 1".to_string());
        }
        if self.bots == 0 {
            return invalid("bots must be at least 1".to_string());
        }
        if self.tick_ms == 0 {
            return invalid("tick_ms must be at least 1".to_string());
        }
        if Behavior::parse(&self.behavior).is_none() {
            let names: Vec<&str> = Behavior::ALL.iter().map(|b| b.name()).collect();
            return invalid(format!(
                "behavior must be one of {names:?}, got {:?}",
                self.behavior
            ));
        }
        if self.workloads.is_empty() {
            return invalid("workloads must name at least one workload".to_string());
        }
        for name in &self.workloads {
            if WorkloadKind::parse(name).is_none() {
                let names: Vec<&str> = WorkloadKind::ALL.iter().map(|k| k.name()).collect();
                return invalid(format!("unknown workload {name:?}; expected one of {names:?}"));
            }
        }
        if self.servers.is_empty() {
            return invalid("servers must name at least one server under test".to_string());
        }
        for node in [&self.nodes.server, &self.nodes.emulation] {
            if !node.contains(':') {
                return invalid(format!("node address {node:?} must be host:port"));
            }
        }
        if self.metrics_port_lo > self.metrics_port_hi {
            return invalid(format!(
                "metrics port range {}-{} is empty",
                self.metrics_port_lo, self.metrics_port_hi
            ));
        }
        if u64::from(self.game_port) + GAME_PORT_SLOTS > u64::from(self.metrics_port_lo)
            && u64::from(self.game_port) <= u64::from(self.metrics_port_hi)
        {
            return invalid(format!(
                "game port rotation {}..{} overlaps the metrics range {}-{}",
                self.game_port,
                u64::from(self.game_port) + GAME_PORT_SLOTS - 1,
                self.metrics_port_lo,
                self.metrics_port_hi
            ));
        }
        Ok(())
    }

    /// The workload kinds this experiment runs, in configured order.
    pub fn workload_kinds(&self) -> Vec<WorkloadKind> {
        self.workloads
            .iter()
            .map(|name| WorkloadKind::parse(name).expect("validated workload name"))
            .collect()
    }

    /// The generation spec for one plan entry.  Seeds differ per iteration so
    /// repeats exercise fresh randomness while staying reproducible.
    pub fn workload_spec(&self, kind: WorkloadKind, iteration: u32) -> WorkloadSpec {
        let mut spec = WorkloadSpec::new(kind, self.scale, self.effective_seed(iteration));
        spec.bot_count = self.bots;
        spec.tnt_delay_ticks = self.tnt_delay_ticks;
        spec
    }

    pub fn effective_seed(&self, iteration: u32) -> u64 {
        self.seed.wrapping_add(u64::from(iteration.saturating_sub(1)))
    }

    /// Game port for a plan ordinal.
    pub fn game_port_for(&self, ordinal: u64) -> u16 {
        self.game_port + (ordinal % GAME_PORT_SLOTS) as u16
    }

    /// Metrics port for a plan ordinal, drawn from the configured range.
    pub fn metrics_port_for(&self, ordinal: u64) -> u16 {
        let span = u64::from(self.metrics_port_hi - self.metrics_port_lo) + 1;
        self.metrics_port_lo + (ordinal % span) as u16
    }

    /// Host part of the server node's control address; the game endpoint the
    /// swarm connects to lives on the same host.
    pub fn server_host(&self) -> &str {
        self.nodes.server.rsplit_once(':').map(|(host, _)| host).unwrap_or("127.0.0.1")
    }
}

/// One cell of the run plan: a (server, workload, iteration) triple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanEntry {
    /// Position in the full plan; both workers derive per-iteration settings
    /// (ports, directories, seeds) from this single number.
    pub ordinal: u64,
    pub server: String,
    pub workload: WorkloadKind,
    /// 1-based repetition index within the (server, workload) cell.
    pub iteration: u32,
}

/// Enumerate the full plan in a fixed order: servers outermost, then
/// workloads, then repetitions.  Everyone who holds the same config derives
/// the same plan, so a bare ordinal is enough to agree on what to run.
pub fn plan(config: &ExperimentConfig) -> Vec<PlanEntry> {
    let mut entries = Vec::new();
    let mut ordinal = 0;
    for server in &config.servers {
        for kind in config.workload_kinds() {
            for iteration in 1..=config.iterations {
                entries.push(PlanEntry {
                    ordinal,
                    server: server.name.clone(),
                    workload: kind,
                    iteration,
                });
                ordinal += 1;
            }
        }
    }
    entries
}
