//! The swarm runner: N paced bots, one recorder, one clock.

use std::net::Shutdown;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use meterstick_core::RttSample;
use meterstick_server::{decode_update, encode_line, PlayerAction, StateUpdate};
use meterstick_workloads::{BotAction, DEFAULT_BOT_COUNT};

use crate::session::{connect_bots, is_timeout, BotSession, EmulatorError, DEFAULT_STAGGER, PROBE_TIMEOUT};

/// How the bots behave once joined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Behavior {
    /// Random walk inside the player area, one action per period.
    /// The designated probe bot swaps a chat probe in on its cadence.
    BoundedRandom,
    /// No movement: only the probe bot's chat probes go out. Useful
    /// when latency should be measured without adding player load.
    Idle,
}

impl Behavior {
    pub const ALL: [Behavior; 2] = [Behavior::BoundedRandom, Behavior::Idle];

    pub fn name(self) -> &'static str {
        match self {
            Behavior::BoundedRandom => "bounded-random",
            Behavior::Idle => "idle",
        }
    }

    pub fn parse(text: &str) -> Option<Behavior> {
        Behavior::ALL.into_iter().find(|b| b.name() == text)
    }
}

/// Settings for one emulation run.
#[derive(Clone, Debug)]
pub struct EmulatorConfig {
    /// `host:port` of the game server.
    pub endpoint: String,
    pub bots: usize,
    pub behavior: Behavior,
    pub duration: Duration,
    /// Delay between consecutive bot connections.
    pub stagger: Duration,
    /// Seed for the bots' random walks.
    pub seed: u64,
    /// One action per bot per this period (the server's tick period).
    pub action_period: Duration,
    /// Probe cadence for the designated probe bot (bot 0).
    pub probe_interval: Duration,
    pub probe_timeout: Duration,
}

impl EmulatorConfig {
    pub fn new(endpoint: impl Into<String>) -> EmulatorConfig {
        EmulatorConfig {
            endpoint: endpoint.into(),
            bots: DEFAULT_BOT_COUNT,
            behavior: Behavior::BoundedRandom,
            duration: Duration::from_secs(60),
            stagger: DEFAULT_STAGGER,
            seed: 1,
            action_period: Duration::from_millis(50),
            probe_interval: Duration::from_secs(2),
            probe_timeout: PROBE_TIMEOUT,
        }
    }

    /// The probe cadence expressed in actions of the probe bot.
    fn probe_every_actions(&self) -> u64 {
        let interval = self.probe_interval.as_nanos().max(1);
        let period = self.action_period.as_nanos().max(1);
        ((interval / period) as u64).max(1)
    }

    fn validate(&self) -> Result<(), EmulatorError> {
        if self.bots == 0 {
            return Err(EmulatorError::Config("at least one bot is required".into()));
        }
        if self.duration.is_zero() {
            return Err(EmulatorError::Config("duration must be positive".into()));
        }
        if self.action_period.is_zero() {
            return Err(EmulatorError::Config("action period must be positive".into()));
        }
        Ok(())
    }
}

/// What an emulation produced.
#[derive(Clone, Debug)]
pub struct EmulationOutcome {
    /// Probe samples ordered by send time.
    pub samples: Vec<RttSample>,
    /// Probes that saw no echo within the timeout. Kept out of
    /// `samples` so percentile math never quietly absorbs them.
    pub censored: u64,
    /// Actions actually written to the server, joins excluded.
    pub actions_sent: u64,
    pub wall: Duration,
}

/// Connect the swarm, run it for the configured duration, and collect
/// the probe samples. Probes still in flight when the run ends are
/// dropped unless they already exceeded the timeout (those count as
/// censored).
pub fn run_emulation(config: &EmulatorConfig) -> Result<EmulationOutcome, EmulatorError> {
    config.validate()?;
    let sessions = connect_bots(&config.endpoint, config.bots, config.stagger, config.seed)?;
    log::info!("{} bots joined {}", sessions.len(), config.endpoint);

    let started = Instant::now();
    let deadline = started + config.duration;
    let stop = Arc::new(AtomicBool::new(false));
    let censored = Arc::new(AtomicU64::new(0));
    let actions_sent = Arc::new(AtomicU64::new(0));
    let (recorder, samples_rx) = mpsc::channel::<RttSample>();

    let probe_every = config.probe_every_actions();
    let mut readers = Vec::new();
    let mut drivers = Vec::new();
    for session in sessions {
        let BotSession {
            index,
            name: _,
            player_id: _,
            writer,
            reader,
            bot,
            rng,
            nonces,
            clock,
            pending,
            probe_timeout: _,
        } = session;

        let recorder = recorder.clone();
        let stop = Arc::clone(&stop);
        let reader_pending = Arc::clone(&pending);
        readers.push(std::thread::spawn(move || {
            let mut reader = reader;
            reader.get_ref().set_read_timeout(Some(Duration::from_millis(200))).ok();
            let mut line = String::new();
            loop {
                use std::io::BufRead;
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if let Some(StateUpdate::ChatEvent { nonce, .. }) =
                            decode_update(line.trim_end())
                        {
                            // A nonce no longer pending is someone
                            // else's probe or a duplicate echo: ignored.
                            if let Some(sent_ns) = reader_pending.lock().unwrap().remove(&nonce) {
                                let sample = RttSample { sent_ns, recv_ns: clock.now_ns() };
                                let _ = recorder.send(sample);
                            }
                        }
                        line.clear();
                    }
                    // Half-read lines stay in `line` across timeouts.
                    Err(e) if is_timeout(&e) => {
                        if stop.load(Ordering::Relaxed) {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        }));

        let behavior = config.behavior;
        let period = config.action_period;
        let probe_timeout_ns = config.probe_timeout.as_nanos() as u64;
        let censored = Arc::clone(&censored);
        let actions_sent = Arc::clone(&actions_sent);
        drivers.push(std::thread::spawn(move || {
            let mut bot =
                bot.with_probe_interval(if index == 0 { probe_every } else { u64::MAX });
            let mut rng = rng;
            let mut nonces = nonces;
            let mut writer = writer;
            let mut next = Instant::now();
            while Instant::now() < deadline {
                let action = match bot.step(&mut rng) {
                    BotAction::Probe => {
                        let nonce = nonces.draw();
                        pending.lock().unwrap().insert(nonce, clock.now_ns());
                        Some(PlayerAction::Chat { nonce, text: "probe".into() })
                    }
                    BotAction::Move { x, z } => match behavior {
                        Behavior::BoundedRandom => Some(PlayerAction::Move { x, z }),
                        Behavior::Idle => None,
                    },
                };
                if let Some(action) = action {
                    let mut wire = encode_line(&action);
                    wire.push('\n');
                    use std::io::Write;
                    if writer.write_all(wire.as_bytes()).is_err() {
                        log::warn!("bot {index}: server connection lost, stopping early");
                        break;
                    }
                    actions_sent.fetch_add(1, Ordering::Relaxed);
                }

                let now_ns = clock.now_ns();
                let mut pending_probes = pending.lock().unwrap();
                let stale: Vec<u64> = pending_probes
                    .iter()
                    .filter(|(_, &sent)| now_ns.saturating_sub(sent) > probe_timeout_ns)
                    .map(|(&nonce, _)| nonce)
                    .collect();
                for nonce in stale {
                    pending_probes.remove(&nonce);
                    censored.fetch_add(1, Ordering::Relaxed);
                }
                drop(pending_probes);

                // Fixed-rate pacing: oversleeps are repaid by sending
                // the next actions immediately, so the average rate
                // stays at one action per period.
                next += period;
                if let Some(gap) = next.checked_duration_since(Instant::now()) {
                    std::thread::sleep(gap);
                }
            }
            let _ = writer.shutdown(Shutdown::Write);
        }));
    }
    drop(recorder);

    for driver in drivers {
        let _ = driver.join();
    }
    // Give the last probes' echoes a moment to land before the readers
    // are told to wind down.
    std::thread::sleep(config.action_period * 2);
    stop.store(true, Ordering::Relaxed);
    for reader in readers {
        let _ = reader.join();
    }

    let mut samples: Vec<RttSample> = samples_rx.try_iter().collect();
    samples.sort_by_key(|s| s.sent_ns);
    Ok(EmulationOutcome {
        samples,
        censored: censored.load(Ordering::Relaxed),
        actions_sent: actions_sent.load(Ordering::Relaxed),
        wall: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn behavior_names_round_trip() {
        for behavior in Behavior::ALL {
            assert_eq!(Behavior::parse(behavior.name()), Some(behavior));
        }
        assert_eq!(Behavior::parse("afk"), None);
    }

    #[test]
    fn defaults_match_the_documented_experiment_setup() {
        let config = EmulatorConfig::new("127.0.0.1:25565");
        assert_eq!(config.bots, 25);
        assert_eq!(config.duration, Duration::from_secs(60));
        assert_eq!(config.stagger, Duration::from_millis(100));
        assert_eq!(config.behavior, Behavior::BoundedRandom);
        assert_eq!(config.probe_interval, Duration::from_secs(2));
        assert_eq!(config.probe_timeout, Duration::from_secs(10));
    }

    #[test]
    fn probe_cadence_is_expressed_in_actions() {
        let mut config = EmulatorConfig::new("x");
        assert_eq!(config.probe_every_actions(), 40, "2 s at 20 Hz");
        config.probe_interval = Duration::from_millis(50);
        assert_eq!(config.probe_every_actions(), 1, "every action");
        config.probe_interval = Duration::from_millis(3);
        assert_eq!(config.probe_every_actions(), 1, "floor is one action");
    }

    #[test]
    fn bad_settings_are_rejected_before_connecting() {
        let mut config = EmulatorConfig::new("127.0.0.1:1");
        config.bots = 0;
        assert!(run_emulation(&config).is_err());
        let mut config = EmulatorConfig::new("127.0.0.1:1");
        config.duration = Duration::ZERO;
        assert!(run_emulation(&config).is_err());
    }
}
