//! One bot's connection: joining, probing, and the session plumbing.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::TcpStream;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use meterstick_core::RttSample;
use meterstick_server::{decode_update, encode_line, PlayerAction, StateUpdate};
use meterstick_workloads::Bot;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Connection attempts per bot before the swarm gives up.
pub const CONNECT_RETRIES: u32 = 3;

/// Default delay between consecutive bot connections, so a swarm does
/// not arrive as a thundering herd.
pub const DEFAULT_STAGGER: Duration = Duration::from_millis(100);

/// How long a probe waits for its echo before it counts as censored.
pub const PROBE_TIMEOUT: Duration = Duration::from_secs(10);

const JOIN_TIMEOUT: Duration = Duration::from_secs(5);
const RETRY_BACKOFF: Duration = Duration::from_millis(150);

#[derive(Debug, Error)]
pub enum EmulatorError {
    #[error(
        "bots {indices:?} could not join {endpoint} \
         ({CONNECT_RETRIES} attempts each; last error: {last})"
    )]
    Connect { endpoint: String, indices: Vec<usize>, last: String },
    #[error("bot {index} lost its connection: {reason}")]
    Disconnected { index: usize, reason: String },
    #[error("invalid emulation settings: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The one monotonic time source for an emulation. Every timestamp a
/// swarm records — probe send and receive alike — comes from the same
/// origin instant, which is what makes RTTs well-defined.
#[derive(Clone, Copy, Debug)]
pub struct Clock {
    origin: Instant,
}

impl Clock {
    pub fn start() -> Clock {
        Clock { origin: Instant::now() }
    }

    pub fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}

/// Hands out probe nonces that are unique across every session of an
/// emulation: the session index occupies the high bits, a sequence
/// number the low ones, so two bots can never draw the same value.
#[derive(Clone, Debug)]
pub struct NonceAllocator {
    next: u64,
}

impl NonceAllocator {
    pub fn for_session(index: usize) -> NonceAllocator {
        NonceAllocator { next: ((index as u64) + 1) << 40 }
    }

    pub fn draw(&mut self) -> u64 {
        let nonce = self.next;
        self.next += 1;
        nonce
    }
}

/// What one probe produced: a measured sample, or nothing within the
/// timeout. Censored probes are counted separately rather than folded
/// into the latency distribution, so extreme outliers stay visible.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeOutcome {
    Sample(RttSample),
    Censored,
}

/// Probe send times still waiting for their echo, keyed by nonce and
/// shared between a session's writer and reader halves.
pub(crate) type PendingProbes = Arc<Mutex<HashMap<u64, u64>>>;

/// A joined bot connection.
#[derive(Debug)]
pub struct BotSession {
    pub index: usize,
    pub name: String,
    pub player_id: u64,
    pub(crate) writer: TcpStream,
    pub(crate) reader: BufReader<TcpStream>,
    pub(crate) bot: Bot,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) nonces: NonceAllocator,
    pub(crate) clock: Clock,
    pub(crate) pending: PendingProbes,
    pub(crate) probe_timeout: Duration,
}

impl BotSession {
    /// The bot's current cell, as tracked client-side.
    pub fn position(&self) -> (i32, i32) {
        self.bot.pos()
    }

    pub fn set_probe_timeout(&mut self, timeout: Duration) {
        self.probe_timeout = timeout;
    }

    /// Send one chat probe and block until its echo returns or the
    /// probe times out. Unrelated traffic — entity updates, other
    /// players' chatter, stale duplicate echoes — is skimmed past.
    pub fn run_probe(&mut self) -> Result<ProbeOutcome, EmulatorError> {
        let nonce = self.nonces.draw();
        let sent_ns = self.clock.now_ns();
        self.send(&PlayerAction::Chat { nonce, text: "probe".into() })?;

        let deadline = Instant::now() + self.probe_timeout;
        let mut line = String::new();
        loop {
            let Some(remaining) = deadline.checked_duration_since(Instant::now()) else {
                return Ok(ProbeOutcome::Censored);
            };
            if remaining < Duration::from_millis(1) {
                return Ok(ProbeOutcome::Censored);
            }
            self.writer.set_read_timeout(Some(remaining))?;
            match self.reader.read_line(&mut line) {
                Ok(0) => {
                    return Err(EmulatorError::Disconnected {
                        index: self.index,
                        reason: "server closed the connection".into(),
                    })
                }
                Ok(_) => {
                    if let Some(StateUpdate::ChatEvent { nonce: echoed, .. }) =
                        decode_update(line.trim_end())
                    {
                        if echoed == nonce {
                            let recv_ns = self.clock.now_ns();
                            return Ok(ProbeOutcome::Sample(RttSample { sent_ns, recv_ns }));
                        }
                    }
                    line.clear();
                }
                // On a timeout, bytes of a half-read line stay in `line`
                // and the next read_line call finishes it.
                Err(e) if is_timeout(&e) => return Ok(ProbeOutcome::Censored),
                Err(e) => {
                    return Err(EmulatorError::Disconnected {
                        index: self.index,
                        reason: e.to_string(),
                    })
                }
            }
        }
    }

    pub(crate) fn send(&mut self, action: &PlayerAction) -> Result<(), EmulatorError> {
        let mut wire = encode_line(action);
        wire.push('\n');
        self.writer.write_all(wire.as_bytes()).map_err(|e| EmulatorError::Disconnected {
            index: self.index,
            reason: e.to_string(),
        })
    }
}

pub(crate) fn is_timeout(e: &std::io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

/// Join `n` bots against `endpoint`, pausing `stagger` between
/// consecutive connections. Each bot gets [`CONNECT_RETRIES`] attempts;
/// if one still cannot join, every session opened so far is torn down
/// and the error names the bots that failed.
pub fn connect_bots(
    endpoint: &str,
    n: usize,
    stagger: Duration,
    seed: u64,
) -> Result<Vec<BotSession>, EmulatorError> {
    if n == 0 {
        return Err(EmulatorError::Config("at least one bot is required".into()));
    }
    let clock = Clock::start();
    let mut sessions = Vec::with_capacity(n);
    for index in 0..n {
        if index > 0 && !stagger.is_zero() {
            std::thread::sleep(stagger);
        }
        match join_with_retries(endpoint, index, seed, clock) {
            Ok(session) => sessions.push(session),
            // Dropping the vector closes every session already joined.
            Err(last) => {
                return Err(EmulatorError::Connect {
                    endpoint: endpoint.into(),
                    indices: vec![index],
                    last,
                })
            }
        }
    }
    Ok(sessions)
}

fn join_with_retries(
    endpoint: &str,
    index: usize,
    seed: u64,
    clock: Clock,
) -> Result<BotSession, String> {
    let mut last = String::from("no attempt made");
    for attempt in 0..CONNECT_RETRIES {
        if attempt > 0 {
            std::thread::sleep(RETRY_BACKOFF);
        }
        match try_join(endpoint, index, seed, clock) {
            Ok(session) => return Ok(session),
            Err(e) => {
                log::debug!("bot {index} attempt {}: {e}", attempt + 1);
                last = e;
            }
        }
    }
    Err(last)
}

fn try_join(endpoint: &str, index: usize, seed: u64, clock: Clock) -> Result<BotSession, String> {
    let stream = TcpStream::connect(endpoint).map_err(|e| format!("connect: {e}"))?;
    stream.set_nodelay(true).ok();
    stream.set_read_timeout(Some(JOIN_TIMEOUT)).map_err(|e| e.to_string())?;
    let reader_half = stream.try_clone().map_err(|e| e.to_string())?;
    let mut reader = BufReader::new(reader_half);
    let mut writer = stream;

    let name = format!("bot-{index:02}");
    let join = PlayerAction::Join { name: name.clone() };
    let mut wire = encode_line(&join);
    wire.push('\n');
    writer.write_all(wire.as_bytes()).map_err(|e| format!("send join: {e}"))?;

    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => return Err("server closed the connection before acknowledging".into()),
            Ok(_) => {
                if let Some(StateUpdate::JoinAck { player_id, x, z, .. }) =
                    decode_update(line.trim_end())
                {
                    let bot = Bot::new(x.floor() as i32, z.floor() as i32);
                    let rng_seed = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                    return Ok(BotSession {
                        index,
                        name,
                        player_id,
                        writer,
                        reader,
                        bot,
                        rng: ChaCha8Rng::seed_from_u64(rng_seed),
                        nonces: NonceAllocator::for_session(index),
                        clock,
                        pending: Arc::new(Mutex::new(HashMap::new())),
                        probe_timeout: PROBE_TIMEOUT,
                    });
                }
            }
            Err(e) if is_timeout(&e) => return Err("no join acknowledgement in time".into()),
            Err(e) => return Err(format!("read: {e}")),
        }
    }
}
