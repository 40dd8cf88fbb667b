//! The per-worker lifecycle state machine.
//!
//! Each worker tracks one [`RunState`] across its whole control session.  The
//! transition function is pure over an injected [`WorkerEffects`]
//! implementation, so ordering rules can be tested exhaustively without
//! touching processes or sockets: production code plugs in real side effects,
//! tests plug in recorders or fault injectors.
//!
//! Rules enforced here, uniformly for every verb:
//! * a verb sent to the wrong role is refused with `err:wrong-dest`;
//! * a verb arriving out of lifecycle order is refused with `err:wrong-state`;
//! * a verb whose side effect fails is answered with `err:<cause>` and the
//!   state is left unchanged, so the controller can retry or abort.

use crate::control::{ControlMessage, Verb, WorkerRole};

/// Where a worker stands in the iteration lifecycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Between iterations; configuration verbs are legal here.
    Idle,
    /// The server under test is up (server node only).
    Initialized,
    /// Tick and system metric capture is running.
    Logging,
    /// The bot swarm is driving load (emulation node only).
    Emulating,
    /// Capture has stopped; the server may be torn down.
    Stopping,
    /// Raw captures have been turned into artifacts.
    Converting,
    /// `exit` was accepted; the session is over.
    Done,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Idle,
        Phase::Initialized,
        Phase::Logging,
        Phase::Emulating,
        Phase::Stopping,
        Phase::Converting,
        Phase::Done,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Initialized => "initialized",
            Phase::Logging => "logging",
            Phase::Emulating => "emulating",
            Phase::Stopping => "stopping",
            Phase::Converting => "converting",
            Phase::Done => "done",
        }
    }
}

/// Everything a worker remembers between control messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunState {
    /// The plan ordinal selected by the last `iter`.
    pub iteration: u64,
    pub phase: Phase,
    /// Name of the server under test, once `set_server` has been seen.
    pub server: Option<String>,
    /// Where the server node's metrics listener will bind.
    pub metrics_endpoint: Option<String>,
}

impl RunState {
    pub fn idle() -> RunState {
        RunState { iteration: 0, phase: Phase::Idle, server: None, metrics_endpoint: None }
    }
}

/// The side effects a worker can perform, one method per imperative verb.
///
/// Every method returns `Err(cause)` to refuse; the cause travels back to the
/// controller verbatim as `err:<cause>`.
pub trait WorkerEffects {
    fn set_server(&mut self, name: &str) -> Result<(), String>;
    fn set_metrics_endpoint(&mut self, endpoint: &str) -> Result<(), String>;
    fn set_iteration(&mut self, ordinal: u64) -> Result<(), String>;
    fn initialize(&mut self) -> Result<(), String>;
    fn log_start(&mut self) -> Result<(), String>;
    fn log_stop(&mut self) -> Result<(), String>;
    fn stop_server(&mut self) -> Result<(), String>;
    fn connect(&mut self) -> Result<(), String>;
    fn convert(&mut self) -> Result<(), String>;
    /// Best-effort teardown when the session ends or is abandoned.
    fn shutdown(&mut self) {}
}

/// Effects that always succeed and do nothing; useful in tests.
#[derive(Debug, Default)]
pub struct NoopEffects;

impl WorkerEffects for NoopEffects {
    fn set_server(&mut self, _: &str) -> Result<(), String> {
        Ok(())
    }
    fn set_metrics_endpoint(&mut self, _: &str) -> Result<(), String> {
        Ok(())
    }
    fn set_iteration(&mut self, _: u64) -> Result<(), String> {
        Ok(())
    }
    fn initialize(&mut self) -> Result<(), String> {
        Ok(())
    }
    fn log_start(&mut self) -> Result<(), String> {
        Ok(())
    }
    fn log_stop(&mut self) -> Result<(), String> {
        Ok(())
    }
    fn stop_server(&mut self) -> Result<(), String> {
        Ok(())
    }
    fn connect(&mut self) -> Result<(), String> {
        Ok(())
    }
    fn convert(&mut self) -> Result<(), String> {
        Ok(())
    }
}

/// Apply one control message to a worker's state.
///
/// Returns the successor state and the reply to send.  On any refusal —
/// wrong destination, wrong phase, missing argument, failed effect — the
/// returned state is a clone of the input.
pub fn handle_control_message(
    state: &RunState,
    message: &ControlMessage,
    role: WorkerRole,
    effects: &mut dyn WorkerEffects,
) -> (RunState, ControlMessage) {
    let refuse = |detail: &str| (state.clone(), ControlMessage::err(detail));

    if !message.verb.addressed_to(role) {
        return refuse("wrong-dest");
    }

    let arg = message.arg.as_deref();
    match message.verb {
        Verb::KeepAlive => (state.clone(), ControlMessage::ok()),

        Verb::Exit => {
            let mut next = state.clone();
            next.phase = Phase::Done;
            (next, ControlMessage::ok())
        }

        Verb::SetServer => {
            if state.phase != Phase::Idle {
                return refuse("wrong-state");
            }
            let Some(name) = arg.filter(|a| !a.is_empty()) else {
                return refuse("missing-arg");
            };
            match effects.set_server(name) {
                Ok(()) => {
                    let mut next = state.clone();
                    next.server = Some(name.to_string());
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::SetMetricsEndpoint => {
            if state.phase != Phase::Idle {
                return refuse("wrong-state");
            }
            let Some(endpoint) = arg.filter(|a| a.contains(':')) else {
                return refuse("missing-arg");
            };
            match effects.set_metrics_endpoint(endpoint) {
                Ok(()) => {
                    let mut next = state.clone();
                    next.metrics_endpoint = Some(endpoint.to_string());
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::Iter => {
            // Legal between iterations: from idle, or right after the
            // previous iteration's convert.
            if !matches!(state.phase, Phase::Idle | Phase::Converting) {
                return refuse("wrong-state");
            }
            let Some(ordinal) = arg.and_then(|a| a.parse::<u64>().ok()) else {
                return refuse("parse");
            };
            match effects.set_iteration(ordinal) {
                Ok(()) => {
                    let mut next = state.clone();
                    next.iteration = ordinal;
                    next.phase = Phase::Idle;
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::Initialize => {
            if state.phase != Phase::Idle {
                return refuse("wrong-state");
            }
            if state.server.is_none() {
                return refuse("no-server-selected");
            }
            match effects.initialize() {
                Ok(()) => {
                    let mut next = state.clone();
                    next.phase = Phase::Initialized;
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::LogStart => {
            if state.phase != Phase::Initialized {
                return refuse("wrong-state");
            }
            match effects.log_start() {
                Ok(()) => {
                    let mut next = state.clone();
                    next.phase = Phase::Logging;
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::LogStop => {
            if state.phase != Phase::Logging {
                return refuse("wrong-state");
            }
            match effects.log_stop() {
                Ok(()) => {
                    let mut next = state.clone();
                    next.phase = Phase::Stopping;
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::StopServer => {
            // Normally follows log_stop, but the controller may also abort a
            // capture that is still running.
            if !matches!(state.phase, Phase::Logging | Phase::Stopping) {
                return refuse("wrong-state");
            }
            match effects.stop_server() {
                Ok(()) => {
                    let mut next = state.clone();
                    next.phase = Phase::Stopping;
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::Connect => {
            if state.phase != Phase::Idle {
                return refuse("wrong-state");
            }
            if state.server.is_none() {
                return refuse("no-server-selected");
            }
            match effects.connect() {
                Ok(()) => {
                    let mut next = state.clone();
                    next.phase = Phase::Emulating;
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        Verb::Convert => {
            let expected = match role {
                WorkerRole::ServerNode => Phase::Stopping,
                WorkerRole::EmulationNode => Phase::Emulating,
            };
            if state.phase != expected {
                return refuse("wrong-state");
            }
            match effects.convert() {
                Ok(()) => {
                    let mut next = state.clone();
                    next.phase = Phase::Converting;
                    (next, ControlMessage::ok())
                }
                Err(cause) => refuse(&cause),
            }
        }

        // Replies never reach a worker; dest() routed them out above.
        Verb::Ok | Verb::Err => refuse("wrong-dest"),
    }
}
