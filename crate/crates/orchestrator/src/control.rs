//! The wire protocol between the experiment controller and its two workers.
//!
//! Messages are single ASCII lines of the form `verb` or `verb:argument`,
//! terminated by `\n`, exchanged over a persistent TCP connection.  The
//! controller sends commands; the addressed worker answers every one of them
//! with `ok` or `err:<detail>`.  Arguments may themselves contain colons
//! (endpoints like `127.0.0.1:25585`), so only the first colon separates the
//! verb from its argument.

use thiserror::Error;

/// Every verb the control channel knows about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verb {
    /// Select which server under test the next iterations run against.
    SetServer,
    /// Tell the server node where its metrics listener will live.
    SetMetricsEndpoint,
    /// Select the plan ordinal the next commands apply to.
    Iter,
    /// Prepare the selected iteration: launch the server, wait for readiness.
    Initialize,
    /// Begin capturing tick traces and system metrics.
    LogStart,
    /// Stop capturing.
    LogStop,
    /// Terminate the server under test.
    StopServer,
    /// Connect the bot swarm and start driving load.
    Connect,
    /// Turn captured raw data into the iteration's CSV artifacts.
    Convert,
    /// Positive reply.
    Ok,
    /// Liveness ping during long waits.
    KeepAlive,
    /// Negative reply, with a reason after the colon.
    Err,
    /// Tear the worker down; the only verb that ends the session.
    Exit,
}

/// Which side of the conversation a verb may be addressed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dest {
    /// Only the node hosting the server under test.
    ServerNode,
    /// Only the node driving the bot swarm.
    EmulationNode,
    /// Either worker.
    AnyWorker,
    /// Replies; these travel back to the controller and are never commands.
    Controller,
}

/// The role a worker process was started with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkerRole {
    /// Hosts and supervises the server under test.
    ServerNode,
    /// Hosts the bot swarm.
    EmulationNode,
}

impl WorkerRole {
    pub const ALL: [WorkerRole; 2] = [WorkerRole::ServerNode, WorkerRole::EmulationNode];

    pub fn name(self) -> &'static str {
        match self {
            WorkerRole::ServerNode => "server-node",
            WorkerRole::EmulationNode => "emulation-node",
        }
    }

    pub fn parse(text: &str) -> Option<WorkerRole> {
        WorkerRole::ALL.into_iter().find(|r| r.name() == text)
    }
}

impl Verb {
    pub const ALL: [Verb; 13] = [
        Verb::SetServer,
        Verb::SetMetricsEndpoint,
        Verb::Iter,
        Verb::Initialize,
        Verb::LogStart,
        Verb::LogStop,
        Verb::StopServer,
        Verb::Connect,
        Verb::Convert,
        Verb::Ok,
        Verb::KeepAlive,
        Verb::Err,
        Verb::Exit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::SetServer => "set_server",
            Verb::SetMetricsEndpoint => "set_metrics_endpoint",
            Verb::Iter => "iter",
            Verb::Initialize => "initialize",
            Verb::LogStart => "log_start",
            Verb::LogStop => "log_stop",
            Verb::StopServer => "stop_server",
            Verb::Connect => "connect",
            Verb::Convert => "convert",
            Verb::Ok => "ok",
            Verb::KeepAlive => "keep_alive",
            Verb::Err => "err",
            Verb::Exit => "exit",
        }
    }

    pub fn parse(text: &str) -> Option<Verb> {
        Verb::ALL.into_iter().find(|v| v.name() == text)
    }

    /// Who this verb may legally be sent to.
    ///
    /// `convert` is accepted by both workers: tick traces are converted where
    /// they were captured (the server node) and RTT logs where the probes ran
    /// (the emulation node).
    pub fn dest(self) -> Dest {
        match self {
            Verb::SetServer | Verb::Iter | Verb::Convert | Verb::KeepAlive | Verb::Exit => {
                Dest::AnyWorker
            }
            Verb::SetMetricsEndpoint
            | Verb::Initialize
            | Verb::LogStart
            | Verb::LogStop
            | Verb::StopServer => Dest::ServerNode,
            Verb::Connect => Dest::EmulationNode,
            Verb::Ok | Verb::Err => Dest::Controller,
        }
    }

    /// True when a worker running under `role` is a legal recipient.
    pub fn addressed_to(self, role: WorkerRole) -> bool {
        match self.dest() {
            Dest::AnyWorker => true,
            Dest::ServerNode => role == WorkerRole::ServerNode,
            Dest::EmulationNode => role == WorkerRole::EmulationNode,
            Dest::Controller => false,
        }
    }
}

/// A parsed control line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlMessage {
    pub verb: Verb,
    pub arg: Option<String>,
}

/// Why a control line failed to parse.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ControlParseError {
    #[error("empty control line")]
    Empty,
    #[error("unknown verb {0:?}")]
    UnknownVerb(String),
}

impl ControlMessage {
    pub fn plain(verb: Verb) -> ControlMessage {
        ControlMessage { verb, arg: None }
    }

    pub fn with_arg(verb: Verb, arg: impl Into<String>) -> ControlMessage {
        ControlMessage { verb, arg: Some(arg.into()) }
    }

    pub fn ok() -> ControlMessage {
        ControlMessage::plain(Verb::Ok)
    }

    pub fn err(detail: impl Into<String>) -> ControlMessage {
        ControlMessage::with_arg(Verb::Err, detail)
    }

    /// True for an `ok` reply.
    pub fn is_ok(&self) -> bool {
        self.verb == Verb::Ok
    }

    /// The wire form, without the trailing newline.
    pub fn encode(&self) -> String {
        match &self.arg {
            None => self.verb.name().to_string(),
            Some(arg) => format!("{}:{arg}", self.verb.name()),
        }
    }

    /// Parse one line.  A trailing `\r` or `\n` is tolerated; everything past
    /// the first colon is the argument, colons included.
    pub fn parse(line: &str) -> Result<ControlMessage, ControlParseError> {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            return Err(ControlParseError::Empty);
        }
        let (name, arg) = match line.split_once(':') {
            Some((name, arg)) => (name, Some(arg.to_string())),
            None => (line, None),
        };
        match Verb::parse(name) {
            Some(verb) => Ok(ControlMessage { verb, arg }),
            None => Err(ControlParseError::UnknownVerb(name.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_forms_are_exact() {
        let cases = [
            (ControlMessage::with_arg(Verb::SetServer, "simserver"), "set_server:simserver"),
            (ControlMessage::with_arg(Verb::Iter, "3"), "iter:3"),
            (ControlMessage::plain(Verb::Initialize), "initialize"),
            (ControlMessage::plain(Verb::LogStart), "log_start"),
            (ControlMessage::plain(Verb::LogStop), "log_stop"),
            (ControlMessage::plain(Verb::StopServer), "stop_server"),
            (ControlMessage::plain(Verb::Connect), "connect"),
            (ControlMessage::plain(Verb::Convert), "convert"),
            (ControlMessage::ok(), "ok"),
            (ControlMessage::plain(Verb::KeepAlive), "keep_alive"),
            (ControlMessage::err("wrong-dest"), "err:wrong-dest"),
            (ControlMessage::plain(Verb::Exit), "exit"),
            (
                ControlMessage::with_arg(Verb::SetMetricsEndpoint, "127.0.0.1:25585"),
                "set_metrics_endpoint:127.0.0.1:25585",
            ),
        ];
        for (message, wire) in cases {
            assert_eq!(message.encode(), wire);
            assert_eq!(ControlMessage::parse(wire).unwrap(), message);
        }
    }

    #[test]
    fn every_verb_round_trips_with_and_without_an_argument() {
        for verb in Verb::ALL {
            let plain = ControlMessage::plain(verb);
            assert_eq!(ControlMessage::parse(&plain.encode()).unwrap(), plain);
            let with_arg = ControlMessage::with_arg(verb, "x:y:z");
            assert_eq!(ControlMessage::parse(&with_arg.encode()).unwrap(), with_arg);
        }
    }

    #[test]
    fn colons_inside_arguments_survive() {
        let parsed = ControlMessage::parse("set_metrics_endpoint:10.0.0.7:25590").unwrap();
        assert_eq!(parsed.verb, Verb::SetMetricsEndpoint);
        assert_eq!(parsed.arg.as_deref(), Some("10.0.0.7:25590"));
    }

    #[test]
    fn junk_lines_are_rejected() {
        assert_eq!(ControlMessage::parse(""), Err(ControlParseError::Empty));
        assert_eq!(ControlMessage::parse("\r\n"), Err(ControlParseError::Empty));
        assert!(matches!(
            ControlMessage::parse("launch_missiles:now"),
            Err(ControlParseError::UnknownVerb(v)) if v == "launch_missiles"
        ));
        // A verb is case-sensitive on the wire.
        assert!(ControlMessage::parse("EXIT").is_err());
    }

    #[test]
    fn destinations_follow_the_protocol_table() {
        use Dest::*;
        let expected = [
            (Verb::SetServer, AnyWorker),
            (Verb::SetMetricsEndpoint, ServerNode),
            (Verb::Iter, AnyWorker),
            (Verb::Initialize, ServerNode),
            (Verb::LogStart, ServerNode),
            (Verb::LogStop, ServerNode),
            (Verb::StopServer, ServerNode),
            (Verb::Connect, EmulationNode),
            (Verb::Convert, AnyWorker),
            (Verb::Ok, Controller),
            (Verb::KeepAlive, AnyWorker),
            (Verb::Err, Controller),
            (Verb::Exit, AnyWorker),
        ];
        for (verb, dest) in expected {
            assert_eq!(verb.dest(), dest, "dest of {}", verb.name());
        }
        // Replies are never accepted by a worker, whatever its role.
        for role in WorkerRole::ALL {
            assert!(!Verb::Ok.addressed_to(role));
            assert!(!Verb::Err.addressed_to(role));
        }
        assert!(Verb::Connect.addressed_to(WorkerRole::EmulationNode));
        assert!(!Verb::Connect.addressed_to(WorkerRole::ServerNode));
        assert!(Verb::Initialize.addressed_to(WorkerRole::ServerNode));
        assert!(!Verb::Initialize.addressed_to(WorkerRole::EmulationNode));
    }

    #[test]
    fn role_names_round_trip() {
        for role in WorkerRole::ALL {
            assert_eq!(WorkerRole::parse(role.name()), Some(role));
        }
        assert_eq!(WorkerRole::parse("controller"), None);
    }
}
