//! End-to-end checks of the running server over real loopback sockets.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use meterstick_server::{
    decode_update, request_snapshot, PlayerAction, Server, ServerConfig, StateUpdate, WorldSource,
};

/// Timing-sensitive tests share the host, so they run one at a time.
static TIMING: Mutex<()> = Mutex::new(());

fn launch(configure: impl FnOnce(&mut ServerConfig)) -> Server {
    let mut config = ServerConfig::new(WorldSource::parse("control:1:7").unwrap());
    configure(&mut config);
    Server::launch(config).expect("server starts")
}

struct Client {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl Client {
    fn connect(server: &Server) -> Client {
        let stream = TcpStream::connect(server.game_addr).expect("connect");
        stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        Client { writer: stream.try_clone().unwrap(), reader: BufReader::new(stream) }
    }

    fn send(&mut self, action: &PlayerAction) {
        let mut line = serde_json::to_string(action).unwrap();
        line.push('\n');
        self.writer.write_all(line.as_bytes()).unwrap();
    }

    fn send_raw(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    fn recv(&mut self) -> StateUpdate {
        let mut line = String::new();
        self.reader.read_line(&mut line).expect("read update line");
        decode_update(line.trim_end()).unwrap_or_else(|| panic!("valid update, got {line:?}"))
    }

    /// Read updates until one matches, with the socket timeout as the
    /// overall bound.
    fn recv_until(&mut self, mut want: impl FnMut(&StateUpdate) -> bool) -> StateUpdate {
        loop {
            let update = self.recv();
            if want(&update) {
                return update;
            }
        }
    }

    fn join(&mut self, name: &str) -> (u64, f64, f64) {
        self.send(&PlayerAction::Join { name: name.into() });
        match self.recv_until(|u| matches!(u, StateUpdate::JoinAck { .. })) {
            StateUpdate::JoinAck { player_id, x, z, .. } => (player_id, x, z),
            _ => unreachable!(),
        }
    }
}

#[test]
fn join_then_chat_echoes_with_the_nonce_by_the_next_tick() {
    let _t = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let server = launch(|_| {});
    let mut client = Client::connect(&server);
    client.join("itest");

    let sent = Instant::now();
    client.send(&PlayerAction::Chat { nonce: 4242, text: "anyone home?".into() });
    let echo = client.recv_until(|u| matches!(u, StateUpdate::ChatEvent { .. }));
    let rtt = sent.elapsed();
    match echo {
        StateUpdate::ChatEvent { nonce, text, player, .. } => {
            assert_eq!(nonce, 4242);
            assert_eq!(text, "anyone home?");
            assert_eq!(player, "itest");
        }
        _ => unreachable!(),
    }
    // Processed on the tick after it arrived: well inside two periods
    // plus delivery slack.
    assert!(rtt < Duration::from_millis(150), "echo took {rtt:?}");
    server.shutdown();
}

#[test]
fn malformed_lines_do_not_kill_the_session() {
    let _t = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let server = launch(|_| {});
    let mut client = Client::connect(&server);
    client.join("sloppy");
    client.send_raw("this is not json");
    client.send_raw("{\"kind\":\"no_such_action\"}");
    client.send(&PlayerAction::Ping { nonce: 77 });
    let pong = client.recv_until(|u| matches!(u, StateUpdate::Pong { .. }));
    assert!(matches!(pong, StateUpdate::Pong { nonce: 77, .. }));
    server.shutdown();
}

#[test]
fn ticks_run_at_the_configured_rate() {
    let _t = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let server = launch(|_| {});
    let mut client = Client::connect(&server);
    client.join("pacer");

    std::thread::sleep(Duration::from_millis(2500));
    let metrics = TcpStream::connect(server.metrics_addr).unwrap();
    metrics.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let mut reader = BufReader::new(metrics.try_clone().unwrap());
    let mut writer = metrics;
    let (meta, records) = request_snapshot(&mut reader, &mut writer).expect("snapshot");

    // 2.5 s at 20 Hz. Startup and request latency cost at most a tick
    // or two; a scheduler that bursts ticks to catch up would overshoot.
    assert!(
        (48..=53).contains(&meta.tick_counter),
        "{} ticks in 2.5 s",
        meta.tick_counter
    );
    assert_eq!(meta.player_count, 1);
    assert!(meta.records >= 48);

    // Tick starts march at the period: no two starts closer than the
    // busy time before them, none drifting past double the period.
    for pair in records.windows(2) {
        let gap = pair[1].start_ns - pair[0].start_ns;
        assert!((45_000_000..=100_000_000).contains(&gap), "start gap {gap} ns");
    }
    server.shutdown();
}

#[test]
fn an_injected_stall_delays_every_queued_response() {
    let _t = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let server = launch(|config| {
        config.stall_at_tick = Some(10);
        config.stall_ms = 500;
    });
    let mut client = Client::connect(&server);
    client.join("victim");

    // Tick 10 starts near the 500 ms mark and then sleeps for 500 ms.
    // A ping sent shortly after that boundary arrives while the loop is
    // stalled, so it sits in the inbox until the next tick finally runs.
    std::thread::sleep(Duration::from_millis(530));
    let sent = Instant::now();
    client.send(&PlayerAction::Ping { nonce: 1 });
    client.recv_until(|u| matches!(u, StateUpdate::Pong { nonce: 1, .. }));
    let stalled_rtt = sent.elapsed();
    assert!(
        stalled_rtt >= Duration::from_millis(300),
        "response during the stall took only {stalled_rtt:?}"
    );
    assert!(stalled_rtt < Duration::from_millis(900), "stall never ended: {stalled_rtt:?}");

    // Afterwards the loop recovers to normal latency.
    let sent = Instant::now();
    client.send(&PlayerAction::Ping { nonce: 2 });
    client.recv_until(|u| matches!(u, StateUpdate::Pong { nonce: 2, .. }));
    assert!(sent.elapsed() < Duration::from_millis(150));
    server.shutdown();
}

#[test]
fn two_clients_see_each_other_through_the_world() {
    let _t = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let server = launch(|_| {});
    let mut alice = Client::connect(&server);
    let mut bob = Client::connect(&server);
    let (_, ax, az) = alice.join("alice");
    bob.join("bob");

    // Alice breaks the block under the world; bob, spawned at the same
    // cached spawn region, is within interest range and sees the change.
    let (bx, bz) = (ax.floor() as i32, az.floor() as i32);
    alice.send(&PlayerAction::BreakBlock { x: bx + 1, y: 0, z: bz + 1 });
    let seen = bob.recv_until(|u| matches!(u, StateUpdate::BlockUpdate { .. }));
    match seen {
        StateUpdate::BlockUpdate { x, z, .. } => {
            assert_eq!((x, z), (bx + 1, bz + 1));
        }
        _ => unreachable!(),
    }
    server.shutdown();
}

#[test]
fn server_stops_cleanly_after_max_ticks() {
    let _t = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let server = launch(|config| config.max_ticks = Some(10));
    let started = Instant::now();
    server.wait();
    let ran = started.elapsed();
    assert!(ran >= Duration::from_millis(450), "stopped early: {ran:?}");
    assert!(ran < Duration::from_secs(3), "did not stop: {ran:?}");
}
