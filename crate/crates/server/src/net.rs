//! Connection plumbing: one reader and one writer thread per client,
//! feeding a shared inbox the game loop drains once per tick.
//!
//! Inbound lines are decoded off the game thread; malformed ones still
//! reach the loop (as [`InEvent::Malformed`]) so rejection is handled —
//! and paid for — in simulation order like everything else. Outbound
//! traffic leaves through a per-session channel; the game loop never
//! touches a socket.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::game::{InEvent, SessionId};
use crate::protocol::{decode_action, MAX_LINE_BYTES};

/// Events arriving from all connections, in arrival order.
pub type Inbox = Arc<Mutex<Vec<InEvent>>>;
/// Writer channels by session, shared by the accept loop (inserts),
/// reader threads (removals on disconnect) and the game loop (sends).
pub type Outboxes = Arc<Mutex<HashMap<SessionId, Sender<String>>>>;

/// Accept clients on `listener` until `stop` flips, wiring each one to
/// the inbox and an outbox channel.
pub fn serve_connections(listener: TcpListener, inbox: Inbox, outboxes: Outboxes, stop: Arc<AtomicBool>) {
    listener.set_nonblocking(true).expect("listener flags");
    let next_sid = AtomicU64::new(1);
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let sid = next_sid.fetch_add(1, Ordering::Relaxed);
                log::info!("session {sid}: connected from {peer}");
                attach_session(sid, stream, &inbox, &outboxes, &stop);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => {
                log::warn!("accept failed: {e}");
                break;
            }
        }
    }
}

fn attach_session(
    sid: SessionId,
    stream: TcpStream,
    inbox: &Inbox,
    outboxes: &Outboxes,
    stop: &Arc<AtomicBool>,
) {
    stream.set_nodelay(true).ok();
    // A finite read timeout lets the reader notice shutdown.
    stream.set_read_timeout(Some(Duration::from_millis(500))).ok();
    let (tx, rx) = channel::<String>();
    let write_half = match stream.try_clone() {
        Ok(s) => s,
        Err(e) => {
            log::warn!("session {sid}: clone failed: {e}");
            return;
        }
    };

    outboxes.lock().expect("outboxes lock").insert(sid, tx);
    inbox.lock().expect("inbox lock").push(InEvent::Opened(sid));

    let reader_inbox = Arc::clone(inbox);
    let reader_outboxes = Arc::clone(outboxes);
    let reader_stop = Arc::clone(stop);
    std::thread::spawn(move || {
        read_session(sid, stream, &reader_inbox, &reader_stop);
        reader_outboxes.lock().expect("outboxes lock").remove(&sid);
        reader_inbox.lock().expect("inbox lock").push(InEvent::Closed(sid));
        log::info!("session {sid}: closed");
    });
    std::thread::spawn(move || write_session(sid, write_half, rx));
}

fn read_session(sid: SessionId, stream: TcpStream, inbox: &Inbox, stop: &AtomicBool) {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => return,
            Ok(_) => {
                if line.len() > MAX_LINE_BYTES {
                    log::warn!("session {sid}: line over {MAX_LINE_BYTES} bytes, dropping peer");
                    return;
                }
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let event = match decode_action(trimmed) {
                    Some(action) => InEvent::Action(sid, action),
                    None => InEvent::Malformed(sid),
                };
                inbox.lock().expect("inbox lock").push(event);
            }
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                if stop.load(Ordering::Relaxed) {
                    return;
                }
            }
            Err(_) => return,
        }
    }
}

fn write_session(sid: SessionId, mut stream: TcpStream, rx: Receiver<String>) {
    while let Ok(batch) = rx.recv() {
        if stream.write_all(batch.as_bytes()).is_err() {
            log::debug!("session {sid}: write failed, peer gone");
            return;
        }
    }
}
