//! Metric externalization: a bounded ring of tick records served over
//! a side-channel TCP port, so observation never blocks the game loop.
//!
//! The loop pushes one record per tick under a mutex held for a few
//! dozen nanoseconds. Readers connect to the metrics port and send the
//! request line `snapshot`; the response is one `meta` JSON line (run
//! counters plus how many records follow) and then one JSON line per
//! retained [`TickRecord`], oldest first. The connection stays open for
//! repeated requests, which is how a poller tails a live run.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use meterstick_core::TickRecord;
use serde::{Deserialize, Serialize};

/// Records retained; older ticks fall off the front.
pub const METRICS_RING_CAP: usize = 4096;

/// Run counters reported ahead of the record lines.
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
pub struct MetricsMeta {
    /// Ticks completed since the server started.
    pub tick_counter: u64,
    pub entity_count: u64,
    pub player_count: u64,
    /// Total actions drained from clients since start.
    pub actions_total: u64,
    /// Rule-queue depth at the end of the last tick.
    pub queue_depth: u64,
    /// Records that follow this line.
    pub records: u64,
}

#[derive(Debug, Default)]
struct Shared {
    ring: VecDeque<TickRecord>,
    meta: MetricsMeta,
}

/// Writer half plus however many reader handles the serving side needs.
#[derive(Clone, Debug, Default)]
pub struct MetricsHub {
    shared: Arc<Mutex<Shared>>,
}

impl MetricsHub {
    pub fn new() -> MetricsHub {
        MetricsHub::default()
    }

    /// Record a finished tick. Called once per tick by the game loop.
    pub fn push(&self, record: TickRecord, meta: MetricsMeta) {
        let mut shared = self.shared.lock().expect("metrics lock poisoned");
        if shared.ring.len() == METRICS_RING_CAP {
            shared.ring.pop_front();
        }
        shared.ring.push_back(record);
        shared.meta = meta;
    }

    /// The current meta line and retained records, oldest first.
    pub fn snapshot(&self) -> (MetricsMeta, Vec<TickRecord>) {
        let shared = self.shared.lock().expect("metrics lock poisoned");
        let mut meta = shared.meta;
        meta.records = shared.ring.len() as u64;
        (meta, shared.ring.iter().copied().collect())
    }

    /// Serve `snapshot` requests on an already-bound listener until
    /// `stop` flips. Spawns one thread per connection.
    pub fn serve(&self, listener: TcpListener, stop: Arc<AtomicBool>) {
        listener.set_nonblocking(true).expect("listener flags");
        while !stop.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let hub = self.clone();
                    let stop = Arc::clone(&stop);
                    std::thread::spawn(move || {
                        let _ = hub.serve_connection(stream, &stop);
                    });
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(std::time::Duration::from_millis(20));
                }
                Err(_) => break,
            }
        }
    }

    fn serve_connection(&self, stream: TcpStream, stop: &AtomicBool) -> std::io::Result<()> {
        stream.set_nodelay(true).ok();
        let mut writer = stream.try_clone()?;
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 || stop.load(Ordering::Relaxed) {
                return Ok(());
            }
            match line.trim() {
                "snapshot" => {
                    let (meta, records) = self.snapshot();
                    let mut body = serde_json::to_string(&meta).expect("meta serializes");
                    body.push('\n');
                    for record in &records {
                        body.push_str(&serde_json::to_string(record).expect("record serializes"));
                        body.push('\n');
                    }
                    writer.write_all(body.as_bytes())?;
                    writer.flush()?;
                }
                "" => {}
                other => {
                    log::debug!("metrics: unknown request {other:?}");
                    writer.write_all(b"{\"error\":\"unknown request\"}\n")?;
                    writer.flush()?;
                }
            }
        }
    }
}

/// Client side of the metrics protocol: one `snapshot` round trip.
pub fn request_snapshot(
    reader: &mut impl BufRead,
    writer: &mut impl Write,
) -> std::io::Result<(MetricsMeta, Vec<TickRecord>)> {
    writer.write_all(b"snapshot\n")?;
    writer.flush()?;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let meta: MetricsMeta = serde_json::from_str(line.trim()).map_err(|e| {
        std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad meta line: {e}"))
    })?;
    let mut records = Vec::with_capacity(meta.records as usize);
    for _ in 0..meta.records {
        line.clear();
        reader.read_line(&mut line)?;
        let record: TickRecord = serde_json::from_str(line.trim()).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad record line: {e}"))
        })?;
        records.push(record);
    }
    Ok((meta, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use meterstick_core::ComponentShares;

    fn record(index: u64) -> TickRecord {
        TickRecord {
            index,
            start_ns: index * 50_000_000,
            busy_ns: 1_000_000,
            shares: ComponentShares::default(),
        }
    }

    #[test]
    fn fresh_hub_reports_nothing() {
        let hub = MetricsHub::new();
        let (meta, records) = hub.snapshot();
        assert_eq!(meta.tick_counter, 0);
        assert_eq!(meta.records, 0);
        assert!(records.is_empty());
    }

    #[test]
    fn two_hundred_ticks_are_all_retained_in_order() {
        let hub = MetricsHub::new();
        for i in 0..200 {
            let meta = MetricsMeta { tick_counter: i + 1, ..MetricsMeta::default() };
            hub.push(record(i), meta);
        }
        let (meta, records) = hub.snapshot();
        assert_eq!(meta.tick_counter, 200);
        assert_eq!(records.len(), 200);
        assert!(records.iter().enumerate().all(|(i, r)| r.index == i as u64));
    }

    #[test]
    fn overflow_keeps_the_most_recent_capacity_contiguously() {
        let hub = MetricsHub::new();
        for i in 0..5000 {
            hub.push(record(i), MetricsMeta::default());
        }
        let (_, records) = hub.snapshot();
        assert_eq!(records.len(), METRICS_RING_CAP);
        assert_eq!(records[0].index, 5000 - METRICS_RING_CAP as u64);
        assert_eq!(records.last().unwrap().index, 4999);
        assert!(records.windows(2).all(|w| w[1].index == w[0].index + 1));
    }

    #[test]
    fn snapshot_round_trips_over_a_socket() {
        let hub = MetricsHub::new();
        for i in 0..37 {
            hub.push(record(i), MetricsMeta { tick_counter: i + 1, ..MetricsMeta::default() });
        }
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let server_hub = hub.clone();
        let server_stop = Arc::clone(&stop);
        let served = std::thread::spawn(move || server_hub.serve(listener, server_stop));

        let stream = TcpStream::connect(addr).unwrap();
        let mut writer = stream.try_clone().unwrap();
        let mut reader = BufReader::new(stream);
        // Two requests on one connection: the endpoint is a tailing poller's.
        for _ in 0..2 {
            let (meta, records) = request_snapshot(&mut reader, &mut writer).unwrap();
            assert_eq!(meta.tick_counter, 37);
            assert_eq!(records.len(), 37);
            assert_eq!(records.last().unwrap().index, 36);
        }
        stop.store(true, Ordering::Relaxed);
        served.join().unwrap();
    }
}
