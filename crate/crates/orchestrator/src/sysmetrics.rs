//! Process-level resource sampling for the server under test.
//!
//! A background thread polls `/proc` at 2 Hz and appends one CSV row per
//! sample: CPU utilisation over the previous interval, resident set size,
//! thread count, cumulative disk I/O of the process, and host-wide network
//! traffic since sampling began (the kernel does not account network bytes
//! per process, so the host-wide delta is the closest honest measurement on
//! an otherwise quiet node).
//!
//! Rows are flushed as they are produced, so a crash mid-run still leaves a
//! usable partial log.  When the observed process disappears, the sampler
//! writes a terminal `#process-exited` marker line and stops on its own.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

/// Column header of `sysmetrics.csv`.
pub const SYS_CSV_HEADER: &str =
    "t_ns,cpu_fraction,memory_bytes,thread_count,disk_read_bytes,disk_write_bytes,net_sent_bytes,net_recv_bytes";

/// Marker line appended when the observed process exits mid-run.
pub const PROCESS_EXITED_MARK: &str = "#process-exited";

/// Sampling interval (2 Hz).
pub const SAMPLE_INTERVAL: Duration = Duration::from_millis(500);

/// One resource snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSample {
    /// Nanoseconds since sampling began.
    pub t_ns: u64,
    /// CPU time consumed over the previous interval, in cores (1.0 = one
    /// core fully busy; can exceed 1.0 for multithreaded processes).
    pub cpu_fraction: f64,
    /// Resident set size in bytes.
    pub memory_bytes: u64,
    pub thread_count: u64,
    /// Cumulative bytes the process caused to be read from storage.
    pub disk_read_bytes: u64,
    pub disk_write_bytes: u64,
    /// Host-wide bytes sent since sampling began.
    pub net_sent_bytes: u64,
    pub net_recv_bytes: u64,
}

impl MetricSample {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.4},{},{},{},{},{},{}",
            self.t_ns,
            self.cpu_fraction,
            self.memory_bytes,
            self.thread_count,
            self.disk_read_bytes,
            self.disk_write_bytes,
            self.net_sent_bytes,
            self.net_recv_bytes,
        )
    }
}

/// Raw per-process counters scraped from `/proc/<pid>/`.
#[derive(Clone, Copy, Debug, Default)]
struct ProcCounters {
    cpu_ticks: u64,
    rss_bytes: u64,
    threads: u64,
    read_bytes: u64,
    write_bytes: u64,
}

fn read_proc(pid: u32) -> Option<ProcCounters> {
    let stat = fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    // The command name sits in parentheses and may itself contain spaces or
    // parentheses, so fields are counted from the last closing one.
    let after_comm = &stat[stat.rfind(')')? + 1..];
    let fields: Vec<&str> = after_comm.split_whitespace().collect();
    // Field numbering per proc(5): utime is 14, stime 15, num_threads 20;
    // `fields` starts at field 3 (state).
    let utime: u64 = fields.get(11)?.parse().ok()?;
    let stime: u64 = fields.get(12)?.parse().ok()?;
    let threads: u64 = fields.get(17)?.parse().ok()?;

    let statm = fs::read_to_string(format!("/proc/{pid}/statm")).ok()?;
    let resident_pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    let page_size = unsafe { libc::sysconf(libc::_SC_PAGESIZE) } as u64;

    // /proc/<pid>/io can lag a freshly spawned process; treat it as zeros
    // rather than dropping the whole sample.
    let (read_bytes, write_bytes) = fs::read_to_string(format!("/proc/{pid}/io"))
        .ok()
        .map(|io| {
            let field = |name: &str| {
                io.lines()
                    .find_map(|l| l.strip_prefix(name))
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .unwrap_or(0)
            };
            (field("read_bytes:"), field("write_bytes:"))
        })
        .unwrap_or((0, 0));

    Some(ProcCounters {
        cpu_ticks: utime + stime,
        rss_bytes: resident_pages * page_size,
        threads,
        read_bytes,
        write_bytes,
    })
}

/// Host-wide (sent, received) byte counters summed over every interface.
fn read_net_totals() -> (u64, u64) {
    let Ok(text) = fs::read_to_string("/proc/net/dev") else {
        return (0, 0);
    };
    let mut sent = 0u64;
    let mut received = 0u64;
    for line in text.lines().skip(2) {
        let Some((_, counters)) = line.split_once(':') else {
            continue;
        };
        let fields: Vec<&str> = counters.split_whitespace().collect();
        received += fields.first().and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
        sent += fields.get(8).and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
    }
    (sent, received)
}

/// A running sampler; dropping it abandons the thread, [`Sampler::stop`]
/// joins it and reports how many rows were written.
pub struct Sampler {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<std::io::Result<u64>>,
}

impl Sampler {
    /// Start observing `pid`, appending rows to `out` until stopped or the
    /// process exits.
    pub fn start(pid: u32, out: PathBuf) -> std::io::Result<Sampler> {
        let mut writer = BufWriter::new(fs::File::create(&out)?);
        writeln!(writer, "{SYS_CSV_HEADER}")?;
        writer.flush()?;

        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let handle = std::thread::Builder::new()
            .name(format!("sysmetrics-{pid}"))
            .spawn(move || sample_loop(pid, writer, &stop_flag))
            .expect("spawn sampler thread");
        Ok(Sampler { stop, handle })
    }

    /// Stop sampling and return the number of rows written.
    pub fn stop(self) -> std::io::Result<u64> {
        self.stop.store(true, Ordering::SeqCst);
        self.handle.join().expect("sampler thread never panics")
    }
}

fn sample_loop(
    pid: u32,
    mut writer: BufWriter<fs::File>,
    stop: &AtomicBool,
) -> std::io::Result<u64> {
    let origin = Instant::now();
    let baseline_proc = read_proc(pid);
    let (base_sent, base_recv) = read_net_totals();
    let clk_tck = unsafe { libc::sysconf(libc::_SC_CLK_TCK) } as f64;

    let mut previous = (origin, baseline_proc.map(|c| c.cpu_ticks).unwrap_or(0));
    let mut rows = 0u64;
    for interval in 1u32.. {
        // Deadline pacing: each sample aims at origin + n * interval, so the
        // average rate holds even when one poll runs long.
        let deadline = origin + SAMPLE_INTERVAL * interval;
        while Instant::now() < deadline {
            if stop.load(Ordering::SeqCst) {
                writer.flush()?;
                return Ok(rows);
            }
            std::thread::sleep(Duration::from_millis(20));
        }

        let now = Instant::now();
        let Some(counters) = read_proc(pid) else {
            writeln!(writer, "{PROCESS_EXITED_MARK}")?;
            writer.flush()?;
            return Ok(rows);
        };
        let (sent, received) = read_net_totals();
        let wall = now.duration_since(previous.0).as_secs_f64().max(1e-9);
        let cpu_seconds = counters.cpu_ticks.saturating_sub(previous.1) as f64 / clk_tck;
        let sample = MetricSample {
            t_ns: now.duration_since(origin).as_nanos() as u64,
            cpu_fraction: cpu_seconds / wall,
            memory_bytes: counters.rss_bytes,
            thread_count: counters.threads,
            disk_read_bytes: counters.read_bytes,
            disk_write_bytes: counters.write_bytes,
            net_sent_bytes: sent.saturating_sub(base_sent),
            net_recv_bytes: received.saturating_sub(base_recv),
        };
        writeln!(writer, "{}", sample.csv_row())?;
        writer.flush()?;
        rows += 1;
        previous = (now, counters.cpu_ticks);
    }
    unreachable!("the sampling loop only exits via stop or process death");
}

/// Parse rows written by a [`Sampler`]; marker and comment lines are skipped.
pub fn parse_sysmetrics_csv(text: &str) -> Result<Vec<MetricSample>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == SYS_CSV_HEADER => {}
        other => return Err(format!("bad sysmetrics header: {other:?}")),
    }
    let mut samples = Vec::new();
    for (number, line) in lines.enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(format!("row {}: expected 8 fields, got {}", number + 2, fields.len()));
        }
        let parse_u64 = |i: usize| {
            fields[i].parse::<u64>().map_err(|e| format!("row {}: {e}", number + 2))
        };
        samples.push(MetricSample {
            t_ns: parse_u64(0)?,
            cpu_fraction: fields[1]
                .parse::<f64>()
                .map_err(|e| format!("row {}: {e}", number + 2))?,
            memory_bytes: parse_u64(2)?,
            thread_count: parse_u64(3)?,
            disk_read_bytes: parse_u64(4)?,
            disk_write_bytes: parse_u64(5)?,
            net_sent_bytes: parse_u64(6)?,
            net_recv_bytes: parse_u64(7)?,
        });
    }
    Ok(samples)
}

/// Write a header-only log for modes that never run a real process.
pub fn write_empty_sysmetrics(path: &Path) -> std::io::Result<()> {
    fs::write(path, format!("{SYS_CSV_HEADER}\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::process::{Command, Stdio};

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("meterstick-sys-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn sampling_self_holds_the_cadence_and_monotone_io() {
        let dir = scratch("self");
        let out = dir.join("sysmetrics.csv");
        let sampler = Sampler::start(std::process::id(), out.clone()).unwrap();
        std::thread::sleep(Duration::from_millis(2600));
        let rows = sampler.stop().unwrap();
        // 2 Hz over 2.6 s: five samples, give or take scheduler jitter.
        assert!((3..=7).contains(&rows), "rows = {rows}");

        let samples = parse_sysmetrics_csv(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(samples.len() as u64, rows);
        for pair in samples.windows(2) {
            assert!(pair[1].t_ns > pair[0].t_ns);
            assert!(pair[1].disk_read_bytes >= pair[0].disk_read_bytes);
            assert!(pair[1].disk_write_bytes >= pair[0].disk_write_bytes);
            assert!(pair[1].net_sent_bytes >= pair[0].net_sent_bytes);
            assert!(pair[1].net_recv_bytes >= pair[0].net_recv_bytes);
            // Roughly 500 ms apart.
            let gap = pair[1].t_ns - pair[0].t_ns;
            assert!((300_000_000..900_000_000).contains(&gap), "gap = {gap} ns");
        }
        for sample in &samples {
            assert!(sample.memory_bytes > 1_000_000, "a test binary resident set is megabytes");
            assert!(sample.thread_count >= 1);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn a_spinning_child_is_measured_near_one_core() {
        let dir = scratch("busy");
        let mut child = Command::new("sh")
            .args(["-c", "while :; do :; done"])
            .stdout(Stdio::null())
            .spawn()
            .unwrap();
        let sampler = Sampler::start(child.id(), dir.join("sysmetrics.csv")).unwrap();
        std::thread::sleep(Duration::from_millis(2200));
        sampler.stop().unwrap();
        child.kill().unwrap();
        child.wait().unwrap();

        let samples =
            parse_sysmetrics_csv(&fs::read_to_string(dir.join("sysmetrics.csv")).unwrap()).unwrap();
        let peak = samples.iter().map(|s| s.cpu_fraction).fold(0.0f64, f64::max);
        assert!(peak >= 0.9, "a busy-looping shell should saturate a core; peak = {peak:.2}");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn a_dead_process_terminates_the_log_with_a_marker() {
        let dir = scratch("dead");
        let out = dir.join("sysmetrics.csv");
        let mut child = Command::new("sleep").arg("0.3").spawn().unwrap();
        let sampler = Sampler::start(child.id(), out.clone()).unwrap();
        child.wait().unwrap();
        // Give the sampler a couple of intervals to notice the exit.
        std::thread::sleep(Duration::from_millis(1300));
        sampler.stop().unwrap();

        let text = fs::read_to_string(&out).unwrap();
        assert!(
            text.lines().last() == Some(PROCESS_EXITED_MARK),
            "log should end with the exit marker, got:\n{text}"
        );
        // The marker does not break parsing.
        parse_sysmetrics_csv(&text).unwrap();
        fs::remove_dir_all(&dir).unwrap();
    }
}
