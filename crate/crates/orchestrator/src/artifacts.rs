//! Layout and bookkeeping of on-disk results.
//!
//! Every iteration owns one directory,
//! `results/<server>/<workload>/<iteration>/`, holding:
//!
//! * `ticks.bin`        — raw captured tick records, length-prefixed frames;
//! * `ticks.csv`        — the same records, converted;
//! * `rtt.csv`          — probe round trips measured by the emulation node;
//! * `sysmetrics.csv`   — process-level resource samples;
//! * `server.log`       — stdout/stderr of the server under test;
//! * `meta.json`        — what ran and whether it completed.
//!
//! `meta.json` is written last and doubles as the completion marker a
//! resumed run checks before skipping an iteration.  It is deliberately
//! deterministic: no timestamps, no hostnames, so byte-identical reruns
//! produce byte-identical artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use meterstick_core::{decode_tick_frames, encode_tick_frame, MetricsError, TickRecord};
use serde::{Deserialize, Serialize};

pub const TICKS_BIN: &str = "ticks.bin";
pub const TICKS_CSV: &str = "ticks.csv";
pub const RTT_CSV: &str = "rtt.csv";
pub const SYSMETRICS_CSV: &str = "sysmetrics.csv";
pub const SERVER_LOG: &str = "server.log";
pub const META_JSON: &str = "meta.json";

/// Marker value of [`IterationMeta::status`] for a finished iteration.
pub const STATUS_COMPLETE: &str = "complete";
/// Marker value for an iteration that ran but failed.
pub const STATUS_FAILED: &str = "failed";

/// The directory one iteration's artifacts live in.
pub fn iteration_dir(results: &Path, server: &str, workload: &str, iteration: u32) -> PathBuf {
    results.join(server).join(workload).join(iteration.to_string())
}

/// Everything worth knowing about one captured iteration.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IterationMeta {
    pub status: String,
    pub server: String,
    pub workload: String,
    pub iteration: u32,
    pub ordinal: u64,
    pub mode: String,
    pub scale: u32,
    pub seed: u64,
    pub duration_secs: u64,
    pub tick_ms: u64,
    pub ticks_recorded: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl IterationMeta {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let body = serde_json::to_string_pretty(self).expect("meta serializes");
        let mut file = fs::File::create(dir.join(META_JSON))?;
        file.write_all(body.as_bytes())?;
        file.write_all(b"\n")
    }

    pub fn read(dir: &Path) -> std::io::Result<IterationMeta> {
        let text = fs::read_to_string(dir.join(META_JSON))?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// True when the directory holds a finished iteration: the meta marker says
/// complete and every converted artifact is present.
pub fn is_complete(dir: &Path) -> bool {
    let Ok(meta) = IterationMeta::read(dir) else {
        return false;
    };
    meta.status == STATUS_COMPLETE
        && [TICKS_CSV, RTT_CSV, SYSMETRICS_CSV].iter().all(|name| dir.join(name).exists())
}

/// Serialize tick records into the raw capture format.
pub fn write_ticks_bin(path: &Path, records: &[TickRecord]) -> std::io::Result<()> {
    let mut buffer = Vec::with_capacity(records.len() * 64);
    for record in records {
        encode_tick_frame(record, &mut buffer);
    }
    fs::write(path, buffer)
}

/// Read a raw capture back; truncation reports the offending byte offset.
pub fn read_ticks_bin(path: &Path) -> Result<Vec<TickRecord>, MetricsError> {
    let bytes = fs::read(path)?;
    decode_tick_frames(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use meterstick_core::ComponentShares;

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("meterstick-artifacts-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn record(index: u64) -> TickRecord {
        TickRecord {
            index,
            start_ns: index * 50_000_000,
            busy_ns: 1_000_000 + index,
            shares: ComponentShares::from_array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        }
    }

    #[test]
    fn meta_round_trips_and_marks_completion() {
        let dir = scratch("meta");
        let meta = IterationMeta {
            status: STATUS_COMPLETE.to_string(),
            server: "simserver".to_string(),
            workload: "control".to_string(),
            iteration: 1,
            ordinal: 0,
            mode: "lockstep".to_string(),
            scale: 1,
            seed: 1,
            duration_secs: 60,
            tick_ms: 50,
            ticks_recorded: 1200,
            error: None,
        };
        meta.write(&dir).unwrap();
        assert_eq!(IterationMeta::read(&dir).unwrap(), meta);

        // Not complete until every converted artifact exists too.
        assert!(!is_complete(&dir));
        for name in [TICKS_CSV, RTT_CSV, SYSMETRICS_CSV] {
            fs::write(dir.join(name), "x\n").unwrap();
        }
        assert!(is_complete(&dir));

        let failed = IterationMeta { status: STATUS_FAILED.to_string(), ..meta };
        failed.write(&dir).unwrap();
        assert!(!is_complete(&dir));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn meta_serialization_is_deterministic() {
        let dir = scratch("det");
        let meta = IterationMeta {
            status: STATUS_COMPLETE.to_string(),
            server: "simserver".to_string(),
            workload: "lag".to_string(),
            iteration: 2,
            ordinal: 7,
            mode: "realtime".to_string(),
            scale: 4,
            seed: 9,
            duration_secs: 60,
            tick_ms: 50,
            ticks_recorded: 1193,
            error: None,
        };
        meta.write(&dir).unwrap();
        let first = fs::read(dir.join(META_JSON)).unwrap();
        meta.write(&dir).unwrap();
        assert_eq!(fs::read(dir.join(META_JSON)).unwrap(), first);
        assert!(!String::from_utf8(first).unwrap().contains("time"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn raw_captures_round_trip_through_disk() {
        let dir = scratch("bin");
        let records: Vec<TickRecord> = (0..500).map(record).collect();
        let path = dir.join(TICKS_BIN);
        write_ticks_bin(&path, &records).unwrap();
        assert_eq!(read_ticks_bin(&path).unwrap(), records);

        // Chopping the file mid-frame surfaces the byte offset.
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_ticks_bin(&path).unwrap_err();
        assert!(err.to_string().contains("offset"), "error was: {err}");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn iteration_directories_nest_server_workload_iteration() {
        let dir = iteration_dir(Path::new("results"), "simserver", "tnt", 3);
        assert_eq!(dir, Path::new("results/simserver/tnt/3"));
    }
}
