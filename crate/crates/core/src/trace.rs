//! Tick records, traces, and their on-disk encodings.
//!
//! A tick's `busy` time is the compute portion of the loop iteration; the
//! wait until the next 50 ms slot is excluded. The CSV and binary layouts
//! here are the interchange formats for the whole benchmark pipeline and
//! must not drift: column order and frame layout are load-bearing.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::MetricsError;

/// 20 Hz game loop: 50 ms per tick.
pub const DEFAULT_TICK_PERIOD_NS: u64 = 50_000_000;

/// Header of a tick trace CSV file.
pub const TICKS_CSV_HEADER: &str = "iteration,tick_index,start_ns,busy_ns,share_player,share_terrain,share_entities,share_persistence,share_networking,share_other";

/// Header of an RTT sample CSV file.
pub const RTT_CSV_HEADER: &str = "iteration,sent_ns,recv_ns,rtt_ns";

/// Byte length of one encoded tick record (without the length prefix).
pub const TICK_FRAME_LEN: usize = 8 * 3 + 8 * 6;

/// Where a tick spent its compute time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    PlayerHandling,
    TerrainRules,
    Entities,
    Persistence,
    Networking,
    Other,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 6] = [
        ComponentKind::PlayerHandling,
        ComponentKind::TerrainRules,
        ComponentKind::Entities,
        ComponentKind::Persistence,
        ComponentKind::Networking,
        ComponentKind::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComponentKind::PlayerHandling => "player_handling",
            ComponentKind::TerrainRules => "terrain_rules",
            ComponentKind::Entities => "entities",
            ComponentKind::Persistence => "persistence",
            ComponentKind::Networking => "networking",
            ComponentKind::Other => "other",
        }
    }
}

/// Per-component fractions of one tick's busy time.
///
/// Stored densely so iteration order (and therefore every serialization)
/// is fixed: player, terrain, entities, persistence, networking, other.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentShares {
    pub player_handling: f64,
    pub terrain_rules: f64,
    pub entities: f64,
    pub persistence: f64,
    pub networking: f64,
    pub other: f64,
}

impl ComponentShares {
    pub fn get(&self, kind: ComponentKind) -> f64 {
        match kind {
            ComponentKind::PlayerHandling => self.player_handling,
            ComponentKind::TerrainRules => self.terrain_rules,
            ComponentKind::Entities => self.entities,
            ComponentKind::Persistence => self.persistence,
            ComponentKind::Networking => self.networking,
            ComponentKind::Other => self.other,
        }
    }

    pub fn set(&mut self, kind: ComponentKind, value: f64) {
        match kind {
            ComponentKind::PlayerHandling => self.player_handling = value,
            ComponentKind::TerrainRules => self.terrain_rules = value,
            ComponentKind::Entities => self.entities = value,
            ComponentKind::Persistence => self.persistence = value,
            ComponentKind::Networking => self.networking = value,
            ComponentKind::Other => self.other = value,
        }
    }

    pub fn sum(&self) -> f64 {
        self.player_handling
            + self.terrain_rules
            + self.entities
            + self.persistence
            + self.networking
            + self.other
    }

    pub fn iter(&self) -> impl Iterator<Item = (ComponentKind, f64)> + '_ {
        ComponentKind::ALL.iter().map(move |&k| (k, self.get(k)))
    }

    /// Share values in CSV column order.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.player_handling,
            self.terrain_rules,
            self.entities,
            self.persistence,
            self.networking,
            self.other,
        ]
    }

    pub fn from_array(values: [f64; 6]) -> Self {
        ComponentShares {
            player_handling: values[0],
            terrain_rules: values[1],
            entities: values[2],
            persistence: values[3],
            networking: values[4],
            other: values[5],
        }
    }
}

/// One iteration of the game loop, as observed by the metric capture path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Ordinal of the tick within its run.
    pub index: u64,
    /// Monotonic start timestamp, nanoseconds from the run's clock origin.
    pub start_ns: u64,
    /// Compute time of the tick; excludes the wait to the next slot.
    pub busy_ns: u64,
    pub shares: ComponentShares,
}

impl TickRecord {
    /// Shares must sum to 1 (±1e-6) whenever the tick did any work.
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.busy_ns > 0 {
            let sum = self.shares.sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(MetricsError::InvalidTrace(format!(
                    "tick {} shares sum to {sum}, expected 1",
                    self.index
                )));
            }
        }
        Ok(())
    }
}

/// An ordered run of tick records plus the measurement window they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct TickTrace {
    pub ticks: Vec<TickRecord>,
    /// Nanoseconds from the first tick's start to the end of the window.
    pub wall_duration_ns: u64,
    pub tick_period_ns: u64,
}

impl TickTrace {
    pub fn new(
        ticks: Vec<TickRecord>,
        wall_duration_ns: u64,
        tick_period_ns: u64,
    ) -> Result<Self, MetricsError> {
        if wall_duration_ns == 0 {
            return Err(MetricsError::InvalidTrace("wall duration is zero".into()));
        }
        for pair in ticks.windows(2) {
            if pair[1].start_ns < pair[0].start_ns {
                return Err(MetricsError::InvalidTrace(format!(
                    "ticks out of order at index {}",
                    pair[1].index
                )));
            }
        }
        Ok(TickTrace { ticks, wall_duration_ns, tick_period_ns })
    }

    /// Reconstruct a trace from bare records, taking the window end to be
    /// the end of the last tick's slot: `last.start + max(period, last.busy)`.
    pub fn from_records(ticks: Vec<TickRecord>, tick_period_ns: u64) -> Result<Self, MetricsError> {
        let first = ticks.first().ok_or(MetricsError::EmptyTrace)?;
        let last = ticks.last().expect("non-empty");
        let wall = last.start_ns - first.start_ns + tick_period_ns.max(last.busy_ns);
        TickTrace::new(ticks, wall, tick_period_ns)
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn busy_durations(&self) -> impl Iterator<Item = u64> + '_ {
        self.ticks.iter().map(|t| t.busy_ns)
    }
}

/// Write tick records as CSV, including the header line.
pub fn write_ticks_csv<W: Write>(
    out: &mut W,
    iteration: u32,
    ticks: &[TickRecord],
) -> io::Result<()> {
    writeln!(out, "{TICKS_CSV_HEADER}")?;
    for t in ticks {
        let s = t.shares.as_array();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            iteration, t.index, t.start_ns, t.busy_ns, s[0], s[1], s[2], s[3], s[4], s[5]
        )?;
    }
    Ok(())
}

/// Parse a tick trace CSV produced by [`write_ticks_csv`].
///
/// Blank lines and `#`-prefixed comment lines are skipped, so producers may
/// append annotations without breaking consumers.
pub fn parse_ticks_csv<R: BufRead>(input: R) -> Result<Vec<(u32, TickRecord)>, MetricsError> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::CsvParse { line: lineno + 1, reason: e.to_string() })?;
        let line = line.trim_end();
        if lineno == 0 {
            if line != TICKS_CSV_HEADER {
                return Err(MetricsError::CsvParse {
                    line: 1,
                    reason: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(MetricsError::CsvParse {
                line: lineno + 1,
                reason: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| MetricsError::CsvParse {
            line: lineno + 1,
            reason: format!("bad {what} field"),
        };
        let iteration: u32 = fields[0].parse().map_err(|_| parse_err("iteration"))?;
        let index: u64 = fields[1].parse().map_err(|_| parse_err("tick_index"))?;
        let start_ns: u64 = fields[2].parse().map_err(|_| parse_err("start_ns"))?;
        let busy_ns: u64 = fields[3].parse().map_err(|_| parse_err("busy_ns"))?;
        let mut shares = [0f64; 6];
        for (i, slot) in shares.iter_mut().enumerate() {
            *slot = fields[4 + i].parse().map_err(|_| parse_err("share"))?;
        }
        out.push((
            iteration,
            TickRecord { index, start_ns, busy_ns, shares: ComponentShares::from_array(shares) },
        ));
    }
    Ok(out)
}

/// Write RTT samples as CSV, including the header line.
pub fn write_rtt_csv<W: Write>(
    out: &mut W,
    iteration: u32,
    samples: &[crate::RttSample],
) -> io::Result<()> {
    writeln!(out, "{RTT_CSV_HEADER}")?;
    for s in samples {
        writeln!(out, "{},{},{},{}", iteration, s.sent_ns, s.recv_ns, s.rtt_ns())?;
    }
    Ok(())
}

/// Parse an RTT CSV produced by [`write_rtt_csv`].
///
/// Blank lines and `#`-prefixed comment lines are skipped, so producers may
/// append annotations without breaking consumers.
pub fn parse_rtt_csv<R: BufRead>(input: R) -> Result<Vec<(u32, crate::RttSample)>, MetricsError> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::CsvParse { line: lineno + 1, reason: e.to_string() })?;
        let line = line.trim_end();
        if lineno == 0 {
            if line != RTT_CSV_HEADER {
                return Err(MetricsError::CsvParse {
                    line: 1,
                    reason: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(MetricsError::CsvParse {
                line: lineno + 1,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| MetricsError::CsvParse {
            line: lineno + 1,
            reason: format!("bad {what} field"),
        };
        let iteration: u32 = fields[0].parse().map_err(|_| parse_err("iteration"))?;
        let sent_ns: u64 = fields[1].parse().map_err(|_| parse_err("sent_ns"))?;
        let recv_ns: u64 = fields[2].parse().map_err(|_| parse_err("recv_ns"))?;
        out.push((iteration, crate::RttSample { sent_ns, recv_ns }));
    }
    Ok(out)
}

/// Append one length-prefixed little-endian frame for a tick record.
pub fn encode_tick_frame(record: &TickRecord, out: &mut Vec<u8>) {
    out.extend_from_slice(&(TICK_FRAME_LEN as u32).to_le_bytes());
    out.extend_from_slice(&record.index.to_le_bytes());
    out.extend_from_slice(&record.start_ns.to_le_bytes());
    out.extend_from_slice(&record.busy_ns.to_le_bytes());
    for v in record.shares.as_array() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Decode a whole buffer of length-prefixed tick frames.
pub fn decode_tick_frames(buf: &[u8]) -> Result<Vec<TickRecord>, MetricsError> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    while offset < buf.len() {
        if buf.len() - offset < 4 {
            return Err(MetricsError::TruncatedFrame { offset });
        }
        let len = u32::from_le_bytes(buf[offset..offset + 4].try_into().unwrap());
        if len as usize != TICK_FRAME_LEN {
            return Err(MetricsError::BadFrameLength { len, offset });
        }
        let body_start = offset + 4;
        if buf.len() - body_start < TICK_FRAME_LEN {
            return Err(MetricsError::TruncatedFrame { offset });
        }
        let b = &buf[body_start..body_start + TICK_FRAME_LEN];
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let mut shares = [0f64; 6];
        for (i, slot) in shares.iter_mut().enumerate() {
            *slot = f64_at(24 + i * 8);
        }
        out.push(TickRecord {
            index: u64_at(0),
            start_ns: u64_at(8),
            busy_ns: u64_at(16),
            shares: ComponentShares::from_array(shares),
        });
        offset = body_start + TICK_FRAME_LEN;
    }
    Ok(out)
}
