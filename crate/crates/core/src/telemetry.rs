//! Run reports, load-imbalance metrics and CSV export.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{LayoutId, SchedConfig, SchemeId, VictimStrategy};
use crate::queueing::StealEvent;
use crate::workerpool::WorkerLoopStats;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("imbalance is undefined when the mean busy time is zero")]
    DegenerateInput,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether a report comes from threaded execution or the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Sim,
}

/// One executed task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub seq_no: usize,
    pub start: usize,
    pub size: usize,
    pub worker: usize,
    /// Execution start, nanoseconds since run start.
    pub t_ns: u64,
    pub stolen: bool,
    pub origin_group: Option<usize>,
}

/// Occupancy view a thief selected from, kept when probe logging is on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeRecord {
    pub thief: usize,
    pub home: usize,
    pub occupancy: Vec<usize>,
    pub selected: Option<usize>,
}

/// Merged telemetry of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub source: Source,
    pub pipeline: String,
    pub scheme: SchemeId,
    pub layout: LayoutId,
    pub victim: VictimStrategy,
    pub workers: usize,
    pub groups: String,
    pub rep: usize,
    pub makespan_ns: u64,
    pub worker_stats: Vec<WorkerLoopStats>,
    pub chunks: Vec<ChunkRecord>,
    pub steals: Vec<StealEvent>,
    pub probes: Vec<ProbeRecord>,
    pub iterations: usize,
}

impl RunReport {
    pub fn empty(source: Source, pipeline: &str, cfg: &SchedConfig) -> Self {
        Self {
            source,
            pipeline: pipeline.to_string(),
            scheme: cfg.scheme,
            layout: cfg.layout,
            victim: cfg.victim,
            workers: cfg.workers(),
            groups: cfg.topology.describe(),
            rep: 0,
            makespan_ns: 0,
            worker_stats: (0..cfg.workers()).map(WorkerLoopStats::new).collect(),
            chunks: Vec::new(),
            steals: Vec::new(),
            probes: Vec::new(),
            iterations: 0,
        }
    }

    /// Append a later phase of the same repetition (e.g. another label
    /// propagation pass). Its timestamps are shifted past this report's makespan.
    pub fn absorb(&mut self, phase: RunReport) {
        let offset = self.makespan_ns;
        self.makespan_ns += phase.makespan_ns;
        for (mine, theirs) in self.worker_stats.iter_mut().zip(&phase.worker_stats) {
            mine.accumulate(theirs);
        }
        self.chunks.extend(phase.chunks.into_iter().map(|mut c| {
            c.t_ns += offset;
            c
        }));
        self.steals.extend(phase.steals.into_iter().map(|mut s| {
            s.t_ns += offset;
            s
        }));
        self.probes.extend(phase.probes);
        self.iterations += phase.iterations;
    }

    pub fn busy_ns(&self) -> Vec<f64> {
        self.worker_stats.iter().map(|w| w.busy_ns as f64).collect()
    }

    pub fn rows_processed(&self) -> usize {
        self.worker_stats.iter().map(|w| w.rows_processed).sum()
    }

    pub fn imbalance(&self) -> Result<ImbalanceStats, TelemetryError> {
        imbalance(&self.busy_ns())
    }

    pub fn summary(&self) -> SummaryRow {
        let stats = self.imbalance().ok();
        SummaryRow {
            pipeline: self.pipeline.clone(),
            scheme: self.scheme,
            layout: self.layout,
            victim: self.victim,
            workers: self.workers,
            rep: self.rep,
            makespan_ns: self.makespan_ns,
            cov: stats.map(|s| s.cov),
            percent_imbalance: stats.map(|s| s.percent_imbalance),
            steals: self.steals.len(),
            chunks: self.chunks.len(),
            iterations: self.iterations,
            source: self.source,
        }
    }
}

/// Dispersion of per-worker busy times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceStats {
    pub mean: f64,
    pub max: f64,
    /// Population standard deviation over the mean.
    pub cov: f64,
    /// `max / mean − 1`.
    pub percent_imbalance: f64,
}

pub fn imbalance(busy: &[f64]) -> Result<ImbalanceStats, TelemetryError> {
    if busy.is_empty() {
        return Err(TelemetryError::DegenerateInput);
    }
    let n = busy.len() as f64;
    let mean = busy.iter().sum::<f64>() / n;
    if mean <= 0.0 || !mean.is_finite() {
        return Err(TelemetryError::DegenerateInput);
    }
    let max = busy.iter().copied().fold(f64::MIN, f64::max);
    let var = busy.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / n;
    Ok(ImbalanceStats {
        mean,
        max,
        cov: var.sqrt() / mean,
        percent_imbalance: (max / mean - 1.0).max(0.0),
    })
}

/// One CSV summary line; columns in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub pipeline: String,
    pub scheme: SchemeId,
    pub layout: LayoutId,
    pub victim: VictimStrategy,
    pub workers: usize,
    pub rep: usize,
    pub makespan_ns: u64,
    pub cov: Option<f64>,
    pub percent_imbalance: Option<f64>,
    pub steals: usize,
    pub chunks: usize,
    pub iterations: usize,
    pub source: Source,
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "pipeline",
    "scheme",
    "layout",
    "victim",
    "workers",
    "rep",
    "makespan_ns",
    "cov",
    "percent_imbalance",
    "steals",
    "chunks",
    "iterations",
    "source",
];

/// Write one summary row per report. Returns the number of data rows.
pub fn write_csv<W: Write>(reports: &[RunReport], sink: W) -> Result<usize, TelemetryError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        w.serialize(r.summary())?;
    }
    w.flush()?;
    Ok(reports.len())
}

pub fn read_csv<R: Read>(source: R) -> Result<Vec<SummaryRow>, TelemetryError> {
    let mut r = csv::Reader::from_reader(source);
    Ok(r.deserialize().collect::<Result<Vec<SummaryRow>, _>>()?)
}

/// Per-task detail: one line per executed chunk.
pub fn write_chunk_csv<W: Write>(reports: &[RunReport], sink: W) -> Result<usize, TelemetryError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "pipeline", "scheme", "layout", "victim", "rep", "seq_no", "start", "size", "worker", "t_ns", "stolen",
        "origin_group",
    ])?;
    let mut rows = 0;
    for r in reports {
        for c in &r.chunks {
            w.write_record([
                r.pipeline.clone(),
                r.scheme.to_string(),
                r.layout.to_string(),
                r.victim.to_string(),
                r.rep.to_string(),
                c.seq_no.to_string(),
                c.start.to_string(),
                c.size.to_string(),
                c.worker.to_string(),
                c.t_ns.to_string(),
                c.stolen.to_string(),
                c.origin_group.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

/// Per-steal detail: one line per successful steal.
pub fn write_steal_csv<W: Write>(reports: &[RunReport], sink: W) -> Result<usize, TelemetryError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["pipeline", "scheme", "layout", "victim", "rep", "thief", "victim_queue", "task_seq", "attempts", "t_ns"])?;
    let mut rows = 0;
    for r in reports {
        for s in &r.steals {
            w.write_record([
                r.pipeline.clone(),
                r.scheme.to_string(),
                r.layout.to_string(),
                r.victim.to_string(),
                r.rep.to_string(),
                s.thief.to_string(),
                s.victim_queue.to_string(),
                s.task_seq.to_string(),
                s.attempt_count.to_string(),
                s.t_ns.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}
