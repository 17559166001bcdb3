//! Worker threads running the self-schedule, steal, terminate loop.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{debug, warn};
use thiserror::Error;

use crate::config::{SchedConfig, Task};
use crate::queueing::{Acquire, QueueSystem, StealEvent};
use crate::telemetry::{ChunkRecord, ProbeRecord, RunReport, Source};

/// Per-worker counters, merged into the run report after the join.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkerLoopStats {
    pub worker: usize,
    pub busy_ns: u64,
    pub idle_ns: u64,
    pub tasks_executed: usize,
    pub rows_processed: usize,
    pub steals_done: usize,
    /// Victim queues probed.
    pub steal_attempts: usize,
}

impl WorkerLoopStats {
    pub fn new(worker: usize) -> Self {
        Self { worker, ..Default::default() }
    }

    pub fn accumulate(&mut self, other: &WorkerLoopStats) {
        self.busy_ns += other.busy_ns;
        self.idle_ns += other.idle_ns;
        self.tasks_executed += other.tasks_executed;
        self.rows_processed += other.rows_processed;
        self.steals_done += other.steals_done;
        self.steal_attempts += other.steal_attempts;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PinError {
    #[error("thread affinity is not supported on this platform")]
    Unsupported,
    #[error("logical core {0} does not exist on this host")]
    InvalidCore(usize),
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("worker {worker} panicked: {message}")]
    WorkerPanic { worker: usize, message: String, partial: Box<RunReport> },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PoolOptions {
    /// Keep the occupancy view of every victim selection.
    pub record_probes: bool,
    /// Label written into the report's pipeline column.
    pub pipeline: &'static str,
}

/// Kernel results ordered by task `seq_no`, plus telemetry.
#[derive(Debug)]
pub struct PoolOutput<R> {
    pub report: RunReport,
    pub results: Vec<R>,
}

#[cfg(target_os = "linux")]
fn host_core_count() -> usize {
    // SAFETY: sysconf has no memory-safety preconditions.
    let n = unsafe { libc::sysconf(libc::_SC_NPROCESSORS_CONF) };
    if n > 0 {
        n as usize
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Restrict the calling thread (worker `worker`) to logical core `core`.
#[cfg(target_os = "linux")]
pub fn pin_worker(worker: usize, core: usize) -> Result<(), PinError> {
    if core >= host_core_count() || core >= libc::CPU_SETSIZE as usize {
        return Err(PinError::InvalidCore(core));
    }
    // SAFETY: cpu_set_t is plain data; CPU_ZERO/CPU_SET only write inside it,
    // and pid 0 addresses the calling thread.
    let ret = unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(core, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set)
    };
    if ret != 0 {
        let err = std::io::Error::last_os_error();
        return match err.raw_os_error() {
            Some(libc::EINVAL) => Err(PinError::InvalidCore(core)),
            _ => Err(PinError::Unsupported),
        };
    }
    debug!("worker {worker} pinned to core {core}");
    Ok(())
}

#[cfg(not(target_os = "linux"))]
pub fn pin_worker(_worker: usize, _core: usize) -> Result<(), PinError> {
    Err(PinError::Unsupported)
}

/// Spin, then yield, then sleep.
struct Backoff {
    step: u32,
}

impl Backoff {
    fn new() -> Self {
        Self { step: 0 }
    }

    fn reset(&mut self) {
        self.step = 0;
    }

    fn snooze(&mut self) {
        if self.step < 4 {
            for _ in 0..(1 << self.step) {
                std::hint::spin_loop();
            }
        } else if self.step < 12 {
            std::thread::yield_now();
        } else {
            std::thread::sleep(Duration::from_micros(20));
        }
        self.step = self.step.saturating_add(1);
    }
}

struct WorkerTrace<R> {
    stats: WorkerLoopStats,
    chunks: Vec<ChunkRecord>,
    steals: Vec<StealEvent>,
    probes: Vec<ProbeRecord>,
    results: Vec<(usize, R)>,
    first_start: Option<u64>,
    last_end: u64,
}

struct Panicked {
    worker: usize,
    message: String,
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

fn worker_loop<R, F>(
    cfg: &SchedConfig,
    qs: &QueueSystem,
    kernel: &F,
    opts: PoolOptions,
    worker: usize,
    epoch: Instant,
    abort: &AtomicBool,
) -> (WorkerTrace<R>, Option<Panicked>)
where
    F: Fn(&Task) -> R + Sync,
{
    if let Some(&core) = cfg.topology.pin_map().and_then(|m| m.get(worker)) {
        if let Err(e) = pin_worker(worker, core) {
            warn!("worker {worker} runs unpinned: {e}");
        }
    }
    let loop_start = Instant::now();
    let mut trace = WorkerTrace {
        stats: WorkerLoopStats::new(worker),
        chunks: Vec::new(),
        steals: Vec::new(),
        probes: Vec::new(),
        results: Vec::new(),
        first_start: None,
        last_end: 0,
    };
    let mut selector = qs.victim_selector(cfg, worker);
    let mut backoff = Backoff::new();
    let mut pending_probes = 0usize;
    let mut failure = None;

    while !abort.load(Ordering::Relaxed) {
        let (task, stolen) = match qs.acquire(worker) {
            Acquire::Task(t) => (t, false),
            Acquire::Done => break,
            Acquire::Wait => {
                backoff.snooze();
                continue;
            }
            Acquire::NeedSteal => {
                let occupancy = qs.occupancy_snapshot();
                let choice = selector.select(&occupancy);
                trace.stats.steal_attempts += choice.probes();
                pending_probes += choice.probes();
                if opts.record_probes {
                    trace.probes.push(ProbeRecord {
                        thief: worker,
                        home: selector.home(),
                        occupancy,
                        selected: choice.queue(),
                    });
                }
                match choice.queue().and_then(|q| qs.steal(worker, q).map(|t| (q, t))) {
                    Some((q, t)) => {
                        trace.steals.push(StealEvent {
                            thief: worker,
                            victim_queue: q,
                            task_seq: t.seq_no,
                            attempt_count: pending_probes,
                            t_ns: epoch.elapsed().as_nanos() as u64,
                        });
                        pending_probes = 0;
                        (t, true)
                    }
                    None => {
                        backoff.snooze();
                        continue;
                    }
                }
            }
        };
        backoff.reset();

        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| kernel(&task)));
        let end = Instant::now();
        let start_ns = start.duration_since(epoch).as_nanos() as u64;
        match outcome {
            Ok(r) => trace.results.push((task.seq_no, r)),
            Err(payload) => {
                abort.store(true, Ordering::Relaxed);
                failure = Some(Panicked { worker, message: panic_message(payload) });
                break;
            }
        }
        trace.stats.busy_ns += end.duration_since(start).as_nanos() as u64;
        trace.stats.tasks_executed += 1;
        trace.stats.rows_processed += task.range.len;
        if stolen {
            trace.stats.steals_done += 1;
        }
        trace.first_start.get_or_insert(start_ns);
        trace.last_end = end.duration_since(epoch).as_nanos() as u64;
        trace.chunks.push(ChunkRecord {
            seq_no: task.seq_no,
            start: task.range.start,
            size: task.range.len,
            worker,
            t_ns: start_ns,
            stolen,
            origin_group: task.origin_group,
        });
        qs.complete(worker);
    }
    let wall = loop_start.elapsed().as_nanos() as u64;
    trace.stats.idle_ns = wall.saturating_sub(trace.stats.busy_ns);
    (trace, failure)
}

/// Execute every task of `qs` once on `cfg.workers()` threads.
pub fn run_pool<R, F>(cfg: &SchedConfig, qs: &QueueSystem, kernel: F) -> Result<PoolOutput<R>, PoolError>
where
    F: Fn(&Task) -> R + Sync,
    R: Send,
{
    run_pool_with(cfg, qs, PoolOptions::default(), kernel)
}

pub fn run_pool_with<R, F>(
    cfg: &SchedConfig,
    qs: &QueueSystem,
    opts: PoolOptions,
    kernel: F,
) -> Result<PoolOutput<R>, PoolError>
where
    F: Fn(&Task) -> R + Sync,
    R: Send,
{
    let workers = cfg.workers();
    assert_eq!(workers, qs.topology().worker_count(), "queue system built for another topology");
    let abort = AtomicBool::new(false);
    let traces = Mutex::new(Vec::with_capacity(workers));
    let epoch = Instant::now();

    std::thread::scope(|s| {
        for w in 0..workers {
            let (kernel, abort, traces) = (&kernel, &abort, &traces);
            s.spawn(move || {
                let out = worker_loop(cfg, qs, kernel, opts, w, epoch, abort);
                traces.lock().expect("trace lock poisoned").push(out);
            });
        }
    });

    let mut traces = traces.into_inner().expect("trace lock poisoned");
    traces.sort_by_key(|(t, _)| t.stats.worker);

    let pipeline = if opts.pipeline.is_empty() { "synthetic" } else { opts.pipeline };
    let mut report = RunReport::empty(Source::Real, pipeline, cfg);
    report.iterations = 1;
    let first = traces.iter().filter_map(|(t, _)| t.first_start).min().unwrap_or(0);
    let last = traces.iter().map(|(t, _)| t.last_end).max().unwrap_or(0);
    report.makespan_ns = last.saturating_sub(first);

    let mut results = Vec::with_capacity(qs.total_tasks());
    let mut failure = None;
    for (trace, panicked) in traces {
        let w = trace.stats.worker;
        report.worker_stats[w] = trace.stats;
        report.chunks.extend(trace.chunks);
        report.steals.extend(trace.steals);
        report.probes.extend(trace.probes);
        results.extend(trace.results);
        if failure.is_none() {
            failure = panicked;
        }
    }
    report.chunks.sort_by_key(|c| c.seq_no);
    report.steals.sort_by_key(|s| (s.t_ns, s.thief));

    if let Some(Panicked { worker, message }) = failure {
        return Err(PoolError::WorkerPanic { worker, message, partial: Box::new(report) });
    }
    results.sort_by_key(|(seq, _)| *seq);
    debug_assert!(results.iter().enumerate().all(|(i, (seq, _))| i == *seq));
    Ok(PoolOutput { report, results: results.into_iter().map(|(_, r)| r).collect() })
}
