//! Deterministic discrete-event model of the scheduler.
//!
//! Workers consume the same [`TaskPlan`](crate::queueing::TaskPlan) the threaded runtime would build.
//! Time advances in integer nanosecond ticks: every acquisition costs `h`,
//! every victim probe costs `steal_latency`, and a task costs the sum of its
//! rows' costs. Events are ordered by `(time, worker)`, so identical inputs
//! give identical reports.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

use crate::config::{LayoutId, SchedConfig, SchemeId, Topology, VictimStrategy};
use crate::data::{gen_costs, CostDist, CostVector, DataError};
use crate::queueing::{plan_tasks, QueueError, StealEvent, VictimChoice, VictimSelector};
use crate::telemetry::{ChunkRecord, ProbeRecord, RunReport, Source, SummaryRow};

pub const DEFAULT_NS_PER_UNIT: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sched: SchedConfig,
    /// Cost units charged per task acquisition.
    pub acquire_overhead: f64,
    /// Cost units charged per victim probe.
    pub steal_latency: f64,
    /// Ticks (nanoseconds) per cost unit.
    pub ns_per_unit: f64,
    pub record_probes: bool,
}

impl SimConfig {
    pub fn new(sched: SchedConfig) -> Self {
        Self { sched, acquire_overhead: 0.0, steal_latency: 0.0, ns_per_unit: DEFAULT_NS_PER_UNIT, record_probes: false }
    }

    pub fn with_overhead(mut self, h: f64) -> Self {
        self.acquire_overhead = h;
        self
    }

    pub fn with_steal_latency(mut self, latency: f64) -> Self {
        self.steal_latency = latency;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.acquire_overhead) || !ok(self.steal_latency) {
            return Err(SimError::InvalidParams("overhead and steal latency must be non-negative".into()));
        }
        if !(self.ns_per_unit > 0.0 && self.ns_per_unit.is_finite()) {
            return Err(SimError::InvalidParams("ns_per_unit must be positive".into()));
        }
        Ok(())
    }

    fn ticks(&self, units: f64) -> u64 {
        (units * self.ns_per_unit).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub makespan_ns: u64,
    /// Time each worker found no more work.
    pub finish_ns: Vec<u64>,
    /// Same shape as a threaded run, with `source = sim`.
    pub report: RunReport,
}

impl SimReport {
    pub fn summary(&self) -> SummaryRow {
        self.report.summary()
    }
}

struct WorkerState {
    selector: VictimSelector,
    home: usize,
    probes_since_task: usize,
}

pub fn simulate(cfg: &SimConfig, costs: &CostVector) -> Result<SimReport, SimError> {
    cfg.validate()?;
    let sched = &cfg.sched;
    let plan = plan_tasks(sched, costs.len(), 0)?;
    let w_count = sched.workers();

    let mut prefix = Vec::with_capacity(costs.len() + 1);
    prefix.push(0u64);
    for &c in costs.as_slice() {
        prefix.push(prefix.last().unwrap() + cfg.ticks(c));
    }
    let task_ticks = |start: usize, len: usize| prefix[start + len] - prefix[start];
    let h = cfg.ticks(cfg.acquire_overhead);
    let probe = cfg.ticks(cfg.steal_latency);

    let mut queues: Vec<VecDeque<_>> = plan.queues.iter().cloned().map(VecDeque::from).collect();
    let mut workers: Vec<WorkerState> = (0..w_count)
        .map(|w| WorkerState {
            selector: VictimSelector::new(sched.victim, plan.home[w], &plan.queue_groups, sched.rng_seed, w),
            home: plan.home[w],
            probes_since_task: 0,
        })
        .collect();

    let mut report = RunReport::empty(Source::Sim, "synthetic", sched);
    report.iterations = 1;
    let mut finish = vec![0u64; w_count];
    let mut events: BinaryHeap<Reverse<(u64, usize)>> = (0..w_count).map(|w| Reverse((0, w))).collect();

    while let Some(Reverse((now, w))) = events.pop() {
        let state = &mut workers[w];
        let (task, stolen, probe_cost) = if let Some(t) = queues[state.home].pop_front() {
            (t, false, 0)
        } else if plan.layout == LayoutId::Centralized {
            finish[w] = now;
            continue;
        } else {
            let occupancy: Vec<usize> = queues.iter().map(VecDeque::len).collect();
            let choice = state.selector.select(&occupancy);
            if cfg.record_probes {
                report.probes.push(ProbeRecord { thief: w, home: state.home, occupancy, selected: choice.queue() });
            }
            let stats = &mut report.worker_stats[w];
            stats.steal_attempts += choice.probes();
            state.probes_since_task += choice.probes();
            match choice {
                VictimChoice::NoVictim { .. } => {
                    finish[w] = now;
                    continue;
                }
                VictimChoice::Found { queue, probes } => {
                    let t = if plan.layout == LayoutId::PerWorker {
                        queues[queue].pop_back()
                    } else {
                        queues[queue].pop_front()
                    }
                    .expect("selected victim has tasks");
                    report.steals.push(StealEvent {
                        thief: w,
                        victim_queue: queue,
                        task_seq: t.seq_no,
                        attempt_count: state.probes_since_task,
                        t_ns: now,
                    });
                    stats.steals_done += 1;
                    (t, true, probes as u64 * probe)
                }
            }
        };
        state.probes_since_task = 0;
        let work = task_ticks(task.range.start, task.range.len);
        let cost = h + probe_cost + work;
        let stats = &mut report.worker_stats[w];
        stats.busy_ns += cost;
        stats.tasks_executed += 1;
        stats.rows_processed += task.range.len;
        report.chunks.push(ChunkRecord {
            seq_no: task.seq_no,
            start: task.range.start,
            size: task.range.len,
            worker: w,
            t_ns: now,
            stolen,
            origin_group: task.origin_group,
        });
        events.push(Reverse((now + cost, w)));
    }

    let makespan = finish.iter().copied().max().unwrap_or(0);
    for (s, &f) in report.worker_stats.iter_mut().zip(&finish) {
        debug_assert!(s.busy_ns <= f);
        s.idle_ns = makespan - s.busy_ns;
    }
    report.makespan_ns = makespan;
    report.chunks.sort_by_key(|c| c.seq_no);
    Ok(SimReport { makespan_ns: makespan, finish_ns: finish, report })
}

/// Named cost distribution; one cost vector is drawn per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CostScenario {
    pub name: String,
    pub dist: CostDist,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub schemes: Vec<SchemeId>,
    pub layouts: Vec<LayoutId>,
    pub victims: Vec<VictimStrategy>,
    pub topologies: Vec<Topology>,
    pub scenarios: Vec<CostScenario>,
    /// Cost-vector and victim RNG seeds; each becomes one repetition.
    pub seeds: Vec<u64>,
    pub acquire_overhead: f64,
    pub steal_latency: f64,
    pub min_chunk: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub seed: u64,
    pub makespan_ns: u64,
    pub summary: SummaryRow,
}

/// Evaluate the full cross product. Rows are ordered scenario, topology,
/// scheme, layout, victim, then seed.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, SimError> {
    let mut rows = Vec::new();
    for scenario in &grid.scenarios {
        let costs: Vec<CostVector> =
            grid.seeds.iter().map(|&s| gen_costs(scenario.dist, scenario.count, s)).collect::<Result<_, _>>()?;
        for topo in &grid.topologies {
            for &scheme in &grid.schemes {
                for &layout in &grid.layouts {
                    for &victim in &grid.victims {
                        for (rep, (&seed, c)) in grid.seeds.iter().zip(&costs).enumerate() {
                            let sched = SchedConfig::new(scheme, layout, victim, topo.clone())
                                .with_min_chunk(grid.min_chunk)
                                .with_seed(seed);
                            let cfg = SimConfig::new(sched)
                                .with_overhead(grid.acquire_overhead)
                                .with_steal_latency(grid.steal_latency);
                            let mut r = simulate(&cfg, c)?;
                            r.report.rep = rep;
                            rows.push(SweepRow {
                                scenario: scenario.name.clone(),
                                seed,
                                makespan_ns: r.makespan_ns,
                                summary: r.summary(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitioner::chunk_sequence;

    fn costs(v: &[f64]) -> CostVector {
        CostVector::new(v.to_vec()).unwrap()
    }

    fn central(scheme: SchemeId, p: usize, h: f64) -> SimConfig {
        SimConfig::new(SchedConfig::centralized(scheme, p).unwrap()).with_overhead(h)
    }

    #[test]
    fn skewed_four_tasks() {
        let c = costs(&[3.0, 1.0, 1.0, 1.0]);
        assert_eq!(simulate(&central(SchemeId::Ss, 2, 0.0), &c).unwrap().makespan_ns, 3000);
        assert_eq!(simulate(&central(SchemeId::Static, 2, 0.0), &c).unwrap().makespan_ns, 4000);
    }

    #[test]
    fn fine_chunks_pay_overhead() {
        let c = costs(&[1.0; 100]);
        assert_eq!(simulate(&central(SchemeId::Static, 2, 1.0), &c).unwrap().makespan_ns, 51_000);
        assert_eq!(simulate(&central(SchemeId::Ss, 2, 1.0), &c).unwrap().makespan_ns, 100_000);
    }

    #[test]
    fn chunk_trace_matches_partitioner() {
        let c = gen_costs(CostDist::Pareto { shape: 1.5, scale: 1.0 }, 300, 4).unwrap();
        for &scheme in SchemeId::ALL {
            let r = simulate(&central(scheme, 7, 0.5), &c).unwrap();
            let sizes: Vec<usize> = r.report.chunks.iter().map(|k| k.size).collect();
            let defaults = crate::config::SchemeParams::default();
            assert_eq!(sizes, chunk_sequence(scheme, 300, 7, &defaults).unwrap(), "{scheme}");
            assert_eq!(r.report.rows_processed(), 300);
            assert!(r.makespan_ns >= r.report.worker_stats.iter().map(|s| s.busy_ns).max().unwrap());
        }
    }

    #[test]
    fn stealing_layouts_run_everything() {
        let c = gen_costs(CostDist::Uniform { low: 0.5, high: 3.0 }, 500, 1).unwrap();
        let topo = Topology::uniform(2, 3).unwrap();
        for &layout in &[LayoutId::PerWorker, LayoutId::PerGroup] {
            for &victim in VictimStrategy::ALL {
                let sched = SchedConfig::new(SchemeId::Fac2, layout, victim, topo.clone());
                let cfg = SimConfig::new(sched).with_steal_latency(0.2);
                let a = simulate(&cfg, &c).unwrap();
                assert_eq!(a, simulate(&cfg, &c).unwrap());
                let mut seqs: Vec<usize> = a.report.chunks.iter().map(|k| k.seq_no).collect();
                seqs.dedup();
                assert_eq!(seqs.len(), a.report.chunks.len());
                assert_eq!(a.report.rows_processed(), 500);
                assert_eq!(a.report.steals.len(), a.report.chunks.iter().filter(|k| k.stolen).count());
            }
        }
    }

    #[test]
    fn sweep_order_and_determinism() {
        let grid = SweepGrid {
            schemes: vec![SchemeId::Static, SchemeId::Ss],
            layouts: vec![LayoutId::Centralized],
            victims: vec![VictimStrategy::Seq],
            topologies: vec![Topology::flat(4).unwrap()],
            scenarios: vec![CostScenario {
                name: "skew".into(),
                dist: CostDist::Pareto { shape: 1.5, scale: 1.0 },
                count: 200,
            }],
            seeds: vec![3],
            acquire_overhead: 0.0,
            steal_latency: 0.0,
            min_chunk: 1,
        };
        let rows = sweep(&grid).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].summary.scheme, SchemeId::Static);
        assert!(rows[1].makespan_ns <= rows[0].makespan_ns);
        assert_eq!(rows, sweep(&grid).unwrap());
        assert!(rows.iter().all(|r| r.summary.source == Source::Sim));
    }

    #[test]
    fn rejects_negative_overhead() {
        let cfg = central(SchemeId::Gss, 2, -1.0);
        assert!(matches!(simulate(&cfg, &costs(&[1.0])), Err(SimError::InvalidParams(_))));
    }
}
