//! Task materialization and queue layouts.
//!
//! Partitioner chunks become [`Task`]s that are placed into one of three
//! layouts: a single central queue, one queue per worker, or one queue per
//! worker group. All tasks exist before any worker starts, so every queue is
//! an immutable task array plus atomic cursors: owners pop from the front,
//! thieves of a per-worker queue pop from the back, and shared queues hand
//! out tasks in FIFO order to everybody.

mod victim;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use thiserror::Error;

use crate::config::{LayoutId, OpId, RowRange, SchedConfig, Task, Topology};
use crate::partitioner::{PartitionError, Partitioner};

pub use victim::{probe_order, select_victim, VictimChoice, VictimSelector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("invalid queue configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Queue contents decided before execution starts. Shared by the threaded
/// runtime and the simulator so both consume identical tasks.
#[derive(Debug, Clone)]
pub struct TaskPlan {
    pub layout: LayoutId,
    /// Tasks per queue in pop order.
    pub queues: Vec<Vec<Task>>,
    /// Group owning each queue (all zero for the centralized layout).
    pub queue_groups: Vec<usize>,
    /// Home queue of each worker.
    pub home: Vec<usize>,
    /// Row blocks with an independent partitioner each (one block unless PER_GROUP).
    pub blocks: Vec<RowRange>,
    /// Chunk sizes in creation order, i.e. by `seq_no`.
    pub chunk_sizes: Vec<usize>,
}

impl TaskPlan {
    pub fn task_count(&self) -> usize {
        self.chunk_sizes.len()
    }

    /// Tasks of every queue, ordered by `seq_no`.
    pub fn tasks_by_seq(&self) -> Vec<Task> {
        let mut all: Vec<Task> = self.queues.iter().flatten().copied().collect();
        all.sort_by_key(|t| t.seq_no);
        all
    }
}

fn partitioner_for(cfg: &SchedConfig, block: RowRange, workers: usize) -> Result<Partitioner, QueueError> {
    Ok(Partitioner::new(cfg.scheme, block.len, workers, &cfg.params)?
        .with_min_chunk(cfg.min_chunk)
        .with_base(block.start))
}

/// Split `0..rows` into `groups` contiguous blocks of `⌈rows/groups⌉`, the
/// last one clipped. Groups beyond the end of the row space get no block.
pub fn group_blocks(rows: usize, groups: usize) -> Vec<RowRange> {
    let width = rows.div_ceil(groups.max(1));
    (0..groups)
        .map(|g| g * width)
        .take_while(|&start| start < rows)
        .map(|start| RowRange::new(start, width.min(rows - start)))
        .collect()
}

/// Run the partitioner(s) for `cfg` over `rows` rows and place the tasks.
pub fn plan_tasks(cfg: &SchedConfig, rows: usize, op_id: OpId) -> Result<TaskPlan, QueueError> {
    if rows == 0 {
        return Err(QueueError::InvalidConfig("row count must be positive".into()));
    }
    cfg.validate().map_err(|e| QueueError::InvalidConfig(e.to_string()))?;
    let topo = &cfg.topology;
    let w = topo.worker_count();
    let mut chunk_sizes = Vec::new();
    let mut next_seq = 0usize;
    let mut make_task = |start: usize, size: usize, origin: Option<usize>, sizes: &mut Vec<usize>| {
        sizes.push(size);
        let t = Task { range: RowRange::new(start, size), op_id, seq_no: next_seq, origin_group: origin };
        next_seq += 1;
        t
    };

    match cfg.layout {
        LayoutId::Centralized => {
            let block = RowRange::new(0, rows);
            let tasks = partitioner_for(cfg, block, w)?
                .map(|c| make_task(c.start, c.size, None, &mut chunk_sizes))
                .collect();
            Ok(TaskPlan {
                layout: cfg.layout,
                queues: vec![tasks],
                queue_groups: vec![0],
                home: vec![0; w],
                blocks: vec![block],
                chunk_sizes,
            })
        }
        LayoutId::PerWorker => {
            let block = RowRange::new(0, rows);
            let mut queues = vec![Vec::new(); w];
            for (s, c) in partitioner_for(cfg, block, w)?.enumerate() {
                let q = s % w;
                queues[q].push(make_task(c.start, c.size, Some(topo.group_of(q)), &mut chunk_sizes));
            }
            Ok(TaskPlan {
                layout: cfg.layout,
                queues,
                queue_groups: (0..w).map(|q| topo.group_of(q)).collect(),
                home: (0..w).collect(),
                blocks: vec![block],
                chunk_sizes,
            })
        }
        LayoutId::PerGroup => {
            let g = topo.group_count();
            let blocks = group_blocks(rows, g);
            let mut queues = vec![Vec::new(); g];
            for (gid, block) in blocks.iter().enumerate() {
                let members = topo.groups()[gid].len();
                for c in partitioner_for(cfg, *block, members)? {
                    queues[gid].push(make_task(c.start, c.size, Some(gid), &mut chunk_sizes));
                }
            }
            Ok(TaskPlan {
                layout: cfg.layout,
                queues,
                queue_groups: (0..g).collect(),
                home: (0..w).map(|wk| topo.group_of(wk)).collect(),
                blocks,
                chunk_sizes,
            })
        }
    }
}

#[repr(align(128))]
#[derive(Debug, Default)]
struct Padded<T>(T);

/// Shared FIFO over a fixed task array; every consumer takes from the front.
#[derive(Debug)]
struct FifoQueue {
    tasks: Box<[Task]>,
    head: Padded<AtomicUsize>,
}

impl FifoQueue {
    fn pop(&self) -> Option<Task> {
        if self.head.0.load(Ordering::Relaxed) >= self.tasks.len() {
            return None;
        }
        let i = self.head.0.fetch_add(1, Ordering::AcqRel);
        self.tasks.get(i).copied()
    }

    fn len(&self) -> usize {
        self.tasks.len().saturating_sub(self.head.0.load(Ordering::Relaxed))
    }
}

/// Owner-local deque over a fixed task array. `bounds` packs the front
/// cursor (low 32 bits) and the back cursor (high 32 bits) so both ends are
/// claimed by a single compare-and-swap.
#[derive(Debug)]
struct OwnedDeque {
    tasks: Box<[Task]>,
    bounds: Padded<AtomicU64>,
}

impl OwnedDeque {
    fn new(tasks: Vec<Task>) -> Self {
        assert!(tasks.len() < u32::MAX as usize, "queue too long for packed cursors");
        let back = (tasks.len() as u64) << 32;
        Self { tasks: tasks.into_boxed_slice(), bounds: Padded(AtomicU64::new(back)) }
    }

    fn unpack(b: u64) -> (usize, usize) {
        ((b & 0xffff_ffff) as usize, (b >> 32) as usize)
    }

    fn pack(front: usize, back: usize) -> u64 {
        ((back as u64) << 32) | front as u64
    }

    fn take(&self, from_back: bool) -> Option<Task> {
        let mut cur = self.bounds.0.load(Ordering::Acquire);
        loop {
            let (front, back) = Self::unpack(cur);
            if front >= back {
                return None;
            }
            let (next, idx) = if from_back {
                (Self::pack(front, back - 1), back - 1)
            } else {
                (Self::pack(front + 1, back), front)
            };
            match self.bounds.0.compare_exchange_weak(cur, next, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => return Some(self.tasks[idx]),
                Err(actual) => cur = actual,
            }
        }
    }

    fn len(&self) -> usize {
        let (front, back) = Self::unpack(self.bounds.0.load(Ordering::Relaxed));
        back.saturating_sub(front)
    }
}

#[derive(Debug)]
enum TaskQueue {
    Fifo(FifoQueue),
    Owned(OwnedDeque),
}

impl TaskQueue {
    fn pop_owner(&self) -> Option<Task> {
        match self {
            TaskQueue::Fifo(q) => q.pop(),
            TaskQueue::Owned(q) => q.take(false),
        }
    }

    fn pop_thief(&self) -> Option<Task> {
        match self {
            TaskQueue::Fifo(q) => q.pop(),
            TaskQueue::Owned(q) => q.take(true),
        }
    }

    fn len(&self) -> usize {
        match self {
            TaskQueue::Fifo(q) => q.len(),
            TaskQueue::Owned(q) => q.len(),
        }
    }
}

/// Outcome of a worker asking its home queue for work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquire {
    Task(Task),
    /// Home queue empty, other queues may still hold tasks.
    NeedSteal,
    /// Centralized queue empty while other workers still run tasks.
    Wait,
    /// Every task has completed.
    Done,
}

/// Thief removed one task from a victim queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StealEvent {
    pub thief: usize,
    pub victim_queue: usize,
    pub task_seq: usize,
    /// Queues probed since the thief's last successful acquisition, including the hit.
    pub attempt_count: usize,
    /// Nanoseconds since run start.
    pub t_ns: u64,
}

/// Concurrent queue set for one scheduled operation.
#[derive(Debug)]
pub struct QueueSystem {
    layout: LayoutId,
    topology: Topology,
    queues: Vec<TaskQueue>,
    queue_groups: Vec<usize>,
    home: Vec<usize>,
    blocks: Vec<RowRange>,
    chunk_sizes: Vec<usize>,
    total_tasks: usize,
    completed: Vec<Padded<AtomicUsize>>,
}

impl QueueSystem {
    pub fn build(cfg: &SchedConfig, rows: usize, op_id: OpId) -> Result<Self, QueueError> {
        let plan = plan_tasks(cfg, rows, op_id)?;
        Ok(Self::from_plan(plan, cfg.topology.clone()))
    }

    pub fn from_plan(plan: TaskPlan, topology: Topology) -> Self {
        let total_tasks = plan.task_count();
        let queues = plan
            .queues
            .into_iter()
            .map(|tasks| match plan.layout {
                LayoutId::PerWorker => TaskQueue::Owned(OwnedDeque::new(tasks)),
                _ => TaskQueue::Fifo(FifoQueue { tasks: tasks.into_boxed_slice(), head: Padded::default() }),
            })
            .collect();
        let completed = (0..topology.worker_count()).map(|_| Padded::default()).collect();
        Self {
            layout: plan.layout,
            topology,
            queues,
            queue_groups: plan.queue_groups,
            home: plan.home,
            blocks: plan.blocks,
            chunk_sizes: plan.chunk_sizes,
            total_tasks,
            completed,
        }
    }

    pub fn layout(&self) -> LayoutId {
        self.layout
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn queue_count(&self) -> usize {
        self.queues.len()
    }

    pub fn home_queue(&self, worker: usize) -> usize {
        self.home[worker]
    }

    pub fn queue_groups(&self) -> &[usize] {
        &self.queue_groups
    }

    pub fn blocks(&self) -> &[RowRange] {
        &self.blocks
    }

    /// Chunk sizes by `seq_no`.
    pub fn chunk_sizes(&self) -> &[usize] {
        &self.chunk_sizes
    }

    pub fn total_tasks(&self) -> usize {
        self.total_tasks
    }

    /// Tasks not yet reported complete.
    pub fn remaining(&self) -> usize {
        let done: usize = self.completed.iter().map(|c| c.0.load(Ordering::Acquire)).sum();
        self.total_tasks - done
    }

    /// Approximate task count of queue `q`.
    pub fn occupancy(&self, q: usize) -> usize {
        self.queues[q].len()
    }

    pub fn occupancy_snapshot(&self) -> Vec<usize> {
        self.queues.iter().map(TaskQueue::len).collect()
    }

    pub fn acquire(&self, worker: usize) -> Acquire {
        if let Some(t) = self.queues[self.home[worker]].pop_owner() {
            return Acquire::Task(t);
        }
        if self.remaining() == 0 {
            Acquire::Done
        } else if self.layout == LayoutId::Centralized {
            Acquire::Wait
        } else {
            Acquire::NeedSteal
        }
    }

    /// One task from `victim_queue`, or `None` if it drained meanwhile.
    pub fn steal(&self, thief: usize, victim_queue: usize) -> Option<Task> {
        debug_assert_ne!(self.home[thief], victim_queue, "a worker cannot steal from its own queue");
        self.queues[victim_queue].pop_thief()
    }

    /// Record that `worker` finished a task.
    pub fn complete(&self, worker: usize) {
        self.completed[worker].0.fetch_add(1, Ordering::AcqRel);
    }

    /// Per-thief victim selector seeded from `(seed, thief)`.
    pub fn victim_selector(&self, cfg: &SchedConfig, thief: usize) -> VictimSelector {
        VictimSelector::new(cfg.victim, self.home[thief], &self.queue_groups, cfg.rng_seed, thief)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SchemeId, VictimStrategy};

    fn cfg(scheme: SchemeId, layout: LayoutId, topo: Topology) -> SchedConfig {
        SchedConfig::new(scheme, layout, VictimStrategy::Seq, topo)
    }

    fn sizes(q: &[Task]) -> Vec<usize> {
        q.iter().map(|t| t.range.len).collect()
    }

    #[test]
    fn centralized_static() {
        let plan = plan_tasks(&cfg(SchemeId::Static, LayoutId::Centralized, Topology::flat(4).unwrap()), 100, 0)
            .unwrap();
        assert_eq!(plan.queues.len(), 1);
        assert_eq!(sizes(&plan.queues[0]), vec![25; 4]);
        assert!(plan.queues[0].iter().all(|t| t.origin_group.is_none()));
        assert_eq!(plan.home, vec![0; 4]);
    }

    #[test]
    fn per_group_prepartitions_blocks() {
        let plan = plan_tasks(&cfg(SchemeId::Static, LayoutId::PerGroup, Topology::uniform(2, 2).unwrap()), 100, 0)
            .unwrap();
        assert_eq!(plan.blocks, vec![RowRange::new(0, 50), RowRange::new(50, 50)]);
        let q0: Vec<_> = plan.queues[0].iter().map(|t| (t.range.start, t.range.len)).collect();
        let q1: Vec<_> = plan.queues[1].iter().map(|t| (t.range.start, t.range.len)).collect();
        assert_eq!(q0, vec![(0, 25), (25, 25)]);
        assert_eq!(q1, vec![(50, 25), (75, 25)]);
        assert!(plan.queues[1].iter().all(|t| t.origin_group == Some(1)));
        assert_eq!(plan.home, vec![0, 0, 1, 1]);
    }

    #[test]
    fn per_worker_round_robin() {
        let plan = plan_tasks(&cfg(SchemeId::Ss, LayoutId::PerWorker, Topology::flat(2).unwrap()), 4, 0).unwrap();
        let seqs: Vec<Vec<usize>> = plan.queues.iter().map(|q| q.iter().map(|t| t.seq_no).collect()).collect();
        assert_eq!(seqs, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn more_groups_than_rows() {
        let plan = plan_tasks(&cfg(SchemeId::Gss, LayoutId::PerGroup, Topology::uniform(4, 1).unwrap()), 3, 0)
            .unwrap();
        assert_eq!(plan.blocks.len(), 3);
        assert!(plan.queues[3].is_empty());
        assert_eq!(plan.task_count(), 3);
        assert!(plan_tasks(&cfg(SchemeId::Gss, LayoutId::PerGroup, Topology::flat(1).unwrap()), 0, 0).is_err());
    }

    #[test]
    fn group_block_boundaries() {
        assert_eq!(group_blocks(10, 3), vec![RowRange::new(0, 4), RowRange::new(4, 4), RowRange::new(8, 2)]);
        assert_eq!(group_blocks(5, 1), vec![RowRange::new(0, 5)]);
    }

    #[test]
    fn acquire_and_done() {
        let c = cfg(SchemeId::Ss, LayoutId::Centralized, Topology::flat(4).unwrap());
        let qs = QueueSystem::build(&c, 2, 0).unwrap();
        let Acquire::Task(t0) = qs.acquire(3) else { panic!() };
        assert_eq!(t0.seq_no, 0, "FIFO");
        let Acquire::Task(_) = qs.acquire(1) else { panic!() };
        assert_eq!(qs.acquire(0), Acquire::Wait);
        qs.complete(3);
        qs.complete(1);
        assert_eq!(qs.remaining(), 0);
        assert_eq!(qs.acquire(2), Acquire::Done);
    }

    #[test]
    fn per_worker_needs_steal_and_opposite_ends() {
        let c = cfg(SchemeId::Ss, LayoutId::PerWorker, Topology::flat(2).unwrap());
        let qs = QueueSystem::build(&c, 4, 0).unwrap();
        // queue 1 holds seq 1 and 3; drain worker 0's queue
        assert!(matches!(qs.acquire(0), Acquire::Task(t) if t.seq_no == 0));
        assert!(matches!(qs.acquire(0), Acquire::Task(t) if t.seq_no == 2));
        assert_eq!(qs.acquire(0), Acquire::NeedSteal);
        assert_eq!(qs.steal(0, 1).map(|t| t.seq_no), Some(3), "thief takes the back");
        assert!(matches!(qs.acquire(1), Acquire::Task(t) if t.seq_no == 1), "owner keeps the front");
        assert_eq!(qs.steal(0, 1), None);
        assert_eq!(qs.occupancy_snapshot(), vec![0, 0]);
    }

    #[test]
    fn concurrent_pops_deliver_each_task_once() {
        for layout in LayoutId::ALL {
            let c = cfg(SchemeId::Ss, *layout, Topology::uniform(2, 2).unwrap());
            let qs = QueueSystem::build(&c, 20_000, 0).unwrap();
            let seen: Vec<AtomicUsize> = (0..qs.total_tasks()).map(|_| AtomicUsize::new(0)).collect();
            std::thread::scope(|s| {
                for w in 0..4 {
                    let (qs, seen) = (&qs, &seen);
                    s.spawn(move || loop {
                        let t = match qs.acquire(w) {
                            Acquire::Task(t) => t,
                            Acquire::Done => break,
                            Acquire::Wait => {
                                std::thread::yield_now();
                                continue;
                            }
                            Acquire::NeedSteal => {
                                let victim = (0..qs.queue_count())
                                    .find(|&q| q != qs.home_queue(w) && qs.occupancy(q) > 0);
                                match victim.and_then(|q| qs.steal(w, q)) {
                                    Some(t) => t,
                                    None => {
                                        std::thread::yield_now();
                                        continue;
                                    }
                                }
                            }
                        };
                        seen[t.seq_no].fetch_add(1, Ordering::Relaxed);
                        qs.complete(w);
                    });
                }
            });
            assert!(seen.iter().all(|c| c.load(Ordering::Relaxed) == 1), "{layout}");
        }
    }
}
