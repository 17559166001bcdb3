use crate::config::{RowRange, SchedConfig};
use crate::data::CsrMatrix;
use crate::queueing::{plan_tasks, QueueSystem};
use crate::telemetry::{RunReport, Source};
use crate::workerpool::{run_pool_with, PoolOptions};

use super::PipelineError;

pub const CC_OP: u32 = 1;

/// One min-label propagation step over `range`. `labels_out` covers only
/// `range`: `labels_out[k]` is the new label of node `range.start + k`.
/// Returns how many labels changed.
pub fn cc_iterate_block(csr: &CsrMatrix, range: RowRange, labels_in: &[u32], labels_out: &mut [u32]) -> usize {
    debug_assert_eq!(labels_out.len(), range.len);
    let mut changed = 0;
    for (out, node) in labels_out.iter_mut().zip(range.rows()) {
        let own = labels_in[node];
        let best = csr.neighbors(node).iter().fold(own, |m, &j| m.min(labels_in[j as usize]));
        *out = best;
        changed += usize::from(best != own);
    }
    changed
}

#[derive(Debug)]
pub struct CcOutput {
    /// Smallest node id of each node's component.
    pub labels: Vec<u32>,
    /// Propagation passes, including the final pass that changed nothing.
    pub iterations: usize,
    /// Telemetry of all passes concatenated.
    pub report: RunReport,
}

/// Output buffer that tasks write through in disjoint row ranges.
struct DisjointRows {
    ptr: *mut u32,
    len: usize,
}

// SAFETY: every task of a phase owns a distinct row range, and the queue
// system delivers each task exactly once, so no two threads alias a row.
unsafe impl Sync for DisjointRows {}

impl DisjointRows {
    /// # Safety
    /// No other live slice from this buffer may overlap `range`.
    #[allow(clippy::mut_from_ref)]
    unsafe fn rows(&self, range: RowRange) -> &mut [u32] {
        assert!(range.end() <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(range.start), range.len)
    }
}

/// Label propagation to a fixed point with Jacobi updates: every pass reads
/// the previous pass's labels and writes a fresh buffer, so the result does
/// not depend on which worker runs which rows or in what order.
pub fn connected_components(csr: &CsrMatrix, cfg: &SchedConfig, max_iters: usize) -> Result<CcOutput, PipelineError> {
    if max_iters == 0 {
        return Err(PipelineError::InvalidInput("max_iters must be positive".into()));
    }
    if !csr.is_symmetric() {
        return Err(PipelineError::InvalidInput("adjacency must contain both directions of every edge".into()));
    }
    let n = csr.n();
    let mut report = RunReport::empty(Source::Real, "cc", cfg);
    if n == 0 {
        report.iterations = 1;
        return Ok(CcOutput { labels: Vec::new(), iterations: 1, report });
    }

    let plan = plan_tasks(cfg, n, CC_OP)?;
    let mut current: Vec<u32> = (0..n as u32).collect();
    let mut next = vec![0u32; n];
    let opts = PoolOptions { pipeline: "cc", ..PoolOptions::default() };
    for iter in 1..=max_iters {
        let qs = QueueSystem::from_plan(plan.clone(), cfg.topology.clone());
        let out_buf = DisjointRows { ptr: next.as_mut_ptr(), len: n };
        let labels_in = current.as_slice();
        let phase = run_pool_with(cfg, &qs, opts, |t| {
            // SAFETY: see DisjointRows.
            let out = unsafe { out_buf.rows(t.range) };
            cc_iterate_block(csr, t.range, labels_in, out)
        })?;
        let changed: usize = phase.results.iter().sum();
        report.absorb(phase.report);
        std::mem::swap(&mut current, &mut next);
        if changed == 0 {
            return Ok(CcOutput { labels: current, iterations: iter, report });
        }
    }
    Err(PipelineError::NotConverged { iterations: max_iters, labels: current, report: Box::new(report) })
}
