//! Chunk calculators for the self-scheduling schemes.
//!
//! A [`Partitioner`] turns a row interval into a deterministic sequence of
//! variable-size chunks. The sequence depends only on the scheme, the row
//! count `N`, the worker count `P`, the parameters and the number of prior
//! requests, never on which worker asks.
//!
//! | scheme | chunk per request |
//! |--------|-------------------|
//! | STATIC | `⌈N/P⌉` |
//! | SS     | `1` |
//! | MFSC   | `⌈(√2·N / (P·√ln P))^(2/3)⌉`, `N` when `P = 1` |
//! | GSS    | `⌈R/P⌉` |
//! | TSS    | `round(f − i·δ)` with `f = ⌈N/2P⌉`, `C = ⌈2N/(f+l)⌉`, `δ = (f−l)/(C−1)` |
//! | FAC2   | `⌈N / (2^(b+1)·P)⌉` for batch `b` of `P` requests |
//! | TFSS   | `⌈f − δ·(b·P + (P−1)/2)⌉` |
//! | FISS   | `c0 + b·bump` for stages `b < B` |
//! | VISS   | `c_b = c_(b−1) + ⌈c0/2^b⌉` for stages `b < B` |
//! | PLS    | `P` chunks of `⌈N·SWR/P⌉`, then GSS |
//! | PSS    | `⌈R / (factor·P)⌉` |
//!
//! Every formula result is floored at `min_chunk` and clipped to the
//! remaining row count `R`.

use std::sync::Mutex;

use thiserror::Error;

use crate::config::{SchemeId, SchemeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("invalid partitioner parameters: {0}")]
    InvalidParams(String),
}

/// Contiguous run of rows granted by one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkRange {
    pub start: usize,
    pub size: usize,
}

/// Trapezoid constants shared by TSS and TFSS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub first: usize,
    pub last: usize,
    pub count: usize,
}

impl Trapezoid {
    fn new(n: usize, p: usize, last: usize) -> Self {
        let first = n.div_ceil(2 * p);
        let count = (2 * n).div_ceil(first + last);
        Self { first, last, count }
    }

    /// Real-valued decrement between consecutive chunks.
    pub fn delta(&self) -> f64 {
        if self.count <= 1 {
            0.0
        } else {
            (self.first as f64 - self.last as f64) / (self.count - 1) as f64
        }
    }

    /// `round_half_up(f − i·δ)` evaluated exactly over the rationals.
    fn tss_chunk(&self, i: usize) -> i128 {
        if self.count <= 1 {
            return self.first as i128;
        }
        let den = (self.count - 1) as i128;
        let num = self.first as i128 * den - i as i128 * (self.first as i128 - self.last as i128);
        floor_div(2 * num + den, 2 * den)
    }

    /// `⌈f − δ·(b·P + (P−1)/2)⌉`, the mean of the next `P` TSS chunks, exactly.
    fn tfss_chunk(&self, batch: usize, p: usize) -> i128 {
        if self.count <= 1 {
            return self.first as i128;
        }
        let den = (self.count - 1) as i128;
        let span = (2 * batch * p + p - 1) as i128;
        let num = 2 * self.first as i128 * den - (self.first as i128 - self.last as i128) * span;
        ceil_div(num, 2 * den)
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    a.div_euclid(b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Per-scheme constants computed once at initialization.
#[derive(Debug, Clone, PartialEq)]
pub enum Derived {
    None,
    Fixed { chunk: usize },
    Trapezoid(Trapezoid),
    Stages { sizes: Vec<usize> },
    Pls { static_chunk: usize, static_requests: usize },
}

/// Mutable chunk-calculator state over one row interval.
#[derive(Debug, Clone)]
pub struct Partitioner {
    scheme: SchemeId,
    total: usize,
    workers: usize,
    remaining: usize,
    issued: usize,
    base: usize,
    min_chunk: usize,
    params: SchemeParams,
    derived: Derived,
}

impl Partitioner {
    /// Partitioner over rows `0..total` for `workers` requesters.
    pub fn new(
        scheme: SchemeId,
        total: usize,
        workers: usize,
        params: &SchemeParams,
    ) -> Result<Self, PartitionError> {
        if total == 0 {
            return Err(PartitionError::InvalidParams("row count must be positive".into()));
        }
        if workers == 0 {
            return Err(PartitionError::InvalidParams("worker count must be positive".into()));
        }
        params.validate().map_err(|e| PartitionError::InvalidParams(e.to_string()))?;
        let derived = derive(scheme, total, workers, params);
        Ok(Self {
            scheme,
            total,
            workers,
            remaining: total,
            issued: 0,
            base: 0,
            min_chunk: 1,
            params: *params,
            derived,
        })
    }

    /// Shift every emitted chunk by `base` rows (for sub-blocks of a larger row space).
    pub fn with_base(mut self, base: usize) -> Self {
        self.base = base;
        self
    }

    pub fn with_min_chunk(mut self, min_chunk: usize) -> Self {
        self.min_chunk = min_chunk.max(1);
        self
    }

    /// Re-validate runtime parameters. No current scheme adapts to runtime
    /// feedback, so accepted parameters do not alter the derived constants
    /// of a partitioner that has already issued chunks.
    pub fn update(&mut self, params: &SchemeParams) -> Result<(), PartitionError> {
        params.validate().map_err(|e| PartitionError::InvalidParams(e.to_string()))?;
        if self.issued == 0 {
            self.params = *params;
            self.derived = derive(self.scheme, self.total, self.workers, params);
        }
        Ok(())
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn issued(&self) -> usize {
        self.issued
    }

    /// Next unassigned row, absolute (including the base offset).
    pub fn next_start(&self) -> usize {
        self.base + self.total - self.remaining
    }

    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    /// Unclipped formula value for the next request.
    fn formula(&self) -> i128 {
        let n = self.total;
        let p = self.workers;
        let r = self.remaining;
        let batch = self.issued / p;
        match (&self.derived, self.scheme) {
            (_, SchemeId::Ss) => 1,
            (Derived::Fixed { chunk }, _) => *chunk as i128,
            (_, SchemeId::Gss) => r.div_ceil(p) as i128,
            (Derived::Trapezoid(t), SchemeId::Tss) => t.tss_chunk(self.issued),
            (Derived::Trapezoid(t), SchemeId::Tfss) => t.tfss_chunk(batch, p),
            (_, SchemeId::Fac2) => {
                let shift = (batch + 1) as u32;
                match p.checked_mul(1usize.checked_shl(shift).unwrap_or(0)) {
                    Some(den) if den > 0 => n.div_ceil(den) as i128,
                    _ => 1,
                }
            }
            (Derived::Stages { sizes }, _) => sizes[batch.min(sizes.len() - 1)] as i128,
            (Derived::Pls { static_chunk, static_requests }, _) => {
                if self.issued < *static_requests {
                    *static_chunk as i128
                } else {
                    r.div_ceil(p) as i128
                }
            }
            (_, SchemeId::Pss) => (r as f64 / (self.params.pss_factor * p as f64)).ceil() as i128,
            (d, s) => unreachable!("scheme {s} has mismatched derived constants {d:?}"),
        }
    }

    /// Grant the next chunk, or `None` once every row has been issued.
    pub fn next_chunk(&mut self) -> Option<ChunkRange> {
        if self.remaining == 0 {
            return None;
        }
        let raw = self.formula().max(self.min_chunk as i128).max(1);
        let size = raw.min(self.remaining as i128) as usize;
        let chunk = ChunkRange { start: self.next_start(), size };
        self.remaining -= size;
        self.issued += 1;
        Some(chunk)
    }
}

impl Iterator for Partitioner {
    type Item = ChunkRange;

    fn next(&mut self) -> Option<ChunkRange> {
        self.next_chunk()
    }
}

fn derive(scheme: SchemeId, n: usize, p: usize, params: &SchemeParams) -> Derived {
    match scheme {
        SchemeId::Ss | SchemeId::Gss | SchemeId::Fac2 | SchemeId::Pss => Derived::None,
        SchemeId::Static => Derived::Fixed { chunk: n.div_ceil(p) },
        SchemeId::Mfsc => Derived::Fixed { chunk: mfsc_chunk(n, p) },
        SchemeId::Tss | SchemeId::Tfss => Derived::Trapezoid(Trapezoid::new(n, p, params.tss_last)),
        SchemeId::Fiss => {
            let b = params.fiss_stages;
            let c0 = n.div_ceil((2 + b) * p);
            // 2N·(1 − B/(B+2)) = 4N/(B+2)
            let bump = (4 * n).div_ceil((2 + b) * p * b * (b - 1)).max(1);
            Derived::Stages { sizes: (0..b).map(|s| c0 + s * bump).collect() }
        }
        SchemeId::Viss => {
            let b = params.fiss_stages;
            let c0 = n.div_ceil((2 + b) * p);
            let mut sizes = Vec::with_capacity(b);
            sizes.push(c0);
            for stage in 1..b {
                let step = if stage >= usize::BITS as usize { 1 } else { c0.div_ceil(1 << stage) };
                sizes.push(sizes[stage - 1] + step);
            }
            Derived::Stages { sizes }
        }
        SchemeId::Pls => Derived::Pls {
            static_chunk: ((n as f64 * params.pls_swr / p as f64).ceil() as usize).max(1),
            static_requests: p,
        },
    }
}

fn mfsc_chunk(n: usize, p: usize) -> usize {
    if p == 1 {
        return n;
    }
    let ln_p = (p as f64).ln();
    if ln_p <= 0.0 {
        return n;
    }
    let x = std::f64::consts::SQRT_2 * n as f64 / (p as f64 * ln_p.sqrt());
    (x.powf(2.0 / 3.0).ceil() as usize).max(1)
}

/// Chunk sizes obtained by draining a fresh partitioner.
pub fn chunk_sequence(
    scheme: SchemeId,
    total: usize,
    workers: usize,
    params: &SchemeParams,
) -> Result<Vec<usize>, PartitionError> {
    Ok(Partitioner::new(scheme, total, workers, params)?.map(|c| c.size).collect())
}

/// Partitioner shared by concurrent requesters. Grants are serialized, so
/// every interleaving observes the same chunk-size sequence.
#[derive(Debug)]
pub struct SharedPartitioner {
    inner: Mutex<Partitioner>,
}

impl SharedPartitioner {
    pub fn new(p: Partitioner) -> Self {
        Self { inner: Mutex::new(p) }
    }

    pub fn next_chunk(&self) -> Option<ChunkRange> {
        self.inner.lock().expect("partitioner lock poisoned").next_chunk()
    }

    pub fn into_inner(self) -> Partitioner {
        self.inner.into_inner().expect("partitioner lock poisoned")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: SchemeId, n: usize, p: usize) -> Vec<usize> {
        chunk_sequence(s, n, p, &SchemeParams::default()).unwrap()
    }

    #[test]
    fn published_sequences() {
        // Frozen from an independent rational-arithmetic evaluation of the formulas.
        assert_eq!(seq(SchemeId::Static, 100, 4), vec![25, 25, 25, 25]);
        assert_eq!(seq(SchemeId::Ss, 5, 2), vec![1; 5]);
        assert_eq!(seq(SchemeId::Gss, 100, 4), vec![25, 19, 14, 11, 8, 6, 5, 3, 3, 2, 1, 1, 1, 1]);
        assert_eq!(seq(SchemeId::Fac2, 100, 4), vec![13, 13, 13, 13, 7, 7, 7, 7, 4, 4, 4, 4, 2, 2]);
        assert_eq!(seq(SchemeId::Tss, 100, 4), vec![13, 12, 11, 10, 10, 9, 8, 7, 6, 5, 4, 4, 1]);
        assert_eq!(seq(SchemeId::Tfss, 100, 4), vec![12, 12, 12, 12, 9, 9, 9, 9, 5, 5, 5, 1]);
        assert_eq!(
            seq(SchemeId::Fiss, 1000, 4),
            vec![42, 42, 42, 42, 56, 56, 56, 56, 70, 70, 70, 70, 84, 84, 84, 76]
        );
        assert_eq!(
            seq(SchemeId::Viss, 1000, 4),
            vec![42, 42, 42, 42, 63, 63, 63, 63, 74, 74, 74, 74, 80, 80, 80, 44]
        );
        let mut mfsc = vec![45; 22];
        mfsc.push(10);
        assert_eq!(seq(SchemeId::Mfsc, 1000, 4), mfsc);
        assert_eq!(
            seq(SchemeId::Pls, 1000, 4),
            vec![125, 125, 125, 125, 125, 94, 71, 53, 40, 30, 22, 17, 12, 9, 7, 5, 4, 3, 2, 2, 1, 1, 1, 1]
        );
        assert_eq!(&seq(SchemeId::Pss, 1000, 4)[..6], &[167, 139, 116, 97, 81, 67]);
        assert_eq!(seq(SchemeId::Static, 10, 4), vec![3, 3, 3, 1]);
        assert_eq!(seq(SchemeId::Ss, 3, 7), vec![1, 1, 1]);
    }

    #[test]
    fn derived_constants() {
        let p = Partitioner::new(SchemeId::Tss, 1000, 4, &SchemeParams::default()).unwrap();
        let Derived::Trapezoid(t) = p.derived() else { panic!("expected trapezoid") };
        assert_eq!((t.first, t.last, t.count), (125, 1, 16));
        assert!((t.delta() - 124.0 / 15.0).abs() < 1e-12);

        let p = Partitioner::new(SchemeId::Static, 10, 4, &SchemeParams::default()).unwrap();
        assert_eq!(p.derived(), &Derived::Fixed { chunk: 3 });

        let p = Partitioner::new(SchemeId::Gss, 1, 8, &SchemeParams::default()).unwrap();
        assert_eq!((p.remaining(), p.issued(), p.next_start()), (1, 0, 0));
        assert_eq!(p.derived(), &Derived::None);

        let p = Partitioner::new(SchemeId::Fiss, 1000, 4, &SchemeParams::default()).unwrap();
        assert_eq!(p.derived(), &Derived::Stages { sizes: vec![42, 56, 70, 84] });
    }

    #[test]
    fn mfsc_single_worker_takes_everything() {
        assert_eq!(seq(SchemeId::Mfsc, 37, 1), vec![37]);
    }

    #[test]
    fn invalid_inputs() {
        let d = SchemeParams::default();
        assert!(Partitioner::new(SchemeId::Gss, 0, 4, &d).is_err());
        assert!(Partitioner::new(SchemeId::Gss, 4, 0, &d).is_err());
        let bad = SchemeParams { pls_swr: 2.0, ..d };
        assert!(Partitioner::new(SchemeId::Pls, 4, 2, &bad).is_err());
    }

    #[test]
    fn update_revalidates() {
        let mut p = Partitioner::new(SchemeId::Fiss, 1000, 4, &SchemeParams::default()).unwrap();
        assert!(p.update(&SchemeParams { fiss_stages: 1, ..Default::default() }).is_err());
        p.update(&SchemeParams { fiss_stages: 2, ..Default::default() }).unwrap();
        assert!(matches!(p.derived(), Derived::Stages { sizes } if sizes.len() == 2));
        p.next_chunk();
        p.update(&SchemeParams::default()).unwrap();
        assert!(matches!(p.derived(), Derived::Stages { sizes } if sizes.len() == 2));
    }

    #[test]
    fn min_chunk_floor_and_base() {
        let p = Partitioner::new(SchemeId::Ss, 10, 2, &SchemeParams::default())
            .unwrap()
            .with_min_chunk(4)
            .with_base(100);
        let chunks: Vec<_> = p.collect();
        assert_eq!(
            chunks,
            vec![
                ChunkRange { start: 100, size: 4 },
                ChunkRange { start: 104, size: 4 },
                ChunkRange { start: 108, size: 2 },
            ]
        );
    }

    #[test]
    fn fac2_survives_huge_batch_index() {
        let s = seq(SchemeId::Fac2, 200, 1);
        assert_eq!(s.iter().sum::<usize>(), 200);
        assert_eq!(s[0], 100);
    }

    #[test]
    fn shared_partitioner_is_requester_independent() {
        let p = Partitioner::new(SchemeId::Gss, 5000, 4, &SchemeParams::default()).unwrap();
        let shared = SharedPartitioner::new(p);
        let grants = Mutex::new(Vec::new());
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    while let Some(c) = shared.next_chunk() {
                        grants.lock().unwrap().push(c);
                    }
                });
            }
        });
        let mut grants = grants.into_inner().unwrap();
        grants.sort_by_key(|c| c.start);
        let sizes: Vec<_> = grants.iter().map(|c| c.size).collect();
        assert_eq!(sizes, seq(SchemeId::Gss, 5000, 4));
    }
}
