//! Task-based scheduling runtime for data-parallel row operations.
//!
//! A [`partitioner::Partitioner`] cuts a row space into variable-size tasks
//! following one of eleven self-scheduling schemes; [`queueing`] places the
//! tasks in a centralized, per-worker or per-group queue layout; and
//! [`workerpool::run_pool`] executes them, stealing work between queues with
//! one of four victim-selection strategies. [`sim`] replays the same
//! decisions in a deterministic discrete-event model.
//!
//! ```
//! use loopsched::data::{build_csr, gen_graph, symmetrize_dedup, GraphKind};
//! use loopsched::pipelines::connected_components;
//! use loopsched::{LayoutId, SchedConfig, SchemeId, Topology, VictimStrategy};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let g = gen_graph(&GraphKind::Rmat(Default::default()), 1 << 12, 7)?;
//! let csr = build_csr(&symmetrize_dedup(&g));
//! let cfg = SchedConfig::new(SchemeId::Fac2, LayoutId::PerWorker, VictimStrategy::SeqPri, Topology::uniform(2, 4)?);
//! let out = connected_components(&csr, &cfg, 10_000)?;
//! assert!(out.iterations >= 1);
//! # Ok(())
//! # }
//! ```

pub mod config;
pub mod data;
pub mod partitioner;
pub mod pipelines;
pub mod queueing;
pub mod sim;
pub mod telemetry;
pub mod workerpool;

pub use config::{
    parse_scheme, ConfigError, LayoutId, OpId, RowRange, SchedConfig, SchemeId, SchemeParams, Task, Topology,
    VictimStrategy,
};
