//! Shared scheduling vocabulary: scheme, layout and victim-strategy names,
//! worker topology, tasks, and the run configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown partitioning scheme `{0}`")]
    UnknownScheme(String),
    #[error("unknown queue layout `{0}`")]
    UnknownLayout(String),
    #[error("unknown victim selection strategy `{0}`")]
    UnknownVictim(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Declares a closed, case-insensitively parsed name enum.
macro_rules! name_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $err:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $text)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ConfigError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let wanted = s.trim();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(wanted))
                    .ok_or_else(|| ConfigError::$err(s.to_string()))
            }
        }
    };
}

name_enum! {
    /// The eleven work-partitioning schemes.
    SchemeId, UnknownScheme {
        Static => "STATIC",
        Ss => "SS",
        Mfsc => "MFSC",
        Gss => "GSS",
        Tss => "TSS",
        Fac2 => "FAC2",
        Tfss => "TFSS",
        Fiss => "FISS",
        Viss => "VISS",
        Pls => "PLS",
        Pss => "PSS",
    }
}

name_enum! {
    /// Where tasks are stored: one queue, one per worker, or one per worker group.
    LayoutId, UnknownLayout {
        Centralized => "CENTRALIZED",
        PerWorker => "PER_WORKER",
        PerGroup => "PER_GROUP",
    }
}

name_enum! {
    /// Probe order a thief uses when looking for a non-empty queue.
    VictimStrategy, UnknownVictim {
        Seq => "SEQ",
        SeqPri => "SEQPRI",
        Rnd => "RND",
        RndPri => "RNDPRI",
    }
}

pub fn parse_scheme(text: &str) -> Result<SchemeId, ConfigError> {
    text.parse()
}

/// Workers partitioned into groups (sockets / NUMA domains), with an
/// optional worker-to-core pinning map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    pin_map: Option<Vec<usize>>,
}

impl Topology {
    /// Every worker in `0..worker_count` must appear in exactly one group.
    pub fn new(worker_count: usize, groups: Vec<Vec<usize>>) -> Result<Self, ConfigError> {
        if worker_count == 0 {
            return Err(ConfigError::InvalidTopology("worker count must be positive".into()));
        }
        if groups.is_empty() {
            return Err(ConfigError::InvalidTopology("at least one group is required".into()));
        }
        let mut group_of = vec![usize::MAX; worker_count];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(ConfigError::InvalidTopology(format!("group {g} is empty")));
            }
            for &w in members {
                if w >= worker_count {
                    return Err(ConfigError::InvalidTopology(format!(
                        "worker {w} in group {g} is out of range (W = {worker_count})"
                    )));
                }
                if group_of[w] != usize::MAX {
                    return Err(ConfigError::InvalidTopology(format!(
                        "worker {w} appears in groups {} and {g}",
                        group_of[w]
                    )));
                }
                group_of[w] = g;
            }
        }
        if let Some(w) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(ConfigError::InvalidTopology(format!("worker {w} belongs to no group")));
        }
        Ok(Self { groups, group_of, pin_map: None })
    }

    /// One group holding every worker.
    pub fn flat(worker_count: usize) -> Result<Self, ConfigError> {
        Self::new(worker_count, vec![(0..worker_count).collect()])
    }

    /// `groups` contiguous groups of `per_group` workers each.
    pub fn uniform(groups: usize, per_group: usize) -> Result<Self, ConfigError> {
        if groups == 0 || per_group == 0 {
            return Err(ConfigError::InvalidTopology("groups and group size must be positive".into()));
        }
        let layout = (0..groups)
            .map(|g| (g * per_group..(g + 1) * per_group).collect())
            .collect();
        Self::new(groups * per_group, layout)
    }

    pub fn with_pin_map(mut self, cores: Vec<usize>) -> Result<Self, ConfigError> {
        if cores.len() != self.worker_count() {
            return Err(ConfigError::InvalidTopology(format!(
                "pin map has {} entries for {} workers",
                cores.len(),
                self.worker_count()
            )));
        }
        self.pin_map = Some(cores);
        Ok(self)
    }

    pub fn worker_count(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, worker: usize) -> usize {
        self.group_of[worker]
    }

    pub fn pin_map(&self) -> Option<&[usize]> {
        self.pin_map.as_deref()
    }

    /// Compact description such as `2x4`, or a list of group sizes when uneven.
    pub fn describe(&self) -> String {
        let first = self.groups[0].len();
        if self.groups.iter().all(|g| g.len() == first) {
            format!("{}x{}", self.groups.len(), first)
        } else {
            self.groups.iter().map(|g| g.len().to_string()).collect::<Vec<_>>().join("+")
        }
    }
}

/// Contiguous interval of rows, `start..start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowRange {
    pub start: usize,
    pub len: usize,
}

impl RowRange {
    pub fn new(start: usize, len: usize) -> Self {
        debug_assert!(len >= 1, "row ranges are never empty");
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

pub type OpId = u32;

/// Smallest schedulable unit: one operation bound to a row range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub range: RowRange,
    pub op_id: OpId,
    /// Dense global creation index, `0..K`.
    pub seq_no: usize,
    /// Group of the queue the task was first placed in; `None` for the centralized layout.
    pub origin_group: Option<usize>,
}

/// Tunables for the schemes that take parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// FISS/VISS stage count (B ≥ 2).
    pub fiss_stages: usize,
    /// PLS static workload ratio, in (0, 1).
    pub pls_swr: f64,
    /// PSS divisor factor (> 0).
    pub pss_factor: f64,
    /// TSS/TFSS last chunk size (≥ 1).
    pub tss_last: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self { fiss_stages: 4, pls_swr: 0.5, pss_factor: 1.5, tss_last: 1 }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.fiss_stages < 2 {
            return Err(ConfigError::InvalidParams(format!(
                "fiss_stages must be >= 2, got {}",
                self.fiss_stages
            )));
        }
        if !(self.pls_swr > 0.0 && self.pls_swr < 1.0) {
            return Err(ConfigError::InvalidParams(format!(
                "pls_swr must lie in (0, 1), got {}",
                self.pls_swr
            )));
        }
        if !(self.pss_factor > 0.0 && self.pss_factor.is_finite()) {
            return Err(ConfigError::InvalidParams(format!(
                "pss_factor must be positive, got {}",
                self.pss_factor
            )));
        }
        if self.tss_last < 1 {
            return Err(ConfigError::InvalidParams("tss_last must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to schedule one data-parallel operation.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedConfig {
    pub scheme: SchemeId,
    pub layout: LayoutId,
    /// Stored but unused for the centralized layout.
    pub victim: VictimStrategy,
    pub topology: Topology,
    pub min_chunk: usize,
    pub params: SchemeParams,
    pub rng_seed: u64,
}

impl SchedConfig {
    pub fn new(scheme: SchemeId, layout: LayoutId, victim: VictimStrategy, topology: Topology) -> Self {
        Self {
            scheme,
            layout,
            victim,
            topology,
            min_chunk: 1,
            params: SchemeParams::default(),
            rng_seed: 0,
        }
    }

    /// Centralized queue over a flat topology of `workers`.
    pub fn centralized(scheme: SchemeId, workers: usize) -> Result<Self, ConfigError> {
        Ok(Self::new(scheme, LayoutId::Centralized, VictimStrategy::Seq, Topology::flat(workers)?))
    }

    pub fn with_min_chunk(mut self, min_chunk: usize) -> Self {
        self.min_chunk = min_chunk;
        self
    }

    pub fn with_params(mut self, params: SchemeParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn workers(&self) -> usize {
        self.topology.worker_count()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_chunk < 1 {
            return Err(ConfigError::InvalidParams("min_chunk must be >= 1".into()));
        }
        self.params.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_parsing() {
        assert_eq!(parse_scheme("GSS").unwrap(), SchemeId::Gss);
        assert_eq!(parse_scheme("fac2").unwrap(), SchemeId::Fac2);
        assert_eq!(parse_scheme("FAC"), Err(ConfigError::UnknownScheme("FAC".into())));
        assert_eq!(SchemeId::ALL.len(), 11);
        assert_eq!(LayoutId::ALL.len(), 3);
        assert_eq!(VictimStrategy::ALL.len(), 4);
    }

    #[test]
    fn names_round_trip() {
        for s in SchemeId::ALL {
            assert_eq!(s.to_string().parse::<SchemeId>().unwrap(), *s);
            assert_eq!(s.to_string().to_lowercase().parse::<SchemeId>().unwrap(), *s);
        }
        for l in LayoutId::ALL {
            assert_eq!(l.to_string().parse::<LayoutId>().unwrap(), *l);
        }
        for v in VictimStrategy::ALL {
            assert_eq!(v.to_string().parse::<VictimStrategy>().unwrap(), *v);
        }
        assert!("per_worker".parse::<LayoutId>().is_ok());
        assert!("NUMA".parse::<VictimStrategy>().is_err());
    }

    #[test]
    fn topology_validation() {
        assert!(Topology::new(4, vec![vec![0, 1], vec![2, 3]]).is_ok());
        assert!(Topology::new(4, vec![vec![0, 1], vec![1, 2, 3]]).is_err(), "overlap");
        assert!(Topology::new(4, vec![vec![0, 1], vec![2]]).is_err(), "not exhaustive");
        assert!(Topology::new(4, vec![vec![0, 1, 2, 3], vec![]]).is_err(), "empty group");
        assert!(Topology::new(2, vec![vec![0, 1, 2]]).is_err(), "out of range");
        assert!(Topology::new(0, vec![]).is_err());

        let t = Topology::uniform(2, 4).unwrap();
        assert_eq!(t.worker_count(), 8);
        assert_eq!(t.group_of(5), 1);
        assert_eq!(t.describe(), "2x4");
        assert!(t.clone().with_pin_map(vec![0; 3]).is_err());
        assert_eq!(t.with_pin_map((0..8).collect()).unwrap().pin_map().unwrap()[7], 7);
    }

    #[test]
    fn params_validation() {
        assert!(SchemeParams::default().validate().is_ok());
        let bad = [
            SchemeParams { fiss_stages: 1, ..Default::default() },
            SchemeParams { pls_swr: 1.0, ..Default::default() },
            SchemeParams { pls_swr: 0.0, ..Default::default() },
            SchemeParams { pss_factor: 0.0, ..Default::default() },
            SchemeParams { tss_last: 0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
