//! Edge-list ingest, CSR construction and synthetic inputs.

mod csr;
mod edges;
mod gen;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

pub use csr::{build_csr, CsrMatrix};
pub use edges::{compact_ids, parse_edge_list, scale_up, symmetrize_dedup, EdgeList};
pub use gen::{gen_costs, gen_graph, gen_regression, CostDist, CostVector, GraphKind, RmatParams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{nodes} nodes scaled by {factor} exceeds the 32-bit id range")]
    Overflow { nodes: usize, factor: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Open an edge-list file; names ending in `.gz` are decompressed on the fly.
pub fn read_edge_file(path: &Path) -> Result<EdgeList, DataError> {
    let file = File::open(path)?;
    let reader: Box<dyn BufRead> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    parse_edge_list(reader)
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = self.parent[x as usize];
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Component labels as the smallest node id of each component, computed
/// with union-find. Edge direction is ignored.
pub fn component_labels(n: usize, edges: &[(u32, u32)]) -> Vec<u32> {
    let mut uf = UnionFind::new(n);
    for &(u, v) in edges {
        uf.union(u, v);
    }
    let mut min_of_root = vec![u32::MAX; n];
    for i in 0..n as u32 {
        let r = uf.find(i) as usize;
        min_of_root[r] = min_of_root[r].min(i);
    }
    (0..n as u32).map(|i| min_of_root[uf.find(i) as usize]).collect()
}

/// Component sizes in ascending order.
pub fn component_sizes(labels: &[u32]) -> Vec<usize> {
    let mut counts = vec![0usize; labels.len()];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let mut sizes: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    sizes.sort_unstable();
    sizes
}
