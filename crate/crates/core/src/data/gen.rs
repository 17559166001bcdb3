use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Pareto, Uniform};

use super::{DataError, EdgeList};
use crate::pipelines::DenseMatrix;

/// Recursive-matrix quadrant probabilities; `d = 1 − a − b − c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmatParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Directed edges generated per node.
    pub edge_factor: usize,
}

impl Default for RmatParams {
    fn default() -> Self {
        Self { a: 0.57, b: 0.19, c: 0.19, edge_factor: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    /// Skewed power-law graph; `n` must be a power of two.
    Rmat(RmatParams),
    Path,
    Complete,
    /// Connected components with these sizes; they must sum to `n`.
    /// Node ids are shuffled so components interleave.
    Components(Vec<usize>),
}

/// Raw directed edges; pass through `symmetrize_dedup` before building CSR.
pub fn gen_graph(kind: &GraphKind, n: usize, seed: u64) -> Result<EdgeList, DataError> {
    if n == 0 {
        return Err(DataError::InvalidParams("graph needs at least one node".into()));
    }
    if n > u32::MAX as usize {
        return Err(DataError::InvalidParams(format!("{n} nodes exceed the 32-bit id range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = match kind {
        GraphKind::Path => (1..n as u32).map(|v| (v - 1, v)).collect(),
        GraphKind::Complete => {
            let n = n as u32;
            (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
        }
        GraphKind::Rmat(p) => rmat(n, p, &mut rng)?,
        GraphKind::Components(sizes) => components(n, sizes, &mut rng)?,
    };
    Ok(EdgeList { n, edges })
}

fn rmat(n: usize, p: &RmatParams, rng: &mut ChaCha8Rng) -> Result<Vec<(u32, u32)>, DataError> {
    if !n.is_power_of_two() {
        return Err(DataError::InvalidParams(format!("rmat node count {n} is not a power of two")));
    }
    let d = 1.0 - p.a - p.b - p.c;
    if [p.a, p.b, p.c].iter().any(|&x| !(0.0..=1.0).contains(&x)) || d < -1e-12 {
        return Err(DataError::InvalidParams("rmat probabilities must be in [0, 1] and sum to at most 1".into()));
    }
    if p.edge_factor == 0 {
        return Err(DataError::InvalidParams("rmat edge factor must be positive".into()));
    }
    let levels = n.trailing_zeros();
    let (ab, abc) = (p.a + p.b, p.a + p.b + p.c);
    let m = n * p.edge_factor;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (mut u, mut v) = (0u32, 0u32);
        for _ in 0..levels {
            let r: f64 = rng.random();
            let (du, dv) = if r < p.a {
                (0, 0)
            } else if r < ab {
                (0, 1)
            } else if r < abc {
                (1, 0)
            } else {
                (1, 1)
            };
            u = (u << 1) | du;
            v = (v << 1) | dv;
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn components(n: usize, sizes: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<(u32, u32)>, DataError> {
    if sizes.contains(&0) || sizes.iter().sum::<usize>() != n {
        return Err(DataError::InvalidParams(format!("component sizes {sizes:?} must be positive and sum to {n}")));
    }
    let mut ids: Vec<u32> = (0..n as u32).collect();
    ids.shuffle(rng);
    let mut edges = Vec::new();
    let mut rest = ids.as_slice();
    for &s in sizes {
        let (members, tail) = rest.split_at(s);
        rest = tail;
        // random spanning tree, then a few chords
        for i in 1..s {
            let j = rng.random_range(0..i);
            edges.push((members[i], members[j]));
        }
        if s > 2 {
            for _ in 0..s / 2 {
                let (x, y) = (rng.random_range(0..s), rng.random_range(0..s));
                edges.push((members[x], members[y]));
            }
        }
    }
    Ok(edges)
}

/// Strictly positive per-task costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self, DataError> {
        if costs.is_empty() {
            return Err(DataError::InvalidParams("cost vector is empty".into()));
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(DataError::InvalidParams(format!("cost {c} is not a positive finite number")));
        }
        Ok(Self(costs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostDist {
    /// Inclusive range; `low == high` gives constant costs.
    Uniform { low: f64, high: f64 },
    /// Minimum `scale`, tail index `shape`.
    Pareto { shape: f64, scale: f64 },
}

pub fn gen_costs(dist: CostDist, count: usize, seed: u64) -> Result<CostVector, DataError> {
    if count == 0 {
        return Err(DataError::InvalidParams("cost count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<f64> = match dist {
        CostDist::Uniform { low, high } => {
            if !(low > 0.0 && low <= high && high.is_finite()) {
                return Err(DataError::InvalidParams(format!("uniform range [{low}, {high}] must satisfy 0 < low <= high")));
            }
            if low == high {
                vec![low; count]
            } else {
                let u = Uniform::new_inclusive(low, high).map_err(|e| DataError::InvalidParams(e.to_string()))?;
                u.sample_iter(&mut rng).take(count).collect()
            }
        }
        CostDist::Pareto { shape, scale } => {
            let p = Pareto::new(scale, shape)
                .map_err(|e| DataError::InvalidParams(format!("pareto shape {shape}, scale {scale}: {e}")))?;
            p.sample_iter(&mut rng).take(count).collect()
        }
    };
    CostVector::new(costs)
}

/// `rows × (features + 1)` matrix: standard-normal features, and a last
/// column `y = X·w + noise` with `w_j = j + 1`.
pub fn gen_regression(rows: usize, features: usize, noise: f64, seed: u64) -> Result<DenseMatrix, DataError> {
    if features == 0 || rows < features {
        return Err(DataError::InvalidParams(format!("need rows >= features >= 1, got {rows} x {features}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(DataError::InvalidParams(format!("noise {noise} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let cols = features + 1;
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let mut y = 0.0;
        for j in 0..features {
            let x: f64 = normal.sample(&mut rng);
            y += (j + 1) as f64 * x;
            values.push(x);
        }
        values.push(y + noise * normal.sample(&mut rng));
    }
    DenseMatrix::new(rows, cols, values).map_err(|e| DataError::InvalidParams(e.to_string()))
}
