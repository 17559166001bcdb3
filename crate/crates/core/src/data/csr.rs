use super::EdgeList;

/// Compressed sparse row adjacency. Neighbors of row `i` are
/// `col_idx[row_ptr[i]..row_ptr[i + 1]]`, sorted and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_ptr[self.n]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    #[inline]
    pub fn neighbors(&self, row: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn degree(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    /// Directed edges in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n).flat_map(move |r| self.neighbors(r).iter().map(move |&c| (r as u32, c)))
    }

    pub fn to_edge_list(&self) -> EdgeList {
        EdgeList { n: self.n, edges: self.edges().collect() }
    }

    /// Every `(u, v)` has its `(v, u)`.
    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(u, v)| self.neighbors(v as usize).binary_search(&u).is_ok())
    }
}

/// Counting-sort the edges by source, then sort and dedup every row.
pub fn build_csr(e: &EdgeList) -> CsrMatrix {
    let n = e.n;
    let mut counts = vec![0usize; n + 1];
    for &(u, _) in &e.edges {
        counts[u as usize + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let mut fill = counts.clone();
    let mut cols = vec![0u32; e.edges.len()];
    for &(u, v) in &e.edges {
        let slot = &mut fill[u as usize];
        cols[*slot] = v;
        *slot += 1;
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(cols.len());
    for r in 0..n {
        let row = &mut cols[counts[r]..counts[r + 1]];
        row.sort_unstable();
        let mut prev = None;
        for &c in row.iter() {
            if prev != Some(c) {
                col_idx.push(c);
                prev = Some(c);
            }
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix { n, row_ptr, col_idx }
}
