use std::io::BufRead;

use super::DataError;

/// Directed node pairs over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
}

impl EdgeList {
    pub fn new(n: usize, edges: Vec<(u32, u32)>) -> Result<Self, DataError> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u as usize >= n || v as usize >= n) {
            return Err(DataError::InvalidParams(format!("edge ({u}, {v}) outside 0..{n}")));
        }
        Ok(Self { n, edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// `# Nodes: 403394 Edges: 3387388` style headers.
fn header_node_count(line: &str) -> Option<usize> {
    let mut words = line.trim_start_matches('#').split_whitespace();
    while let Some(w) = words.next() {
        if w.eq_ignore_ascii_case("nodes:") {
            return words.next()?.parse().ok();
        }
    }
    None
}

/// Read a SNAP-style edge list: `#` comment lines, then one
/// `source<whitespace>target` pair per line. `n` is one past the largest id
/// unless a `# Nodes:` header declares more.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<EdgeList, DataError> {
    let mut edges = Vec::new();
    let mut max_id: Option<u32> = None;
    let mut declared = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(n) = header_node_count(trimmed) {
                declared = declared.max(n);
            }
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let mut id = |what: &str| -> Result<u32, DataError> {
            let tok = fields.next().ok_or_else(|| DataError::Parse {
                line: lineno,
                message: format!("missing {what} id"),
            })?;
            tok.parse::<u32>().ok().filter(|&v| v < u32::MAX).ok_or_else(|| DataError::Parse {
                line: lineno,
                message: format!("invalid {what} id `{tok}`"),
            })
        };
        let u = id("source")?;
        let v = id("target")?;
        if let Some(extra) = fields.next() {
            return Err(DataError::Parse { line: lineno, message: format!("unexpected field `{extra}`") });
        }
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
    }
    let n = max_id.map_or(0, |m| m as usize + 1).max(declared);
    Ok(EdgeList { n, edges })
}

/// Both directions of every edge, without self-loops or duplicates, sorted.
pub fn symmetrize_dedup(e: &EdgeList) -> EdgeList {
    let mut edges: Vec<(u32, u32)> = e
        .edges
        .iter()
        .filter(|(u, v)| u != v)
        .flat_map(|&(u, v)| [(u, v), (v, u)])
        .collect();
    edges.sort_unstable();
    edges.dedup();
    EdgeList { n: e.n, edges }
}

/// `k` disjoint copies; copy `j` has its ids shifted by `j·n`.
pub fn scale_up(e: &EdgeList, k: usize) -> Result<EdgeList, DataError> {
    if k == 0 {
        return Err(DataError::InvalidParams("scale factor must be positive".into()));
    }
    let n = e.n.checked_mul(k).filter(|&n| n <= u32::MAX as usize).ok_or(DataError::Overflow {
        nodes: e.n,
        factor: k,
    })?;
    let mut edges = Vec::with_capacity(e.edges.len() * k);
    for j in 0..k {
        let off = (j * e.n) as u32;
        edges.extend(e.edges.iter().map(|&(u, v)| (u + off, v + off)));
    }
    Ok(EdgeList { n, edges })
}

/// Renumber the ids that occur in `e` densely, preserving their order.
/// Returns the renumbered list and `original[new_id]`.
pub fn compact_ids(e: &EdgeList) -> (EdgeList, Vec<u32>) {
    let mut used = vec![false; e.n];
    for &(u, v) in &e.edges {
        used[u as usize] = true;
        used[v as usize] = true;
    }
    let original: Vec<u32> = (0..e.n as u32).filter(|&i| used[i as usize]).collect();
    let mut remap = vec![u32::MAX; e.n];
    for (new, &old) in original.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let edges = e.edges.iter().map(|&(u, v)| (remap[u as usize], remap[v as usize])).collect();
    (EdgeList { n: original.len(), edges }, original)
}
