use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use loopsched::data::{CostDist, GraphKind, RmatParams};
use loopsched::{LayoutId, SchemeId, Topology, VictimStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pipeline {
    /// Connected components by label propagation on a graph.
    Cc,
    /// Ridge regression on a generated dense matrix.
    Linreg,
    /// Rows with synthetic costs; real mode spins for each row's cost.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Threaded execution.
    Real,
    /// Discrete-event simulation.
    Sim,
}

fn names<T: Display>(all: &[T]) -> String {
    all.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn scheme_help() -> String {
    format!("Partitioning schemes, comma-separated or `all`: {}", names(SchemeId::ALL))
}

fn layout_help() -> String {
    format!("Queue layouts, comma-separated or `all`: {}", names(LayoutId::ALL))
}

fn victim_help() -> String {
    format!("Victim selection strategies, comma-separated or `all`: {}", names(VictimStrategy::ALL))
}

fn parse_list<T>(text: &str, all: &[T]) -> Result<Vec<T>, String>
where
    T: FromStr + Copy + PartialEq,
    T::Err: Display,
{
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v = item.parse::<T>().map_err(|e| e.to_string())?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// Comma-separated selection of names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

fn parse_schemes(text: &str) -> Result<List<SchemeId>, String> {
    parse_list(text, SchemeId::ALL).map(List)
}

fn parse_layouts(text: &str) -> Result<List<LayoutId>, String> {
    parse_list(text, LayoutId::ALL).map(List)
}

fn parse_victims(text: &str) -> Result<List<VictimStrategy>, String> {
    parse_list(text, VictimStrategy::ALL).map(List)
}

/// `GxK` (G groups of K workers) or `a+b+c` (groups of the given sizes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec(pub Vec<usize>);

impl GroupSpec {
    pub fn workers(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn topology(&self) -> Result<Topology, String> {
        let mut next = 0;
        let groups = self
            .0
            .iter()
            .map(|&size| {
                let g: Vec<usize> = (next..next + size).collect();
                next += size;
                g
            })
            .collect();
        Topology::new(next, groups).map_err(|e| e.to_string())
    }
}

fn positive(tok: &str) -> Result<usize, String> {
    match tok.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("`{tok}` is not a positive integer")),
    }
}

fn parse_groups(text: &str) -> Result<GroupSpec, String> {
    let lower = text.to_ascii_lowercase();
    let sizes = if let Some((g, k)) = lower.split_once('x') {
        vec![positive(k)?; positive(g)?]
    } else {
        lower.split('+').map(positive).collect::<Result<_, _>>()?
    };
    Ok(GroupSpec(sizes))
}

/// `rmat:SCALE[:EDGE_FACTOR]`, `path:N`, `complete:N` or `components:S1,S2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub n: usize,
}

fn parse_graph(text: &str) -> Result<GraphSpec, String> {
    let (kind, rest) = text.split_once(':').ok_or("expected KIND:ARGS")?;
    let fields: Vec<&str> = rest.split(':').collect();
    match kind.to_ascii_lowercase().as_str() {
        "rmat" => {
            let scale = positive(fields[0])?;
            if scale > 31 {
                return Err(format!("rmat scale {scale} exceeds 31"));
            }
            let mut p = RmatParams::default();
            if let Some(ef) = fields.get(1) {
                p.edge_factor = positive(ef)?;
            }
            Ok(GraphSpec { kind: GraphKind::Rmat(p), n: 1 << scale })
        }
        "path" => Ok(GraphSpec { kind: GraphKind::Path, n: positive(rest)? }),
        "complete" => Ok(GraphSpec { kind: GraphKind::Complete, n: positive(rest)? }),
        "components" => {
            let sizes: Vec<usize> = rest.split(',').map(positive).collect::<Result<_, _>>()?;
            Ok(GraphSpec { n: sizes.iter().sum(), kind: GraphKind::Components(sizes) })
        }
        other => Err(format!("unknown graph kind `{other}` (rmat, path, complete, components)")),
    }
}

fn number(tok: &str) -> Result<f64, String> {
    tok.trim().parse::<f64>().map_err(|_| format!("`{tok}` is not a number"))
}

/// `uniform:LOW:HIGH` or `pareto:SHAPE[:SCALE]`.
fn parse_costs(text: &str) -> Result<CostDist, String> {
    let fields: Vec<&str> = text.split(':').collect();
    match (fields[0].to_ascii_lowercase().as_str(), fields.len()) {
        ("uniform", 3) => Ok(CostDist::Uniform { low: number(fields[1])?, high: number(fields[2])? }),
        ("pareto", 2) => Ok(CostDist::Pareto { shape: number(fields[1])?, scale: 1.0 }),
        ("pareto", 3) => Ok(CostDist::Pareto { shape: number(fields[1])?, scale: number(fields[2])? }),
        _ => Err("expected uniform:LOW:HIGH or pareto:SHAPE[:SCALE]".into()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "loopsched", version, about = "Benchmark driver for the loop scheduling runtime")]
#[command(after_help = "Exit codes: 0 success, 2 invalid arguments, 3 I/O error, 4 kernel failure.")]
pub struct CliArgs {
    #[arg(long, value_enum, default_value = "synthetic")]
    pub pipeline: Pipeline,

    #[arg(long, value_enum, default_value = "real")]
    pub mode: Mode,

    #[arg(long, value_name = "LIST", default_value = "STATIC", value_parser = parse_schemes, help = scheme_help())]
    pub scheme: List<SchemeId>,

    #[arg(long, value_name = "LIST", default_value = "CENTRALIZED", value_parser = parse_layouts, help = layout_help())]
    pub layout: List<LayoutId>,

    #[arg(long, value_name = "LIST", default_value = "SEQ", value_parser = parse_victims, help = victim_help())]
    pub victim: List<VictimStrategy>,

    /// Worker threads [default: available cores, or the size of --groups].
    #[arg(long)]
    pub workers: Option<usize>,

    /// Worker groups: `GxK` for G groups of K workers, or sizes like `3+5`.
    #[arg(long, value_name = "SPEC", value_parser = parse_groups)]
    pub groups: Option<GroupSpec>,

    /// Pin worker i to logical core i (real mode only).
    #[arg(long)]
    pub pin: bool,

    /// Edge-list file (SNAP text, optionally .gz); cc only.
    #[arg(long, value_name = "PATH", conflicts_with = "gen")]
    pub input: Option<PathBuf>,

    /// Generated graph: `rmat:SCALE[:EDGE_FACTOR]`, `path:N`, `complete:N` or `components:S1,S2,...`.
    #[arg(long, value_name = "SPEC", value_parser = parse_graph)]
    pub gen: Option<GraphSpec>,

    /// Replicate the graph into this many disjoint copies.
    #[arg(long, value_name = "K", default_value_t = 1)]
    pub scale_factor: usize,

    /// Write `new_id original_id` lines here when input ids are renumbered.
    #[arg(long, value_name = "PATH")]
    pub id_map: Option<PathBuf>,

    /// Label propagation pass limit.
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,

    /// Ridge parameter for linreg.
    #[arg(long, default_value_t = loopsched::pipelines::DEFAULT_LAMBDA)]
    pub lambda: f64,

    /// Rows: matrix rows for linreg, task rows for synthetic.
    #[arg(long)]
    pub rows: Option<usize>,

    /// Matrix columns for linreg, the last one being the target.
    #[arg(long, default_value_t = 17)]
    pub cols: usize,

    /// Row cost model for synthetic: `uniform:LOW:HIGH` or `pareto:SHAPE[:SCALE]`.
    #[arg(long, value_name = "DIST", value_parser = parse_costs, default_value = "uniform:1:1")]
    pub costs: CostDist,

    /// Nanoseconds per cost unit (synthetic real-mode spin and simulator ticks).
    #[arg(long, default_value_t = loopsched::sim::DEFAULT_NS_PER_UNIT)]
    pub unit_ns: f64,

    /// Per-acquisition overhead in cost units (sim only).
    #[arg(long, default_value_t = 0.0)]
    pub overhead: f64,

    /// Per-probe steal latency in cost units (sim only).
    #[arg(long, default_value_t = 0.0)]
    pub steal_latency: f64,

    #[arg(long, default_value_t = 5)]
    pub reps: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Summary CSV output path.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,

    /// Per-chunk trace CSV output path.
    #[arg(long, value_name = "PATH")]
    pub chunk_csv: Option<PathBuf>,

    /// Per-steal trace CSV output path.
    #[arg(long, value_name = "PATH")]
    pub steal_csv: Option<PathBuf>,

    #[arg(long, default_value_t = 1)]
    pub min_chunk: usize,

    /// FISS/VISS stage count.
    #[arg(long)]
    pub fiss_stages: Option<usize>,

    /// PLS static workload ratio in (0, 1].
    #[arg(long)]
    pub pls_swr: Option<f64>,

    /// PSS divisor factor.
    #[arg(long)]
    pub pss_factor: Option<f64>,

    /// TSS/TFSS last chunk size.
    #[arg(long)]
    pub tss_last: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_specs() {
        assert_eq!(parse_groups("2x4").unwrap(), GroupSpec(vec![4, 4]));
        assert_eq!(parse_groups("3+5").unwrap(), GroupSpec(vec![3, 5]));
        assert_eq!(parse_groups("8").unwrap(), GroupSpec(vec![8]));
        assert!(parse_groups("0x4").is_err());
        let t = parse_groups("2x2").unwrap().topology().unwrap();
        assert_eq!(t.group_of(3), 1);
    }

    #[test]
    fn graph_specs() {
        assert_eq!(parse_graph("components:3,1").unwrap().n, 4);
        assert_eq!(parse_graph("rmat:10").unwrap().n, 1024);
        assert!(matches!(parse_graph("rmat:4:2").unwrap().kind, GraphKind::Rmat(RmatParams { edge_factor: 2, .. })));
        assert!(parse_graph("star:4").is_err());
        assert!(parse_graph("path").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_schemes("all").unwrap().0.len(), 11);
        assert_eq!(parse_schemes("gss,FAC2,gss").unwrap().0, vec![SchemeId::Gss, SchemeId::Fac2]);
        assert!(parse_schemes("FOO").unwrap_err().contains("FOO"));
        assert_eq!(parse_costs("pareto:1.5").unwrap(), CostDist::Pareto { shape: 1.5, scale: 1.0 });
        assert!(parse_costs("normal:1").is_err());
    }
}
