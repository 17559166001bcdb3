use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use loopsched::data::{
    build_csr, compact_ids, component_labels, gen_costs, gen_graph, gen_regression, read_edge_file, scale_up,
    symmetrize_dedup, CostVector, CsrMatrix, DataError, EdgeList, GraphKind, RmatParams,
};
use loopsched::pipelines::{connected_components, linreg_direct, linreg_train, DenseMatrix, PipelineError};
use loopsched::queueing::QueueSystem;
use loopsched::sim::{simulate, SimConfig};
use loopsched::telemetry::{write_chunk_csv, write_csv, write_steal_csv, RunReport, TelemetryError};
use loopsched::workerpool::{run_pool_with, PoolOptions};
use loopsched::{LayoutId, SchedConfig, SchemeId, SchemeParams, Topology, VictimStrategy};

use crate::args::{CliArgs, Mode, Pipeline};

#[derive(Debug)]
pub enum CliError {
    Args(String),
    Io(String),
    Kernel(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Args(_) => 2,
            CliError::Io(_) => 3,
            CliError::Kernel(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Args(m) | CliError::Io(m) | CliError::Kernel(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) | DataError::Parse { .. } => CliError::Io(e.to_string()),
            DataError::Overflow { .. } | DataError::InvalidParams(_) => CliError::Args(e.to_string()),
        }
    }
}

impl From<TelemetryError> for CliError {
    fn from(e: TelemetryError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn kernel_err(e: PipelineError) -> CliError {
    match e {
        PipelineError::InvalidInput(m) => CliError::Args(m),
        other => CliError::Kernel(other.to_string()),
    }
}

const DEFAULT_GRAPH_SCALE: u32 = 14;
const DEFAULT_LINREG_ROWS: usize = 4096;
const DEFAULT_SYNTHETIC_ROWS: usize = 2000;

enum Workload {
    Graph { csr: CsrMatrix, oracle: Vec<u32> },
    Matrix { xy: DenseMatrix, oracle: Vec<f64> },
    Synthetic { costs: CostVector },
}

fn topology(args: &CliArgs) -> Result<Topology, CliError> {
    let topo = match (&args.groups, args.workers) {
        (Some(g), Some(w)) if g.workers() != w => {
            return Err(CliError::Args(format!("--groups describes {} workers but --workers is {w}", g.workers())));
        }
        (Some(g), _) => g.topology().map_err(CliError::Args)?,
        (None, Some(w)) => Topology::flat(w).map_err(|e| CliError::Args(e.to_string()))?,
        (None, None) => {
            let w = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
            Topology::flat(w).map_err(|e| CliError::Args(e.to_string()))?
        }
    };
    if args.pin {
        let cores = (0..topo.worker_count()).collect();
        return topo.with_pin_map(cores).map_err(|e| CliError::Args(e.to_string()));
    }
    Ok(topo)
}

fn scheme_params(args: &CliArgs) -> Result<SchemeParams, CliError> {
    let mut p = SchemeParams::default();
    if let Some(v) = args.fiss_stages {
        p.fiss_stages = v;
    }
    if let Some(v) = args.pls_swr {
        p.pls_swr = v;
    }
    if let Some(v) = args.pss_factor {
        p.pss_factor = v;
    }
    if let Some(v) = args.tss_last {
        p.tss_last = v;
    }
    p.validate().map_err(|e| CliError::Args(e.to_string()))?;
    Ok(p)
}

fn check_consistency(args: &CliArgs) -> Result<(), CliError> {
    let fail = |m: &str| Err(CliError::Args(m.to_string()));
    if args.pipeline != Pipeline::Cc && (args.input.is_some() || args.gen.is_some()) {
        return fail("--input and --gen apply to the cc pipeline only");
    }
    if args.pipeline != Pipeline::Cc && args.scale_factor != 1 {
        return fail("--scale-factor applies to the cc pipeline only");
    }
    if args.id_map.is_some() && args.input.is_none() {
        return fail("--id-map requires --input");
    }
    if args.mode == Mode::Sim && args.pin {
        return fail("--pin has no meaning in sim mode");
    }
    if args.mode == Mode::Real && (args.overhead != 0.0 || args.steal_latency != 0.0) {
        return fail("--overhead and --steal-latency apply to sim mode only");
    }
    if args.reps == 0 {
        return fail("--reps must be positive");
    }
    if args.scale_factor == 0 {
        return fail("--scale-factor must be positive");
    }
    if !(args.unit_ns > 0.0 && args.unit_ns.is_finite()) {
        return fail("--unit-ns must be positive");
    }
    Ok(())
}

fn write_id_map(path: &Path, original: &[u32]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for (new, old) in original.iter().enumerate() {
        writeln!(w, "{new}\t{old}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn load_graph(args: &CliArgs) -> Result<EdgeList, CliError> {
    let raw = if let Some(path) = &args.input {
        let e = read_edge_file(path).map_err(|e| match e {
            DataError::Io(io) => io_err(path, io),
            other => CliError::Io(format!("{}: {other}", path.display())),
        })?;
        let (compact, original) = compact_ids(&e);
        if compact.n < e.n {
            eprintln!("renumbered {} used ids out of {}", compact.n, e.n);
            if let Some(map) = &args.id_map {
                write_id_map(map, &original)?;
            }
            compact
        } else {
            e
        }
    } else {
        let (kind, n) = match &args.gen {
            Some(spec) => (spec.kind.clone(), spec.n),
            None => (GraphKind::Rmat(RmatParams::default()), 1usize << DEFAULT_GRAPH_SCALE),
        };
        gen_graph(&kind, n, args.seed)?
    };
    let sym = symmetrize_dedup(&raw);
    Ok(if args.scale_factor > 1 { scale_up(&sym, args.scale_factor)? } else { sym })
}

fn build_workload(args: &CliArgs) -> Result<Workload, CliError> {
    match args.pipeline {
        Pipeline::Cc => {
            let g = load_graph(args)?;
            if g.n == 0 {
                return Err(CliError::Args("graph has no nodes".into()));
            }
            let oracle = component_labels(g.n, &g.edges);
            eprintln!("graph: {} nodes, {} directed edges", g.n, g.edges.len());
            Ok(Workload::Graph { csr: build_csr(&g), oracle })
        }
        Pipeline::Linreg => {
            let rows = args.rows.unwrap_or(DEFAULT_LINREG_ROWS);
            if args.cols < 2 {
                return Err(CliError::Args("--cols must be at least 2 (features plus target)".into()));
            }
            let xy = gen_regression(rows, args.cols - 1, 0.1, args.seed)?;
            let oracle = linreg_direct(&xy, args.lambda).map_err(kernel_err)?.coefficients;
            Ok(Workload::Matrix { xy, oracle })
        }
        Pipeline::Synthetic => {
            let rows = args.rows.unwrap_or(DEFAULT_SYNTHETIC_ROWS);
            Ok(Workload::Synthetic { costs: gen_costs(args.costs, rows, args.seed)? })
        }
    }
}

fn spin_for(d: Duration) {
    let until = Instant::now() + d;
    while Instant::now() < until {
        std::hint::spin_loop();
    }
}

fn same_labels(got: &[u32], oracle: &[u32], cfg: &SchedConfig) -> Result<(), CliError> {
    if got != oracle {
        return Err(CliError::Kernel(format!(
            "labels for {} {} {} disagree with the union-find oracle",
            cfg.scheme, cfg.layout, cfg.victim
        )));
    }
    Ok(())
}

fn close_to(beta: &[f64], oracle: &[f64], cfg: &SchedConfig) -> Result<(), CliError> {
    let scale = oracle.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let err = beta.iter().zip(oracle).fold(0.0f64, |a, (b, o)| a.max((b - o).abs())) / scale;
    if err > 1e-8 {
        return Err(CliError::Kernel(format!(
            "coefficients for {} {} {} deviate from the direct solve by {err:e}",
            cfg.scheme, cfg.layout, cfg.victim
        )));
    }
    Ok(())
}

/// Simulated rows cost: one unit per visited neighbor plus one, or the
/// Gram-update work of one matrix row.
fn sim_costs(work: &Workload) -> Result<CostVector, CliError> {
    let costs = match work {
        Workload::Graph { csr, .. } => (0..csr.n()).map(|r| 1.0 + csr.degree(r) as f64).collect(),
        Workload::Matrix { xy, .. } => {
            let m = (xy.cols() - 1) as f64;
            vec![m * (m + 1.0) / 2.0 + m; xy.rows()]
        }
        Workload::Synthetic { costs } => return Ok(costs.clone()),
    };
    Ok(CostVector::new(costs)?)
}

struct Runner<'a> {
    args: &'a CliArgs,
    work: Workload,
    /// Pass count of the serial reference cc run, replayed in sim mode.
    cc_passes: usize,
    sim_costs: Option<CostVector>,
}

impl Runner<'_> {
    fn pipeline_name(&self) -> &'static str {
        match self.args.pipeline {
            Pipeline::Cc => "cc",
            Pipeline::Linreg => "linreg",
            Pipeline::Synthetic => "synthetic",
        }
    }

    fn real(&self, cfg: &SchedConfig) -> Result<RunReport, CliError> {
        match &self.work {
            Workload::Graph { csr, oracle } => {
                let out = connected_components(csr, cfg, self.args.max_iters).map_err(kernel_err)?;
                same_labels(&out.labels, oracle, cfg)?;
                Ok(out.report)
            }
            Workload::Matrix { xy, oracle } => {
                let out = linreg_train(xy, self.args.lambda, cfg).map_err(kernel_err)?;
                close_to(&out.model.coefficients, oracle, cfg)?;
                Ok(out.report)
            }
            Workload::Synthetic { costs } => {
                let qs = QueueSystem::build(cfg, costs.len(), 0).map_err(|e| CliError::Args(e.to_string()))?;
                let unit = self.args.unit_ns;
                let c = costs.as_slice();
                let opts = PoolOptions { pipeline: "synthetic", ..PoolOptions::default() };
                let out = run_pool_with(cfg, &qs, opts, |t| {
                    let units: f64 = c[t.range.start..t.range.end()].iter().sum();
                    spin_for(Duration::from_nanos((units * unit) as u64));
                })
                .map_err(|e| CliError::Kernel(e.to_string()))?;
                Ok(out.report)
            }
        }
    }

    fn sim(&self, cfg: &SchedConfig) -> Result<RunReport, CliError> {
        let mut sc = SimConfig::new(cfg.clone()).with_overhead(self.args.overhead).with_steal_latency(self.args.steal_latency);
        sc.ns_per_unit = self.args.unit_ns;
        let costs = self.sim_costs.as_ref().expect("sim costs prepared");
        let pass = simulate(&sc, costs).map_err(|e| CliError::Args(e.to_string()))?.report;
        let mut report = pass.clone();
        report.pipeline = self.pipeline_name().to_string();
        for _ in 1..self.cc_passes {
            report.absorb(pass.clone());
        }
        Ok(report)
    }

    fn run(&self, cfg: &SchedConfig, rep: usize) -> Result<RunReport, CliError> {
        let mut r = match self.args.mode {
            Mode::Real => self.real(cfg)?,
            Mode::Sim => self.sim(cfg)?,
        };
        r.rep = rep;
        Ok(r)
    }
}

fn prepare(args: &CliArgs) -> Result<Runner<'_>, CliError> {
    let work = build_workload(args)?;
    let mut runner = Runner { args, work, cc_passes: 1, sim_costs: None };
    if args.mode == Mode::Sim {
        // results in sim mode come from one serial reference run
        let serial = SchedConfig::centralized(SchemeId::Static, 1).expect("one worker");
        match &runner.work {
            Workload::Graph { csr, oracle } => {
                let out = connected_components(csr, &serial, args.max_iters).map_err(kernel_err)?;
                same_labels(&out.labels, oracle, &serial)?;
                runner.cc_passes = out.iterations;
            }
            Workload::Matrix { xy, oracle } => {
                let out = linreg_train(xy, args.lambda, &serial).map_err(kernel_err)?;
                close_to(&out.model.coefficients, oracle, &serial)?;
            }
            Workload::Synthetic { .. } => {}
        }
        runner.sim_costs = Some(sim_costs(&runner.work)?);
    }
    Ok(runner)
}

type Key = (SchemeId, LayoutId, VictimStrategy);

fn print_table(args: &CliArgs, reports: &[RunReport], topo: &Topology) {
    let mut groups: BTreeMap<Key, Vec<u64>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.scheme, r.layout, r.victim)).or_default().push(r.makespan_ns);
    }
    let mean = |v: &[u64]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    let mode = match args.mode {
        Mode::Real => "real",
        Mode::Sim => "sim",
    };
    println!(
        "{} pipeline, {mode} mode, {} workers ({}), {} reps",
        reports.first().map_or("", |r| r.pipeline.as_str()),
        topo.worker_count(),
        topo.describe(),
        args.reps
    );
    println!("{:<8} {:<12} {:<7} {:>16} {:>12}", "scheme", "layout", "victim", "mean makespan ms", "vs STATIC %");
    for (&(scheme, layout, victim), spans) in &groups {
        let m = mean(spans);
        let gain = groups
            .get(&(SchemeId::Static, layout, victim))
            .map(|base| {
                let b = mean(base);
                format!("{:+.1}", (b - m) / b * 100.0)
            })
            .unwrap_or_else(|| "n/a".into());
        println!("{:<8} {:<12} {:<7} {:>16.3} {:>12}", scheme.as_str(), layout.as_str(), victim.as_str(), m / 1e6, gain);
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<usize, TelemetryError>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    f(&mut w).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn run_experiment(args: &CliArgs) -> Result<(), CliError> {
    check_consistency(args)?;
    let topo = topology(args)?;
    let params = scheme_params(args)?;
    let runner = prepare(args)?;

    // STATIC is always run so the table has a baseline; unrequested
    // baseline runs stay out of the CSV files
    let mut schemes = args.scheme.0.clone();
    let baseline_only = !schemes.contains(&SchemeId::Static);
    if baseline_only {
        schemes.insert(0, SchemeId::Static);
    }
    let mut reports = Vec::new();
    for &scheme in &schemes {
        for &layout in &args.layout.0 {
            for &victim in &args.victim.0 {
                for rep in 0..args.reps {
                    let cfg = SchedConfig::new(scheme, layout, victim, topo.clone())
                        .with_min_chunk(args.min_chunk)
                        .with_params(params)
                        .with_seed(args.seed.wrapping_add(rep as u64));
                    cfg.validate().map_err(|e| CliError::Args(e.to_string()))?;
                    reports.push(runner.run(&cfg, rep)?);
                }
            }
        }
    }

    let requested: Vec<RunReport> =
        reports.iter().filter(|r| !(baseline_only && r.scheme == SchemeId::Static)).cloned().collect();
    if let Some(path) = &args.csv {
        write_file(path, |w| write_csv(&requested, w))?;
    }
    if let Some(path) = &args.chunk_csv {
        write_file(path, |w| write_chunk_csv(&requested, w))?;
    }
    if let Some(path) = &args.steal_csv {
        write_file(path, |w| write_steal_csv(&requested, w))?;
    }
    print_table(args, &reports, &topo);
    Ok(())
}
