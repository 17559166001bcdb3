use std::sync::Mutex;

use crate::config::{RowRange, SchedConfig};
use crate::queueing::QueueSystem;
use crate::telemetry::RunReport;
use crate::workerpool::{run_pool_with, PoolOptions};

use super::PipelineError;

pub const LINREG_OP: u32 = 2;
pub const DEFAULT_LAMBDA: f64 = 0.001;

/// Row-major matrix of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, PipelineError> {
        if rows.checked_mul(cols) != Some(values.len()) {
            return Err(PipelineError::InvalidInput(format!(
                "{} values do not fill a {rows} x {cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PipelineError::InvalidInput("matrix contains non-finite values".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, PipelineError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PipelineError::InvalidInput("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// Sum of floats kept exactly as non-overlapping partials; `value` rounds the
/// exact sum once, to nearest with ties to even. Inputs must be finite and
/// far enough from overflow that partial sums stay finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // a remainder with the same sign as `lo` breaks a rounding tie
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// `XᵀX` (upper triangle) and `Xᵀy` of a set of rows, summed exactly. The
/// last column of the source matrix is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct GramPartial {
    features: usize,
    ata: Vec<ExactSum>,
    atb: Vec<ExactSum>,
}

impl GramPartial {
    pub fn zeros(features: usize) -> Self {
        Self {
            features,
            ata: vec![ExactSum::new(); features * (features + 1) / 2],
            atb: vec![ExactSum::new(); features],
        }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn add_row(&mut self, row: &[f64]) {
        let m = self.features;
        let (x, y) = (&row[..m], row[m]);
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                self.ata[k].add(x[i] * x[j]);
                k += 1;
            }
            self.atb[i].add(x[i] * y);
        }
    }

    pub fn merge(&mut self, other: &GramPartial) {
        assert_eq!(self.features, other.features);
        for (a, b) in self.ata.iter_mut().zip(&other.ata) {
            a.merge(b);
        }
        for (a, b) in self.atb.iter_mut().zip(&other.atb) {
            a.merge(b);
        }
    }

    /// Full symmetric `m × m` matrix, row-major.
    pub fn a(&self) -> Vec<f64> {
        let m = self.features;
        let mut out = vec![0.0; m * m];
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                let v = self.ata[k].value();
                out[i * m + j] = v;
                out[j * m + i] = v;
                k += 1;
            }
        }
        out
    }

    pub fn b(&self) -> Vec<f64> {
        self.atb.iter().map(ExactSum::value).collect()
    }
}

/// Gram contribution of the rows in `range`.
pub fn gram_block(xy: &DenseMatrix, range: RowRange) -> GramPartial {
    let mut g = GramPartial::zeros(xy.cols().saturating_sub(1));
    for r in range.rows() {
        g.add_row(xy.row(r));
    }
    g
}

/// Cholesky factorization `A = LLᵀ` and two triangular solves. `a` is
/// row-major `m × m`. A pivot at or below `1e-12 · max|Aᵢᵢ|` is singular.
pub fn solve_spd(a: &[f64], b: &[f64]) -> Result<Vec<f64>, PipelineError> {
    let m = b.len();
    if a.len() != m * m {
        return Err(PipelineError::InvalidInput(format!("matrix has {} entries, expected {}", a.len(), m * m)));
    }
    let scale = (0..m).map(|i| a[i * m + i].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let d = a[j * m + j] - (0..j).map(|k| l[j * m + k] * l[j * m + k]).sum::<f64>();
        if d.is_nan() || d <= tol {
            return Err(PipelineError::SingularSystem { pivot: j });
        }
        let djj = d.sqrt();
        l[j * m + j] = djj;
        for i in j + 1..m {
            let s = a[i * m + j] - (0..j).map(|k| l[i * m + k] * l[j * m + k]).sum::<f64>();
            l[i * m + j] = s / djj;
        }
    }
    let mut z = vec![0.0; m];
    for i in 0..m {
        let s = b[i] - (0..i).map(|k| l[i * m + k] * z[k]).sum::<f64>();
        z[i] = s / l[i * m + i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s = z[i] - (i + 1..m).map(|k| l[k * m + i] * x[k]).sum::<f64>();
        x[i] = s / l[i * m + i];
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl RegressionModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, x)| b * x).sum()
    }
}

#[derive(Debug)]
pub struct LinregOutput {
    pub model: RegressionModel,
    pub report: RunReport,
}

fn check_shape(xy: &DenseMatrix, lambda: f64) -> Result<(), PipelineError> {
    if xy.cols() < 2 || xy.rows() < xy.cols() - 1 {
        return Err(PipelineError::InvalidInput(format!(
            "need rows >= features >= 1, got a {} x {} matrix",
            xy.rows(),
            xy.cols()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PipelineError::InvalidInput(format!("lambda {lambda} must be non-negative")));
    }
    Ok(())
}

fn solve_normal(g: &GramPartial, lambda: f64) -> Result<RegressionModel, PipelineError> {
    let m = g.features();
    let mut a = g.a();
    for i in 0..m {
        a[i * m + i] += lambda;
    }
    Ok(RegressionModel { coefficients: solve_spd(&a, &g.b())?, lambda })
}

/// Ridge regression `(XᵀX + λI)β = Xᵀy` with the Gram matrix accumulated by
/// row-block tasks. Each worker fills one exact accumulator, so `β` is
/// bitwise identical for every scheduling configuration.
pub fn linreg_train(xy: &DenseMatrix, lambda: f64, cfg: &SchedConfig) -> Result<LinregOutput, PipelineError> {
    check_shape(xy, lambda)?;
    let m = xy.cols() - 1;
    let qs = QueueSystem::build(cfg, xy.rows(), LINREG_OP)?;
    let pool: Mutex<Vec<GramPartial>> = Mutex::new(Vec::new());
    let opts = PoolOptions { pipeline: "linreg", ..PoolOptions::default() };
    let out = run_pool_with(cfg, &qs, opts, |t| {
        let mut acc = pool.lock().expect("accumulator pool").pop().unwrap_or_else(|| GramPartial::zeros(m));
        for r in t.range.rows() {
            acc.add_row(xy.row(r));
        }
        pool.lock().expect("accumulator pool").push(acc);
    })?;
    let mut total = GramPartial::zeros(m);
    for g in pool.into_inner().expect("accumulator pool").iter() {
        total.merge(g);
    }
    Ok(LinregOutput { model: solve_normal(&total, lambda)?, report: out.report })
}

/// Single-threaded reference: plain left-to-right sums and the same solver.
pub fn linreg_direct(xy: &DenseMatrix, lambda: f64) -> Result<RegressionModel, PipelineError> {
    check_shape(xy, lambda)?;
    let m = xy.cols() - 1;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for r in 0..xy.rows() {
        let row = xy.row(r);
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] += row[i] * row[j];
            }
            b[i] += row[i] * row[m];
        }
    }
    for i in 0..m {
        a[i * m + i] += lambda;
    }
    Ok(RegressionModel { coefficients: solve_spd(&a, &b)?, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SchemeId;

    fn xy_line() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]]).unwrap()
    }

    #[test]
    fn exact_sum_rounding() {
        let sum = |xs: &[f64]| {
            let mut s = ExactSum::new();
            xs.iter().for_each(|&x| s.add(x));
            s.value()
        };
        assert_eq!(sum(&[]), 0.0);
        assert_eq!(sum(&[0.1; 10]), 1.0);
        assert_eq!(sum(&[1e100, 1.0, -1e100, 1e-100]), 1.0);
        assert_eq!(sum(&[1.0, 1e-16, 1e-16]), 1.0000000000000002);
        // exactly halfway between 1 and its successor, plus a tiny tie breaker
        let ulp = f64::EPSILON;
        assert_eq!(sum(&[1.0, ulp / 2.0]), 1.0);
        assert_eq!(sum(&[1.0, ulp / 2.0, 1e-300]), 1.0 + ulp);
        assert_eq!(sum(&[1.0, ulp / 2.0, -1e-300]), 1.0);
    }

    #[test]
    fn exact_sum_merge_matches_sequential() {
        let xs: Vec<f64> = (1..200).map(|i| 1.0 / i as f64 * if i % 3 == 0 { -1e8 } else { 1.0 }).collect();
        let mut whole = ExactSum::new();
        xs.iter().for_each(|&x| whole.add(x));
        for cut in [0, 1, 57, 198] {
            let (mut a, mut b) = (ExactSum::new(), ExactSum::new());
            xs[..cut].iter().for_each(|&x| a.add(x));
            xs[cut..].iter().for_each(|&x| b.add(x));
            b.merge(&a);
            assert_eq!(b.value().to_bits(), whole.value().to_bits());
        }
    }

    #[test]
    fn gram_examples() {
        let one = DenseMatrix::from_rows(&[vec![2.0, 4.0]]).unwrap();
        let g = gram_block(&one, RowRange::new(0, 1));
        assert_eq!((g.a(), g.b()), (vec![4.0], vec![8.0]));
        let g = gram_block(&xy_line(), RowRange::new(0, 4));
        assert_eq!((g.a(), g.b()), (vec![30.0], vec![60.0]));
        let zero = DenseMatrix::new(3, 3, vec![0.0; 9]).unwrap();
        let g = gram_block(&zero, RowRange::new(0, 3));
        assert_eq!((g.a(), g.b()), (vec![0.0; 4], vec![0.0; 2]));
    }

    #[test]
    fn solve_spd_examples() {
        assert_eq!(solve_spd(&[4.0, 0.0, 0.0, 9.0], &[8.0, 27.0]).unwrap(), vec![2.0, 3.0]);
        let x = solve_spd(&[4.0, 2.0, 2.0, 3.0], &[10.0, 8.0]).unwrap();
        assert!((x[0] - 1.75).abs() < 1e-14 && (x[1] - 1.5).abs() < 1e-14);
        assert!(matches!(solve_spd(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0]), Err(PipelineError::SingularSystem { .. })));
        assert!(matches!(solve_spd(&[1.0], &[1.0, 2.0]), Err(PipelineError::InvalidInput(_))));
    }

    #[test]
    fn linreg_examples() {
        let close = |got: Vec<f64>, want: &[f64]| {
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{got:?} vs {want:?}");
            }
        };
        let cfg = SchedConfig::centralized(SchemeId::Ss, 2).unwrap();
        close(linreg_train(&xy_line(), 0.0, &cfg).unwrap().model.coefficients, &[2.0]);
        close(linreg_train(&xy_line(), 30.0, &cfg).unwrap().model.coefficients, &[1.0]);
        close(linreg_direct(&xy_line(), 30.0).unwrap().coefficients, &[1.0]);

        // orthogonal columns give a diagonal system
        let xy = DenseMatrix::from_rows(&[vec![1.0, 0.0, 3.0], vec![0.0, 2.0, 5.0]]).unwrap();
        close(linreg_train(&xy, 1.0, &cfg).unwrap().model.coefficients, &[3.0 / 2.0, 10.0 / 5.0]);
    }

    #[test]
    fn linreg_rejects_bad_shapes() {
        let cfg = SchedConfig::centralized(SchemeId::Gss, 1).unwrap();
        let wide = DenseMatrix::new(1, 3, vec![1.0; 3]).unwrap();
        assert!(matches!(linreg_train(&wide, 0.0, &cfg), Err(PipelineError::InvalidInput(_))));
        assert!(matches!(linreg_train(&xy_line(), -1.0, &cfg), Err(PipelineError::InvalidInput(_))));
        let collinear = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]]).unwrap();
        assert!(matches!(linreg_train(&collinear, 0.0, &cfg), Err(PipelineError::SingularSystem { .. })));
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0]).is_err());
    }
}
