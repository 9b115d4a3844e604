//! Finite samples of kernels: minors, symbol arrays, empirical laws and
//! lazily generated exchangeable arrays.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutnorm::{self, RealMatrix};
use crate::error::{CutError, Result};
use crate::kernel::{self, StepKernel};
use crate::law::{Bound, BoundKind};
use crate::measure::{Config, DiscreteMeasure};
use crate::rng;

/// Restarts of the alternating heuristic when exact cut norms are out of reach.
pub const LOWER_BOUND_RESTARTS: usize = 64;

/// An `n × n` sample of a step kernel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBatch {
    pub n: usize,
    pub q: usize,
    pub seed: u64,
    /// Row coordinates `s_i`.
    pub rows: Vec<f64>,
    /// Column coordinates `x_j`.
    pub cols: Vec<f64>,
    pub row_cells: Vec<usize>,
    pub col_cells: Vec<usize>,
    /// Kernel minor, `minor[(i * n + j) * q + a] = κ_{s_i, x_j}(a)`.
    pub minor: Vec<f64>,
    /// Symbol array, row-major.
    pub symbols: Vec<u8>,
}

impl SampleBatch {
    pub fn symbol(&self, i: usize, j: usize) -> u8 {
        self.symbols[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.symbols[i * self.n..(i + 1) * self.n]
    }

    /// `κ_n`: the minor as a step kernel on the uniform `n × n` grid.
    pub fn minor_kernel(&self) -> StepKernel {
        let w = vec![1.0 / self.n as f64; self.n];
        StepKernel::new(self.q, w.clone(), w, self.minor.clone()).expect("minor rows are distributions")
    }

    /// `κ̂_n`: the symbol array as a {0,1}-valued step kernel.
    pub fn symbol_kernel(&self) -> StepKernel {
        let w = vec![1.0 / self.n as f64; self.n];
        StepKernel::new(self.q, w.clone(), w, one_hot(&self.symbols, self.q)).expect("one-hot blocks")
    }

    /// `κ̂_n` with rows sorted by `s_i` and columns by `x_j`.
    pub fn sorted_symbol_kernel(&self) -> StepKernel {
        let order = |c: &[f64]| {
            let mut idx: Vec<usize> = (0..self.n).collect();
            idx.sort_by(|a, b| c[*a].total_cmp(&c[*b]));
            idx
        };
        let (ro, co) = (order(&self.rows), order(&self.cols));
        let symbols: Vec<u8> = ro.iter().flat_map(|&i| co.iter().map(move |&j| self.symbol(i, j))).collect();
        let w = vec![1.0 / self.n as f64; self.n];
        StepKernel::new(self.q, w.clone(), w, one_hot(&symbols, self.q)).expect("one-hot blocks")
    }
}

fn one_hot(symbols: &[u8], q: usize) -> Vec<f64> {
    let mut out = vec![0.0; symbols.len() * q];
    for (k, s) in symbols.iter().enumerate() {
        out[k * q + *s as usize] = 1.0;
    }
    out
}

fn draw_coordinate<R: Rng>(rng: &mut R, weights: &[f64]) -> (f64, usize) {
    let c = rng::weighted_index(rng, weights);
    let start: f64 = weights[..c].iter().sum();
    (start + rng.random::<f64>() * weights[c], c)
}

/// Draw `s_1..s_n`, `x_1..x_n` and the symbol array of `κ`.
pub fn sample_matrix(k: &StepKernel, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(CutError::InvalidInput("sample size must be positive".into()));
    }
    let q = k.q();
    let mut rr = rng::stream(seed, 0);
    let (rows, row_cells): (Vec<f64>, Vec<usize>) = (0..n).map(|_| draw_coordinate(&mut rr, k.row_weights())).unzip();
    let mut cr = rng::stream(seed, 1);
    let (cols, col_cells): (Vec<f64>, Vec<usize>) = (0..n).map(|_| draw_coordinate(&mut cr, k.col_weights())).unzip();
    let mut sr = rng::stream(seed, 2);
    let mut minor = Vec::with_capacity(n * n * q);
    let mut symbols = Vec::with_capacity(n * n);
    for &i in &row_cells {
        for &j in &col_cells {
            let p = k.block(i, j);
            minor.extend_from_slice(p);
            symbols.push(rng::weighted_index(&mut sr, p) as u8);
        }
    }
    Ok(SampleBatch { n, q, seed, rows, cols, row_cells, col_cells, minor, symbols })
}

/// `μ_n`: the empirical distribution of the rows of the symbol array.
pub fn empirical_law(batch: &SampleBatch) -> Result<DiscreteMeasure> {
    let mut counts: BTreeMap<Config, f64> = BTreeMap::new();
    for i in 0..batch.n {
        *counts.entry(batch.row(i).to_vec()).or_insert(0.0) += 1.0;
    }
    let n = batch.n as f64;
    DiscreteMeasure::new(batch.q, batch.n, counts.into_iter().map(|(c, k)| (c, k / n)))
}

/// A lazily materialised array `X(i, j)` drawn from a mixture of kernels.
///
/// The kernel is chosen once. Row coordinates, column coordinates and entries
/// each come from their own substream addressed by index, so the value of an
/// entry does not depend on which entries were requested before it.
#[derive(Clone, Debug)]
pub struct ExchangeableStream {
    kernel: StepKernel,
    chosen: usize,
    seed: u64,
    rows: HashMap<usize, usize>,
    cols: HashMap<usize, usize>,
    entries: HashMap<(usize, usize), u8>,
}

impl ExchangeableStream {
    pub fn new(mixture: &[(f64, StepKernel)], seed: u64) -> Result<Self> {
        if mixture.is_empty() {
            return Err(CutError::InvalidInput("empty mixture".into()));
        }
        let weights: Vec<f64> = mixture.iter().map(|m| m.0).collect();
        if weights.iter().any(|w| *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CutError::InvalidInput("mixture weights must be a distribution".into()));
        }
        let chosen = rng::weighted_index(&mut rng::stream(seed, 0), &weights);
        Ok(Self {
            kernel: mixture[chosen].1.clone(),
            chosen,
            seed,
            rows: HashMap::new(),
            cols: HashMap::new(),
            entries: HashMap::new(),
        })
    }

    /// Index of the mixture component in use.
    pub fn component(&self) -> usize {
        self.chosen
    }

    fn row_cell(&mut self, i: usize) -> usize {
        let (seed, k) = (self.seed, &self.kernel);
        *self.rows.entry(i).or_insert_with(|| draw_coordinate(&mut rng::cell(seed, 1, i as u64), k.row_weights()).1)
    }

    fn col_cell(&mut self, j: usize) -> usize {
        let (seed, k) = (self.seed, &self.kernel);
        *self.cols.entry(j).or_insert_with(|| draw_coordinate(&mut rng::cell(seed, 2, j as u64), k.col_weights()).1)
    }

    pub fn get(&mut self, i: usize, j: usize) -> u8 {
        if let Some(v) = self.entries.get(&(i, j)) {
            return *v;
        }
        assert!(i < 1 << 32 && j < 1 << 32, "array index out of range");
        let (a, b) = (self.row_cell(i), self.col_cell(j));
        let counter = (i as u64) << 32 | j as u64;
        let v = rng::weighted_index(&mut rng::cell(self.seed, 3, counter), self.kernel.block(a, b)) as u8;
        self.entries.insert((i, j), v);
        v
    }

    /// The top-left `rows × cols` prefix.
    pub fn prefix(&mut self, rows: usize, cols: usize) -> Vec<Vec<u8>> {
        (0..rows).map(|i| (0..cols).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// One row of a trend table.
#[derive(Clone, Debug, Serialize)]
pub struct TrendRow {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Kind of the per-trial quantity being averaged.
    pub kind: BoundKind,
}

fn summarize(n: usize, values: &[f64], kind: BoundKind) -> TrendRow {
    let t = values.len() as f64;
    let mean = values.iter().sum::<f64>() / t;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0) } else { 0.0 };
    TrendRow { n, trials: values.len(), mean, stderr: (var / t).sqrt(), kind }
}

/// Upper bound on `D_⊠(law of κ, law of κ̂_n)` from the sorted alignment of one sample.
pub fn alignment_upper_bound(k: &StepKernel, batch: &SampleBatch) -> Result<f64> {
    kernel::cut_distance_noperm_upper(k, &batch.sorted_symbol_kernel())
}

/// Mean ± stderr over trials of [`alignment_upper_bound`] for each `n`.
pub fn sampling_convergence_experiment(k: &StepKernel, n_list: &[usize], trials: usize, seed: u64) -> Result<Vec<TrendRow>> {
    check_trend_args(n_list, trials)?;
    n_list
        .iter()
        .map(|&n| {
            let vals = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let b = sample_matrix(k, n, rng::derive_seed(seed, (n as u64) << 32 | t as u64))?;
                    alignment_upper_bound(k, &b)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(summarize(n, &vals, BoundKind::Upper))
        })
        .collect()
}

/// `D_⊡(κ_n, κ̂_n)`: exact when `n ≤ 24`, otherwise the best alternating lower bound.
pub fn minor_symbol_gap(batch: &SampleBatch, seed: u64) -> Result<Bound> {
    let n = batch.n;
    let w = vec![1.0 / n as f64; n];
    let mut best = Bound { value: 0.0, kind: BoundKind::Exact };
    for a in 0..batch.q {
        let data = (0..n * n)
            .map(|k| batch.minor[k * batch.q + a] - (batch.symbols[k] as usize == a) as u8 as f64)
            .collect();
        let m = RealMatrix::new(n, n, data)?.with_weights(w.clone(), w.clone())?;
        let b = if n <= cutnorm::MAX_EXACT_AXIS {
            Bound { value: cutnorm::cut_norm_exact(&m)?.0, kind: BoundKind::Exact }
        } else {
            let seed = rng::derive_seed(seed, a as u64);
            Bound { value: cutnorm::cut_norm_alternating(&m, LOWER_BOUND_RESTARTS, seed).0, kind: BoundKind::Lower }
        };
        if b.value >= best.value {
            best = Bound { value: b.value, kind: if b.kind == BoundKind::Lower { BoundKind::Lower } else { best.kind } };
        } else if b.kind == BoundKind::Lower {
            best.kind = BoundKind::Lower;
        }
    }
    Ok(best)
}

/// Mean ± stderr over trials of [`minor_symbol_gap`] for each `n`.
pub fn minor_symbol_experiment(k: &StepKernel, n_list: &[usize], trials: usize, seed: u64) -> Result<Vec<TrendRow>> {
    check_trend_args(n_list, trials)?;
    n_list
        .iter()
        .map(|&n| {
            let vals = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let s = rng::derive_seed(seed, (n as u64) << 32 | t as u64);
                    minor_symbol_gap(&sample_matrix(k, n, s)?, s)
                })
                .collect::<Result<Vec<Bound>>>()?;
            let kind = if vals.iter().all(|b| b.kind == BoundKind::Exact) { BoundKind::Exact } else { BoundKind::Lower };
            let v: Vec<f64> = vals.iter().map(|b| b.value).collect();
            Ok(summarize(n, &v, kind))
        })
        .collect()
}

fn check_trend_args(n_list: &[usize], trials: usize) -> Result<()> {
    if trials == 0 || n_list.is_empty() || n_list.contains(&0) {
        return Err(CutError::InvalidInput("need at least one trial and positive sizes".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CutError::InvalidInput("sizes must be strictly ascending".into()));
    }
    Ok(())
}
