//! Step kernels `[0,1]² → P(Ω)` on weighted grids.

use rayon::prelude::*;
use serde::Serialize;

use crate::cutnorm::{self, CutWitness, RealMatrix};
use crate::error::{CutError, Result};

const PROB_TOL: f64 = 1e-9;
/// Cells thinner than this after refinement are merged into a neighbour.
const MIN_CELL: f64 = 1e-15;

/// A kernel constant on the blocks of a `rows × cols` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StepKernel {
    q: usize,
    row_weights: Vec<f64>,
    col_weights: Vec<f64>,
    /// `blocks[(i * cols + j) * q + a]`
    blocks: Vec<f64>,
}

/// A grouping of the cells of one kernel axis into classes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    /// Mass of each class.
    pub weights: Vec<f64>,
    /// Class index of every base cell.
    pub class_of: Vec<usize>,
}

impl Partition {
    pub fn new(cell_weights: &[f64], class_of: Vec<usize>) -> Result<Self> {
        if class_of.len() != cell_weights.len() {
            return Err(CutError::ShapeMismatch("class map length differs from cell count".into()));
        }
        // relabel classes by first appearance so equal partitions compare equal
        let mut label = std::collections::HashMap::new();
        let class_of: Vec<usize> = class_of
            .into_iter()
            .map(|c| {
                let next = label.len();
                *label.entry(c).or_insert(next)
            })
            .collect();
        let mut weights = vec![0.0; label.len()];
        for (c, w) in class_of.iter().zip(cell_weights) {
            weights[*c] += w;
        }
        Ok(Self { weights, class_of })
    }

    /// One class holding every cell.
    pub fn trivial(cells: &[f64]) -> Self {
        Self { weights: vec![cells.iter().sum()], class_of: vec![0; cells.len()] }
    }

    /// Every cell its own class.
    pub fn discrete(cells: &[f64]) -> Self {
        Self { weights: cells.to_vec(), class_of: (0..cells.len()).collect() }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    /// Split every class along membership in `set` (a list of cells).
    pub fn split(&self, cells: &[f64], set: &[usize]) -> Self {
        let mut inside = vec![false; self.class_of.len()];
        set.iter().for_each(|&c| inside[c] = true);
        let keys: Vec<usize> = self.class_of.iter().zip(&inside).map(|(c, s)| 2 * c + *s as usize).collect();
        Self::new(cells, keys).expect("same length")
    }
}

impl StepKernel {
    /// Validate and build; weights and blocks are checked to 1e-9 and rescaled when off by more than rounding noise.
    pub fn new(q: usize, row_weights: Vec<f64>, col_weights: Vec<f64>, mut blocks: Vec<f64>) -> Result<Self> {
        if q == 0 {
            return Err(CutError::InvalidInput("empty alphabet".into()));
        }
        for w in [&row_weights, &col_weights] {
            if w.is_empty() || w.iter().any(|x| !(*x > 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
                return Err(CutError::InvalidInput("grid weights must be positive and sum to 1".into()));
            }
        }
        if blocks.len() != row_weights.len() * col_weights.len() * q {
            return Err(CutError::ShapeMismatch(format!(
                "{} block entries for a {}x{} grid over {q} symbols",
                blocks.len(),
                row_weights.len(),
                col_weights.len()
            )));
        }
        for b in blocks.chunks_mut(q) {
            check_prob(b)?;
            rescale(b);
        }
        let (mut row_weights, mut col_weights) = (row_weights, col_weights);
        rescale(&mut row_weights);
        rescale(&mut col_weights);
        Ok(Self { q, row_weights, col_weights, blocks })
    }

    /// One-block kernel.
    pub fn constant(p: &[f64]) -> Result<Self> {
        Self::new(p.len(), vec![1.0], vec![1.0], p.to_vec())
    }

    /// Uniform `grid × grid` kernel with block values `f(s, x)` at cell midpoints.
    pub fn discretize<F>(q: usize, grid: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Vec<f64>,
    {
        if grid == 0 {
            return Err(CutError::InvalidInput("grid must be at least 1".into()));
        }
        let mut blocks = Vec::with_capacity(grid * grid * q);
        for i in 0..grid {
            for j in 0..grid {
                let v = f((i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64);
                if v.len() != q {
                    return Err(CutError::InvalidInput(format!("callback returned {} values for q = {q}", v.len())));
                }
                check_prob(&v)?;
                blocks.extend(v);
            }
        }
        let w = vec![1.0 / grid as f64; grid];
        Self::new(q, w.clone(), w, blocks)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rows(&self) -> usize {
        self.row_weights.len()
    }

    pub fn cols(&self) -> usize {
        self.col_weights.len()
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn col_weights(&self) -> &[f64] {
        &self.col_weights
    }

    pub fn block(&self, i: usize, j: usize) -> &[f64] {
        let k = (i * self.cols() + j) * self.q;
        &self.blocks[k..k + self.q]
    }

    pub fn value(&self, i: usize, j: usize, a: usize) -> f64 {
        self.blocks[(i * self.cols() + j) * self.q + a]
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    /// Row cell containing `s ∈ [0,1)`.
    pub fn row_cell(&self, s: f64) -> usize {
        locate(&self.row_weights, s)
    }

    pub fn col_cell(&self, x: f64) -> usize {
        locate(&self.col_weights, x)
    }

    /// Value at a point.
    pub fn at(&self, s: f64, x: f64, a: usize) -> f64 {
        self.value(self.row_cell(s), self.col_cell(x), a)
    }

    /// The real step function `(s, x) ↦ κ_{s,x}(ω)` as a weighted matrix.
    pub fn slice(&self, a: usize) -> RealMatrix {
        let data = (0..self.rows() * self.cols()).map(|k| self.blocks[k * self.q + a]).collect();
        RealMatrix::new(self.rows(), self.cols(), data)
            .and_then(|m| m.with_weights(self.row_weights.clone(), self.col_weights.clone()))
            .expect("kernel invariants")
    }

    /// Re-express on finer axes given by cell maps into the current grid.
    pub fn refine(&self, rows: &Grid, cols: &Grid) -> Result<Self> {
        let mut blocks = Vec::with_capacity(rows.len() * cols.len() * self.q);
        for &i in &rows.map {
            for &j in &cols.map {
                blocks.extend_from_slice(self.block(i, j));
            }
        }
        Self::new(self.q, rows.weights.clone(), cols.weights.clone(), blocks)
    }

    /// Apply a permutation to the row cells: new row `r` is old row `perm[r]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        let rw = perm.iter().map(|&i| self.row_weights[i]).collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for &i in perm {
            for j in 0..self.cols() {
                blocks.extend_from_slice(self.block(i, j));
            }
        }
        Self::new(self.q, rw, self.col_weights.clone(), blocks)
    }

    pub fn permute_cols(&self, perm: &[usize]) -> Result<Self> {
        let cw = perm.iter().map(|&j| self.col_weights[j]).collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for i in 0..self.rows() {
            for &j in perm {
                blocks.extend_from_slice(self.block(i, j));
            }
        }
        Self::new(self.q, self.row_weights.clone(), cw, blocks)
    }

    /// κ^{S,X} on the grid of κ: each block replaced by its class-pair mass average.
    pub fn average(&self, s: &Partition, x: &Partition) -> Result<Self> {
        if s.class_of.len() != self.rows() || x.class_of.len() != self.cols() {
            return Err(CutError::ShapeMismatch("partitions must group the kernel's own cells".into()));
        }
        let (ks, kx, q) = (s.num_classes(), x.num_classes(), self.q);
        let mut acc = vec![0.0; ks * kx * q];
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let m = self.row_weights[i] * self.col_weights[j];
                let base = (s.class_of[i] * kx + x.class_of[j]) * q;
                for a in 0..q {
                    acc[base + a] += m * self.value(i, j, a);
                }
            }
        }
        for (k, chunk) in acc.chunks_mut(q).enumerate() {
            let m = s.weights[k / kx] * x.weights[k % kx];
            chunk.iter_mut().for_each(|v| *v /= m);
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let base = (s.class_of[i] * kx + x.class_of[j]) * q;
                blocks.extend_from_slice(&acc[base..base + q]);
            }
        }
        Self::new(q, self.row_weights.clone(), self.col_weights.clone(), blocks)
    }

    /// κ^{S,X} as a kernel on the class grid.
    pub fn quotient(&self, s: &Partition, x: &Partition) -> Result<Self> {
        let avg = self.average(s, x)?;
        let rep_r = representatives(&s.class_of, s.num_classes());
        let rep_c = representatives(&x.class_of, x.num_classes());
        let mut blocks = Vec::new();
        for &i in &rep_r {
            for &j in &rep_c {
                blocks.extend_from_slice(avg.block(i, j));
            }
        }
        Self::new(self.q, s.weights.clone(), x.weights.clone(), blocks)
    }

    /// The symmetric real step function κ^{(ω)} on the grid `(p/2) ++ (w/2)`.
    ///
    /// Cell `i < rows` stands for `s/2` and cell `rows + j` for `(1+x)/2`;
    /// entries `(i, rows+j)` and `(rows+j, i)` carry `κ_{ij}(ω)`, the diagonal quadrants are 0.
    pub fn bipartite_embed(&self, a: usize) -> Result<RealMatrix> {
        if a >= self.q {
            return Err(CutError::InvalidInput(format!("symbol {a} outside alphabet of size {}", self.q)));
        }
        let (k, l) = (self.rows(), self.cols());
        let d = k + l;
        let mut data = vec![0.0; d * d];
        for i in 0..k {
            for j in 0..l {
                let v = self.value(i, j, a);
                data[i * d + k + j] = v;
                data[(k + j) * d + i] = v;
            }
        }
        let w: Vec<f64> = self.row_weights.iter().chain(&self.col_weights).map(|x| x / 2.0).collect();
        RealMatrix::new(d, d, data)?.with_weights(w.clone(), w)
    }

    /// κ ⊗ κ′: rows are pairs of row cells, blocks are product distributions over Ω².
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let (ca, cb) = Grid::common_pair(&self.col_weights, &other.col_weights);
        let a = self.refine(&Grid::identity(&self.row_weights), &ca)?;
        let b = other.refine(&Grid::identity(&other.row_weights), &cb)?;
        let cols = ca;
        let (qa, qb) = (self.q, other.q);
        let mut rw = Vec::new();
        let mut blocks = Vec::new();
        for i1 in 0..a.rows() {
            for i2 in 0..b.rows() {
                rw.push(a.row_weights[i1] * b.row_weights[i2]);
                for j in 0..cols.len() {
                    blocks.extend(pair_product(a.block(i1, j), b.block(i2, j)));
                }
            }
        }
        Self::new(qa * qb, rw, cols.weights, blocks)
    }

    /// κ ⊕ κ′: columns are pairs of column cells, sharing the row coordinate.
    pub fn oplus(&self, other: &Self) -> Result<Self> {
        let (ra, rb) = Grid::common_pair(&self.row_weights, &other.row_weights);
        let a = self.refine(&ra, &Grid::identity(&self.col_weights))?;
        let b = other.refine(&rb, &Grid::identity(&other.col_weights))?;
        let rows = ra;
        let mut cw = Vec::new();
        for j1 in 0..a.cols() {
            for j2 in 0..b.cols() {
                cw.push(a.col_weights[j1] * b.col_weights[j2]);
            }
        }
        let mut blocks = Vec::new();
        for i in 0..rows.len() {
            for j1 in 0..a.cols() {
                for j2 in 0..b.cols() {
                    blocks.extend(pair_product(a.block(i, j1), b.block(i, j2)));
                }
            }
        }
        Self::new(self.q * other.q, rows.weights, cw, blocks)
    }
}

/// Pair symbol `(a, b)` is encoded as `a * q_b + b`.
fn pair_product(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().flat_map(|a| y.iter().map(move |b| a * b)).collect()
}

fn representatives(class_of: &[usize], k: usize) -> Vec<usize> {
    let mut rep = vec![usize::MAX; k];
    for (cell, &c) in class_of.iter().enumerate() {
        if rep[c] == usize::MAX {
            rep[c] = cell;
        }
    }
    rep
}

fn rescale(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > crate::measure::RESCALE_TOL {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn check_prob(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(*x >= -PROB_TOL) || !x.is_finite()) || (v.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
        return Err(CutError::InvalidInput(format!("{v:?} is not a probability vector")));
    }
    Ok(())
}

fn locate(weights: &[f64], s: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if s < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// A refinement of an axis: new cell weights and, for each new cell, the old cell it lies in.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub weights: Vec<f64>,
    pub map: Vec<usize>,
}

impl Grid {
    pub fn identity(w: &[f64]) -> Self {
        Self { weights: w.to_vec(), map: (0..w.len()).collect() }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Common refinement of two axes with the cell maps into each.
    pub fn common_pair(a: &[f64], b: &[f64]) -> (Self, Self) {
        let cuts = |w: &[f64]| -> Vec<f64> {
            let mut acc = 0.0;
            w.iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect()
        };
        let (ca, cb) = (cuts(a), cuts(b));
        let mut weights = Vec::new();
        let (mut ma, mut mb) = (Vec::new(), Vec::new());
        let (mut i, mut j, mut prev) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            let next = ca[i].min(cb[j]);
            let w = next - prev;
            if w > MIN_CELL {
                weights.push(w);
                ma.push(i);
                mb.push(j);
                prev = next;
            } else if let Some(last) = weights.last_mut() {
                *last += w.max(0.0);
                prev = next.max(prev);
            }
            let (ea, eb) = ((ca[i] - next).abs() <= MIN_CELL, (cb[j] - next).abs() <= MIN_CELL);
            if ea {
                i += 1;
            }
            if eb {
                j += 1;
            }
            if !ea && !eb {
                // cannot happen: next is one of the two cuts
                i += 1;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        (Self { weights: weights.clone(), map: ma }, Self { weights, map: mb })
    }
}

/// Bring two kernels onto a common grid.
pub fn common_refinement(k1: &StepKernel, k2: &StepKernel) -> Result<(StepKernel, StepKernel)> {
    if k1.q != k2.q {
        return Err(CutError::ShapeMismatch(format!("alphabets of size {} and {}", k1.q, k2.q)));
    }
    let (r1, r2) = Grid::common_pair(&k1.row_weights, &k2.row_weights);
    let (c1, c2) = Grid::common_pair(&k1.col_weights, &k2.col_weights);
    Ok((k1.refine(&r1, &c1)?, k2.refine(&r2, &c2)?))
}

/// Per-symbol difference matrices `κ(ω) − κ′(ω)` on the common grid.
pub fn difference(k1: &StepKernel, k2: &StepKernel) -> Result<Vec<RealMatrix>> {
    let (a, b) = common_refinement(k1, k2)?;
    (0..a.q)
        .map(|s| {
            let data = (0..a.rows() * a.cols())
                .map(|k| a.blocks[k * a.q + s] - b.blocks[k * b.q + s])
                .collect();
            RealMatrix::new(a.rows(), a.cols(), data)?.with_weights(a.row_weights.clone(), a.col_weights.clone())
        })
        .collect()
}

/// Exact `D_⊡(κ, κ′) = max_ω ‖κ(ω) − κ′(ω)‖_□` with the maximizing witness.
pub fn cut_distance_noperm(k1: &StepKernel, k2: &StepKernel) -> Result<(f64, CutWitness)> {
    let diffs = difference(k1, k2)?;
    let results: Vec<Result<(f64, CutWitness)>> = diffs.par_iter().map(cutnorm::cut_norm_exact).collect();
    let mut best = (0.0, CutWitness::empty());
    for (s, r) in results.into_iter().enumerate() {
        let (v, mut w) = r?;
        if v > best.0 {
            w.symbol = Some(s);
            best = (v, w);
        }
    }
    Ok(best)
}

/// `max_ω` of an upper bound on each difference's cut norm; never fails.
pub fn cut_distance_noperm_upper(k1: &StepKernel, k2: &StepKernel) -> Result<f64> {
    let diffs = difference(k1, k2)?;
    Ok(diffs
        .par_iter()
        .map(|d| {
            if d.rows().min(d.cols()) <= cutnorm::MAX_EXACT_AXIS {
                cutnorm::cut_norm_exact(d).map(|r| r.0).unwrap_or_else(|_| cutnorm::cut_norm_upper(d))
            } else {
                cutnorm::cut_norm_upper(d)
            }
        })
        .reduce(|| 0.0, f64::max))
}

/// `2 max_ω ‖κ^{(ω)} − κ′^{(ω)}‖_□`, computed on the bipartite embeddings.
pub fn cut_distance_bipartite(k1: &StepKernel, k2: &StepKernel) -> Result<f64> {
    let (a, b) = common_refinement(k1, k2)?;
    let mut best: f64 = 0.0;
    for s in 0..a.q {
        let ea = a.bipartite_embed(s)?;
        let eb = b.bipartite_embed(s)?;
        let data = ea.data().iter().zip(eb.data()).map(|(x, y)| x - y).collect();
        let w = ea.row_weights();
        let d = RealMatrix::new(ea.rows(), ea.cols(), data)?.with_weights(w.clone(), w)?;
        best = best.max(cutnorm::cut_norm_exact(&d)?.0);
    }
    Ok(2.0 * best)
}

/// Outcome of [`weak_regularity`].
#[derive(Clone, Debug, Serialize)]
pub struct Regularity {
    pub rows: Partition,
    pub cols: Partition,
    /// Exact `D_⊡(κ, κ^{S,X})`.
    pub residual: f64,
    pub iterations: usize,
    /// False when the iteration cap stopped the search before `residual < ε`.
    pub converged: bool,
}

/// Energy-increment refinement: while `D_⊡(κ, κ^{S,X}) ≥ ε`, split both partitions
/// along the witness of the symbol with the largest residual (lowest index on ties).
pub fn weak_regularity(k: &StepKernel, eps: f64, max_iters: usize) -> Result<Regularity> {
    if !(eps > 0.0) {
        return Err(CutError::InvalidInput("epsilon must be positive".into()));
    }
    let mut s = Partition::trivial(&k.row_weights);
    let mut x = Partition::trivial(&k.col_weights);
    let mut iterations = 0;
    loop {
        let avg = k.average(&s, &x)?;
        let (res, w) = cut_distance_noperm(k, &avg)?;
        if res < eps || iterations >= max_iters {
            return Ok(Regularity { rows: s, cols: x, residual: res, iterations, converged: res < eps });
        }
        s = s.split(&k.row_weights, &w.rows);
        x = x.split(&k.col_weights, &w.cols);
        iterations += 1;
    }
}
