//! Cut norms of real matrices and weighted block matrices.
//!
//! For a matrix `A` with row weights `p` and column weights `w` the cut norm is
//! `max_{S,X} |Σ_{i∈S, j∈X} p_i w_j A_ij|`; without weights `p_i = 1/m`, `w_j = 1/n`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CutError, Result};
use crate::rng;

/// Largest axis length handled by exhaustive enumeration.
pub const MAX_EXACT_AXIS: usize = 24;

/// Dense matrix with optional axis weights.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_weights: Option<Vec<f64>>,
    col_weights: Option<Vec<f64>>,
}

/// A rectangle `S × X` (optionally for one symbol) and its signed cut sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutWitness {
    #[serde(rename = "S")]
    pub rows: Vec<usize>,
    #[serde(rename = "X")]
    pub cols: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub symbol: Option<usize>,
    pub value: f64,
}

impl CutWitness {
    pub fn empty() -> Self {
        Self { rows: vec![], cols: vec![], symbol: None, value: 0.0 }
    }
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CutError::ShapeMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CutError::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data, row_weights: None, col_weights: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(CutError::ShapeMismatch("ragged rows".into()));
        }
        Self::new(m, n, rows.concat())
    }

    /// Attach axis weights (each nonnegative, summing to one).
    pub fn with_weights(mut self, p: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if p.len() != self.rows || w.len() != self.cols {
            return Err(CutError::ShapeMismatch("weight vector length differs from axis".into()));
        }
        for v in [&p, &w] {
            if v.iter().any(|x| !(*x >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(CutError::InvalidInput("axis weights must be nonnegative and sum to 1".into()));
            }
        }
        self.row_weights = Some(p);
        self.col_weights = Some(w);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_weight(&self, i: usize) -> f64 {
        self.row_weights.as_ref().map_or(1.0 / self.rows as f64, |p| p[i])
    }

    pub fn col_weight(&self, j: usize) -> f64 {
        self.col_weights.as_ref().map_or(1.0 / self.cols as f64, |w| w[j])
    }

    pub fn row_weights(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row_weight(i)).collect()
    }

    pub fn col_weights(&self) -> Vec<f64> {
        (0..self.cols).map(|j| self.col_weight(j)).collect()
    }

    /// Entries multiplied by their cell masses.
    pub fn mass_matrix(&self) -> Vec<f64> {
        let w = self.col_weights();
        let mut b = self.data.clone();
        for i in 0..self.rows {
            let pi = self.row_weight(i);
            for j in 0..self.cols {
                b[i * self.cols + j] *= pi * w[j];
            }
        }
        b
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
            row_weights: self.col_weights.clone(),
            col_weights: self.row_weights.clone(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// Weighted sum over the rectangle `rows × cols`.
    pub fn cut_value(&self, rows: &[usize], cols: &[usize]) -> f64 {
        let mut s = 0.0;
        for &i in rows {
            let mut r = 0.0;
            for &j in cols {
                r += self.get(i, j) * self.col_weight(j);
            }
            s += r * self.row_weight(i);
        }
        s
    }
}

/// Result of a raw enumeration: best value, sign, and the column set.
#[derive(Clone, Debug)]
struct RawBest {
    value: f64,
    positive: bool,
    mask: u64,
}

/// Exhaustive maximum of |Σ_{S×X} b| over all rectangles of an `m × n` block
/// matrix `b` (row-major, already mass-weighted), enumerating column sets.
fn enumerate_columns(b: &[f64], m: usize, n: usize) -> RawBest {
    debug_assert!(n <= 63);
    let mut colmaj = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            colmaj[j * m + i] = b[i * n + j];
        }
    }
    let high = n.saturating_sub(14).min(8);
    let low = n - high;
    let run = |h: u64| -> RawBest {
        let mut sums = vec![0.0; m];
        for j in 0..high {
            if h >> j & 1 == 1 {
                let col = &colmaj[(low + j) * m..(low + j + 1) * m];
                sums.iter_mut().zip(col).for_each(|(s, c)| *s += c);
            }
        }
        let base = h << low;
        let mut best = RawBest { value: f64::NEG_INFINITY, positive: true, mask: base };
        let mut mask = base;
        let mut k: u64 = 0;
        loop {
            let (mut pos, mut neg) = (0.0, 0.0);
            for s in &sums {
                if *s >= 0.0 {
                    pos += s;
                } else {
                    neg -= s;
                }
            }
            if pos > best.value {
                best = RawBest { value: pos, positive: true, mask };
            }
            if neg > best.value {
                best = RawBest { value: neg, positive: false, mask };
            }
            k += 1;
            if k >= 1u64 << low {
                break;
            }
            let bit = k.trailing_zeros() as usize;
            mask ^= 1 << bit;
            let col = &colmaj[bit * m..(bit + 1) * m];
            if mask >> bit & 1 == 1 {
                sums.iter_mut().zip(col).for_each(|(s, c)| *s += c);
            } else {
                sums.iter_mut().zip(col).for_each(|(s, c)| *s -= c);
            }
        }
        best
    };
    let results: Vec<RawBest> = if high > 0 {
        (0..1u64 << high).into_par_iter().map(run).collect()
    } else {
        vec![run(0)]
    };
    results
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one chunk")
}

fn witness_from_mask(b: &[f64], m: usize, n: usize, mask: u64, positive: bool) -> (Vec<usize>, Vec<usize>, f64) {
    let cols: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
    if cols.is_empty() {
        return (vec![], vec![], 0.0);
    }
    let mut rows = Vec::new();
    let mut total = 0.0;
    for i in 0..m {
        let r: f64 = cols.iter().map(|&j| b[i * n + j]).sum();
        let keep = if positive { r >= 0.0 } else { r <= 0.0 };
        if keep {
            rows.push(i);
            total += r;
        }
    }
    (rows, cols, total)
}

/// Exact `max |Σ_{S×X} b|` for a mass-weighted `m × n` block matrix.
///
/// The signed value in the witness is recomputed from the rectangle.
pub fn max_cut_sum(b: &[f64], m: usize, n: usize) -> Result<CutWitness> {
    if m == 0 || n == 0 {
        return Ok(CutWitness::empty());
    }
    if m.min(n) > MAX_EXACT_AXIS {
        return Err(CutError::SizeBound(format!(
            "exact cut norm needs an axis of at most {MAX_EXACT_AXIS} cells, got {m}x{n}; use the alternating heuristic"
        )));
    }
    if n <= m {
        let best = enumerate_columns(b, m, n);
        let (rows, cols, v) = witness_from_mask(b, m, n, best.mask, best.positive);
        Ok(CutWitness { rows, cols, symbol: None, value: v })
    } else {
        let mut t = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                t[j * m + i] = b[i * n + j];
            }
        }
        let best = enumerate_columns(&t, n, m);
        let (cols, rows, v) = witness_from_mask(&t, n, m, best.mask, best.positive);
        Ok(CutWitness { rows, cols, symbol: None, value: v })
    }
}

/// Exact cut norm with its maximizing rectangle.
pub fn cut_norm_exact(a: &RealMatrix) -> Result<(f64, CutWitness)> {
    let w = max_cut_sum(&a.mass_matrix(), a.rows, a.cols)?;
    Ok((w.value.abs(), w))
}

/// Local search: alternate best rows for fixed columns and best columns for fixed rows.
///
/// Restart 0 starts from the heaviest single column, later restarts from random column sets drawn
/// from `(seed, restart)`. Returns a certified lower bound on the cut norm.
pub fn cut_norm_alternating(a: &RealMatrix, restarts: usize, seed: u64) -> (f64, CutWitness) {
    let (m, n) = (a.rows, a.cols);
    if m == 0 || n == 0 {
        return (0.0, CutWitness::empty());
    }
    let b = a.mass_matrix();
    let restarts = restarts.max(1);
    let results: Vec<(f64, CutWitness)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start: Vec<bool> = if r == 0 {
                let mass = |j: usize| (0..m).map(|i| b[i * n + j]).sum::<f64>().abs();
                let top = (0..n).fold(0, |a, j| if mass(j) > mass(a) { j } else { a });
                (0..n).map(|j| j == top).collect()
            } else {
                let mut g = rng::stream(seed, r as u64);
                (0..n).map(|_| g.random::<bool>()).collect()
            };
            let mut best = (0.0, CutWitness::empty());
            for sign in [1.0, -1.0] {
                let w = alternate(&b, m, n, sign, start.clone());
                if w.value.abs() > best.0 {
                    best = (w.value.abs(), w);
                }
            }
            best
        })
        .collect();
    results
        .into_iter()
        .reduce(|x, y| if y.0 > x.0 { y } else { x })
        .expect("restarts >= 1")
}

fn alternate(b: &[f64], m: usize, n: usize, sign: f64, mut xs: Vec<bool>) -> CutWitness {
    let mut ss = vec![false; m];
    for _ in 0..(4 * (m + n) + 8) {
        let mut changed = false;
        for i in 0..m {
            let r: f64 = (0..n).filter(|&j| xs[j]).map(|j| sign * b[i * n + j]).sum();
            let keep = r > 0.0;
            changed |= keep != ss[i];
            ss[i] = keep;
        }
        for j in 0..n {
            let c: f64 = (0..m).filter(|&i| ss[i]).map(|i| sign * b[i * n + j]).sum();
            let keep = c > 0.0;
            changed |= keep != xs[j];
            xs[j] = keep;
        }
        if !changed {
            break;
        }
    }
    let rows: Vec<usize> = (0..m).filter(|&i| ss[i]).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| xs[j]).collect();
    if rows.is_empty() || cols.is_empty() {
        return CutWitness::empty();
    }
    let value = rows.iter().map(|&i| cols.iter().map(|&j| b[i * n + j]).sum::<f64>()).sum();
    CutWitness { rows, cols, symbol: None, value }
}

/// Upper bound `min(weighted L1, σ_max(D_p^½ A D_w^½))` on the cut norm.
pub fn cut_norm_upper(a: &RealMatrix) -> f64 {
    let l1: f64 = a.mass_matrix().iter().map(|x| x.abs()).sum();
    let p = a.row_weights();
    let w = a.col_weights();
    let scaled = nalgebra::DMatrix::from_fn(a.rows, a.cols, |i, j| a.get(i, j) * (p[i] * w[j]).sqrt());
    let sigma = scaled.singular_values().iter().copied().fold(0.0, f64::max);
    l1.min(sigma)
}

/// Cut norm of a `k × k` minor sampled by weighted row and column draws.
pub fn sampled_cut_norm(a: &RealMatrix, k: usize, seed: u64) -> Result<f64> {
    if k > MAX_EXACT_AXIS {
        return Err(CutError::SizeBound(format!("sample size {k} exceeds exact limit {MAX_EXACT_AXIS}")));
    }
    let mut g = rng::stream(seed, 0);
    let p = a.row_weights();
    let w = a.col_weights();
    let ri: Vec<usize> = (0..k).map(|_| rng::weighted_index(&mut g, &p)).collect();
    let cj: Vec<usize> = (0..k).map(|_| rng::weighted_index(&mut g, &w)).collect();
    let mut data = Vec::with_capacity(k * k);
    for &i in &ri {
        for &j in &cj {
            data.push(a.get(i, j));
        }
    }
    Ok(cut_norm_exact(&RealMatrix::new(k, k, data)?)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// All 2^m · 2^n rectangles.
    fn brute(a: &RealMatrix) -> f64 {
        let (m, n) = (a.rows(), a.cols());
        let mut best: f64 = 0.0;
        for s in 0u32..1 << m {
            for x in 0u32..1 << n {
                let rows: Vec<usize> = (0..m).filter(|i| s >> i & 1 == 1).collect();
                let cols: Vec<usize> = (0..n).filter(|j| x >> j & 1 == 1).collect();
                best = best.max(a.cut_value(&rows, &cols).abs());
            }
        }
        best
    }

    fn random_matrix(seed: u64, m: usize, n: usize) -> RealMatrix {
        let mut g = rng::stream(seed, 0);
        RealMatrix::new(m, n, (0..m * n).map(|_| g.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_matrix() {
        let a = RealMatrix::new(3, 4, vec![0.0; 12]).unwrap();
        let (v, w) = cut_norm_exact(&a).unwrap();
        assert_eq!(v, 0.0);
        assert!(w.rows.is_empty() && w.cols.is_empty());
        assert_eq!(cut_norm_alternating(&a, 3, 1).0, 0.0);
    }

    #[test]
    fn checkerboard() {
        let a = RealMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let (v, w) = cut_norm_exact(&a).unwrap();
        assert_eq!(v, 0.25);
        assert_eq!(w.rows, vec![0]);
        assert_eq!(w.cols, vec![0]);
        for seed in 0..10 {
            assert_eq!(cut_norm_alternating(&a, 4, seed).0, 0.25);
        }
    }

    #[test]
    fn all_ones() {
        let a = RealMatrix::new(3, 3, vec![1.0; 9]).unwrap();
        let (v, w) = cut_norm_exact(&a).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(w.rows, vec![0, 1, 2]);
        assert_eq!(w.cols, vec![0, 1, 2]);
    }

    #[test]
    fn rank_one_positive_alternating_is_exact() {
        let u = [0.2, 0.5, 1.0, 0.7];
        let v = [0.3, 0.9, 0.4];
        let a = RealMatrix::new(4, 3, u.iter().flat_map(|x| v.iter().map(move |y| x * y)).collect()).unwrap();
        let exact = cut_norm_exact(&a).unwrap().0;
        assert!((cut_norm_alternating(&a, 1, 0).0 - exact).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force() {
        for seed in 0..40 {
            let a = random_matrix(seed, 1 + (seed as usize % 5), 1 + (seed as usize / 5 % 6));
            let (v, w) = cut_norm_exact(&a).unwrap();
            assert!((v - brute(&a)).abs() < 1e-12, "seed {seed}");
            assert!((a.cut_value(&w.rows, &w.cols) - w.value).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_matches_brute_force() {
        let a = random_matrix(9, 4, 5)
            .with_weights(vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.1, 0.1, 0.2, 0.1])
            .unwrap();
        assert!((cut_norm_exact(&a).unwrap().0 - brute(&a)).abs() < 1e-12);
    }

    #[test]
    fn chunked_enumeration_matches_plain() {
        // 3 x 18 forces the row axis to be enumerated; 18 x 16 uses high-bit chunks
        let a = random_matrix(5, 3, 18);
        assert!((cut_norm_exact(&a).unwrap().0 - cut_norm_exact(&a.transpose()).unwrap().0).abs() < 1e-13);
        let b = random_matrix(6, 18, 16);
        let (v, w) = cut_norm_exact(&b).unwrap();
        assert!((b.cut_value(&w.rows, &w.cols).abs() - v).abs() < 1e-13);
        assert!(cut_norm_alternating(&b, 16, 0).0 <= v + 1e-15);
    }

    #[test]
    fn refuses_large_axes() {
        let a = RealMatrix::new(25, 25, vec![0.5; 625]).unwrap();
        assert!(matches!(cut_norm_exact(&a), Err(CutError::SizeBound(_))));
    }

    #[test]
    fn upper_bound_dominates() {
        for seed in 0..20 {
            let a = random_matrix(100 + seed, 6, 7);
            assert!(cut_norm_upper(&a) >= cut_norm_exact(&a).unwrap().0 - 1e-12);
        }
    }

    #[test]
    fn sampled_constant_kernel() {
        let a = RealMatrix::new(3, 3, vec![0.3; 9]).unwrap();
        let v = sampled_cut_norm(&a, 16, 4).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
        let z = RealMatrix::new(3, 3, vec![0.0; 9]).unwrap();
        assert_eq!(sampled_cut_norm(&z, 16, 4).unwrap(), 0.0);
    }

    #[test]
    fn sampled_random_block_kernel_is_close() {
        let mut g = rng::stream(77, 0);
        let a = RealMatrix::new(4, 4, (0..16).map(|_| if g.random::<bool>() { 1.0 } else { -1.0 }).collect()).unwrap();
        let exact = cut_norm_exact(&a).unwrap().0;
        let k = 20;
        let tol = 8.0 / (k as f64).powf(0.25);
        let good = (0..40).filter(|s| (sampled_cut_norm(&a, k, *s).unwrap() - exact).abs() <= tol).count();
        assert!(good >= 38);
    }

    proptest! {
        #[test]
        fn alternating_never_exceeds_exact(seed in 0u64..10_000) {
            let a = random_matrix(seed, 8, 8);
            prop_assert!(cut_norm_alternating(&a, 4, seed).0 <= cut_norm_exact(&a).unwrap().0 + 1e-15);
        }

        #[test]
        fn norm_axioms(seed in 0u64..10_000, c in -3.0f64..3.0) {
            let a = random_matrix(seed, 5, 6);
            let b = random_matrix(seed + 1, 5, 6);
            let na = cut_norm_exact(&a).unwrap().0;
            prop_assert!((na - cut_norm_exact(&a.transpose()).unwrap().0).abs() < 1e-13);
            prop_assert!((cut_norm_exact(&a.scale(c)).unwrap().0 - c.abs() * na).abs() < 1e-12);
            let sum = RealMatrix::new(5, 6, a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap();
            prop_assert!(cut_norm_exact(&sum).unwrap().0 <= na + cut_norm_exact(&b).unwrap().0 + 1e-12);
        }
    }
}
