//! Cut distances between discrete measures, laws and step kernels.
//!
//! Every distance here is an inf over couplings (and maps) of a sup over witnesses.
//! For a fixed column set `X`, symbol `ω` and sign, the sup over row events is
//! `Σ γ(a,b) (±c_{ab})⁺`, which is linear in the coupling `γ`. So the inf over
//! couplings is a linear program over a finite witness family; it is solved by
//! cutting planes, using exact column enumeration as the separation oracle.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::cutnorm::{self, CutWitness};
use crate::error::{CutError, Result};
use crate::kernel::{self, Grid, StepKernel};
use crate::law::{BoundKind, Law};
use crate::lp::{Cmp, Lp};
use crate::measure::{Config, DiscreteMeasure};
use crate::rng;
use crate::sampling;

/// Convergence tolerance of the cutting-plane loop.
pub const CUT_TOL: f64 = 1e-9;
/// Exact discrete mode: largest dimension.
pub const EXACT_MAX_N: usize = 8;
/// Exact discrete mode: largest support on either side.
pub const EXACT_MAX_SUPPORT: usize = 128;
/// Largest column grid whose weight-preserving permutations are enumerated.
pub const TINY_MAX_COLS: usize = 6;
const MAX_ROUNDS: usize = 400;

/// Weighted atoms with `cols × q` profiles on a shared column grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Profiles {
    pub q: usize,
    pub col_weights: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[a * cols * q + j * q + s]`
    pub values: Vec<f64>,
}

impl Profiles {
    pub fn from_law(l: &Law) -> Self {
        Self {
            q: l.q(),
            col_weights: l.col_weights().to_vec(),
            weights: l.atoms().iter().map(|a| a.weight).collect(),
            values: l.atoms().iter().flat_map(|a| a.values.iter().copied()).collect(),
        }
    }

    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        Self::from_law(&Law::embed(mu))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.col_weights.len()
    }

    fn value(&self, a: usize, j: usize, s: usize) -> f64 {
        self.values[(a * self.cols() + j) * self.q + s]
    }

    /// Per-atom mass of symbol `s` on the column set `xs`.
    fn set_mass(&self, xs: &[usize], s: usize) -> Vec<f64> {
        (0..self.len()).map(|a| xs.iter().map(|&j| self.col_weights[j] * self.value(a, j, s)).sum()).collect()
    }

    fn permute_cols(&self, perm: &[usize]) -> Self {
        let (l, q) = (self.cols(), self.q);
        let mut values = Vec::with_capacity(self.values.len());
        for a in 0..self.len() {
            for &j in perm {
                values.extend_from_slice(&self.values[(a * l + j) * q..(a * l + j + 1) * q]);
            }
        }
        Self {
            q,
            col_weights: perm.iter().map(|&j| self.col_weights[j]).collect(),
            weights: self.weights.clone(),
            values,
        }
    }
}

/// A coupling given by `(left atom, right atom, mass)` triples.
pub type Pairs = Vec<(usize, usize, f64)>;

/// Exact `sup_{S,X,ω} |Σ_{(a,b)∈S} γ(a,b) Σ_{x∈X} w_x (L_a(x)(ω) − R_b(x)(ω))|`.
///
/// The witness rows index into `pairs`.
pub fn adversary(left: &Profiles, right: &Profiles, pairs: &[(usize, usize, f64)]) -> Result<(f64, CutWitness)> {
    if left.q != right.q || left.col_weights.len() != right.col_weights.len() {
        return Err(CutError::ShapeMismatch("profiles on different grids".into()));
    }
    let live: Vec<usize> = (0..pairs.len()).filter(|&p| pairs[p].2 > 0.0).collect();
    let l = left.cols();
    let mut best = (0.0, CutWitness::empty());
    for s in 0..left.q {
        let mut b = Vec::with_capacity(live.len() * l);
        for &p in &live {
            let (x, y, g) = pairs[p];
            for j in 0..l {
                b.push(g * left.col_weights[j] * (left.value(x, j, s) - right.value(y, j, s)));
            }
        }
        let w = cutnorm::max_cut_sum(&b, live.len(), l)?;
        if w.value.abs() > best.0 {
            best = (
                w.value.abs(),
                CutWitness { rows: w.rows.iter().map(|&r| live[r]).collect(), cols: w.cols, symbol: Some(s), value: w.value },
            );
        }
    }
    Ok(best)
}

/// Outcome of one coupling LP.
#[derive(Clone, Debug)]
pub struct CouplingSolution {
    /// Adversary value of `pairs`: an upper bound on the distance.
    pub upper: f64,
    /// LP value over the generated witness family: a lower bound.
    pub lower: f64,
    /// LP value with only the full-column witnesses (invariant under column maps).
    pub full_column_lower: f64,
    pub pairs: Pairs,
    pub witness: CutWitness,
    pub rounds: usize,
    pub pivots: usize,
    /// True if the loop stopped because `lower` reached the caller's cutoff.
    pub cut_off: bool,
}

impl CouplingSolution {
    pub fn is_exact(&self) -> bool {
        self.upper - self.lower <= CUT_TOL
    }
}

/// `inf_γ sup_{S,X,ω}` over couplings of the atom weights, by cutting planes.
///
/// Stops early (with `cut_off = true`) once the lower bound reaches `cutoff`.
pub fn solve_coupling(left: &Profiles, right: &Profiles, cutoff: f64) -> Result<CouplingSolution> {
    let (k, l, cols, q) = (left.len(), right.len(), left.cols(), left.q);
    if left.q != right.q || cols != right.cols() {
        return Err(CutError::ShapeMismatch("profiles on different grids".into()));
    }
    if cols > 62 {
        return Err(CutError::SizeBound(format!("{cols} column cells")));
    }
    let t = k * l;
    let mut cost = vec![0.0; t + 1];
    cost[t] = 1.0;
    let mut lp = Lp::new(cost);
    for a in 0..k {
        let row: Vec<(usize, f64)> = (0..l).map(|b| (a * l + b, 1.0)).collect();
        lp.add_row(&row, Cmp::Eq, left.weights[a])?;
    }
    for b in 0..l.saturating_sub(1) {
        let row: Vec<(usize, f64)> = (0..k).map(|a| (a * l + b, 1.0)).collect();
        lp.add_row(&row, Cmp::Eq, right.weights[b])?;
    }
    let mut seen: HashSet<(u64, usize, bool)> = HashSet::new();
    let cut_row = |mask: u64, s: usize, positive: bool| -> Vec<(usize, f64)> {
        let xs: Vec<usize> = (0..cols).filter(|j| mask >> j & 1 == 1).collect();
        let fa = left.set_mass(&xs, s);
        let fb = right.set_mass(&xs, s);
        let sg = if positive { 1.0 } else { -1.0 };
        let mut row: Vec<(usize, f64)> = Vec::new();
        for a in 0..k {
            for b in 0..l {
                let c = sg * (fa[a] - fb[b]);
                if c > 0.0 {
                    row.push((a * l + b, c));
                }
            }
        }
        row.push((t, -1.0));
        row
    };
    let full = (1u64 << cols) - 1;
    for s in 0..q {
        for positive in [true, false] {
            seen.insert((full, s, positive));
            lp.add_row(&cut_row(full, s, positive), Cmp::Le, 0.0)?;
        }
    }
    let mut best: Option<(f64, Pairs, CutWitness)> = None;
    let mut lower = 0.0f64;
    let mut full_column_lower = 0.0;
    let mut rounds = 0;
    let mut cut_off = false;
    loop {
        let sol = lp.solve()?;
        rounds += 1;
        let tval = sol.x[t];
        if rounds == 1 {
            full_column_lower = tval;
        }
        lower = lower.max(tval);
        let pairs: Pairs = (0..t).filter(|&v| sol.x[v] > 1e-15).map(|v| (v / l, v % l, sol.x[v])).collect();
        let (val, wit) = adversary(left, right, &pairs)?;
        if best.as_ref().is_none_or(|b| val < b.0) {
            best = Some((val, pairs.clone(), wit));
        }
        let upper = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if upper <= lower + CUT_TOL || rounds >= MAX_ROUNDS {
            break;
        }
        if lower >= cutoff - 1e-12 {
            cut_off = true;
            break;
        }
        // one cut per symbol: the best column set for that symbol at the current coupling
        let mut added = 0;
        for s in 0..q {
            let mut bm = Vec::with_capacity(pairs.len() * cols);
            for &(a, b, g) in &pairs {
                for j in 0..cols {
                    bm.push(g * left.col_weights[j] * (left.value(a, j, s) - right.value(b, j, s)));
                }
            }
            let w = cutnorm::max_cut_sum(&bm, pairs.len(), cols)?;
            if w.value.abs() <= tval + CUT_TOL / 2.0 {
                continue;
            }
            let mask = w.cols.iter().fold(0u64, |m, j| m | 1 << j);
            let key = (mask, s, w.value > 0.0);
            if seen.insert(key) {
                lp.add_row(&cut_row(mask, s, w.value > 0.0), Cmp::Le, 0.0)?;
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
    }
    let (upper, pairs, witness) = best.expect("at least one round");
    Ok(CouplingSolution { upper, lower: lower.min(upper), full_column_lower, pairs, witness, rounds, pivots: lp.pivots(), cut_off })
}

/// Which cut distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Infimum over couplings and coordinate permutations.
    Weak,
    /// Infimum over couplings only.
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscreteMode {
    Exact,
    Upper,
}

/// Result of a discrete cut-distance computation.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteDistance {
    pub lower: f64,
    pub upper: f64,
    pub kind: BoundKind,
    pub variant: Variant,
    pub mode: DiscreteMode,
    /// `(σ, τ, mass)`; `τ` is in the original coordinates of the right measure.
    pub coupling: Vec<(Config, Config, f64)>,
    /// Coordinate `x` on the left is compared with coordinate `permutation[x]` on the right.
    pub permutation: Vec<usize>,
    pub witness: CutWitness,
    pub source: CouplingSource,
    pub iterations: usize,
    pub lp_solves: usize,
}

/// Where the reported coupling came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSource {
    CuttingPlane,
    Northwest,
    SortedNorthwest,
    Maximal,
    /// `μ ⊗ ν`; the coupling list is left empty when it has more than 4096 pairs.
    Independent,
}

impl DiscreteDistance {
    /// The certified value: exact when `kind` is exact, otherwise the upper bound.
    pub fn value(&self) -> f64 {
        self.upper
    }
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.q() != nu.q() || mu.n() != nu.n() {
        return Err(CutError::ShapeMismatch(format!(
            "(q, n) = ({}, {}) vs ({}, {})",
            mu.q(),
            mu.n(),
            nu.q(),
            nu.n()
        )));
    }
    if mu.n() > cutnorm::MAX_EXACT_AXIS {
        return Err(CutError::SizeBound(format!("n = {} exceeds {}", mu.n(), cutnorm::MAX_EXACT_AXIS)));
    }
    Ok(())
}

/// Adversary value of an explicit coupling under the coordinate map `perm`.
pub fn adversary_value(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    coupling: &[(Config, Config, f64)],
    perm: &[usize],
) -> Result<(f64, CutWitness)> {
    check_pair(mu, nu)?;
    let n = mu.n();
    if perm.len() != n || {
        let mut p = perm.to_vec();
        p.sort_unstable();
        p != (0..n).collect::<Vec<_>>()
    } {
        return Err(CutError::InvalidInput("not a permutation of the coordinates".into()));
    }
    check_marginals(mu, nu, coupling)?;
    let q = mu.q();
    let w = 1.0 / n as f64;
    let mut best = (0.0, CutWitness::empty());
    for s in 0..q as u8 {
        let b: Vec<f64> = coupling
            .iter()
            .flat_map(|(x, y, g)| (0..n).map(move |j| g * w * ((x[j] == s) as i32 - (y[perm[j]] == s) as i32) as f64))
            .collect();
        let wit = cutnorm::max_cut_sum(&b, coupling.len(), n)?;
        if wit.value.abs() > best.0 {
            best = (wit.value.abs(), CutWitness { symbol: Some(s as usize), ..wit });
        }
    }
    Ok(best)
}

fn check_marginals(mu: &DiscreteMeasure, nu: &DiscreteMeasure, coupling: &[(Config, Config, f64)]) -> Result<()> {
    let mut left = std::collections::BTreeMap::<&Config, f64>::new();
    let mut right = std::collections::BTreeMap::<&Config, f64>::new();
    for (x, y, g) in coupling {
        if *g < 0.0 {
            return Err(CutError::InvalidInput("negative coupling mass".into()));
        }
        *left.entry(x).or_insert(0.0) += g;
        *right.entry(y).or_insert(0.0) += g;
    }
    let bad_l = mu.iter().any(|(c, p)| (left.get(c).copied().unwrap_or(0.0) - p).abs() > 1e-10)
        || left.iter().any(|(c, p)| (mu.prob(c) - p).abs() > 1e-10);
    let bad_r = nu.iter().any(|(c, p)| (right.get(c).copied().unwrap_or(0.0) - p).abs() > 1e-10)
        || right.iter().any(|(c, p)| (nu.prob(c) - p).abs() > 1e-10);
    if bad_l || bad_r {
        return Err(CutError::InvalidInput("coupling marginals differ from the measures".into()));
    }
    Ok(())
}

/// Lexicographic next permutation; false after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn measure_key(m: &DiscreteMeasure) -> Vec<(Config, u64)> {
    m.iter().map(|(c, p)| (c.clone(), p.to_bits())).collect()
}

/// `Δ_⊠` (weak) or `Δ_⊘` (strong) between two measures on Ω^n.
///
/// Exact mode runs the coupling LP for every distinct permuted right measure and
/// needs `n ≤ 8` and supports of at most 128 configurations. Upper mode evaluates a
/// portfolio of explicit couplings and coordinate maps.
pub fn discrete_cut_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    variant: Variant,
    mode: DiscreteMode,
) -> Result<DiscreteDistance> {
    check_pair(mu, nu)?;
    match mode {
        DiscreteMode::Exact => discrete_exact(mu, nu, variant),
        DiscreteMode::Upper => discrete_upper(mu, nu, variant),
    }
}

fn discrete_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, variant: Variant) -> Result<DiscreteDistance> {
    let n = mu.n();
    if n > EXACT_MAX_N || mu.support_size() > EXACT_MAX_SUPPORT || nu.support_size() > EXACT_MAX_SUPPORT {
        return Err(CutError::SizeBound(format!(
            "exact mode needs n <= {EXACT_MAX_N} and supports <= {EXACT_MAX_SUPPORT} (n = {n}, supports {} and {})",
            mu.support_size(),
            nu.support_size()
        )));
    }
    let left = Profiles::from_measure(mu);
    let left_cfg: Vec<Config> = mu.iter().map(|(c, _)| c.clone()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut seen = HashSet::new();
    let mut best: Option<(CouplingSolution, Vec<usize>, Vec<Config>)> = None;
    let mut lower = f64::INFINITY;
    let (mut iterations, mut solves) = (0, 0);
    loop {
        let permuted = nu.permute_coordinates(&perm)?;
        if seen.insert(measure_key(&permuted)) {
            let right = Profiles::from_measure(&permuted);
            let cutoff = best.as_ref().map_or(f64::INFINITY, |b| b.0.upper);
            let sol = solve_coupling(&left, &right, cutoff)?;
            iterations += sol.rounds;
            solves += 1;
            lower = lower.min(sol.lower);
            if best.as_ref().is_none_or(|b| sol.upper < b.0.upper) {
                let right_cfg: Vec<Config> = permuted.iter().map(|(c, _)| c.clone()).collect();
                best = Some((sol, perm.clone(), right_cfg));
            }
        }
        if variant == Variant::Strong || !next_permutation(&mut perm) {
            break;
        }
    }
    let (sol, perm, right_cfg) = best.expect("identity permutation always solved");
    let lower = lower.min(sol.upper);
    // permuted τ'_x = τ_{perm[x]}; undo to report τ in original coordinates
    let unpermute = |c: &Config| -> Config {
        let mut out = vec![0u8; n];
        for (x, &px) in perm.iter().enumerate() {
            out[px] = c[x];
        }
        out
    };
    let coupling = sol.pairs.iter().map(|&(a, b, g)| (left_cfg[a].clone(), unpermute(&right_cfg[b]), g)).collect();
    let kind = if sol.upper - lower <= CUT_TOL { BoundKind::Exact } else { BoundKind::Upper };
    Ok(DiscreteDistance {
        lower,
        upper: sol.upper,
        kind,
        variant,
        mode: DiscreteMode::Exact,
        coupling,
        permutation: perm,
        witness: sol.witness,
        source: CouplingSource::CuttingPlane,
        iterations,
        lp_solves: solves,
    })
}

/// `max_ω |E_μ[share of ω] − E_ν[share of ω]|`: the full rectangle against every coupling.
pub fn mean_share_lower_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (a, b) = (mu.marginal_vectors(), nu.marginal_vectors());
    let n = mu.n() as f64;
    (0..mu.q())
        .map(|s| (a.iter().map(|m| m[s]).sum::<f64>() - b.iter().map(|m| m[s]).sum::<f64>()).abs() / n)
        .fold(0.0, f64::max)
}

/// North-west corner coupling of two weight lists in the given orders.
fn northwest(wa: &[f64], wb: &[f64], oa: &[usize], ob: &[usize]) -> Pairs {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (wa[oa[0]], wb[ob[0]]);
    while i < oa.len() && j < ob.len() {
        let m = ra.min(rb);
        if m > 0.0 {
            out.push((oa[i], ob[j], m));
        }
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            if i < oa.len() {
                ra = wa[oa[i]];
            }
        }
        if rb <= 1e-15 {
            j += 1;
            if j < ob.len() {
                rb = wb[ob[j]];
            }
        }
    }
    out
}

/// Adversary value of the independent coupling `μ ⊗ ν`, from count distributions.
///
/// For fixed `X` and `ω` the pair discrepancy only depends on the two counts of `ω`
/// inside `X`, so the sup over row events is `Σ P(A=a) P(B=b) (±(a−b))⁺ / n`.
pub fn independent_adversary(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    let n = mu.n();
    if n > 20 {
        return Err(CutError::SizeBound(format!("n = {n} exceeds 20 for column enumeration")));
    }
    let q = mu.q();
    let ma: Vec<(Vec<u8>, f64)> = mu.iter().map(|(c, p)| (c.clone(), p)).collect();
    let mb: Vec<(Vec<u8>, f64)> = nu.iter().map(|(c, p)| (c.clone(), p)).collect();
    let best = (1u64..1 << n)
        .into_par_iter()
        .map(|mask| {
            let mut best: f64 = 0.0;
            for s in 0..q as u8 {
                let counts = |m: &[(Vec<u8>, f64)]| -> Vec<f64> {
                    let mut h = vec![0.0; n + 1];
                    for (c, p) in m {
                        let k = (0..n).filter(|&j| mask >> j & 1 == 1 && c[j] == s).count();
                        h[k] += p;
                    }
                    h
                };
                let (ha, hb) = (counts(&ma), counts(&mb));
                let (mut pos, mut neg) = (0.0, 0.0);
                for (a, pa) in ha.iter().enumerate() {
                    for (b, pb) in hb.iter().enumerate() {
                        let d = a as f64 - b as f64;
                        if d > 0.0 {
                            pos += pa * pb * d;
                        } else {
                            neg -= pa * pb * d;
                        }
                    }
                }
                best = best.max(pos.max(neg) / n as f64);
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

fn discrete_upper(mu: &DiscreteMeasure, nu: &DiscreteMeasure, variant: Variant) -> Result<DiscreteDistance> {
    let n = mu.n();
    let mut perms = vec![(0..n).collect::<Vec<usize>>()];
    if variant == Variant::Weak {
        let rank = |m: &DiscreteMeasure| -> Vec<usize> {
            let mv = m.marginal_vectors();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|a, b| mv[*a].partial_cmp(&mv[*b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(b)));
            idx
        };
        let (ra, rb) = (rank(mu), rank(nu));
        let mut p = vec![0; n];
        for i in 0..n {
            p[ra[i]] = rb[i];
        }
        if p != perms[0] {
            perms.push(p);
        }
    }
    let left_cfg: Vec<Config> = mu.iter().map(|(c, _)| c.clone()).collect();
    let wa: Vec<f64> = mu.iter().map(|(_, p)| p).collect();
    let mut best: Option<(f64, Vec<(Config, Config, f64)>, Vec<usize>, CutWitness, CouplingSource)> = None;
    let mut solves = 0;
    for perm in &perms {
        let permuted = nu.permute_coordinates(perm)?;
        let right_cfg: Vec<Config> = permuted.iter().map(|(c, _)| c.clone()).collect();
        let wb: Vec<f64> = permuted.iter().map(|(_, p)| p).collect();
        let left = Profiles::from_measure(mu);
        let right = Profiles::from_measure(&permuted);
        let mut candidates: Vec<(Pairs, CouplingSource)> = Vec::new();
        let lex_a: Vec<usize> = (0..wa.len()).collect();
        let lex_b: Vec<usize> = (0..wb.len()).collect();
        candidates.push((northwest(&wa, &wb, &lex_a, &lex_b), CouplingSource::Northwest));
        let by_count = |cfg: &[Config]| -> Vec<usize> {
            let mut idx: Vec<usize> = (0..cfg.len()).collect();
            idx.sort_by_key(|&i| {
                let mut h = vec![0usize; mu.q()];
                cfg[i].iter().for_each(|s| h[*s as usize] += 1);
                (h, i)
            });
            idx
        };
        candidates.push((northwest(&wa, &wb, &by_count(&left_cfg), &by_count(&right_cfg)), CouplingSource::SortedNorthwest));
        // maximal coupling: shared mass on the diagonal, residuals by north-west corner
        let mut diag = Pairs::new();
        let mut ra = wa.clone();
        let mut rb = wb.clone();
        for (i, c) in left_cfg.iter().enumerate() {
            if let Ok(j) = right_cfg.binary_search(c) {
                let m = ra[i].min(rb[j]);
                diag.push((i, j, m));
                ra[i] -= m;
                rb[j] -= m;
            }
        }
        let oa: Vec<usize> = (0..ra.len()).filter(|&i| ra[i] > 1e-15).collect();
        let ob: Vec<usize> = (0..rb.len()).filter(|&j| rb[j] > 1e-15).collect();
        if !oa.is_empty() && !ob.is_empty() {
            diag.extend(northwest(&ra, &rb, &oa, &ob));
        }
        candidates.push((diag, CouplingSource::Maximal));
        let unperm = |c: &Config| {
            let mut out = vec![0u8; n];
            for (x, &px) in perm.iter().enumerate() {
                out[px] = c[x];
            }
            out
        };
        for (pairs, source) in candidates {
            let (v, w) = adversary(&left, &right, &pairs)?;
            solves += 1;
            if best.as_ref().is_none_or(|b| v < b.0) {
                let coupling = pairs.iter().map(|&(i, j, g)| (left_cfg[i].clone(), unperm(&right_cfg[j]), g)).collect();
                best = Some((v, coupling, perm.clone(), w, source));
            }
        }
        if n <= 20 {
            let v = independent_adversary(mu, &permuted)?;
            solves += 1;
            if best.as_ref().is_none_or(|b| v < b.0) {
                let coupling = if wa.len() * wb.len() <= 4096 {
                    (0..wa.len())
                        .flat_map(|i| (0..wb.len()).map(move |j| (i, j)))
                        .map(|(i, j)| (left_cfg[i].clone(), unperm(&right_cfg[j]), wa[i] * wb[j]))
                        .collect()
                } else {
                    Vec::new()
                };
                best = Some((v, coupling, perm.clone(), CutWitness::empty(), CouplingSource::Independent));
            }
        }
    }
    let (upper, coupling, permutation, witness, source) = best.expect("portfolio is nonempty");
    let lower = mean_share_lower_bound(mu, nu).min(upper);
    let kind = if upper - lower <= CUT_TOL { BoundKind::Exact } else { BoundKind::Upper };
    Ok(DiscreteDistance {
        lower,
        upper,
        kind,
        variant,
        mode: DiscreteMode::Upper,
        coupling,
        permutation,
        witness,
        source,
        iterations: 0,
        lp_solves: solves,
    })
}

/// Exact `D_⊡`, cross-checked against `2 max_ω` over the bipartite embeddings.
pub fn kernel_distance_noperm(k1: &StepKernel, k2: &StepKernel) -> Result<(f64, CutWitness)> {
    let (v, w) = kernel::cut_distance_noperm(k1, k2)?;
    let b = kernel::cut_distance_bipartite(k1, k2)?;
    if (v - b).abs() > 1e-9 {
        return Err(CutError::Numeric(format!("block cut norm {v} disagrees with bipartite value {b}")));
    }
    Ok((v, w))
}

/// How [`kernel_distance`] searches over measure-preserving maps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum KernelMode {
    /// Row maps by the transport LP, column maps by all weight-preserving cell permutations.
    ExactTiny,
    /// Row maps by the transport LP, column maps from a small heuristic family.
    TransportHeuristic,
    /// Distance between empirical laws of `n × n` samples of both kernels.
    Sampled { n: usize, seed: u64 },
}

/// Bounds on the kernel cut distances of a pair.
#[derive(Clone, Debug, Serialize)]
pub struct KernelDistance {
    pub mode: KernelMode,
    /// Bounds on `D_⊠`.
    pub lower: f64,
    pub upper: f64,
    pub kind: BoundKind,
    /// Bounds on the strong distance `D_⊘`.
    pub strong_lower: f64,
    pub strong_upper: f64,
    /// `D_⊡` (no maps), exact when an axis of the common grid has at most 24 cells.
    pub noperm: f64,
    pub noperm_kind: BoundKind,
    /// Graphon metric upper bound, when both kernels share one square grid.
    pub graphon_upper: Option<f64>,
    /// Column cell `j` of the first kernel is matched with cell `column_map[j]` of the second.
    pub column_map: Vec<usize>,
    pub column_maps_tried: usize,
    pub iterations: usize,
}

fn weight_preserving_perms(w: &[f64]) -> Vec<Vec<usize>> {
    let n = w.len();
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    loop {
        if p.iter().enumerate().all(|(j, &pj)| (w[j] - w[pj]).abs() <= 1e-12) {
            out.push(p.clone());
        }
        if !next_permutation(&mut p) {
            break;
        }
    }
    out
}

/// Cut distances between step kernels, reported as certified bounds.
pub fn kernel_distance(k1: &StepKernel, k2: &StepKernel, mode: KernelMode) -> Result<KernelDistance> {
    if k1.q() != k2.q() {
        return Err(CutError::ShapeMismatch("kernels over different alphabets".into()));
    }
    let (noperm, noperm_kind) = match kernel::cut_distance_noperm(k1, k2) {
        Ok((v, _)) => (v, BoundKind::Exact),
        Err(CutError::SizeBound(_)) => (kernel::cut_distance_noperm_upper(k1, k2)?, BoundKind::Upper),
        Err(e) => return Err(e),
    };
    if let KernelMode::Sampled { n, seed } = mode {
        let a = sampling::empirical_law(&sampling::sample_matrix(k1, n, rng::derive_seed(seed, 1))?)?;
        let b = sampling::empirical_law(&sampling::sample_matrix(k2, n, rng::derive_seed(seed, 2))?)?;
        let dm = if n <= EXACT_MAX_N { DiscreteMode::Exact } else { DiscreteMode::Upper };
        let d = discrete_cut_distance(&a, &b, Variant::Weak, dm)?;
        return Ok(KernelDistance {
            mode,
            lower: d.upper,
            upper: d.upper,
            kind: BoundKind::Estimate,
            strong_lower: 0.0,
            strong_upper: noperm,
            noperm,
            noperm_kind,
            graphon_upper: None,
            column_map: (0..k1.cols()).collect(),
            column_maps_tried: 0,
            iterations: d.iterations,
        });
    }
    let (ga, gb) = Grid::common_pair(k1.col_weights(), k2.col_weights());
    let la = Law::from_kernel(k1).refine_cols(&ga);
    let lb = Law::from_kernel(k2).refine_cols(&gb);
    let left = Profiles::from_law(&la);
    let right = Profiles::from_law(&lb);
    let cols = left.cols();
    if cols > cutnorm::MAX_EXACT_AXIS {
        return Err(CutError::SizeBound(format!(
            "{cols} column cells; the transport search needs at most {}",
            cutnorm::MAX_EXACT_AXIS
        )));
    }
    let identity: Vec<usize> = (0..cols).collect();
    let strong = solve_coupling(&left, &right, f64::INFINITY)?;
    let mut iterations = strong.rounds;
    let mut maps: Vec<Vec<usize>> = Vec::new();
    match mode {
        KernelMode::ExactTiny if cols <= TINY_MAX_COLS => {
            maps = weight_preserving_perms(&left.col_weights).into_iter().filter(|p| *p != identity).collect();
        }
        KernelMode::ExactTiny => {}
        KernelMode::TransportHeuristic => {
            // align equal-weight cells by their mean profile
            let key = |p: &Profiles, j: usize| -> Vec<f64> {
                (0..p.q).map(|s| (0..p.len()).map(|a| p.weights[a] * p.value(a, j, s)).sum()).collect()
            };
            let order = |p: &Profiles| -> Vec<usize> {
                let mut idx: Vec<usize> = (0..cols).collect();
                idx.sort_by(|a, b| {
                    p.col_weights[*a]
                        .total_cmp(&p.col_weights[*b])
                        .then(key(p, *a).partial_cmp(&key(p, *b)).unwrap_or(std::cmp::Ordering::Equal))
                });
                idx
            };
            let (oa, ob) = (order(&left), order(&right));
            let mut m = vec![0; cols];
            for i in 0..cols {
                m[oa[i]] = ob[i];
            }
            if m != identity && m.iter().enumerate().all(|(j, &mj)| (left.col_weights[j] - right.col_weights[mj]).abs() <= 1e-12) {
                maps.push(m);
            }
        }
        KernelMode::Sampled { .. } => unreachable!(),
    }
    let tried = maps.len() + 1;
    let mut best_upper = strong.upper;
    let mut best_map = identity.clone();
    let mut lower = strong.lower;
    let mut seen = HashSet::new();
    for m in maps {
        let permuted = right.permute_cols(&m);
        let key: Vec<u64> = permuted.values.iter().map(|v| v.to_bits()).collect();
        if !seen.insert(key) {
            continue;
        }
        let sol = solve_coupling(&left, &permuted, best_upper)?;
        iterations += sol.rounds;
        lower = lower.min(sol.lower);
        if sol.upper < best_upper {
            best_upper = sol.upper;
            best_map = m;
        }
    }
    let complete = matches!(mode, KernelMode::ExactTiny) && cols <= TINY_MAX_COLS;
    // without all cell permutations only the column-map-invariant family certifies a lower bound
    let lower = if complete { lower.min(best_upper) } else { strong.full_column_lower.min(best_upper) };
    let lower = lower.max(strong.full_column_lower.min(best_upper));
    let kind = if complete && best_upper - lower <= CUT_TOL { BoundKind::Exact } else { BoundKind::Upper };
    let graphon_upper = graphon_bound(k1, k2)?;
    Ok(KernelDistance {
        mode,
        lower,
        upper: best_upper,
        kind,
        strong_lower: strong.lower,
        strong_upper: strong.upper,
        noperm,
        noperm_kind,
        graphon_upper,
        column_map: best_map,
        column_maps_tried: tried,
        iterations,
    })
}

/// `min_π D_⊡(κ, κ′ with π on both axes)` over weight-preserving cell permutations,
/// when both kernels live on one common square grid of at most 6 cells.
fn graphon_bound(k1: &StepKernel, k2: &StepKernel) -> Result<Option<f64>> {
    let same = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    if !(same(k1.row_weights(), k1.col_weights()) && same(k1.row_weights(), k2.row_weights()) && same(k1.col_weights(), k2.col_weights()))
        || k1.rows() > TINY_MAX_COLS
    {
        return Ok(None);
    }
    let mut best = f64::INFINITY;
    for p in weight_preserving_perms(k1.row_weights()) {
        let moved = k2.permute_rows(&p)?.permute_cols(&p)?;
        best = best.min(kernel::cut_distance_noperm(k1, &moved)?.0);
    }
    Ok(Some(best))
}

/// The two computable inequalities between `Δ_⊠(μ,ν)` and the law distance `d_⊠(μ̇,ν̇)`.
#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub n: usize,
    pub delta: f64,
    pub delta_kind: BoundKind,
    pub d_lower: f64,
    pub d_upper: f64,
    /// `d_upper ≤ Δ + 1e-9`
    pub upper_within_delta: bool,
    /// `Δ ≤ n³ d_upper + 1e-9`
    pub delta_within_cube: bool,
}

pub fn embedding_comparison(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<EmbeddingReport> {
    let delta = discrete_cut_distance(mu, nu, Variant::Weak, DiscreteMode::Exact)?;
    let d = kernel_distance(&Law::embed(mu).to_kernel(), &Law::embed(nu).to_kernel(), KernelMode::ExactTiny)?;
    let n = mu.n();
    Ok(EmbeddingReport {
        n,
        delta: delta.upper,
        delta_kind: delta.kind,
        d_lower: d.lower,
        d_upper: d.upper,
        upper_within_delta: d.upper <= delta.upper + 1e-9,
        delta_within_cube: delta.upper <= (n * n * n) as f64 * d.upper + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::all_configs;
    use proptest::prelude::*;
    use rand::Rng;

    fn parity(n: usize, odd: bool) -> DiscreteMeasure {
        let cs: Vec<Config> = all_configs(2, n)
            .filter(|c| (c.iter().filter(|s| **s == 1).count() % 2 == 1) == odd)
            .collect();
        let w = 1.0 / cs.len() as f64;
        DiscreteMeasure::new(2, n, cs.into_iter().map(|c| (c, w))).unwrap()
    }

    fn random_measure(seed: u64, q: usize, n: usize, support: usize) -> DiscreteMeasure {
        let mut g = rng::stream(seed, 0);
        let entries: Vec<(Config, f64)> = (0..support)
            .map(|_| ((0..n).map(|_| g.random_range(0..q as u8)).collect(), g.random_range(0.05..1.0)))
            .collect();
        DiscreteMeasure::from_unnormalized(q, n, entries).unwrap()
    }

    /// Oracle: every (S, X, ω) for an explicit coupling.
    fn brute_adversary(coupling: &[(Config, Config, f64)], q: usize, n: usize, perm: &[usize]) -> f64 {
        let mut best: f64 = 0.0;
        for s in 0..q as u8 {
            for xm in 0u32..1 << n {
                for sm in 0u32..1 << coupling.len() {
                    let mut v = 0.0;
                    for (p, (x, y, g)) in coupling.iter().enumerate() {
                        if sm >> p & 1 == 1 {
                            for j in 0..n {
                                if xm >> j & 1 == 1 {
                                    v += g * ((x[j] == s) as i32 - (y[perm[j]] == s) as i32) as f64 / n as f64;
                                }
                            }
                        }
                    }
                    best = best.max(v.abs());
                }
            }
        }
        best
    }

    fn flip_coupling(n: usize) -> Vec<(Config, Config, f64)> {
        let even = parity(n, false);
        even.iter()
            .map(|(c, p)| {
                let mut d = c.clone();
                d[0] ^= 1;
                (c.clone(), d, p)
            })
            .collect()
    }

    #[test]
    fn diagonal_coupling_is_zero() {
        let m = random_measure(1, 2, 3, 5);
        let diag: Vec<_> = m.iter().map(|(c, p)| (c.clone(), c.clone(), p)).collect();
        assert_eq!(adversary_value(&m, &m, &diag, &[0, 1, 2]).unwrap().0, 0.0);
    }

    #[test]
    fn flip_coupling_value() {
        for n in 2..=5 {
            let c = flip_coupling(n);
            let v = adversary_value(&parity(n, false), &parity(n, true), &c, &(0..n).collect::<Vec<_>>()).unwrap().0;
            // only coordinate 1 differs; S can keep the half of the pairs where it moves one way
            assert!((v - 1.0 / (2.0 * n as f64)).abs() < 1e-12, "n = {n}: {v}");
            if n <= 3 {
                assert!((brute_adversary(&c, 2, n, &(0..n).collect::<Vec<_>>()) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn opposite_single_bits() {
        let a = DiscreteMeasure::point_mass(2, vec![0]).unwrap();
        let b = DiscreteMeasure::point_mass(2, vec![1]).unwrap();
        let c = vec![(vec![0], vec![1], 1.0)];
        assert_eq!(adversary_value(&a, &b, &c, &[0]).unwrap().0, 1.0);
    }

    #[test]
    fn rejects_bad_couplings() {
        let a = DiscreteMeasure::uniform(2, 1).unwrap();
        let c = vec![(vec![0], vec![0], 1.0)];
        assert!(adversary_value(&a, &a, &c, &[0]).is_err());
    }

    #[test]
    fn identical_measures_at_distance_zero() {
        let m = random_measure(2, 2, 3, 6);
        for v in [Variant::Weak, Variant::Strong] {
            let d = discrete_cut_distance(&m, &m, v, DiscreteMode::Exact).unwrap();
            assert!(d.upper < 1e-12 && d.kind == BoundKind::Exact);
        }
    }

    #[test]
    fn all_zero_vs_all_one() {
        let a = DiscreteMeasure::point_mass(2, vec![0, 0]).unwrap();
        let b = DiscreteMeasure::point_mass(2, vec![1, 1]).unwrap();
        let d = discrete_cut_distance(&a, &b, Variant::Strong, DiscreteMode::Exact).unwrap();
        assert!((d.upper - 1.0).abs() < 1e-12 && d.kind == BoundKind::Exact);
        assert_eq!(d.witness.cols, vec![0, 1]);
    }

    #[test]
    fn parity_pairs_small() {
        for n in 2..=5 {
            let d = discrete_cut_distance(&parity(n, false), &parity(n, true), Variant::Weak, DiscreteMode::Exact).unwrap();
            assert!(d.kind == BoundKind::Exact);
            assert!(d.upper <= 1.0 / n as f64 + 1e-9, "n = {n}: {}", d.upper);
            assert_eq!(d.lp_solves, 1, "parity is permutation invariant");
        }
    }

    #[test]
    fn exact_value_matches_brute_force_witnesses() {
        for seed in 0..6 {
            let a = random_measure(10 + seed, 2, 2, 3);
            let b = random_measure(20 + seed, 2, 2, 3);
            let d = discrete_cut_distance(&a, &b, Variant::Strong, DiscreteMode::Exact).unwrap();
            let brute = brute_adversary(&d.coupling, 2, 2, &[0, 1]);
            assert!((brute - d.upper).abs() < 1e-12);
            // direct LP over the full witness family: every (X, ω, sign)
            let left = Profiles::from_measure(&a);
            let right = Profiles::from_measure(&b);
            let full = full_family_lp(&left, &right);
            assert!((full - d.upper).abs() < 1e-9, "seed {seed}: {full} vs {}", d.upper);
        }
    }

    fn full_family_lp(left: &Profiles, right: &Profiles) -> f64 {
        let (k, l, cols) = (left.len(), right.len(), left.cols());
        let t = k * l;
        let mut cost = vec![0.0; t + 1];
        cost[t] = 1.0;
        let mut lp = Lp::new(cost);
        for a in 0..k {
            lp.add_row(&(0..l).map(|b| (a * l + b, 1.0)).collect::<Vec<_>>(), Cmp::Eq, left.weights[a]).unwrap();
        }
        for b in 0..l {
            lp.add_row(&(0..k).map(|a| (a * l + b, 1.0)).collect::<Vec<_>>(), Cmp::Eq, right.weights[b]).unwrap();
        }
        for mask in 1u64..1 << cols {
            let xs: Vec<usize> = (0..cols).filter(|j| mask >> j & 1 == 1).collect();
            for s in 0..left.q {
                let fa = left.set_mass(&xs, s);
                let fb = right.set_mass(&xs, s);
                for sg in [1.0, -1.0] {
                    let mut row: Vec<(usize, f64)> = Vec::new();
                    for a in 0..k {
                        for b in 0..l {
                            let c: f64 = sg * (fa[a] - fb[b]);
                            if c > 0.0 {
                                row.push((a * l + b, c));
                            }
                        }
                    }
                    row.push((t, -1.0));
                    lp.add_row(&row, Cmp::Le, 0.0).unwrap();
                }
            }
        }
        lp.solve().unwrap().objective
    }

    #[test]
    fn single_bit_closed_form() {
        for (p, r) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            let a = DiscreteMeasure::new(2, 1, [(vec![0], 1.0 - p), (vec![1], p)]).unwrap();
            let b = DiscreteMeasure::new(2, 1, [(vec![0], 1.0 - r), (vec![1], r)]).unwrap();
            let tv: f64 = (p - r).abs();
            for v in [Variant::Weak, Variant::Strong] {
                let d = discrete_cut_distance(&a, &b, v, DiscreteMode::Exact).unwrap();
                assert!((d.upper - tv).abs() < 1e-9);
            }
            let e = embedding_comparison(&a, &b).unwrap();
            assert!(e.d_upper <= tv + 1e-9 && e.upper_within_delta && e.delta_within_cube);
        }
    }

    #[test]
    fn parity_embedding_chain() {
        let e = embedding_comparison(&parity(4, false), &parity(4, true)).unwrap();
        assert!(e.d_upper <= e.delta + 1e-9 && e.delta <= 0.25 + 1e-9);
        assert!(e.delta <= 64.0 * e.d_upper + 1e-9);
        let m = random_measure(3, 2, 3, 4);
        let z = embedding_comparison(&m, &m).unwrap();
        assert!(z.delta < 1e-12 && z.d_upper < 1e-12);
    }

    #[test]
    fn exact_mode_refuses_large_inputs() {
        let a = DiscreteMeasure::uniform(2, 9).unwrap();
        assert!(matches!(
            discrete_cut_distance(&a, &a, Variant::Weak, DiscreteMode::Exact),
            Err(CutError::SizeBound(_))
        ));
    }

    #[test]
    fn upper_mode_brackets_exact() {
        for seed in 0..10 {
            let a = random_measure(30 + seed, 2, 3, 5);
            let b = random_measure(40 + seed, 2, 3, 5);
            let ex = discrete_cut_distance(&a, &b, Variant::Weak, DiscreteMode::Exact).unwrap();
            let up = discrete_cut_distance(&a, &b, Variant::Weak, DiscreteMode::Upper).unwrap();
            assert!(up.upper >= ex.upper - 1e-9 && up.lower <= ex.upper + 1e-9);
        }
    }

    #[test]
    fn independent_adversary_matches_explicit_coupling() {
        for seed in 0..5 {
            let a = random_measure(50 + seed, 2, 4, 6);
            let b = a.product_of_marginals().unwrap();
            let coupling: Vec<_> =
                a.iter().flat_map(|(x, p)| b.iter().map(move |(y, r)| (x.clone(), y.clone(), p * r))).collect();
            let explicit = adversary_value(&a, &b, &coupling, &[0, 1, 2, 3]).unwrap().0;
            assert!((independent_adversary(&a, &b).unwrap() - explicit).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_row_permutation_is_free() {
        let k = crate::kernel::tests::random_kernel(5, 3, 3, 2);
        let p = k.permute_rows(&[2, 0, 1]).unwrap();
        let d = kernel_distance(&k, &p, KernelMode::ExactTiny).unwrap();
        assert!(d.upper < 1e-9 && d.strong_upper < 1e-9);
        assert!(d.noperm > 0.0);
    }

    #[test]
    fn noperm_examples() {
        let a = StepKernel::constant(&[1.0, 0.0]).unwrap();
        let b = StepKernel::constant(&[0.0, 1.0]).unwrap();
        assert!((kernel_distance_noperm(&a, &b).unwrap().0 - 1.0).abs() < 1e-12);
        assert_eq!(kernel_distance_noperm(&a, &a).unwrap().0, 0.0);
        for seed in 0..5 {
            let x = crate::kernel::tests::random_kernel(seed, 4, 5, 3);
            let y = crate::kernel::tests::random_kernel(seed + 100, 3, 2, 3);
            kernel_distance_noperm(&x, &y).unwrap();
        }
    }

    #[test]
    fn product_measure_near_itself_in_upper_mode() {
        let m = DiscreteMeasure::product(2, &vec![vec![0.3, 0.7]; 10]).unwrap();
        let d = discrete_cut_distance(&m, &m, Variant::Strong, DiscreteMode::Upper).unwrap();
        assert!(d.upper < 1e-12);
    }

    #[test]
    fn sampled_mode_returns_estimate() {
        let k = StepKernel::constant(&[1.0, 0.0]).unwrap();
        let d = kernel_distance(&k, &k, KernelMode::Sampled { n: 6, seed: 3 }).unwrap();
        assert_eq!(d.kind, BoundKind::Estimate);
        assert!(d.upper < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn strong_distance_is_a_premetric(seed in 0u64..10_000) {
            let a = random_measure(seed, 2, 2, 3);
            let b = random_measure(seed + 1, 2, 2, 3);
            let c = random_measure(seed + 2, 2, 2, 3);
            let d = |x: &DiscreteMeasure, y: &DiscreteMeasure| discrete_cut_distance(x, y, Variant::Strong, DiscreteMode::Exact).unwrap().upper;
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-9);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 2e-9);
        }

        #[test]
        fn weak_below_strong(seed in 0u64..10_000) {
            let a = random_measure(seed, 2, 3, 4);
            let b = random_measure(seed + 7, 2, 3, 4);
            let w = discrete_cut_distance(&a, &b, Variant::Weak, DiscreteMode::Exact).unwrap();
            let s = discrete_cut_distance(&a, &b, Variant::Strong, DiscreteMode::Exact).unwrap();
            prop_assert!(w.upper <= s.upper + 1e-9);
        }

        #[test]
        fn adversary_invariant_under_pair_relabeling(seed in 0u64..10_000) {
            let a = random_measure(seed, 2, 3, 4);
            let b = random_measure(seed + 3, 2, 3, 4);
            let d = discrete_cut_distance(&a, &b, Variant::Strong, DiscreteMode::Exact).unwrap();
            let mut rev = d.coupling.clone();
            rev.reverse();
            let x = adversary_value(&a, &b, &d.coupling, &[0, 1, 2]).unwrap().0;
            let y = adversary_value(&a, &b, &rev, &[0, 1, 2]).unwrap().0;
            prop_assert!((x - y).abs() < 1e-12);
        }

        #[test]
        fn kernel_chain(seed in 0u64..10_000) {
            let a = crate::kernel::tests::random_kernel(seed, 3, 3, 2);
            let b = crate::kernel::tests::random_kernel(seed + 1, 2, 3, 2);
            let d = kernel_distance(&a, &b, KernelMode::ExactTiny).unwrap();
            prop_assert!(d.lower <= d.upper + 1e-12);
            prop_assert!(d.upper <= d.strong_upper + 1e-9);
            prop_assert!(d.strong_upper <= d.noperm + 1e-9);
        }
    }
}
