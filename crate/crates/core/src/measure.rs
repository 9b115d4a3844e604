//! Probability measures on the discrete cube Ω^n.

use std::collections::BTreeMap;

use crate::error::{CutError, Result};

pub mod exact;

/// A configuration: one symbol per coordinate.
pub type Config = Vec<u8>;

/// Sparse distribution on Ω^n, Ω = {0, .., q-1}.
///
/// Configurations are kept in lexicographic order and zero weights are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    q: usize,
    n: usize,
    support: BTreeMap<Config, f64>,
}

/// The joint law of a set of coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTable {
    /// Coordinates of the parent, in the order used by `measure`.
    pub indices: Vec<usize>,
    pub measure: DiscreteMeasure,
}

const NORM_TOL: f64 = 1e-9;
/// Totals this close to one are treated as rounding noise and left alone.
pub(crate) const RESCALE_TOL: f64 = 1e-12;

impl DiscreteMeasure {
    /// Build from weighted configurations that already sum to one (within 1e-9).
    ///
    /// Repeated configurations are merged. The weights are rescaled only when their
    /// total is off by more than rounding noise, so already-normalised input is kept bit for bit.
    pub fn new<I>(q: usize, n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Config, f64)>,
    {
        let m = Self::collect(q, n, entries)?;
        let total = m.total_mass();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(CutError::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        Ok(m.renormalized(total))
    }

    /// Build from nonnegative weights of any positive total.
    pub fn from_unnormalized<I>(q: usize, n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Config, f64)>,
    {
        let m = Self::collect(q, n, entries)?;
        let total = m.total_mass();
        if total <= 0.0 || !total.is_finite() {
            return Err(CutError::InvalidInput("total mass must be positive".into()));
        }
        Ok(m.scaled(1.0 / total))
    }

    fn collect<I>(q: usize, n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Config, f64)>,
    {
        if q == 0 || q > 256 {
            return Err(CutError::InvalidInput(format!("alphabet size {q} not in 1..=256")));
        }
        let mut support = BTreeMap::new();
        for (c, p) in entries {
            if c.len() != n {
                return Err(CutError::ShapeMismatch(format!(
                    "configuration of length {} in dimension {n}",
                    c.len()
                )));
            }
            if let Some(s) = c.iter().find(|s| **s as usize >= q) {
                return Err(CutError::InvalidInput(format!("symbol {s} outside alphabet of size {q}")));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(CutError::InvalidInput(format!("weight {p} is not a finite nonnegative number")));
            }
            if p > 0.0 {
                *support.entry(c).or_insert(0.0) += p;
            }
        }
        Ok(Self { q, n, support })
    }

    fn renormalized(self, total: f64) -> Self {
        if (total - 1.0).abs() <= RESCALE_TOL {
            self
        } else {
            self.scaled(1.0 / total)
        }
    }

    fn scaled(mut self, f: f64) -> Self {
        for v in self.support.values_mut() {
            *v *= f;
        }
        self
    }

    pub fn point_mass(q: usize, config: Config) -> Result<Self> {
        let n = config.len();
        Self::new(q, n, [(config, 1.0)])
    }

    /// Uniform distribution on Ω^n.
    pub fn uniform(q: usize, n: usize) -> Result<Self> {
        check_enumerable(q, n)?;
        let total = (q as f64).powi(n as i32);
        Self::new(q, n, all_configs(q, n).map(|c| (c, 1.0 / total)))
    }

    /// Product of the given per-coordinate distributions.
    pub fn product(q: usize, marginals: &[Vec<f64>]) -> Result<Self> {
        let n = marginals.len();
        for m in marginals {
            if m.len() != q {
                return Err(CutError::ShapeMismatch(format!("marginal of length {} for q = {q}", m.len())));
            }
        }
        let mut support: Vec<(Config, f64)> = vec![(Vec::with_capacity(n), 1.0)];
        for m in marginals {
            let mut next = Vec::with_capacity(support.len() * q);
            for (c, p) in &support {
                for (s, ps) in m.iter().enumerate() {
                    if *ps > 0.0 {
                        let mut c2 = c.clone();
                        c2.push(s as u8);
                        next.push((c2, p * ps));
                    }
                }
            }
            support = next;
        }
        Self::from_unnormalized(q, n, support)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of configurations with positive weight.
    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Config, f64)> + '_ {
        self.support.iter().map(|(c, p)| (c, *p))
    }

    pub fn prob(&self, config: &[u8]) -> f64 {
        self.support.get(config).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.support.values().sum()
    }

    fn check_indices(&self, idx: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.n];
        for &i in idx {
            if i >= self.n {
                return Err(CutError::IndexOutOfRange { index: i, dim: self.n });
            }
            if seen[i] {
                return Err(CutError::InvalidInput(format!("coordinate {i} repeated")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    /// Joint law of the coordinates `idx` (0-based), in the given order.
    pub fn marginal(&self, idx: &[usize]) -> Result<MarginalTable> {
        if idx.is_empty() {
            return Err(CutError::InvalidInput("marginal over an empty index set".into()));
        }
        self.check_indices(idx)?;
        let m = Self::collect(
            self.q,
            idx.len(),
            self.support.iter().map(|(c, p)| (idx.iter().map(|&i| c[i]).collect(), *p)),
        )?;
        Ok(MarginalTable { indices: idx.to_vec(), measure: m })
    }

    /// Distribution of coordinate `i` as a vector of length q.
    pub fn marginal_vector(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.q];
        for (c, p) in &self.support {
            v[c[i] as usize] += p;
        }
        v
    }

    /// All single-coordinate marginals.
    pub fn marginal_vectors(&self) -> Vec<Vec<f64>> {
        let mut v = vec![vec![0.0; self.q]; self.n];
        for (c, p) in &self.support {
            for (i, s) in c.iter().enumerate() {
                v[i][*s as usize] += p;
            }
        }
        v
    }

    /// Joint q×q tables of all pairs i < j, flattened as `[a * q + b]`.
    pub fn pair_tables(&self) -> Vec<Vec<Vec<f64>>> {
        let (n, q) = (self.n, self.q);
        let mut t = vec![vec![vec![0.0; q * q]; n]; n];
        for (c, p) in &self.support {
            for i in 0..n {
                for j in (i + 1)..n {
                    t[i][j][c[i] as usize * q + c[j] as usize] += p;
                }
            }
        }
        t
    }

    /// The product of the marginals of `self`.
    pub fn product_of_marginals(&self) -> Result<Self> {
        Self::product(self.q, &self.marginal_vectors())
    }

    /// Condition on σ_i = τ_k for the k-th index i of `idx`.
    pub fn condition(&self, idx: &[usize], tau: &[u8]) -> Result<Self> {
        if idx.len() != tau.len() {
            return Err(CutError::ShapeMismatch(format!(
                "{} pinned coordinates but {} symbols",
                idx.len(),
                tau.len()
            )));
        }
        self.check_indices(idx)?;
        let kept: Vec<(Config, f64)> = self
            .support
            .iter()
            .filter(|(c, _)| idx.iter().zip(tau).all(|(&i, &t)| c[i] == t))
            .map(|(c, p)| (c.clone(), *p))
            .collect();
        let mass: f64 = kept.iter().map(|(_, p)| p).sum();
        if mass <= 0.0 {
            return Err(CutError::ZeroProbabilityEvent);
        }
        Self::from_unnormalized(self.q, self.n, kept)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.q != other.q || self.n != other.n {
            return Err(CutError::ShapeMismatch(format!(
                "(q, n) = ({}, {}) vs ({}, {})",
                self.q, self.n, other.q, other.n
            )));
        }
        Ok(())
    }

    /// Total variation distance ½ Σ |μ(σ) − ν(σ)|.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let mut s = 0.0;
        for (c, p) in &self.support {
            s += (p - other.prob(c)).abs();
        }
        for (c, p) in &other.support {
            if !self.support.contains_key(c) {
                s += p;
            }
        }
        Ok((0.5 * s).min(1.0))
    }

    /// Kullback-Leibler divergence in nats; `+inf` without absolute continuity.
    pub fn kl_divergence(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let mut s = 0.0;
        for (c, p) in &self.support {
            let r = other.prob(c);
            if r <= 0.0 {
                return Ok(f64::INFINITY);
            }
            s += p * (p / r).ln();
        }
        Ok(s.max(0.0))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_of(self.support.values().copied())
    }

    /// Entropy of the marginal on `idx`; the empty set has entropy zero.
    pub fn block_entropy(&self, idx: &[usize]) -> Result<f64> {
        if idx.is_empty() {
            return Ok(0.0);
        }
        Ok(self.marginal(idx)?.measure.entropy())
    }

    /// I(X; Y | Z) for disjoint coordinate blocks, from the defining sum.
    pub fn conditional_mutual_information(&self, x: &[usize], y: &[usize], z: &[usize]) -> Result<f64> {
        self.check_blocks(x, y, z)?;
        let key = |c: &Config, b: &[usize]| -> Config { b.iter().map(|&i| c[i]).collect() };
        let mut pxyz: BTreeMap<(Config, Config, Config), f64> = BTreeMap::new();
        let mut pxz: BTreeMap<(Config, Config), f64> = BTreeMap::new();
        let mut pyz: BTreeMap<(Config, Config), f64> = BTreeMap::new();
        let mut pz: BTreeMap<Config, f64> = BTreeMap::new();
        for (c, p) in &self.support {
            let (a, b, d) = (key(c, x), key(c, y), key(c, z));
            *pxz.entry((a.clone(), d.clone())).or_insert(0.0) += p;
            *pyz.entry((b.clone(), d.clone())).or_insert(0.0) += p;
            *pz.entry(d.clone()).or_insert(0.0) += p;
            *pxyz.entry((a, b, d)).or_insert(0.0) += p;
        }
        let mut s = 0.0;
        for ((a, b, d), p) in &pxyz {
            let num = p * pz[d];
            let den = pxz[&(a.clone(), d.clone())] * pyz[&(b.clone(), d.clone())];
            s += p * (num / den).ln();
        }
        Ok(s.max(0.0))
    }

    /// I(X; Y | Z) as H(X|Z) − H(X|Y,Z).
    pub fn conditional_mutual_information_entropies(&self, x: &[usize], y: &[usize], z: &[usize]) -> Result<f64> {
        self.check_blocks(x, y, z)?;
        let cat = |a: &[usize], b: &[usize]| -> Vec<usize> { a.iter().chain(b).copied().collect() };
        let h_xz = self.block_entropy(&cat(x, z))?;
        let h_z = self.block_entropy(z)?;
        let yz = cat(y, z);
        let h_xyz = self.block_entropy(&cat(x, &yz))?;
        let h_yz = self.block_entropy(&yz)?;
        Ok((h_xz - h_z) - (h_xyz - h_yz))
    }

    fn check_blocks(&self, x: &[usize], y: &[usize], z: &[usize]) -> Result<()> {
        if x.is_empty() || y.is_empty() {
            return Err(CutError::InvalidInput("X and Y blocks must be nonempty".into()));
        }
        let all: Vec<usize> = x.iter().chain(y).chain(z).copied().collect();
        self.check_indices(&all)
            .map_err(|e| match e {
                CutError::InvalidInput(_) => CutError::InvalidInput("coordinate blocks overlap".into()),
                other => other,
            })
    }

    /// Σ_{i<j} dTV(μ_{ij}, μ_i ⊗ μ_j).
    pub fn symmetry_defect(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(CutError::InvalidInput("symmetry defect needs n >= 2".into()));
        }
        Ok(pairwise_defect(self.q, &self.marginal_vectors(), &self.pair_tables()))
    }

    /// Whether `symmetry_defect < ε n²`.
    pub fn is_eps_symmetric(&self, eps: f64) -> Result<bool> {
        Ok(self.symmetry_defect()? < eps * (self.n * self.n) as f64)
    }

    /// Relabel coordinates: output coordinate i carries input coordinate `perm[i]`.
    pub fn permute_coordinates(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(CutError::ShapeMismatch("permutation length differs from n".into()));
        }
        self.check_indices(perm)?;
        Ok(Self {
            q: self.q,
            n: self.n,
            support: self
                .support
                .iter()
                .map(|(c, p)| (perm.iter().map(|&i| c[i]).collect(), *p))
                .collect(),
        })
    }
}

/// Σ_{i<j} ½ Σ_{a,b} |P_ij(a,b) − P_i(a) P_j(b)| from precomputed tables.
pub(crate) fn pairwise_defect(q: usize, single: &[Vec<f64>], pairs: &[Vec<Vec<f64>>]) -> f64 {
    let n = single.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for a in 0..q {
                for b in 0..q {
                    s += (pairs[i][j][a * q + b] - single[i][a] * single[j][b]).abs();
                }
            }
            total += 0.5 * s;
        }
    }
    total
}

pub(crate) fn entropy_of(ps: impl Iterator<Item = f64>) -> f64 {
    -ps.filter(|p| *p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

fn check_enumerable(q: usize, n: usize) -> Result<()> {
    if (n as f64) * (q as f64).log2() > 24.0 {
        return Err(CutError::SizeBound(format!("q^n = {q}^{n} exceeds 2^24 configurations")));
    }
    Ok(())
}

/// All configurations of Ω^n in lexicographic order.
pub fn all_configs(q: usize, n: usize) -> impl Iterator<Item = Config> {
    let total = (q as u64).pow(n as u32);
    (0..total).map(move |mut k| {
        let mut c = vec![0u8; n];
        for i in (0..n).rev() {
            c[i] = (k % q as u64) as u8;
            k /= q as u64;
        }
        c
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parity(n: usize, odd: bool) -> DiscreteMeasure {
        let cs: Vec<Config> = all_configs(2, n)
            .filter(|c| (c.iter().map(|s| *s as usize).sum::<usize>() % 2 == 1) == odd)
            .collect();
        let w = 1.0 / cs.len() as f64;
        DiscreteMeasure::new(2, n, cs.into_iter().map(|c| (c, w))).unwrap()
    }

    fn bit(p1: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(2, 1, [(vec![0], 1.0 - p1), (vec![1], p1)]).unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DiscreteMeasure::new(2, 2, [(vec![0], 1.0)]).is_err());
        assert!(DiscreteMeasure::new(2, 1, [(vec![2], 1.0)]).is_err());
        assert!(DiscreteMeasure::new(2, 1, [(vec![0], 0.5)]).is_err());
        assert!(DiscreteMeasure::new(2, 1, [(vec![0], -0.5), (vec![1], 1.5)]).is_err());
    }

    #[test]
    fn zero_weights_not_stored() {
        let m = DiscreteMeasure::new(2, 1, [(vec![0], 1.0), (vec![1], 0.0)]).unwrap();
        assert_eq!(m.support_size(), 1);
    }

    #[test]
    fn marginal_examples() {
        let u = DiscreteMeasure::uniform(2, 2).unwrap();
        let m = u.marginal(&[1]).unwrap().measure;
        assert_eq!(m, DiscreteMeasure::uniform(2, 1).unwrap());

        let m = parity(3, false).marginal(&[0, 1]).unwrap().measure;
        for c in all_configs(2, 2) {
            assert!((m.prob(&c) - 0.25).abs() < 1e-15);
        }
        assert!(matches!(u.marginal(&[2]), Err(CutError::IndexOutOfRange { .. })));
        assert!(u.marginal(&[]).is_err());
    }

    #[test]
    fn product_of_marginals_examples() {
        let p = parity(4, true).product_of_marginals().unwrap();
        assert!(p.tv_distance(&DiscreteMeasure::uniform(2, 4).unwrap()).unwrap() < 1e-15);
        let d = DiscreteMeasure::point_mass(2, vec![0, 1]).unwrap();
        assert_eq!(d.product_of_marginals().unwrap(), d);
    }

    #[test]
    fn condition_examples() {
        let u = DiscreteMeasure::uniform(2, 2).unwrap();
        let c = u.condition(&[0], &[0]).unwrap();
        assert_eq!(c.support_size(), 2);
        assert!((c.prob(&[0, 0]) - 0.5).abs() < 1e-15);
        assert!((c.prob(&[0, 1]) - 0.5).abs() < 1e-15);

        let c = parity(3, false).condition(&[0], &[1]).unwrap();
        // remaining pair must be odd so the total stays even
        assert_eq!(c.support_size(), 2);
        assert!((c.prob(&[1, 0, 1]) - 0.5).abs() < 1e-15);
        assert!((c.prob(&[1, 1, 0]) - 0.5).abs() < 1e-15);

        let d = DiscreteMeasure::point_mass(2, vec![0, 1]).unwrap();
        assert!(matches!(d.condition(&[1], &[0]), Err(CutError::ZeroProbabilityEvent)));
    }

    #[test]
    fn tv_examples() {
        let e = parity(5, false);
        assert_eq!(e.tv_distance(&e).unwrap(), 0.0);
        assert!((e.tv_distance(&parity(5, true)).unwrap() - 1.0).abs() < 1e-15);
        assert!((bit(0.0).tv_distance(&bit(0.5)).unwrap() - 0.5).abs() < 1e-15);
        assert!(bit(0.5).tv_distance(&e).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(bit(0.3).kl_divergence(&bit(0.3)).unwrap(), 0.0);
        assert!((bit(0.0).kl_divergence(&bit(0.5)).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(bit(0.0).kl_divergence(&bit(1.0)).unwrap().is_infinite());
    }

    #[test]
    fn cmi_examples() {
        let ind = DiscreteMeasure::product(2, &[vec![0.3, 0.7], vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap();
        assert!(ind.conditional_mutual_information(&[0], &[1], &[2]).unwrap().abs() < 1e-12);

        let copy = DiscreteMeasure::new(2, 2, [(vec![0, 0], 0.5), (vec![1, 1], 0.5)]).unwrap();
        assert!((copy.conditional_mutual_information(&[0], &[1], &[]).unwrap() - 2f64.ln()).abs() < 1e-12);

        let p3 = parity(3, false);
        assert!((p3.conditional_mutual_information(&[0], &[1], &[2]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(p3.conditional_mutual_information(&[0], &[0], &[2]).is_err());
    }

    #[test]
    fn symmetry_defect_examples() {
        let prod = DiscreteMeasure::product(2, &[vec![0.3, 0.7], vec![0.6, 0.4], vec![0.1, 0.9]]).unwrap();
        assert!(prod.symmetry_defect().unwrap() < 1e-14);
        // ½ Σ |P(a,b) − ¼| over four cells = ½
        assert!((parity(2, false).symmetry_defect().unwrap() - 0.5).abs() < 1e-15);
        assert!(parity(3, false).symmetry_defect().unwrap() < 1e-15);
        assert!(bit(0.5).symmetry_defect().is_err());
    }

    fn random_measure(q: usize, n: usize, ws: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::from_unnormalized(q, n, all_configs(q, n).zip(ws.iter().copied())).unwrap()
    }

    proptest! {
        #[test]
        fn pinsker(ws in prop::collection::vec(0.0f64..1.0, 8), vs in prop::collection::vec(0.01f64..1.0, 8)) {
            prop_assume!(ws.iter().sum::<f64>() > 0.01);
            let a = random_measure(2, 3, &ws);
            let b = random_measure(2, 3, &vs);
            let kl = a.kl_divergence(&b).unwrap();
            prop_assert!(a.tv_distance(&b).unwrap() <= (kl / 2.0).sqrt() + 1e-12);
        }

        #[test]
        fn cmi_identity(ws in prop::collection::vec(0.0f64..1.0, 16)) {
            prop_assume!(ws.iter().sum::<f64>() > 0.01);
            let m = random_measure(2, 4, &ws);
            let a = m.conditional_mutual_information(&[0], &[1, 3], &[2]).unwrap();
            let b = m.conditional_mutual_information_entropies(&[0], &[1, 3], &[2]).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn marginal_consistency(ws in prop::collection::vec(0.0f64..1.0, 27)) {
            prop_assume!(ws.iter().sum::<f64>() > 0.01);
            let m = random_measure(3, 3, &ws);
            let j = m.marginal(&[0, 2]).unwrap().measure;
            let direct = m.marginal(&[2]).unwrap().measure;
            let nested = j.marginal(&[1]).unwrap().measure;
            prop_assert!(direct.tv_distance(&nested).unwrap() <= 1e-12);
        }

        #[test]
        fn symmetry_defect_permutation_invariant(ws in prop::collection::vec(0.0f64..1.0, 16)) {
            prop_assume!(ws.iter().sum::<f64>() > 0.01);
            let m = random_measure(2, 4, &ws);
            let p = m.permute_coordinates(&[2, 0, 3, 1]).unwrap();
            prop_assert!((m.symmetry_defect().unwrap() - p.symmetry_defect().unwrap()).abs() < 1e-12);
            prop_assert!(m.product_of_marginals().unwrap().symmetry_defect().unwrap() < 1e-12);
        }
    }
}
