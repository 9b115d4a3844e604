//! Exact rational measures, used where equalities must hold exactly.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Config, DiscreteMeasure};
use crate::error::{CutError, Result};

/// A distribution on Ω^n with rational weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMeasure {
    q: usize,
    n: usize,
    support: BTreeMap<Config, BigRational>,
}

impl ExactMeasure {
    /// Weights must be nonnegative and sum to exactly one.
    pub fn new<I>(q: usize, n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Config, BigRational)>,
    {
        let mut support: BTreeMap<Config, BigRational> = BTreeMap::new();
        for (c, p) in entries {
            if c.len() != n {
                return Err(CutError::ShapeMismatch(format!("configuration of length {} in dimension {n}", c.len())));
            }
            if c.iter().any(|s| *s as usize >= q) {
                return Err(CutError::InvalidInput("symbol outside alphabet".into()));
            }
            if p.is_negative() {
                return Err(CutError::InvalidInput("negative weight".into()));
            }
            if !p.is_zero() {
                *support.entry(c).or_insert_with(BigRational::zero) += p;
            }
        }
        let total: BigRational = support.values().cloned().sum();
        if !total.is_one() {
            return Err(CutError::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { q, n, support })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, c: &[u8]) -> BigRational {
        self.support.get(c).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Config, &BigRational)> + '_ {
        self.support.iter()
    }

    pub fn marginal(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&i) = idx.iter().find(|&&i| i >= self.n) {
            return Err(CutError::IndexOutOfRange { index: i, dim: self.n });
        }
        Self::new(
            self.q,
            idx.len(),
            self.support.iter().map(|(c, p)| (idx.iter().map(|&i| c[i]).collect(), p.clone())),
        )
    }

    pub fn marginal_vectors(&self) -> Vec<Vec<BigRational>> {
        let mut v = vec![vec![BigRational::zero(); self.q]; self.n];
        for (c, p) in &self.support {
            for (i, s) in c.iter().enumerate() {
                v[i][*s as usize] += p;
            }
        }
        v
    }

    pub fn product_of_marginals(&self) -> Result<Self> {
        let mut support: Vec<(Config, BigRational)> = vec![(Vec::new(), BigRational::one())];
        for m in self.marginal_vectors() {
            let mut next = Vec::new();
            for (c, p) in &support {
                for (s, ps) in m.iter().enumerate() {
                    if !ps.is_zero() {
                        let mut c2 = c.clone();
                        c2.push(s as u8);
                        next.push((c2, p * ps));
                    }
                }
            }
            support = next;
        }
        Self::new(self.q, self.n, support)
    }

    pub fn condition(&self, idx: &[usize], tau: &[u8]) -> Result<Self> {
        if idx.len() != tau.len() {
            return Err(CutError::ShapeMismatch("index and symbol counts differ".into()));
        }
        let kept: Vec<(Config, BigRational)> = self
            .support
            .iter()
            .filter(|(c, _)| idx.iter().zip(tau).all(|(&i, &t)| c[i] == t))
            .map(|(c, p)| (c.clone(), p.clone()))
            .collect();
        let mass: BigRational = kept.iter().map(|(_, p)| p.clone()).sum();
        if mass.is_zero() {
            return Err(CutError::ZeroProbabilityEvent);
        }
        Self::new(self.q, self.n, kept.into_iter().map(|(c, p)| (c, p / &mass)))
    }

    /// ½ Σ |μ(σ) − ν(σ)|.
    pub fn tv_distance(&self, other: &Self) -> Result<BigRational> {
        if self.q != other.q || self.n != other.n {
            return Err(CutError::ShapeMismatch("different (q, n)".into()));
        }
        let mut keys: Vec<&Config> = self.support.keys().chain(other.support.keys()).collect();
        keys.sort();
        keys.dedup();
        let s: BigRational = keys.into_iter().map(|c| (self.prob(c) - other.prob(c)).abs()).sum();
        Ok(s / BigRational::from_integer(2.into()))
    }

    pub fn to_float(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(
            self.q,
            self.n,
            self.support.iter().map(|(c, p)| (c.clone(), p.to_f64().unwrap_or(f64::NAN))),
        )
    }
}
