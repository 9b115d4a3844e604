//! Pinning: conditioning on a few randomly chosen coordinates, for discrete
//! measures and for laws, with the information-theoretic bookkeeping behind it.

use std::collections::HashMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use crate::distance::{self, Profiles};
use crate::error::{CutError, Result};
use crate::law::{Atom, Law};
use crate::measure::{entropy_of, pairwise_defect, Config, DiscreteMeasure};
use crate::rng;

/// Exact enumeration limits for discrete pinning statistics.
pub const EXACT_MAX_N: usize = 12;
pub const EXACT_MAX_SUPPORT: usize = 4096;
/// Largest `|Ω|^θ` for which law-level mixtures are enumerated.
pub const MIXTURE_LIMIT: f64 = 1e6;

/// Which coordinates were pinned and to what.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PinSpec {
    pub theta: usize,
    /// Coordinates (discrete case) or column cells (law case).
    pub coords: Vec<usize>,
    pub reference: Vec<u8>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PinResult<T> {
    pub spec: PinSpec,
    pub pinned: T,
    /// `z(τ̂, x̂)`; only for laws.
    pub z: Option<f64>,
}

/// Draw `I` uniformly among θ-subsets and `σ̂ ~ μ`, then condition on `σ_I = σ̂_I`.
pub fn pin_discrete(mu: &DiscreteMeasure, theta: usize, seed: u64) -> Result<PinResult<DiscreteMeasure>> {
    if theta > mu.n() {
        return Err(CutError::InvalidInput(format!("cannot pin {theta} of {} coordinates", mu.n())));
    }
    let mut g = rng::stream(seed, 0);
    let mut coords = index::sample(&mut g, mu.n(), theta).into_vec();
    coords.sort_unstable();
    let support: Vec<(&Config, f64)> = mu.iter().collect();
    let weights: Vec<f64> = support.iter().map(|s| s.1).collect();
    let sigma = support[rng::weighted_index(&mut g, &weights)].0;
    let reference: Vec<u8> = coords.iter().map(|&i| sigma[i]).collect();
    let pinned = if theta == 0 { mu.clone() } else { mu.condition(&coords, &reference)? };
    Ok(PinResult { spec: PinSpec { theta, coords, reference, seed: Some(seed) }, pinned, z: None })
}

fn check_exact(mu: &DiscreteMeasure) -> Result<()> {
    if mu.n() > EXACT_MAX_N || mu.support_size() > EXACT_MAX_SUPPORT {
        return Err(CutError::SizeBound(format!(
            "exact pinning statistics need n <= {EXACT_MAX_N} and support <= {EXACT_MAX_SUPPORT}"
        )));
    }
    Ok(())
}

/// Single and pair tables of `μ` conditioned on each value of `σ_J`.
struct Group {
    mass: f64,
    single: Vec<Vec<f64>>,
    pairs: Vec<Vec<Vec<f64>>>,
}

fn groups(support: &[(Config, f64)], q: usize, n: usize, mask: u32) -> Vec<Group> {
    let mut by_tau: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    for (k, (c, _)) in support.iter().enumerate() {
        let tau: Vec<u8> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| c[i]).collect();
        by_tau.entry(tau).or_default().push(k);
    }
    let mut keys: Vec<_> = by_tau.into_iter().collect();
    keys.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    keys.into_iter()
        .map(|(_, members)| {
            let mass: f64 = members.iter().map(|&k| support[k].1).sum();
            let mut single = vec![vec![0.0; q]; n];
            let mut pairs = vec![vec![vec![0.0; q * q]; n]; n];
            for &k in &members {
                let (c, p) = &support[k];
                let p = p / mass;
                for i in 0..n {
                    single[i][c[i] as usize] += p;
                    for j in (i + 1)..n {
                        pairs[i][j][c[i] as usize * q + c[j] as usize] += p;
                    }
                }
            }
            Group { mass, single, pairs }
        })
        .collect()
}

fn subsets_of_size(n: usize, k: usize) -> Vec<u32> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect()
}

/// `E Σ_{i<j} dTV(μ̂_{ij}, μ̂_i ⊗ μ̂_j)` over `Θ` uniform on `{0..T}`, `I` a uniform
/// Θ-subset and `σ̂ ~ μ`, by exact enumeration.
pub fn expected_pinned_defect(mu: &DiscreteMeasure, t: usize) -> Result<f64> {
    check_exact(mu)?;
    let (q, n) = (mu.q(), mu.n());
    if t > n {
        return Err(CutError::InvalidInput(format!("T = {t} exceeds n = {n}")));
    }
    let support: Vec<(Config, f64)> = mu.iter().map(|(c, p)| (c.clone(), p)).collect();
    let per_theta: Vec<f64> = (0..=t)
        .map(|theta| {
            let subsets = subsets_of_size(n, theta);
            let total: f64 = subsets
                .par_iter()
                .map(|&m| groups(&support, q, n, m).iter().map(|g| g.mass * pairwise_defect(q, &g.single, &g.pairs)).sum::<f64>())
                .sum();
            total / subsets.len() as f64
        })
        .collect();
    Ok(per_theta.iter().sum::<f64>() / (t + 1) as f64)
}

/// Monte-Carlo version of [`expected_pinned_defect`]: `(mean, stderr)`.
pub fn sampled_pinned_defect(mu: &DiscreteMeasure, t: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 2 || t > mu.n() {
        return Err(CutError::InvalidInput("need samples >= 2 and T <= n".into()));
    }
    let vals = (0..samples)
        .into_par_iter()
        .map(|r| {
            let theta = rand::Rng::random_range(&mut rng::stream(seed, r as u64), 0..=t);
            let p = pin_discrete(mu, theta, rng::derive_seed(seed, r as u64))?;
            if mu.n() < 2 { Ok(0.0) } else { p.pinned.symmetry_defect() }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = vals.iter().sum::<f64>() / samples as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}

/// Per-θ conditional mutual informations with pinned indices drawn with replacement.
#[derive(Clone, Debug, Serialize)]
pub struct InformationBudget {
    pub t: usize,
    /// `I(σ_i, σ_i' | i, i', i_1..i_θ, σ_{i_1..i_θ})` for `θ = 0..=T`.
    pub terms: Vec<f64>,
    pub sum: f64,
    /// `H(σ_i | i, i_1..i_θ, σ_{i_1..i_θ})` for `θ = 0..=T+1`.
    pub entropies: Vec<f64>,
    /// `entropies[0] − entropies[T+1]`.
    pub telescoped: f64,
    pub log_q: f64,
    /// `E[KL(μ̂_{i,i'} ‖ μ̂_i ⊗ μ̂_{i'})]` for `Θ` uniform on `{0..T}`.
    pub expected_kl: f64,
    /// `log|Ω| / T`.
    pub kl_bound: f64,
}

impl InformationBudget {
    pub fn within_budget(&self) -> bool {
        self.sum <= self.log_q + 1e-9
    }

    pub fn kl_within_bound(&self) -> bool {
        self.expected_kl <= self.kl_bound + 1e-9
    }

    /// Largest gap between a term and the matching entropy difference.
    pub fn telescoping_error(&self) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(k, v)| (v - (self.entropies[k] - self.entropies[k + 1])).abs())
            .fold(0.0, f64::max)
    }
}

/// Distribution of the number of distinct values among θ uniform draws from `[n]`.
fn distinct_count_distribution(n: usize, theta: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    for _ in 0..theta {
        let mut next = vec![0.0; n + 1];
        for k in 0..=n {
            if p[k] == 0.0 {
                continue;
            }
            next[k] += p[k] * k as f64 / n as f64;
            if k < n {
                next[k + 1] += p[k] * (n - k) as f64 / n as f64;
            }
        }
        p = next;
    }
    p
}

fn kl_pair(q: usize, joint: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in 0..q {
        for y in 0..q {
            let p = joint[x * q + y];
            if p > 0.0 {
                s += p * (p / (a[x] * b[y])).ln();
            }
        }
    }
    s
}

/// Exact information budget for `θ = 0..=T`.
///
/// Pinned index sets are drawn with replacement, so only the set of distinct indices
/// matters; its size distribution is computed exactly and sets of equal size are
/// equally likely.
pub fn information_budget(mu: &DiscreteMeasure, t: usize) -> Result<InformationBudget> {
    check_exact(mu)?;
    if t == 0 {
        return Err(CutError::InvalidInput("T must be positive".into()));
    }
    let (q, n) = (mu.q(), mu.n());
    let support: Vec<(Config, f64)> = mu.iter().map(|(c, p)| (c.clone(), p)).collect();
    // per distinct-set size k: averaged CMI over ordered (i, i') and averaged H(σ_i | σ_J)
    let per_size: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let subsets = subsets_of_size(n, k);
            let (mi, h) = subsets
                .par_iter()
                .map(|&m| {
                    let (mut mi, mut h) = (0.0, 0.0);
                    for g in groups(&support, q, n, m) {
                        let hs: f64 = g.single.iter().map(|s| entropy_of(s.iter().copied())).sum();
                        let mut kl = hs;
                        for i in 0..n {
                            for j in (i + 1)..n {
                                kl += 2.0 * kl_pair(q, &g.pairs[i][j], &g.single[i], &g.single[j]);
                            }
                        }
                        mi += g.mass * kl;
                        h += g.mass * hs;
                    }
                    (mi, h)
                })
                .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let c = subsets.len() as f64;
            (mi / c / (n * n) as f64, h / c / n as f64)
        })
        .collect();
    let mix = |theta: usize, pick: fn(&(f64, f64)) -> f64| -> f64 {
        distinct_count_distribution(n, theta).iter().zip(&per_size).map(|(p, v)| p * pick(v)).sum()
    };
    let terms: Vec<f64> = (0..=t).map(|th| mix(th, |v| v.0)).collect();
    let entropies: Vec<f64> = (0..=t + 1).map(|th| mix(th, |v| v.1)).collect();
    let sum: f64 = terms.iter().sum();
    let log_q = (q as f64).ln();
    Ok(InformationBudget {
        t,
        telescoped: entropies[0] - entropies[t + 1],
        expected_kl: sum / (t + 1) as f64,
        kl_bound: log_q / t as f64,
        terms,
        sum,
        entropies,
        log_q,
    })
}

fn check_cells(mu: &Law, tau: &[u8], cells: &[usize]) -> Result<()> {
    if tau.len() != cells.len() {
        return Err(CutError::ShapeMismatch(format!("{} symbols for {} cells", tau.len(), cells.len())));
    }
    if let Some(&c) = cells.iter().find(|c| **c >= mu.cols()) {
        return Err(CutError::IndexOutOfRange { index: c, dim: mu.cols() });
    }
    if tau.iter().any(|s| *s as usize >= mu.q()) {
        return Err(CutError::InvalidInput("reference symbol outside alphabet".into()));
    }
    Ok(())
}

fn atom_factor(mu: &Law, a: usize, tau: &[u8], cells: &[usize]) -> f64 {
    tau.iter().zip(cells).map(|(&s, &x)| mu.value(a, x, s as usize)).product()
}

/// `z_μ(τ, x_1..x_θ) = Σ_a w_a Π_i σ_{a, x_i}(τ_i)`.
pub fn z_weight(mu: &Law, tau: &[u8], cells: &[usize]) -> Result<f64> {
    check_cells(mu, tau, cells)?;
    Ok((0..mu.num_atoms()).map(|a| mu.atoms()[a].weight * atom_factor(mu, a, tau, cells)).sum())
}

/// Reweight atoms by `Π_i σ_{x_i}(τ_i) / z`; returns `μ` unchanged when `z = 0`.
pub fn pin_law(mu: &Law, tau: &[u8], cells: &[usize]) -> Result<PinResult<Law>> {
    let z = z_weight(mu, tau, cells)?;
    let spec = PinSpec { theta: cells.len(), coords: cells.to_vec(), reference: tau.to_vec(), seed: None };
    if z <= 0.0 {
        return Ok(PinResult { spec, pinned: mu.clone(), z: Some(z) });
    }
    let atoms: Vec<Atom> = mu
        .atoms()
        .iter()
        .enumerate()
        .map(|(a, at)| Atom { weight: at.weight * atom_factor(mu, a, tau, cells) / z, values: at.values.clone() })
        .filter(|at| at.weight > 0.0)
        .collect();
    Ok(PinResult { spec, pinned: Law::new(mu.q(), mu.col_weights().to_vec(), atoms)?, z: Some(z) })
}

/// Draw cells by their weights and `τ̂` from the z-distribution, then pin.
///
/// `τ̂` is drawn in two stages: an atom from the law, then independent symbols from
/// its profile at the drawn cells.
pub fn pin_law_random(mu: &Law, theta: usize, seed: u64) -> Result<PinResult<Law>> {
    let mut g = rng::stream(seed, 0);
    let cells: Vec<usize> = (0..theta).map(|_| rng::weighted_index(&mut g, mu.col_weights())).collect();
    let weights: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let a = rng::weighted_index(&mut g, &weights);
    let tau: Vec<u8> = cells
        .iter()
        .map(|&x| {
            let p: Vec<f64> = (0..mu.q()).map(|s| mu.value(a, x, s)).collect();
            rng::weighted_index(&mut g, &p) as u8
        })
        .collect();
    let mut r = pin_law(mu, &tau, &cells)?;
    r.spec.seed = Some(seed);
    Ok(r)
}

/// `μ_{↓θ}`: the mixture over `τ` of the extremal laws of the pinned laws, weighted by `z(τ)`.
pub fn pinned_mixture(mu: &Law, cells: &[usize]) -> Result<Law> {
    let theta = cells.len();
    let q = mu.q();
    if (q as f64).powi(theta as i32) > MIXTURE_LIMIT {
        return Err(CutError::SizeBound(format!("|Omega|^theta = {q}^{theta} exceeds 10^6")));
    }
    let mut atoms = Vec::new();
    let mut tau = vec![0u8; theta];
    for code in 0..q.pow(theta as u32) {
        let mut c = code;
        for t in tau.iter_mut() {
            *t = (c % q) as u8;
            c /= q;
        }
        let r = pin_law(mu, &tau, cells)?;
        let z = r.z.unwrap_or(0.0);
        if z > 0.0 {
            let bar = r.pinned.extremal();
            atoms.push(Atom { weight: z, values: bar.atoms()[0].values.clone() });
        }
    }
    Ok(Law::new(q, mu.col_weights().to_vec(), atoms)?.merged())
}

/// Outcome of [`pinning_theorem_experiment`].
#[derive(Clone, Debug, Serialize)]
pub struct PinningReport {
    pub epsilon: f64,
    /// Largest Θ drawn.
    pub theta_cap: usize,
    /// `64 ε^{-8} log|Ω|`, the range the guarantee is stated for.
    pub theorem_range: f64,
    /// Fraction of trials whose pinned law had certified defect below ε.
    pub p_extremal_lower: f64,
    /// Mean upper bound on the distance between `μ` and `μ_{↓Θ}`.
    pub e_dist_upper: f64,
    pub dist_stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Monte-Carlo check of the continuous pinning guarantee with `Θ` uniform on `{0..theta_cap}`.
pub fn pinning_theorem_experiment(mu: &Law, eps: f64, theta_cap: usize, trials: usize, seed: u64) -> Result<PinningReport> {
    if !(eps > 0.0 && eps < 1.0) || trials == 0 {
        return Err(CutError::InvalidInput("need 0 < eps < 1 and at least one trial".into()));
    }
    if (mu.q() as f64).powi(theta_cap as i32) > MIXTURE_LIMIT {
        return Err(CutError::SizeBound(format!("|Omega|^{theta_cap} exceeds 10^6")));
    }
    let base = Profiles::from_law(mu);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|r| {
            let s = rng::derive_seed(seed, r as u64);
            let theta = rand::Rng::random_range(&mut rng::stream(s, 1), 0..=theta_cap);
            let p = pin_law_random(mu, theta, s)?;
            let extremal = p.pinned.is_eps_extremal(eps);
            let mix = pinned_mixture(mu, &p.spec.coords)?;
            let d = distance::solve_coupling(&base, &Profiles::from_law(&mix), f64::INFINITY)?;
            Ok((extremal, d.upper))
        })
        .collect::<Result<Vec<(bool, f64)>>>()?;
    let t = trials as f64;
    let hits = outcomes.iter().filter(|o| o.0).count() as f64;
    let mean = outcomes.iter().map(|o| o.1).sum::<f64>() / t;
    let var = if trials > 1 { outcomes.iter().map(|o| (o.1 - mean).powi(2)).sum::<f64>() / (t - 1.0) } else { 0.0 };
    Ok(PinningReport {
        epsilon: eps,
        theta_cap,
        theorem_range: 64.0 * eps.powi(-8) * (mu.q() as f64).ln(),
        p_extremal_lower: hits / t,
        e_dist_upper: mean,
        dist_stderr: (var / t).sqrt(),
        trials,
        seed,
    })
}
