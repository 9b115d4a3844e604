//! Finite-support laws: mixtures of step functions `[0,1] → P(Ω)`.

use rayon::prelude::*;

use crate::cutnorm::{self, RealMatrix};
use crate::error::{CutError, Result};
use crate::kernel::{self, Grid, StepKernel};
use crate::measure::DiscreteMeasure;
use crate::rng;

/// One atom: a step function given by `cols × q` values on the law's column grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub weight: f64,
    /// `values[j * q + a]`
    pub values: Vec<f64>,
}

/// A finite mixture of step functions on a common column grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Law {
    q: usize,
    col_weights: Vec<f64>,
    atoms: Vec<Atom>,
}

/// Whether a distance-type quantity is exact or one-sided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Exact,
    Upper,
    Lower,
    Estimate,
}

/// A value together with the kind of guarantee it carries.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Bound {
    pub value: f64,
    pub kind: BoundKind,
}

/// Exact value or Monte-Carlo estimate of a multi-overlap.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Overlap {
    pub value: f64,
    /// Standard error; zero when the sum was enumerated.
    pub stderr: f64,
    pub exact: bool,
}

/// Atom tuples beyond this count are sampled instead of enumerated.
pub const OVERLAP_ENUM_LIMIT: f64 = 1e6;

impl Law {
    pub fn new(q: usize, col_weights: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(CutError::InvalidInput("a law needs at least one atom".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if atoms.iter().any(|a| !(a.weight > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(CutError::InvalidInput("atom weights must be positive and sum to 1".into()));
        }
        let blocks: Vec<f64> = atoms.iter().flat_map(|a| a.values.iter().copied()).collect();
        // validation of the grid and of every profile happens in the kernel constructor
        let k = StepKernel::new(q, atoms.iter().map(|a| a.weight).collect(), col_weights, blocks)?;
        Ok(Self::from_kernel(&k))
    }

    /// The step-function law of a discrete measure: n equal cells, cell i = δ_{σ_i}.
    pub fn embed(mu: &DiscreteMeasure) -> Self {
        let (q, n) = (mu.q(), mu.n());
        let atoms = mu
            .iter()
            .map(|(c, p)| {
                let mut values = vec![0.0; n * q];
                for (i, s) in c.iter().enumerate() {
                    values[i * q + *s as usize] = 1.0;
                }
                Atom { weight: p, values }
            })
            .collect();
        Self { q, col_weights: vec![1.0 / n as f64; n], atoms }
    }

    /// Rows of the kernel become atoms.
    pub fn from_kernel(k: &StepKernel) -> Self {
        let width = k.cols() * k.q();
        let atoms = k
            .row_weights()
            .iter()
            .enumerate()
            .map(|(i, w)| Atom { weight: *w, values: k.blocks()[i * width..(i + 1) * width].to_vec() })
            .collect();
        Self { q: k.q(), col_weights: k.col_weights().to_vec(), atoms }
    }

    pub fn to_kernel(&self) -> StepKernel {
        let blocks: Vec<f64> = self.atoms.iter().flat_map(|a| a.values.iter().copied()).collect();
        StepKernel::new(self.q, self.atoms.iter().map(|a| a.weight).collect(), self.col_weights.clone(), blocks)
            .expect("law invariants")
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn cols(&self) -> usize {
        self.col_weights.len()
    }

    pub fn col_weights(&self) -> &[f64] {
        &self.col_weights
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `σ_x(ω)` of atom `a` on column cell `j`.
    pub fn value(&self, a: usize, j: usize, s: usize) -> f64 {
        self.atoms[a].values[j * self.q + s]
    }

    /// The same law on a finer column grid.
    pub fn refine_cols(&self, grid: &Grid) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                weight: a.weight,
                values: grid.map.iter().flat_map(|&j| a.values[j * self.q..(j + 1) * self.q].iter().copied()).collect(),
            })
            .collect();
        Self { q: self.q, col_weights: grid.weights.clone(), atoms }
    }

    /// Coordinate-wise mean profile as a single-atom law.
    pub fn extremal(&self) -> Self {
        let mut mean = vec![0.0; self.cols() * self.q];
        for a in &self.atoms {
            mean.iter_mut().zip(&a.values).for_each(|(m, v)| *m += a.weight * v);
        }
        Self { q: self.q, col_weights: self.col_weights.clone(), atoms: vec![Atom { weight: 1.0, values: mean }] }
    }

    /// Merge atoms with identical profiles (within 1e-12).
    pub fn merged(&self) -> Self {
        let mut out: Vec<Atom> = Vec::new();
        for a in &self.atoms {
            match out.iter_mut().find(|b| b.values.iter().zip(&a.values).all(|(x, y)| (x - y).abs() <= 1e-12)) {
                Some(b) => b.weight += a.weight,
                None => out.push(a.clone()),
            }
        }
        Self { q: self.q, col_weights: self.col_weights.clone(), atoms: out }
    }

    /// Per-symbol matrices `σ_a(x)(ω) − σ̄(x)(ω)` with atom and column weights.
    fn deviation_matrices(&self) -> Vec<RealMatrix> {
        let bar = &self.extremal().atoms[0].values;
        let (k, l, q) = (self.num_atoms(), self.cols(), self.q);
        let rw: Vec<f64> = self.atoms.iter().map(|a| a.weight).collect();
        (0..q)
            .map(|s| {
                let data = (0..k)
                    .flat_map(|a| (0..l).map(move |j| (a, j)))
                    .map(|(a, j)| self.atoms[a].values[j * q + s] - bar[j * q + s])
                    .collect();
                RealMatrix::new(k, l, data)
                    .and_then(|m| m.with_weights(rw.clone(), self.col_weights.clone()))
                    .expect("law invariants")
            })
            .collect()
    }

    /// Upper bound on the cut distance to the extremal law.
    ///
    /// The coupling with a single-atom law is forced, so the strong distance is the
    /// weighted cut norm of the deviations from the mean profile: exact when an axis has
    /// at most [`cutnorm::MAX_EXACT_AXIS`] cells, a spectral/L1 bound otherwise. The weak
    /// distance is at most the strong one.
    pub fn extremality_defect(&self) -> Bound {
        let mats = self.deviation_matrices();
        let exact = mats[0].rows().min(mats[0].cols()) <= cutnorm::MAX_EXACT_AXIS;
        let value = mats
            .par_iter()
            .map(|m| if exact { cutnorm::cut_norm_exact(m).map(|r| r.0).unwrap_or(f64::INFINITY) } else { cutnorm::cut_norm_upper(m) })
            .reduce(|| 0.0, f64::max);
        Bound { value, kind: BoundKind::Upper }
    }

    /// Whether the certified defect is below `eps`.
    pub fn is_eps_extremal(&self, eps: f64) -> bool {
        self.extremality_defect().value < eps
    }

    /// `R_{ℓ,ω_1..ω_m}(μ) = E[(∫ Π_i σ_{i,x}(ω_i) dx)^ℓ]` over independent atoms `σ_1..σ_m`.
    ///
    /// Enumerated exactly when `atoms^m ≤ 10^6`, otherwise estimated from `samples`
    /// tuples drawn with `seed`.
    pub fn multi_overlap(&self, ell: u32, symbols: &[usize], samples: usize, seed: u64) -> Result<Overlap> {
        if ell == 0 || symbols.is_empty() {
            return Err(CutError::InvalidInput("need l >= 1 and at least one symbol".into()));
        }
        if let Some(s) = symbols.iter().find(|s| **s >= self.q) {
            return Err(CutError::InvalidInput(format!("symbol {s} outside alphabet")));
        }
        let m = symbols.len();
        let k = self.num_atoms();
        let inner = |tuple: &[usize]| -> f64 {
            let mut r = 0.0;
            for (j, w) in self.col_weights.iter().enumerate() {
                let mut prod = *w;
                for (i, &a) in tuple.iter().enumerate() {
                    prod *= self.value(a, j, symbols[i]);
                }
                r += prod;
            }
            r.powi(ell as i32)
        };
        if (k as f64).powi(m as i32) <= OVERLAP_ENUM_LIMIT {
            let total = k.pow(m as u32);
            let value = (0..total)
                .into_par_iter()
                .map(|mut code| {
                    let mut tuple = vec![0; m];
                    let mut w = 1.0;
                    for t in tuple.iter_mut() {
                        *t = code % k;
                        code /= k;
                        w *= self.atoms[*t].weight;
                    }
                    w * inner(&tuple)
                })
                .sum();
            return Ok(Overlap { value, stderr: 0.0, exact: true });
        }
        if samples < 2 {
            return Err(CutError::InvalidInput("Monte-Carlo overlap needs at least 2 samples".into()));
        }
        let weights: Vec<f64> = self.atoms.iter().map(|a| a.weight).collect();
        let draws: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(seed, r as u64);
                let tuple: Vec<usize> = (0..m).map(|_| rng::weighted_index(&mut g, &weights)).collect();
                inner(&tuple)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / samples as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        Ok(Overlap { value: mean, stderr: (var / samples as f64).sqrt(), exact: false })
    }
}

/// `max_ω ∫ |f(x)(ω) − g(x)(ω)| dx` between the mean profiles of two laws.
pub fn extremal_l1(mu: &Law, nu: &Law) -> Result<f64> {
    let (f, g) = extremal_profiles(mu, nu)?;
    Ok((0..mu.q)
        .map(|s| f.iter().zip(&g).map(|((w, a), (_, b))| w * (a[s] - b[s]).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Exact strong cut distance between the extremal laws of `mu` and `nu`:
/// the coupling of two point masses is forced and the best column set for each
/// symbol collects the cells where the difference has one sign.
pub fn extremal_strong_distance(mu: &Law, nu: &Law) -> Result<f64> {
    let (f, g) = extremal_profiles(mu, nu)?;
    Ok((0..mu.q)
        .map(|s| {
            let (mut pos, mut neg) = (0.0, 0.0);
            for ((w, a), (_, b)) in f.iter().zip(&g) {
                let d = w * (a[s] - b[s]);
                if d > 0.0 {
                    pos += d;
                } else {
                    neg -= d;
                }
            }
            f64::max(pos, neg)
        })
        .fold(0.0, f64::max))
}

type Profile = Vec<(f64, Vec<f64>)>;

fn extremal_profiles(mu: &Law, nu: &Law) -> Result<(Profile, Profile)> {
    if mu.q != nu.q {
        return Err(CutError::ShapeMismatch("laws over different alphabets".into()));
    }
    let (ga, gb) = Grid::common_pair(&mu.col_weights, &nu.col_weights);
    let a = mu.refine_cols(&ga).extremal();
    let b = nu.refine_cols(&gb).extremal();
    let q = mu.q;
    let split = |l: &Law| -> Profile {
        l.col_weights.iter().enumerate().map(|(j, w)| (*w, l.atoms[0].values[j * q..(j + 1) * q].to_vec())).collect()
    };
    Ok((split(&a), split(&b)))
}

/// Laws of discrete measures compare through their kernels.
pub fn law_noperm_distance(mu: &Law, nu: &Law) -> Result<f64> {
    Ok(kernel::cut_distance_noperm(&mu.to_kernel(), &nu.to_kernel())?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::all_configs;
    use proptest::prelude::*;

    fn parity(n: usize) -> DiscreteMeasure {
        let cs: Vec<Vec<u8>> = all_configs(2, n).filter(|c| c.iter().filter(|s| **s == 1).count() % 2 == 0).collect();
        let w = 1.0 / cs.len() as f64;
        DiscreteMeasure::new(2, n, cs.into_iter().map(|c| (c, w))).unwrap()
    }

    fn two_point() -> Law {
        Law::new(
            2,
            vec![1.0],
            vec![Atom { weight: 0.5, values: vec![1.0, 0.0] }, Atom { weight: 0.5, values: vec![0.0, 1.0] }],
        )
        .unwrap()
    }

    #[test]
    fn embed_examples() {
        let l = Law::embed(&DiscreteMeasure::point_mass(2, vec![0, 1]).unwrap());
        assert_eq!(l.num_atoms(), 1);
        assert_eq!(l.atoms()[0].values, vec![1.0, 0.0, 0.0, 1.0]);
        let p = Law::embed(&parity(2));
        assert_eq!(p.num_atoms(), 2);
        assert!(p.atoms().iter().all(|a| a.weight == 0.5));
        assert_eq!(Law::embed(&DiscreteMeasure::uniform(3, 1).unwrap()).num_atoms(), 3);
    }

    #[test]
    fn kernel_round_trip() {
        let k = StepKernel::discretize(2, 4, |s, x| vec![1.0 - s * x, s * x]).unwrap();
        let l = Law::from_kernel(&k);
        assert_eq!(l.num_atoms(), 4);
        assert_eq!(l.to_kernel(), k);
        let one = StepKernel::new(2, vec![1.0], vec![0.5, 0.5], vec![0.2, 0.8, 0.6, 0.4]).unwrap();
        assert_eq!(Law::from_kernel(&one).num_atoms(), 1);
        assert_eq!(law_noperm_distance(&Law::from_kernel(&k), &l).unwrap(), 0.0);
    }

    #[test]
    fn extremal_examples() {
        let single = Law::new(2, vec![0.5, 0.5], vec![Atom { weight: 1.0, values: vec![0.1, 0.9, 0.4, 0.6] }]).unwrap();
        assert_eq!(single.extremal(), single);
        assert_eq!(single.extremality_defect().value, 0.0);
        let p = Law::embed(&parity(4)).extremal();
        assert!(p.atoms()[0].values.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn opposite_point_masses_defect() {
        // S = atom 0, X = [0,1], ω = 0 gives ½ · ½ = ¼
        let d = two_point().extremality_defect();
        assert!((d.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn parity_defect_decays() {
        let vals: Vec<f64> = (4..=12).map(|n| Law::embed(&parity(n)).extremality_defect().value).collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        for (i, v) in vals.iter().enumerate() {
            let n = (4 + i) as f64;
            assert!(v * n.sqrt() < 0.25, "n = {n}: {v}");
        }
        // n = 4: X = three cells, S = configurations with at least two ones there: 1/8 · (3/8 + 3 · 1/8)
        assert!((vals[0] - 3.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_examples() {
        let h = Law::new(2, vec![1.0], vec![Atom { weight: 1.0, values: vec![0.5, 0.5] }]).unwrap();
        let r = h.multi_overlap(3, &[0, 1], 0, 0).unwrap();
        assert!((r.value - 0.25f64.powi(3)).abs() < 1e-15 && r.exact);

        let sx = Law::from_kernel(&StepKernel::discretize(2, 64, |s, x| vec![1.0 - s * x, s * x]).unwrap());
        let r = sx.multi_overlap(1, &[1], 0, 0).unwrap();
        assert!((r.value - 0.25).abs() < 0.01);
        let total: f64 = (0..2).map(|s| sx.multi_overlap(1, &[s], 0, 0).unwrap().value).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_monte_carlo_agrees() {
        let sx = Law::from_kernel(&StepKernel::discretize(2, 16, |s, x| vec![1.0 - s * x, s * x]).unwrap());
        let symbols = [1, 1, 0, 1, 1];
        // brute-force oracle over all 16^5 atom tuples
        let mut exact = 0.0;
        for code in 0..16usize.pow(5) {
            let t: Vec<usize> = (0..5).map(|i| code / 16usize.pow(i) % 16).collect();
            let r: f64 = (0..16)
                .map(|j| sx.col_weights()[j] * (0..5).map(|i| sx.value(t[i], j, symbols[i])).product::<f64>())
                .sum();
            exact += t.iter().map(|a| sx.atoms()[*a].weight).product::<f64>() * r * r;
        }
        let est = sx.multi_overlap(2, &symbols, 40_000, 3).unwrap();
        assert!(!est.exact && est.stderr > 0.0);
        assert!((est.value - exact).abs() < 4.0 * est.stderr, "{} vs {exact}", est.value);
        assert!(sx.multi_overlap(2, &[1, 1], 0, 0).unwrap().exact);
    }

    #[test]
    fn extremal_bracket_on_point_profiles() {
        let a = Law::new(2, vec![0.5, 0.5], vec![Atom { weight: 1.0, values: vec![1.0, 0.0, 0.0, 1.0] }]).unwrap();
        let b = Law::new(2, vec![1.0], vec![Atom { weight: 1.0, values: vec![0.5, 0.5] }]).unwrap();
        let d = extremal_strong_distance(&a, &b).unwrap();
        let l1 = extremal_l1(&a, &b).unwrap();
        assert!((d - 0.25).abs() < 1e-15 && (l1 - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn extremal_bracket(seed in 0u64..5000) {
            let a = Law::from_kernel(&crate::kernel::tests::random_kernel(seed, 3, 4, 3));
            let b = Law::from_kernel(&crate::kernel::tests::random_kernel(seed + 1, 2, 5, 3));
            let d = extremal_strong_distance(&a, &b).unwrap();
            let l1 = extremal_l1(&a, &b).unwrap();
            prop_assert!(d <= l1 + 1e-12 && l1 <= 2.0 * d + 1e-12);
        }

        #[test]
        fn overlap_invariant_under_atom_relabeling(seed in 0u64..5000) {
            let k = crate::kernel::tests::random_kernel(seed, 4, 3, 2);
            let l = Law::from_kernel(&k);
            let p = Law::from_kernel(&k.permute_rows(&[2, 0, 3, 1]).unwrap());
            let a = l.multi_overlap(2, &[0, 1, 1], 0, 0).unwrap().value;
            let b = p.multi_overlap(2, &[0, 1, 1], 0, 0).unwrap().value;
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
