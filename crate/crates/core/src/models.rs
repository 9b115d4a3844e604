//! Worked examples: parity measures, the `i·s/n` mixture and the Curie–Weiss model.
//!
//! Binary models use symbol 1 for spin +1 and symbol 0 for spin −1.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{CutError, Result};
use crate::kernel::StepKernel;
use crate::measure::exact::ExactMeasure;
use crate::measure::{all_configs, Config, DiscreteMeasure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Uniform distribution on the `2^{n−1}` binary strings with the given number of ones mod 2.
pub fn parity_measure(n: usize, parity: Parity) -> Result<DiscreteMeasure> {
    if n == 0 || n > 24 {
        return Err(CutError::InvalidInput(format!("parity measure needs 1 <= n <= 24, got {n}")));
    }
    let want = (parity == Parity::Odd) as usize;
    let w = 1.0 / (1u64 << (n - 1)) as f64;
    let cs: Vec<(Config, f64)> =
        all_configs(2, n).filter(|c| c.iter().filter(|s| **s == 1).count() % 2 == want).map(|c| (c, w)).collect();
    DiscreteMeasure::new(2, n, cs)
}

/// Largest dimension for [`iscaled_measure`].
pub const ISCALED_MAX_N: usize = 16;

/// `μ(σ) = ∫_0^1 Π_i (is/n)^{σ_i} (1 − is/n)^{1−σ_i} ds`, in exact arithmetic.
///
/// The integrand is expanded as a polynomial in `s` and integrated monomial by monomial.
pub fn iscaled_measure_exact(n: usize) -> Result<ExactMeasure> {
    if n == 0 || n > ISCALED_MAX_N {
        return Err(CutError::InvalidInput(format!("need 1 <= n <= {ISCALED_MAX_N}, got {n}")));
    }
    let nn = BigInt::from(n);
    let entries = all_configs(2, n).map(|c| {
        // coefficients of the polynomial in s, lowest degree first
        let mut poly = vec![BigRational::one()];
        for (k, s) in c.iter().enumerate() {
            let a = BigRational::new(BigInt::from(k + 1), nn.clone());
            let mut next = vec![BigRational::zero(); poly.len() + 1];
            for (d, coef) in poly.iter().enumerate() {
                if *s == 1 {
                    next[d + 1] += coef * &a;
                } else {
                    next[d] += coef.clone();
                    next[d + 1] -= coef * &a;
                }
            }
            poly = next;
        }
        let p: BigRational =
            poly.iter().enumerate().map(|(d, coef)| coef / BigRational::from_integer(BigInt::from(d + 1))).sum();
        (c, p)
    });
    ExactMeasure::new(2, n, entries)
}

pub fn iscaled_measure(n: usize) -> Result<DiscreteMeasure> {
    iscaled_measure_exact(n)?.to_float()
}

/// The limit kernel `κ_{s,x} = (1 − sx, sx)` on a `grid × grid` midpoint discretisation.
pub fn iscaled_limit_kernel(grid: usize) -> Result<StepKernel> {
    StepKernel::discretize(2, grid, |s, x| vec![1.0 - s * x, s * x])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurieWeissSpec {
    pub n: usize,
    /// Inverse-temperature-like coupling `T > 0`.
    pub t: f64,
}

pub const CURIE_WEISS_MAX_N: usize = 20;

/// Boltzmann weights `∝ exp((T/n) Σ_{i<j} s_i s_j)`, normalised in log space.
pub fn curie_weiss_measure(spec: CurieWeissSpec) -> Result<DiscreteMeasure> {
    let CurieWeissSpec { n, t } = spec;
    if n == 0 || n > CURIE_WEISS_MAX_N {
        return Err(CutError::InvalidInput(format!("need 1 <= n <= {CURIE_WEISS_MAX_N}, got {n}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(CutError::InvalidInput(format!("temperature must be positive, got {t}")));
    }
    // Σ_{i<j} s_i s_j = (M² − n) / 2 with M the total spin
    let energy = |c: &Config| -> f64 {
        let m = c.iter().map(|s| if *s == 1 { 1.0 } else { -1.0 }).sum::<f64>();
        t / n as f64 * (m * m - n as f64) / 2.0
    };
    let cs: Vec<(Config, f64)> = all_configs(2, n).map(|c| { let e = energy(&c); (c, e) }).collect();
    let top = cs.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let log_z = top + cs.iter().map(|c| (c.1 - top).exp()).sum::<f64>().ln();
    DiscreteMeasure::new(2, n, cs.into_iter().map(|(c, e)| (c, (e - log_z).exp())))
}

fn check_supercritical(t: f64) -> Result<()> {
    if !(t > 1.0 && t.is_finite()) {
        return Err(CutError::InvalidInput(format!("no positive magnetization for T = {t} <= 1")));
    }
    Ok(())
}

/// Positive root of `m = tanh(T m)` for `T > 1`, by bisection.
pub fn curie_weiss_magnetization(t: f64) -> Result<f64> {
    check_supercritical(t)?;
    let f = |m: f64| (t * m).tanh() - m;
    // f > 0 on (0, m*) and f < 0 on (m*, 1]
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Same root by Newton's method on `T m − artanh(m)`, started at `tanh(T)`.
///
/// The function is concave on `(0, 1)` and negative at the start, so the iterates
/// decrease monotonically to the root.
pub fn curie_weiss_magnetization_newton(t: f64) -> Result<f64> {
    check_supercritical(t)?;
    let mut m = t.tanh();
    for _ in 0..200 {
        let g = t * m - m.atanh();
        let dg = t - 1.0 / (1.0 - m * m);
        let next = m - g / dg;
        if (next - m).abs() <= 1e-16 {
            return Ok(next);
        }
        m = next;
    }
    Err(CutError::Numeric(format!("Newton iteration for T = {t} did not converge")))
}

/// `(1/2, 1/2)` for `T ≤ 1`; otherwise two equal row cells with `((1+m)/2, (1−m)/2)` and its mirror.
pub fn curie_weiss_limit_kernel(t: f64) -> Result<StepKernel> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(CutError::InvalidInput(format!("temperature must be positive, got {t}")));
    }
    if t <= 1.0 {
        return StepKernel::constant(&[0.5, 0.5]);
    }
    let m = curie_weiss_magnetization(t)?;
    let (a, b) = ((1.0 + m) / 2.0, (1.0 - m) / 2.0);
    StepKernel::new(2, vec![0.5, 0.5], vec![1.0], vec![a, b, b, a])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Law;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn parity_examples() {
        let e = parity_measure(2, Parity::Even).unwrap();
        assert_eq!(e.support_size(), 2);
        assert_eq!(e.prob(&[1, 1]), 0.5);
        let e3 = parity_measure(3, Parity::Even).unwrap();
        assert_eq!(e3.support_size(), 4);
        assert!(e3.iter().all(|(_, p)| p == 0.25));
        for n in 1..8 {
            let tv = parity_measure(n, Parity::Even).unwrap().tv_distance(&parity_measure(n, Parity::Odd).unwrap()).unwrap();
            assert_eq!(tv, 1.0);
        }
    }

    #[test]
    fn iscaled_small_values() {
        let m1 = iscaled_measure_exact(1).unwrap();
        assert_eq!(m1.prob(&[1]), q(1, 2));
        let m2 = iscaled_measure_exact(2).unwrap();
        assert_eq!(m2.prob(&[1, 1]), q(1, 6));
        // ∫ (1 − s/2)(1 − s) ds = 1 − 1/4 − 1/2 + 1/6
        assert_eq!(m2.prob(&[0, 0]), q(5, 12));
    }

    #[test]
    fn iscaled_marginals_exact() {
        for n in 1..=8 {
            let m = iscaled_measure_exact(n).unwrap();
            let mv = m.marginal_vectors();
            for (i, v) in mv.iter().enumerate() {
                assert_eq!(v[1], q(i as i64 + 1, 2 * n as i64));
            }
        }
    }

    #[test]
    fn iscaled_matches_quadrature() {
        // composite Simpson on a fine grid
        let n = 5;
        let m = iscaled_measure(n).unwrap();
        for (c, p) in m.iter() {
            let f = |s: f64| -> f64 {
                c.iter().enumerate().map(|(k, b)| {
                    let a = (k + 1) as f64 * s / n as f64;
                    if *b == 1 { a } else { 1.0 - a }
                }).product()
            };
            let steps = 2000;
            let h = 1.0 / steps as f64;
            let mut acc = f(0.0) + f(1.0);
            for k in 1..steps {
                acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            assert!((acc * h / 3.0 - p).abs() < 1e-12);
        }
    }

    #[test]
    fn curie_weiss_examples() {
        let tiny = curie_weiss_measure(CurieWeissSpec { n: 4, t: 1e-12 }).unwrap();
        assert!(tiny.iter().all(|(_, p)| (p - 1.0 / 16.0).abs() < 1e-12));
        let m = curie_weiss_measure(CurieWeissSpec { n: 2, t: 2.0 }).unwrap();
        assert!((m.prob(&[1, 1]) / m.prob(&[0, 1]) - 2f64.exp()).abs() < 1e-12);
        let m = curie_weiss_measure(CurieWeissSpec { n: 9, t: 1.7 }).unwrap();
        for (c, p) in m.iter() {
            let flip: Vec<u8> = c.iter().map(|s| 1 - s).collect();
            assert!((m.prob(&flip) - p).abs() < 1e-15);
        }
        assert!(curie_weiss_measure(CurieWeissSpec { n: 21, t: 1.0 }).is_err());
    }

    #[test]
    fn curie_weiss_large_coupling_is_stable() {
        let m = curie_weiss_measure(CurieWeissSpec { n: 12, t: 800.0 }).unwrap();
        assert!((m.prob(&[1; 12]) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn magnetization_roots_agree() {
        for t in [1.01, 1.2, 1.5, 2.0, 3.0, 5.0] {
            let a = curie_weiss_magnetization(t).unwrap();
            let b = curie_weiss_magnetization_newton(t).unwrap();
            assert!((a - b).abs() < 1e-10, "T = {t}: {a} vs {b}");
            assert!(((t * a).tanh() - a).abs() < 1e-12);
        }
        assert!((curie_weiss_magnetization(2.0).unwrap() - 0.95750).abs() < 1e-4);
        assert!(curie_weiss_magnetization(1.0).is_err());
        assert!(curie_weiss_magnetization(1.0 + 1e-6).unwrap() < 0.01);
    }

    #[test]
    fn magnetization_increases_with_t() {
        let ms: Vec<f64> = (1..=40).map(|k| curie_weiss_magnetization(1.0 + k as f64 * 0.1).unwrap()).collect();
        assert!(ms.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn limit_kernels() {
        assert_eq!(curie_weiss_limit_kernel(1.0).unwrap(), StepKernel::constant(&[0.5, 0.5]).unwrap());
        let k = curie_weiss_limit_kernel(2.0).unwrap();
        let m = curie_weiss_magnetization(2.0).unwrap();
        assert!((k.value(0, 0, 0) - (1.0 + m) / 2.0).abs() < 1e-15);
        assert!((k.value(1, 0, 0) - (1.0 - m) / 2.0).abs() < 1e-15);
        let bar = Law::from_kernel(&k).extremal();
        assert_eq!(bar.num_atoms(), 1);
        assert!(bar.atoms()[0].values.iter().all(|v| (v - 0.5).abs() < 1e-15));
        let sx = iscaled_limit_kernel(4).unwrap();
        assert!((sx.value(0, 0, 1) - 1.0 / 64.0).abs() < 1e-15);
        assert!((sx.value(3, 3, 1) - 49.0 / 64.0).abs() < 1e-15);
    }
}
