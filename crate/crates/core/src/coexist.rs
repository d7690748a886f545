//! Shift function, coexisting intervals and ending-symbol FER formulas.

use crate::codec::{fixed_to_f64, CodeConfig};
use crate::error::{Error, Result};

/// Slack on interval ends, matching the `2^-40` index snap.
const EDGE: f64 = 1.0 / (1u64 << 40) as f64;

fn check_support(j: &[usize], b: &[u8], n: usize) -> Result<()> {
    if j.len() != b.len() {
        return Err(Error::InvalidConfig(format!("{} indices but {} bits", j.len(), b.len())));
    }
    if j.is_empty() || j[0] == 0 || j.windows(2).any(|w| w[0] >= w[1]) || j[j.len() - 1] > n {
        return Err(Error::InvalidConfig(format!("indices {j:?} must increase strictly within [1, {n}]")));
    }
    Ok(())
}

/// `tau(j, b) = sum_k (1 - 2 b_k) w_{j_k}`: the change in s-value when the
/// symbols at 1-based positions `j`, currently `b`, are flipped.
pub fn shift_tau(j: &[usize], b: &[u8], cfg: &CodeConfig) -> Result<f64> {
    check_support(j, b, cfg.n())?;
    if cfg.is_exact() {
        let w = cfg.fixed_weights();
        let sum = j.iter().zip(b).fold(0i128, |acc, (&i, &bit)| {
            let v = w[i - 1] as i128;
            if bit & 1 == 0 {
                acc + v
            } else {
                acc - v
            }
        });
        Ok(sum.signum() as f64 * fixed_to_f64(sum.unsigned_abs()))
    } else {
        let w = cfg.real_weights();
        Ok(j.iter().zip(b).map(|(&i, &bit)| if bit & 1 == 0 { w[i - 1] } else { -w[i - 1] }).sum())
    }
}

/// Support of `z` as 1-based positions, with the bits of `x` there.
pub fn support(x: &[u8], z: &[u8]) -> (Vec<usize>, Vec<u8>) {
    z.iter().zip(x).enumerate().filter(|(_, (&zb, _))| zb & 1 == 1).map(|(i, (_, &xb))| (i + 1, xb & 1)).unzip()
}

/// True when `x` and `x ^ z` share a coset. Exact, by comparing indices.
pub fn coexist_check(x: &[u8], z: &[u8], cfg: &CodeConfig) -> Result<bool> {
    if z.len() != x.len() {
        return Err(Error::InvalidConfig("x and z differ in length".into()));
    }
    let y: Vec<u8> = x.iter().zip(z).map(|(a, b)| (a ^ b) & 1).collect();
    Ok(cfg.coset_index(x)? == cfg.coset_index(&y)?)
}

/// Range `(lo, hi]` of s-values in coset `m` whose partner at shift `tau` stays in `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoexistInterval {
    pub m: u64,
    pub lo: f64,
    pub hi: f64,
}

impl CoexistInterval {
    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, s: f64) -> bool {
        !self.is_empty() && s > self.lo + EDGE && s <= self.hi + EDGE
    }
}

/// `(m - 1, m - tau]` for `tau >= 0`, `(m - 1 - tau, m]` otherwise.
pub fn coexist_interval(m: u64, tau: f64) -> CoexistInterval {
    let m_f = m as f64;
    let (lo, hi) = if tau >= 0.0 { (m_f - 1.0, m_f - tau) } else { (m_f - 1.0 - tau, m_f) };
    CoexistInterval { m, lo, hi: hi.max(lo) }
}

/// Interval form of [`coexist_check`].
pub fn coexist_by_interval(x: &[u8], z: &[u8], cfg: &CodeConfig) -> Result<bool> {
    let (j, b) = support(x, z);
    if j.is_empty() {
        return Ok(true);
    }
    let tau = shift_tau(&j, &b, cfg)?;
    Ok(coexist_interval(cfg.coset_index(x)?, tau).contains(cfg.s_value(x)?))
}

fn check_rate_eps(r: f64, eps: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("rate {r} outside (0, 1]")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidProbability(format!("crossover {eps} outside (0, 1/2)")));
    }
    Ok(())
}

/// `tau(n, 0) = 2^r - 1` and `tau(n-1, 0) = 2^{2r} - 2^r` of a long tailless code.
fn ending_shifts(r: f64) -> (f64, f64) {
    let q = r.exp2();
    (q - 1.0, q * q - q)
}

/// FER when only `x_n` is unknown: `(2 - 2^r) eps`.
pub fn fer_one_unknown(r: f64, eps: f64) -> Result<f64> {
    check_rate_eps(r, eps)?;
    Ok((2.0 - r.exp2()) * eps)
}

/// Error probability given the last two symbols are `00`.
pub fn pr_e00(r: f64, eps: f64) -> Result<f64> {
    check_rate_eps(r, eps)?;
    let (t1, t2) = ending_shifts(r);
    Ok(eps * (1.0 - t1) + eps * (1.0 - eps) * (1.0 - t2).max(0.0))
}

/// Error probability given the last two symbols are `01`.
pub fn pr_e01(r: f64, eps: f64) -> Result<f64> {
    check_rate_eps(r, eps)?;
    let (_, t2) = ending_shifts(r);
    Ok(eps * (2.0 - t2) - eps * eps * (1.0 - t2).max(0.0))
}

/// FER with the last two symbols unknown:
/// `(4 - 2^{2r} + a) eps / 2 - a eps^2`, `a = (1 + 2^r - 2^{2r})^+`.
pub fn fer_two_unknown(r: f64, eps: f64) -> Result<f64> {
    check_rate_eps(r, eps)?;
    let q = r.exp2();
    let a = (1.0 + q - q * q).max(0.0);
    Ok((4.0 - q * q + a) * eps / 2.0 - a * eps * eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{block_from_int, parse_bits, Rate};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half(n: usize) -> CodeConfig {
        CodeConfig::tailless(n, Rate::new(1, 2).unwrap()).unwrap()
    }

    #[test]
    fn ending_shift_values() {
        let cfg = half(8);
        assert_abs_diff_eq!(shift_tau(&[8], &[0], &cfg).unwrap(), 2f64.sqrt() - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(shift_tau(&[7], &[0], &cfg).unwrap(), 2.0 - 2f64.sqrt(), epsilon = 1e-12);
        let a = shift_tau(&[2, 5, 7], &[0, 1, 1], &cfg).unwrap();
        let b = shift_tau(&[2, 5, 7], &[1, 0, 0], &cfg).unwrap();
        assert_abs_diff_eq!(a, -b, epsilon = 1e-15);
        assert!(shift_tau(&[3, 3], &[0, 0], &cfg).is_err());
        assert!(shift_tau(&[9], &[0], &cfg).is_err());
    }

    #[test]
    fn coexistence_examples() {
        let cfg = half(4);
        let x = parse_bits("0001").unwrap();
        assert!(coexist_check(&x, &parse_bits("0011").unwrap(), &cfg).unwrap());
        let zero = parse_bits("0000").unwrap();
        assert!(!coexist_check(&zero, &parse_bits("0001").unwrap(), &cfg).unwrap());
    }

    #[test]
    fn shift_lemma_and_bound_exhaustive() {
        let cfg = half(8);
        let bound = 2f64.powi(4) - 1.0;
        for xv in 0..256u64 {
            let x = block_from_int(xv, 8);
            let s = cfg.s_value(&x).unwrap();
            for zv in 1..256u64 {
                let z = block_from_int(zv, 8);
                let (j, b) = support(&x, &z);
                let tau = shift_tau(&j, &b, &cfg).unwrap();
                assert!(tau.abs() <= bound + 1e-12);
                let y = block_from_int(xv ^ zv, 8);
                assert_abs_diff_eq!(cfg.s_value(&y).unwrap(), s + tau, epsilon = 1e-12);
                let exact = coexist_check(&x, &z, &cfg).unwrap();
                assert_eq!(coexist_by_interval(&x, &z, &cfg).unwrap(), exact, "x={xv:08b} z={zv:08b}");
                if tau.abs() >= 1.0 {
                    assert!(!exact);
                }
            }
        }
    }

    #[test]
    fn interval_cross_check_tailed() {
        let cfg = CodeConfig::new(10, Rate::new(1, 2).unwrap(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let x = block_from_int(rng.gen_range(0..1024), 10);
            let z = block_from_int(rng.gen_range(1..1024), 10);
            assert_eq!(coexist_by_interval(&x, &z, &cfg).unwrap(), coexist_check(&x, &z, &cfg).unwrap());
        }
    }

    #[test]
    fn interval_lengths() {
        assert_abs_diff_eq!(coexist_interval(3, 0.25).len(), 0.75);
        assert_abs_diff_eq!(coexist_interval(3, -0.25).len(), 0.75);
        assert!(coexist_interval(3, 1.5).is_empty());
    }

    #[test]
    fn coexistence_rate_of_last_symbol() {
        let n = 24;
        let cfg = half(n);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 40_000;
        let mut e = vec![0u8; n];
        e[n - 1] = 1;
        let hits = (0..trials)
            .filter(|_| {
                let mut x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
                x[n - 1] = 0;
                coexist_check(&x, &e, &cfg).unwrap()
            })
            .count();
        let p = 2.0 - 2f64.sqrt();
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn fer_formulas() {
        assert!(fer_one_unknown(0.5, 0.6).is_err());
        assert_abs_diff_eq!(fer_one_unknown(0.5, 0.1).unwrap(), 0.05858, epsilon = 1e-5);
        assert_abs_diff_eq!(fer_one_unknown(0.25, 0.1).unwrap(), 0.08108, epsilon = 1e-5);
        assert_abs_diff_eq!(fer_one_unknown(1.0, 0.1).unwrap(), 0.0);
        let e = 0.1;
        assert_abs_diff_eq!(fer_two_unknown(0.5, e).unwrap(), 1.2071 * e - 0.4142 * e * e, epsilon = 1e-4);
        assert_abs_diff_eq!(fer_two_unknown(0.25, e).unwrap(), 1.6804 * e - 0.775 * e * e, epsilon = 1e-4);
        assert!(fer_two_unknown(0.5, 1e-9).unwrap() < 1e-8);
    }

    #[test]
    fn two_unknown_is_mean_of_lemmas() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = rng.gen_range(0.01..1.0);
            let e = rng.gen_range(0.001..0.49);
            let avg = (pr_e00(r, e).unwrap() + pr_e01(r, e).unwrap()) / 2.0;
            assert!((avg - fer_two_unknown(r, e).unwrap()).abs() < 1e-12);
        }
    }
}
