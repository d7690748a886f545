//! Overlapped arithmetic mapping: s-values, coset indices, coset enumeration.
//!
//! Body symbol `i` carries weight `2^t (2^r - 1) 2^{(n-t-i) r}`, tail symbol `i`
//! carries `2^{n-i}`, so `x_1` is the most significant symbol.
//!
//! Weights are held in fixed point with [`FRAC_BITS`] fractional bits. The body
//! weights telescope: `W_j = G_{j+1} - G_j` with `G_j = floor(2^{F + j r})`
//! computed exactly by integer roots, which keeps `s(1^n) = 2^{nR} - 1` exact
//! and makes decoder projections consistent with the encoder to the last bit.

use crate::error::{Error, Result};
use crate::Bits;
use num_bigint::BigUint;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Fractional bits of the fixed-point s-value.
pub const FRAC_BITS: u32 = 60;

/// Half-width of the integer snap, `2^-40` in s units.
const SNAP: u128 = 1 << (FRAC_BITS - 40);

/// Largest `nR` for which coset indices are exact.
pub const MAX_EXACT_NR: usize = 64;

/// Largest block length accepted by exhaustive enumeration.
pub const MAX_ENUM_N: usize = 24;

/// A rate in `(0, 1]` written as a fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rate(Ratio<u64>);

impl Rate {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num > den {
            return Err(Error::InvalidConfig(format!("rate {num}/{den} must lie in (0, 1]")));
        }
        Ok(Self(Ratio::new(num, den)))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn value(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let r: Ratio<u64> =
            s.trim().parse().map_err(|_| Error::InvalidConfig(format!("rate `{s}` is not a fraction p/q")))?;
        Self::new(*r.numer(), *r.denom())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Block length `n`, average rate `R`, tail length `t`; body rate `r = (nR - t)/(n - t)`.
#[derive(Clone, Debug)]
pub struct CodeConfig {
    n: usize,
    rate: Rate,
    t: usize,
    nr: usize,
    body: (u64, u64),
    r: f64,
    fixed: Vec<u128>,
    spans: Vec<u128>,
    real: Vec<f64>,
}

impl PartialEq for CodeConfig {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && self.rate == o.rate && self.t == o.t
    }
}

impl CodeConfig {
    pub fn new(n: usize, rate: Rate, t: usize) -> Result<Self> {
        if n == 0 || n > 4096 {
            return Err(Error::InvalidConfig(format!("block length {n} outside [1, 4096]")));
        }
        let prod = n as u64 * rate.numer();
        if !prod.is_multiple_of(rate.denom()) {
            return Err(Error::InvalidConfig(format!("n*R = {n}*{rate} is not an integer; nR must be an integer")));
        }
        let nr = (prod / rate.denom()) as usize;
        if t > nr {
            return Err(Error::InvalidConfig(format!("tail length {t} exceeds nR = {nr}")));
        }
        let body_len = n - t;
        let body = if body_len == 0 {
            (1, 1)
        } else {
            let q = Ratio::new((nr - t) as u64, body_len as u64);
            (*q.numer(), *q.denom())
        };
        let r = body.0 as f64 / body.1 as f64;

        let g: Vec<BigUint> = (0..=body_len).map(|j| root_power(j as u64, body)).collect();
        let mut fixed = Vec::with_capacity(n);
        let mut real = Vec::with_capacity(n);
        let step = (r * std::f64::consts::LN_2).exp_m1();
        for i in 1..=n {
            if i <= body_len {
                let j = body_len - i;
                let w = (&g[j + 1] - &g[j]) << t;
                fixed.push(low_u128(&w));
                real.push(step * (j as f64 * r).exp2() * (t as f64).exp2());
            } else {
                let w = BigUint::from(1u32) << (n - i + FRAC_BITS as usize);
                fixed.push(low_u128(&w));
                real.push(((n - i) as f64).exp2());
            }
        }
        let mut spans = vec![0u128; n + 1];
        spans[n] = 1 << FRAC_BITS;
        for i in (0..n).rev() {
            spans[i] = spans[i + 1].wrapping_add(fixed[i]);
        }
        Ok(Self { n, rate, t, nr, body, r, fixed, spans, real })
    }

    /// Tailless code at rate `R`.
    pub fn tailless(n: usize, rate: Rate) -> Result<Self> {
        Self::new(n, rate, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Bitstream length `nR`.
    pub fn nr(&self) -> usize {
        self.nr
    }

    /// Body rate as a reduced fraction.
    pub fn body_rate(&self) -> (u64, u64) {
        self.body
    }

    /// Body rate `r`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Number of body symbols, `n - t`.
    pub fn body_len(&self) -> usize {
        self.n - self.t
    }

    /// Real-valued symbol weights; `s(x) = sum x_i w_i`.
    pub fn real_weights(&self) -> &[f64] {
        &self.real
    }

    /// Fixed-point weights, reduced modulo `2^128`.
    pub fn fixed_weights(&self) -> &[u128] {
        &self.fixed
    }

    /// `spans()[i]` is the s-width of the subtree below depth `i`, plus one, in fixed point.
    pub fn spans(&self) -> &[u128] {
        &self.spans
    }

    /// True when coset indices are representable exactly.
    pub fn is_exact(&self) -> bool {
        self.nr <= MAX_EXACT_NR
    }

    pub fn ensure_exact(&self) -> Result<()> {
        if self.is_exact() {
            Ok(())
        } else {
            Err(Error::ComplexityGuard(format!(
                "nR = {} exceeds {MAX_EXACT_NR}; coset indices are not representable",
                self.nr
            )))
        }
    }

    fn check_len(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::InvalidConfig(format!("block has {} symbols, expected {}", x.len(), self.n)));
        }
        Ok(())
    }

    /// Fixed-point s-value, wrapping modulo `2^128`.
    pub fn fixed_sum(&self, x: &[u8]) -> u128 {
        x.iter().zip(&self.fixed).filter(|(&b, _)| b & 1 == 1).fold(0u128, |acc, (_, &w)| acc.wrapping_add(w))
    }

    pub fn s_value(&self, x: &[u8]) -> Result<f64> {
        self.check_len(x)?;
        if self.is_exact() {
            Ok(fixed_to_f64(self.fixed_sum(x)))
        } else {
            Ok(x.iter().zip(&self.real).filter(|(&b, _)| b & 1 == 1).map(|(_, w)| w).sum())
        }
    }

    pub fn coset_index(&self, x: &[u8]) -> Result<u64> {
        self.check_len(x)?;
        self.ensure_exact()?;
        Ok(index_of_sum(self.fixed_sum(x)) as u64)
    }

    /// Coset index of every block of length `n <= 24`, blocks read as integers with `x_1` as MSB.
    pub fn all_coset_indices(&self) -> Result<Vec<u64>> {
        if self.n > MAX_ENUM_N {
            return Err(Error::ComplexityGuard(format!("exhaustive enumeration refused for n = {}", self.n)));
        }
        self.ensure_exact()?;
        let n = self.n;
        let lo_bits = n / 2;
        let table = |bits: usize, offset: usize| -> Vec<u128> {
            (0..1usize << bits)
                .map(|v| {
                    (0..bits).filter(|b| v >> b & 1 == 1).fold(0u128, |acc, b| acc.wrapping_add(self.fixed[offset - b]))
                })
                .collect()
        };
        // bit b of the low part is position n-1-b (0-based)
        let lo = table(lo_bits, n - 1);
        let hi = table(n - lo_bits, n - 1 - lo_bits);
        let mask = (1usize << lo_bits) - 1;
        Ok((0..1usize << n).map(|v| index_of_sum(hi[v >> lo_bits].wrapping_add(lo[v & mask])) as u64).collect())
    }

    /// Members of coset `m` in lexicographic order.
    pub fn enumerate_coset(&self, m: u64) -> Result<Vec<Bits>> {
        let idx = self.all_coset_indices()?;
        Ok(idx.iter().enumerate().filter(|(_, &c)| c == m).map(|(v, _)| block_from_int(v as u64, self.n)).collect())
    }

    /// `|C_m|` for every `m` in `[0, 2^{nR})`.
    pub fn coset_size_histogram(&self) -> Result<Vec<u64>> {
        if self.nr > 32 {
            return Err(Error::ComplexityGuard(format!("2^{} cosets is too many to list", self.nr)));
        }
        let idx = self.all_coset_indices()?;
        let mut h = vec![0u64; 1usize << self.nr];
        for m in idx {
            h[m as usize] += 1;
        }
        Ok(h)
    }
}

/// `floor(2^{F + j a / b})` for body rate `a/b`.
fn root_power(j: u64, (a, b): (u64, u64)) -> BigUint {
    let e = FRAC_BITS as u64 * b + j * a;
    let p = BigUint::from(1u32) << e;
    if b == 1 {
        p
    } else {
        p.nth_root(b as u32)
    }
}

fn low_u128(v: &BigUint) -> u128 {
    let d = v.to_u64_digits();
    let lo = *d.first().unwrap_or(&0) as u128;
    let hi = *d.get(1).unwrap_or(&0) as u128;
    lo | (hi << 64)
}

/// Converts a fixed-point value to `f64`.
pub fn fixed_to_f64(v: u128) -> f64 {
    v as f64 / (FRAC_BITS as f64).exp2()
}

/// `ceil(s)` with an integer snap of `2^-40`, computed on the fixed-point sum.
/// Modular inputs give the index modulo `2^{128-F}`.
pub fn index_of_sum(s: u128) -> u128 {
    let q = s >> FRAC_BITS;
    let rem = s & ((1u128 << FRAC_BITS) - 1);
    if rem <= SNAP {
        q
    } else {
        q.wrapping_add(1) & (u128::MAX >> FRAC_BITS)
    }
}

/// Block whose symbols are the bits of `v`, `x_1` most significant.
pub fn block_from_int(v: u64, n: usize) -> Bits {
    (0..n).map(|i| ((v >> (n - 1 - i)) & 1) as u8).collect()
}

/// Inverse of [`block_from_int`].
pub fn int_from_block(x: &[u8]) -> u64 {
    x.iter().fold(0u64, |acc, &b| (acc << 1) | (b & 1) as u64)
}

/// Parses a string of `0`/`1` characters.
pub fn parse_bits(s: &str) -> Result<Bits> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::InvalidConfig(format!("`{c}` is not a bit"))),
        })
        .collect()
}

/// Renders a block as `0`/`1` characters.
pub fn format_bits(x: &[u8]) -> String {
    x.iter().map(|&b| if b & 1 == 1 { '1' } else { '0' }).collect()
}
