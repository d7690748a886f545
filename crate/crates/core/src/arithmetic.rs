//! Finite-precision binary arithmetic coder.
//!
//! The window `[lambda:eta]` holds `w` bits. Interval splits use integer
//! arithmetic on an exact rational `p`, so output is bit-identical everywhere.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// `Pr(X = 1)` as an exact fraction `num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasProb {
    num: u64,
    den: u64,
}

impl BiasProb {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::InvalidProbability(format!("{num}/{den} is not in (0,1)")));
        }
        if den > 1 << 31 {
            return Err(Error::InvalidProbability(format!("denominator {den} too large")));
        }
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g })
    }

    /// Parses `"p/q"` or a plain decimal such as `"0.2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidProbability(format!("cannot parse `{s}`"));
        if let Some((a, b)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            return Self::new(a, b);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let f: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Self::new(int * den + f, den)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `round((1-p) * len)`, halves rounded up.
    fn zero_share(&self, len: u64) -> u64 {
        let a = (self.den - self.num) as u128 * len as u128;
        let b = self.den as u128;
        ((2 * a + b) / (2 * b)) as u64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Termination mode of a bitstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Exact-interval stream of length `-floor(log2(h-l))`; zero tail assumed.
    Raw,
    /// Decodes under any appended tail.
    Prefix,
    /// Decodes once `10...` is appended.
    HalfTail,
}

impl Mode {
    fn tag(self) -> u8 {
        match self {
            Mode::Raw => 0,
            Mode::Prefix => 1,
            Mode::HalfTail => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Mode::Raw),
            1 => Ok(Mode::Prefix),
            2 => Ok(Mode::HalfTail),
            _ => Err(Error::Format(format!("unknown mode tag {t}"))),
        }
    }
}

/// Encoder output. The declared length is `bits.len()`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitstream {
    pub bits: Vec<u8>,
    pub mode: Mode,
}

const MAGIC: &[u8; 4] = b"OACB";
const HEADER_LEN: usize = 10;

impl Bitstream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_string_bits(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// Serializes as `OACB`, mode, `w`, big-endian `u32` bit length, then MSB-first bytes.
    pub fn to_bytes(&self, w: u8) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bits.len().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.push(self.mode.tag());
        out.push(w);
        out.extend_from_slice(&(self.bits.len() as u32).to_be_bytes());
        for chunk in self.bits.chunks(8) {
            let mut byte = 0u8;
            for (k, &b) in chunk.iter().enumerate() {
                byte |= (b & 1) << (7 - k);
            }
            out.push(byte);
        }
        out
    }

    /// Inverse of [`Bitstream::to_bytes`]; returns the stream and its window width.
    pub fn from_bytes(data: &[u8]) -> Result<(Self, u8)> {
        if data.len() < HEADER_LEN || &data[..4] != MAGIC {
            return Err(Error::Format("missing OACB header".into()));
        }
        let mode = Mode::from_tag(data[4])?;
        let w = data[5];
        let len = u32::from_be_bytes([data[6], data[7], data[8], data[9]]);
        let body = &data[10..];
        let len = len as usize;
        if body.len() != len.div_ceil(8) {
            return Err(Error::Format(format!("expected {} payload bytes, found {}", len.div_ceil(8), body.len())));
        }
        let bits = (0..len).map(|i| (body[i / 8] >> (7 - i % 8)) & 1).collect();
        Ok((Self { bits, mode }, w))
    }
}

/// Width-`w` sliding window with pending underflow count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlidingWindow {
    pub lambda: u64,
    pub eta: u64,
    pub upsilon: u64,
    pub width_w: u32,
}

impl SlidingWindow {
    pub fn new(w: u32) -> Result<Self> {
        if !(4..=62).contains(&w) {
            return Err(Error::InvalidConfig(format!("window width {w} outside [4, 62]")));
        }
        Ok(Self { lambda: 0, eta: (1 << w) - 1, upsilon: 0, width_w: w })
    }

    pub fn from_parts(lambda: u64, eta: u64, w: u32) -> Result<Self> {
        let mut win = Self::new(w)?;
        if lambda > eta || eta > win.mask() {
            return Err(Error::InvalidConfig(format!("bad window [{lambda}:{eta}] for w={w}")));
        }
        win.lambda = lambda;
        win.eta = eta;
        Ok(win)
    }

    fn mask(&self) -> u64 {
        (1 << self.width_w) - 1
    }

    fn msb(&self, v: u64) -> u8 {
        ((v >> (self.width_w - 1)) & 1) as u8
    }

    fn msb2(&self, v: u64) -> u8 {
        ((v >> (self.width_w - 2)) & 1) as u8
    }

    /// `eta - lambda + 1`.
    pub fn span(&self) -> u64 {
        self.eta - self.lambda + 1
    }

    pub fn msbs_match(&self) -> bool {
        self.msb(self.lambda) == self.msb(self.eta)
    }

    fn in_underflow(&self) -> bool {
        self.msb2(self.lambda) == 1 && self.msb2(self.eta) == 0
    }

    fn split(&self, p: BiasProb) -> Result<u64> {
        let len = self.span();
        if len < 4 {
            return Err(Error::PrecisionExhausted(len));
        }
        let share = p.zero_share(len);
        if share == 0 || share >= len {
            return Err(Error::PrecisionExhausted(len));
        }
        Ok(share)
    }

    pub fn shrink(&mut self, x: u8, p: BiasProb) -> Result<()> {
        let share = self.split(p)?;
        if x == 0 {
            self.eta = self.lambda + share - 1;
        } else {
            self.lambda += share;
        }
        Ok(())
    }

    fn shift(&mut self) {
        self.lambda = (self.lambda << 1) & self.mask();
        self.eta = ((self.eta << 1) & self.mask()) | 1;
    }

    fn drop_second(&self, v: u64) -> u64 {
        let top = 1u64 << (self.width_w - 1);
        (v & top) | ((v << 1) & (self.mask() >> 1))
    }

    pub fn renormalize(&mut self, out: &mut Vec<u8>) {
        while self.msbs_match() {
            out.push(self.msb(self.lambda));
            self.shift();
        }
    }

    pub fn remove_underflow(&mut self) {
        while self.in_underflow() {
            self.lambda = self.drop_second(self.lambda);
            self.eta = self.drop_second(self.eta) | 1;
            self.upsilon += 1;
        }
    }

    pub fn push_underflow(&mut self, out: &mut Vec<u8>) {
        let b = self.msb(self.lambda);
        out.push(b);
        out.extend(std::iter::repeat_n(1 - b, self.upsilon as usize));
        self.upsilon = 0;
        self.shift();
    }

    /// One full symbol step. Underflow is removed after every symbol.
    pub fn encode_symbol(&mut self, x: u8, p: BiasProb, out: &mut Vec<u8>) -> Result<()> {
        self.shrink(x, p)?;
        if self.msbs_match() {
            self.push_underflow(out);
            self.renormalize(out);
        }
        self.remove_underflow();
        Ok(())
    }

    /// Prefix termination from the 2-MSBs; the ambiguous case emits `0 1..1 1`.
    pub fn end_bitstream(&self, out: &mut Vec<u8>) {
        let lead = if self.msb2(self.lambda) == 1 && self.msb2(self.eta) == 1 { 1 } else { 0 };
        out.push(lead);
        out.extend(std::iter::repeat_n(1 - lead, self.upsilon as usize));
        out.push(1 - lead);
    }
}

/// Encodes a block.
pub fn arithmetic_encode(x: &[u8], p: BiasProb, w: u32, mode: Mode) -> Result<Bitstream> {
    if x.is_empty() {
        return Err(Error::InvalidConfig("empty block".into()));
    }
    if mode == Mode::Raw {
        return raw_bitstream(x, p);
    }
    let mut win = SlidingWindow::new(w)?;
    let mut bits = Vec::with_capacity(x.len());
    for &s in x {
        win.encode_symbol(s & 1, p, &mut bits)?;
    }
    if mode == Mode::Prefix {
        win.end_bitstream(&mut bits);
    }
    Ok(Bitstream { bits, mode })
}

/// Decodes `n` symbols. HalfTail streams get `1000...` appended, the rest zeros.
pub fn arithmetic_decode(bs: &Bitstream, p: BiasProb, w: u32, n: usize) -> Result<Vec<u8>> {
    decode_with_tail(bs, &[], p, w, n)
}

/// Decodes with an explicit tail inserted right after the stream.
pub fn decode_with_tail(bs: &Bitstream, tail: &[u8], p: BiasProb, w: u32, n: usize) -> Result<Vec<u8>> {
    if bs.mode == Mode::Raw {
        return raw_decode(bs, tail, p, n);
    }
    let half = bs.mode == Mode::HalfTail && tail.is_empty();
    let mut src =
        bs.bits.iter().chain(tail.iter()).copied().chain(std::iter::once(u8::from(half))).chain(std::iter::repeat(0));
    let mut next = move || src.next().unwrap_or(0) & 1;

    let mut win = SlidingWindow::new(w)?;
    let mask = win.mask();
    let mut v = 0u64;
    for _ in 0..w {
        v = (v << 1) | next() as u64;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if v < win.lambda || v > win.eta {
            return Err(Error::DecodeFailure("value left the window".into()));
        }
        let share = win.split(p)?;
        let x = u8::from(v >= win.lambda + share);
        out.push(x);
        win.shrink(x, p)?;
        if win.msbs_match() {
            let mut sink = Vec::new();
            win.push_underflow(&mut sink);
            v = ((v << 1) & mask) | next() as u64;
            while win.msbs_match() {
                win.shift();
                v = ((v << 1) & mask) | next() as u64;
            }
        }
        while win.in_underflow() {
            win.lambda = win.drop_second(win.lambda);
            win.eta = win.drop_second(win.eta) | 1;
            v = win.drop_second(v) | next() as u64;
        }
    }
    Ok(out)
}

/// Exact interval `[L/D, (L+W)/D)` of a block, `D = den^n`.
fn exact_interval(x: &[u8], p: BiasProb) -> (BigUint, BigUint, BigUint) {
    let den = BigUint::from(p.den);
    let zero = BigUint::from(p.den - p.num);
    let one = BigUint::from(p.num);
    let mut l = BigUint::from(0u32);
    let mut wd = BigUint::from(1u32);
    let mut d = BigUint::from(1u32);
    for &s in x {
        l = &l * &den;
        if s & 1 == 1 {
            l += &zero * &wd;
            wd = &wd * &one;
        } else {
            wd = &wd * &zero;
        }
        d = &d * &den;
    }
    (l, wd, d)
}

/// Length of the raw stream, `-floor(log2(h - l))`.
pub fn raw_length(x: &[u8], p: BiasProb) -> usize {
    let (_, wd, d) = exact_interval(x, p);
    let mut m = 0usize;
    while (&wd << m) < d {
        m += 1;
    }
    m
}

/// Raw stream representing `ceil(l * 2^m)` in `m` bits.
pub fn raw_bitstream(x: &[u8], p: BiasProb) -> Result<Bitstream> {
    let (l, wd, d) = exact_interval(x, p);
    let mut m = 0usize;
    while (&wd << m) < d {
        m += 1;
    }
    let scaled = &l << m;
    let mut q = &scaled / &d;
    if &q * &d != scaled {
        q += 1u32;
    }
    let bits = (0..m).rev().map(|k| u8::from(q.bit(k as u64))).collect();
    Ok(Bitstream { bits, mode: Mode::Raw })
}

fn raw_decode(bs: &Bitstream, tail: &[u8], p: BiasProb, n: usize) -> Result<Vec<u8>> {
    let bits: Vec<u8> = bs.bits.iter().chain(tail.iter()).copied().collect();
    let mut v = BigUint::from(0u32);
    for &b in &bits {
        v = (v << 1u32) | BigUint::from(b & 1);
    }
    let scale = bits.len();
    let den = BigUint::from(p.den);
    let zero = BigUint::from(p.den - p.num);
    let one = BigUint::from(p.num);
    let mut l = BigUint::from(0u32);
    let mut wd = BigUint::from(1u32);
    let mut d = BigUint::from(1u32);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let split = &l * &den + &zero * &wd;
        let dd = &d * &den;
        let x = u8::from(&v * &dd >= (&split << scale));
        if x == 1 {
            l = split;
            wd = &wd * &one;
        } else {
            l = &l * &den;
            wd = &wd * &zero;
        }
        d = dd;
        out.push(x);
    }
    if (&l << scale) > &v * &d || &v * &d >= ((&l + &wd) << scale) {
        return Err(Error::DecodeFailure("value outside the final interval".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|c| c - b'0').collect()
    }

    fn third() -> BiasProb {
        BiasProb::new(1, 3).unwrap()
    }

    #[test]
    fn first_shrink_from_full_window() {
        let mut a = SlidingWindow::new(8).unwrap();
        a.shrink(0, third()).unwrap();
        assert_eq!((a.lambda, a.eta), (0, 170));
        let mut b = SlidingWindow::new(8).unwrap();
        b.shrink(1, third()).unwrap();
        assert_eq!((b.lambda, b.eta), (171, 255));
    }

    #[test]
    fn renormalize_examples() {
        let mut win = SlidingWindow::from_parts(0b0010_1010, 0b0111_0111, 8).unwrap();
        let mut out = Vec::new();
        win.renormalize(&mut out);
        assert_eq!(out, vec![0]);
        assert_eq!((win.lambda, win.eta), (0b0101_0100, 0b1110_1111));

        let mut win = SlidingWindow::from_parts(0b1100_0000, 0b1111_1111, 8).unwrap();
        let mut out = Vec::new();
        win.renormalize(&mut out);
        assert_eq!(out, vec![1, 1]);

        let mut win = SlidingWindow::from_parts(0b0100_0000, 0b1000_0000, 8).unwrap();
        let before = win;
        win.renormalize(&mut Vec::new());
        assert_eq!(win, before);
    }

    #[test]
    fn underflow_examples() {
        let mut win = SlidingWindow::from_parts(0b0111_1111, 0b1000_0000, 8).unwrap();
        win.remove_underflow();
        // each pass exposes one more bit; the window only leaves underflow once fully open
        assert_eq!(win.upsilon, 7);
        assert_eq!((win.lambda, win.eta), (0, 255));
        assert!(win.span() >= 66);

        let mut win = SlidingWindow::from_parts(0b0100_0000, 0b1011_1111, 8).unwrap();
        win.remove_underflow();
        assert_eq!(win.upsilon, 1);
        assert_eq!((win.lambda, win.eta), (0, 255));

        let mut win = SlidingWindow::from_parts(0b0010_0000, 0b1110_0000, 8).unwrap();
        win.remove_underflow();
        assert_eq!(win.upsilon, 0);
    }

    #[test]
    fn final_windows_match_table() {
        // (block, emitted, upsilon, lambda, eta)
        let rows = [
            ("000", "0", 0, 0b0000_0000, 0b1001_0111),
            ("001", "01", 0, 0b0011_0000, 0b1100_0111),
            ("010", "", 2, 0b0100_1000, 0b1101_1111),
            ("011", "10", 1, 0b0100_0000, 0b1101_0111),
            ("100", "1", 1, 0b0010_1100, 0b1100_0001),
            ("101", "11", 1, 0b0000_0100, 0b1001_1011),
            ("110", "111", 0, 0b0001_1100, 0b1011_0011),
            ("111", "1111", 0, 0b0110_1000, 0b1111_1111),
        ];
        for (x, emitted, ups, lam, eta) in rows {
            let mut win = SlidingWindow::new(8).unwrap();
            let mut out = Vec::new();
            for s in bits(x) {
                win.encode_symbol(s, third(), &mut out).unwrap();
            }
            assert_eq!(out, bits(emitted), "emitted bits for {x}");
            assert_eq!(win.upsilon, ups, "underflow count for {x}");
            assert_eq!((win.lambda, win.eta), (lam, eta), "window for {x}");
        }
    }

    #[test]
    fn dyadic_source_copies_input() {
        let half = BiasProb::new(1, 2).unwrap();
        let x = bits("1011001110001011");
        let bs = arithmetic_encode(&x, half, 16, Mode::HalfTail).unwrap();
        assert!(x.starts_with(&bs.bits));
        assert_eq!(arithmetic_decode(&bs, half, 16, x.len()).unwrap(), x);
    }

    #[test]
    fn raw_rows_of_table() {
        let expect = ["00", "011", "100", "1010", "110", "1110", "1111", "11111"];
        for (k, e) in expect.iter().enumerate() {
            let x = bits(&format!("{k:03b}"));
            let raw = raw_bitstream(&x, third()).unwrap();
            assert_eq!(raw.to_string_bits(), *e);
            assert_eq!(raw_length(&x, third()), e.len());
            assert_eq!(arithmetic_decode(&raw, third(), 8, 3).unwrap(), x);
        }
    }

    #[test]
    fn parse_probabilities() {
        assert_eq!(BiasProb::parse("1/3").unwrap(), third());
        assert_eq!(BiasProb::parse("0.2").unwrap(), BiasProb::new(1, 5).unwrap());
        assert_eq!(BiasProb::parse("2/4").unwrap(), BiasProb::new(1, 2).unwrap());
        assert!(BiasProb::parse("1").is_err());
        assert!(BiasProb::parse("0").is_err());
        assert!(BiasProb::parse("3/2").is_err());
        assert!(BiasProb::parse("x").is_err());
    }

    #[test]
    fn file_format_round_trip() {
        let bs = Bitstream { bits: bits("1011001"), mode: Mode::HalfTail };
        let bytes = bs.to_bytes(16);
        assert_eq!(&bytes[..4], b"OACB");
        assert_eq!(bytes[4], 2);
        assert_eq!(bytes[5], 16);
        assert_eq!(&bytes[6..10], &[0, 0, 0, 7]);
        assert_eq!(bytes[10], 0b1011_0010);
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), (bs, 16));
        assert!(Bitstream::from_bytes(b"NOPE").is_err());
    }

    #[test]
    fn tiny_window_is_rejected() {
        assert!(SlidingWindow::new(3).is_err());
        let p = BiasProb::new(1, 1000).unwrap();
        let x = vec![1u8; 4];
        assert!(matches!(arithmetic_encode(&x, p, 4, Mode::Prefix), Err(Error::PrecisionExhausted(_))));
    }
}
