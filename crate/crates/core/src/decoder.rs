//! Slepian-Wolf decoding over the incomplete coset tree.
//!
//! A path at depth `i` carries the numerator `N_i = m - sum_{k<=i} x_k w_k` in
//! fixed point. Its projection is `u_i = N_i / span_i`. Legality is tested on
//! the integers with the same snap as the coset index, so the true block is
//! never pruned.

use crate::ccs::Spectrum;
use crate::codec::{CodeConfig, FRAC_BITS};
use crate::error::{Error, Result};
use crate::Bits;
use std::sync::Arc;

/// Lower clamp for `log f`.
pub const LOG_FLOOR: f64 = -60.0;

const SNAP: i128 = 1 << (FRAC_BITS - 40);
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DecoderConfig {
    /// Beam width.
    pub m: usize,
    pub use_ccs: bool,
    /// Crossover probability of the side-information channel.
    pub eps: f64,
    /// `spectra[i]` is `f_i`, one per level `0..=n`.
    pub spectra: Option<Arc<Vec<Spectrum>>>,
}

impl DecoderConfig {
    pub fn new(m: usize, eps: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("beam width must be at least 1".into()));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidProbability(format!("crossover {eps} outside (0, 1/2)")));
        }
        Ok(Self { m, use_ccs: false, eps, spectra: None })
    }

    /// Enables the intrinsic metric.
    pub fn with_ccs(mut self, spectra: Arc<Vec<Spectrum>>) -> Self {
        self.use_ccs = true;
        self.spectra = Some(spectra);
        self
    }

    fn validate(&self, cfg: &CodeConfig) -> Result<()> {
        if self.use_ccs {
            match &self.spectra {
                Some(s) if s.len() == cfg.n() + 1 => {}
                Some(s) => {
                    return Err(Error::InvalidConfig(format!("{} spectra given, need {}", s.len(), cfg.n() + 1)))
                }
                None => return Err(Error::InvalidConfig("use_ccs set without spectra".into())),
            }
        }
        Ok(())
    }
}

/// One partial path; its bits live in the decoder's arena.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathNode {
    pub depth: usize,
    /// Fixed-point numerator `N_i`.
    pub num: i128,
    pub metric: f64,
}

impl PathNode {
    pub fn root(m: u64, cfg: &CodeConfig) -> Result<Self> {
        cfg.ensure_exact()?;
        if cfg.nr() < 64 && m >> cfg.nr() != 0 {
            return Err(Error::InvalidConfig(format!("coset index {m} needs more than {} bits", cfg.nr())));
        }
        Ok(Self { depth: 0, num: (m as i128) << FRAC_BITS, metric: 0.0 })
    }

    /// Projection `u_i`, clamped into `[0, 1)`.
    pub fn u(&self, cfg: &CodeConfig) -> f64 {
        let span = cfg.spans()[self.depth] as f64;
        (self.num as f64 / span).clamp(0.0, 1.0 - f64::EPSILON)
    }
}

/// Child of `node` along symbol `x`, or `None` when it leaves `[0, 1)`.
/// The metric is copied from the parent unchanged.
pub fn branch(node: &PathNode, x: u8, cfg: &CodeConfig) -> Option<PathNode> {
    if node.depth >= cfg.n() {
        return None;
    }
    let d = node.depth + 1;
    let num = if x & 1 == 1 { node.num - cfg.fixed_weights()[d - 1] as i128 } else { node.num };
    let span = cfg.spans()[d] as i128;
    (num >= -SNAP && num < span - SNAP).then_some(PathNode { depth: d, num, metric: node.metric })
}

/// Real-valued projection step `u' = 2^r (u - x (1 - 2^-r))`, `None` when illegal.
pub fn step_projection(u: f64, x: u8, r: f64) -> Option<f64> {
    let v = r.exp2() * (u - f64::from(x & 1) * (1.0 - (-r).exp2()));
    (-1e-12..1.0 + 1e-12).contains(&v).then(|| v.clamp(0.0, 1.0 - f64::EPSILON))
}

/// Metric increment for a step to `level` with decoded `x` against side bit `y`.
pub fn path_metric_increment(x: u8, y: u8, u_prev: f64, u_new: f64, level: usize, dec: &DecoderConfig) -> f64 {
    let ext = if (x ^ y) & 1 == 1 { dec.eps.ln() } else { (1.0 - dec.eps).ln() };
    match (&dec.spectra, dec.use_ccs) {
        (Some(s), true) if level >= 1 && level < s.len() => {
            ext + log_floor(s[level].at(u_new)) - log_floor(s[level - 1].at(u_prev))
        }
        _ => ext,
    }
}

fn log_floor(f: f64) -> f64 {
    if f > 0.0 {
        f.ln().max(LOG_FLOOR)
    } else {
        LOG_FLOOR
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutcome {
    pub block: Bits,
    pub metric: f64,
    /// Paths alive at depth `n`.
    pub survivors: usize,
    /// Children created over the whole search.
    pub branches: usize,
}

/// Arena of tree nodes linked to their parents.
struct Arena {
    parent: Vec<u32>,
    bit: Vec<u8>,
}

impl Arena {
    const ROOT: u32 = u32::MAX;

    fn push(&mut self, parent: u32, bit: u8) -> u32 {
        self.parent.push(parent);
        self.bit.push(bit);
        (self.parent.len() - 1) as u32
    }

    fn bits(&self, mut id: u32, n: usize) -> Bits {
        let mut out = vec![0u8; n];
        for k in (0..n).rev() {
            out[k] = self.bit[id as usize];
            id = self.parent[id as usize];
        }
        out
    }
}

#[derive(Clone, Copy)]
struct Live {
    node: PathNode,
    id: u32,
}

struct Search<'a> {
    cfg: &'a CodeConfig,
    dec: &'a DecoderConfig,
    y: &'a [u8],
    arena: Arena,
    branches: usize,
}

impl<'a> Search<'a> {
    fn new(cfg: &'a CodeConfig, dec: &'a DecoderConfig, y: &'a [u8]) -> Result<Self> {
        if y.len() != cfg.n() {
            return Err(Error::InvalidConfig(format!("side block has {} symbols, expected {}", y.len(), cfg.n())));
        }
        dec.validate(cfg)?;
        let cap = cfg.n() * dec.m.min(1 << 20) * 2;
        Ok(Self {
            cfg,
            dec,
            y,
            arena: Arena { parent: Vec::with_capacity(cap), bit: Vec::with_capacity(cap) },
            branches: 0,
        })
    }

    fn children(&mut self, p: &Live) -> Vec<Live> {
        let d = p.node.depth;
        let u_prev = if self.dec.use_ccs { p.node.u(self.cfg) } else { 0.0 };
        let mut out = Vec::with_capacity(2);
        for x in 0..2u8 {
            if let Some(mut c) = branch(&p.node, x, self.cfg) {
                let u_new = if self.dec.use_ccs { c.u(self.cfg) } else { 0.0 };
                c.metric += path_metric_increment(x, self.y[d], u_prev, u_new, d + 1, self.dec);
                let id = self.arena.push(p.id, x);
                out.push(Live { node: c, id });
            }
        }
        self.branches += out.len();
        out
    }

    fn finish(self, list: Vec<Live>) -> Result<DecodeOutcome> {
        let n = self.cfg.n();
        let best = list.iter().map(|l| l.node.metric).fold(f64::NEG_INFINITY, f64::max);
        let block = list
            .iter()
            .filter(|l| l.node.depth == n && l.node.metric >= best - TIE_TOL)
            .map(|l| self.arena.bits(l.id, n))
            .min()
            .ok_or_else(|| Error::DecodeFailure("no path reached full depth".into()))?;
        Ok(DecodeOutcome { block, metric: best, survivors: list.len(), branches: self.branches })
    }
}

fn sort_desc(list: &mut [Live]) {
    list.sort_by(|a, b| b.node.metric.total_cmp(&a.node.metric));
}

/// Breadth-first M-algorithm: extend every survivor, keep the best `M`.
pub fn decode_m_algorithm(m: u64, y: &[u8], cfg: &CodeConfig, dec: &DecoderConfig) -> Result<DecodeOutcome> {
    let mut s = Search::new(cfg, dec, y)?;
    let mut list = vec![Live { node: PathNode::root(m, cfg)?, id: Arena::ROOT }];
    for _ in 0..cfg.n() {
        let mut next = Vec::with_capacity(list.len() * 2);
        for p in &list {
            next.extend(s.children(p));
        }
        sort_desc(&mut next);
        next.truncate(dec.m);
        if next.is_empty() {
            return Err(Error::DecodeFailure("every path left the coset".into()));
        }
        list = next;
    }
    s.finish(list)
}

/// One stage of backward replacement over `cells`, a list of capacity `cap`.
///
/// Paths are handled front to back. A sole child stays in its parent's cell.
/// With two children the second goes to the last free cell, overwriting an
/// unhandled path if needed; once no cell is left behind the current one only
/// the better child is kept. `better(a, b)` is true when `a` beats `b`.
pub fn backward_replace<T>(
    cells: Vec<T>,
    cap: usize,
    mut children: impl FnMut(&T) -> Vec<T>,
    better: impl Fn(&T, &T) -> bool,
) -> Vec<T> {
    let mut slots: Vec<Option<T>> = cells.into_iter().map(Some).collect();
    slots.resize_with(cap.max(slots.len()), || None);
    let mut back = slots.len();
    let mut idx = 0;
    while idx < back {
        let Some(parent) = slots[idx].take() else {
            idx += 1;
            continue;
        };
        let mut kids = children(&parent).into_iter();
        match (kids.next(), kids.next()) {
            (None, _) => {}
            (Some(a), None) => slots[idx] = Some(a),
            (Some(a), Some(b)) => {
                if back - 1 > idx {
                    back -= 1;
                    slots[back] = Some(b);
                    slots[idx] = Some(a);
                } else {
                    slots[idx] = Some(if better(&b, &a) { b } else { a });
                }
            }
        }
        idx += 1;
    }
    slots.into_iter().flatten().collect()
}

/// Memory-bounded variant holding at most `M` paths per stage.
pub fn decode_backward_replacing(m: u64, y: &[u8], cfg: &CodeConfig, dec: &DecoderConfig) -> Result<DecodeOutcome> {
    let mut s = Search::new(cfg, dec, y)?;
    let mut list = vec![Live { node: PathNode::root(m, cfg)?, id: Arena::ROOT }];
    for _ in 0..cfg.n() {
        let next = backward_replace(list, dec.m, |p| s.children(p), |a, b| a.node.metric > b.node.metric);
        if next.is_empty() {
            return Err(Error::DecodeFailure("every path left the coset".into()));
        }
        list = next;
        sort_desc(&mut list);
    }
    s.finish(list)
}

/// Exact ML over the enumerated coset with the tree decoders' tie rule.
/// For any `eps < 1/2` this is the nearest member, lexicographically first.
pub fn decode_exhaustive(m: u64, y: &[u8], cfg: &CodeConfig) -> Result<Bits> {
    let members = cfg.enumerate_coset(m)?;
    let flips = |x: &Bits| x.iter().zip(y).filter(|(a, b)| a != b).count();
    members.into_iter().min_by_key(flips).ok_or_else(|| Error::DecodeFailure(format!("coset {m} is empty")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccs::{compute_ccs, CcsScheme};
    use crate::codec::{block_from_int, parse_bits, Rate};
    use approx::assert_abs_diff_eq;

    fn half(n: usize) -> CodeConfig {
        CodeConfig::tailless(n, Rate::new(1, 2).unwrap()).unwrap()
    }

    #[test]
    fn projection_steps() {
        assert!(step_projection(0.9, 0, 0.5).is_none());
        assert_abs_diff_eq!(step_projection(0.5, 0, 0.5).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_eq!(step_projection(0.0, 0, 0.3), Some(0.0));
    }

    #[test]
    fn fixed_point_branch_matches_real_step() {
        let cfg = half(16);
        let mut node = PathNode::root(100, &cfg).unwrap();
        let x = parse_bits("0110101101011011").unwrap();
        let mut u = node.u(&cfg);
        for &b in &x {
            match (branch(&node, b, &cfg), step_projection(u, b, 0.5)) {
                (Some(c), Some(v)) => {
                    assert_abs_diff_eq!(c.u(&cfg), v, epsilon = 1e-9);
                    node = c;
                    u = v;
                }
                (None, None) => break,
                (a, b) => panic!("legality disagrees: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn metric_increments() {
        let dec = DecoderConfig::new(4, 0.05).unwrap();
        assert_abs_diff_eq!(path_metric_increment(1, 1, 0.3, 0.4, 1, &dec), 0.95f64.ln());
        assert_abs_diff_eq!(path_metric_increment(0, 1, 0.3, 0.4, 1, &dec), 0.05f64.ln());
    }

    #[test]
    fn proper_path_is_always_legal() {
        for (n, t) in [(12, 0), (12, 3), (20, 0), (64, 8)] {
            let cfg = CodeConfig::new(n, Rate::new(1, 2).unwrap(), t).unwrap();
            for v in 0..200u64 {
                let x: Bits = (0..n).map(|i| ((v.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (i % 64)) & 1) as u8).collect();
                let m = cfg.coset_index(&x).unwrap();
                let mut node = PathNode::root(m, &cfg).unwrap();
                for &b in &x {
                    node = branch(&node, b, &cfg).expect("proper path pruned");
                }
            }
        }
    }

    #[test]
    fn uniform_final_gives_equal_intrinsic_on_full_paths() {
        let cfg = half(12);
        let spectra = Arc::new(compute_ccs(&cfg, 1 << 12, CcsScheme::Fine).unwrap());
        let dec = DecoderConfig::new(1 << 12, 0.1).unwrap().with_ccs(spectra);
        let plain = DecoderConfig::new(1 << 12, 0.1).unwrap();
        let m = 30;
        for x in cfg.enumerate_coset(m).unwrap() {
            let (mut a, mut b) = (PathNode::root(m, &cfg).unwrap(), 0.0);
            let mut c = 0.0;
            for (i, &bit) in x.iter().enumerate() {
                let next = branch(&a, bit, &cfg).unwrap();
                b += path_metric_increment(bit, bit, a.u(&cfg), next.u(&cfg), i + 1, &dec);
                c += path_metric_increment(bit, bit, a.u(&cfg), next.u(&cfg), i + 1, &plain);
                a = next;
            }
            // all members: log f_n - log f_0(u_0), the same constant
            let k = -dec.spectra.as_ref().unwrap()[0].at(PathNode::root(m, &cfg).unwrap().u(&cfg)).ln();
            assert_abs_diff_eq!(b - c, k, epsilon = 1e-9);
        }
    }

    #[test]
    fn small_coset_examples() {
        let cfg = half(4);
        let dec = DecoderConfig::new(16, 0.1).unwrap();
        let x = parse_bits("0110").unwrap();
        let m = cfg.coset_index(&x).unwrap();
        assert_eq!(decode_m_algorithm(m, &x, &cfg, &dec).unwrap().block, x);
        let y = parse_bits("0100").unwrap();
        let out = decode_m_algorithm(2, &y, &cfg, &dec).unwrap();
        assert_eq!(out.block, parse_bits("0101").unwrap());
        assert_eq!(decode_exhaustive(2, &y, &cfg).unwrap(), out.block);
        for v in 0..16 {
            let y = block_from_int(v, 4);
            assert_eq!(decode_m_algorithm(0, &y, &cfg, &dec).unwrap().block, vec![0; 4]);
        }
    }

    #[test]
    fn full_beam_matches_exhaustive_ml() {
        let cfg = half(10);
        let dec = DecoderConfig::new(1 << 10, 0.1).unwrap();
        for v in (0..1024u64).step_by(7) {
            let x = block_from_int(v, 10);
            let m = cfg.coset_index(&x).unwrap();
            let y = block_from_int(v ^ 0b0100100001, 10);
            let want = decode_exhaustive(m, &y, &cfg).unwrap();
            assert_eq!(decode_m_algorithm(m, &y, &cfg, &dec).unwrap().block, want);
            assert_eq!(decode_backward_replacing(m, &y, &cfg, &dec).unwrap().block, want);
        }
    }

    #[test]
    fn worked_replacement_trace() {
        let paths: Vec<String> = (1..=5).map(|k| k.to_string()).collect();
        let fert = |p: &String| -> Vec<String> {
            match p.as_str() {
                "2" => vec!["2*".into()],
                _ => vec![format!("{p}a"), format!("{p}b")],
            }
        };
        let better = |a: &String, b: &String| a == "4b" && b == "4a";
        let out = backward_replace(paths, 6, fert, better);
        assert_eq!(out, ["1a", "2*", "3a", "4b", "3b", "1b"]);
    }

    #[test]
    fn replacement_keeps_everything_when_room() {
        let out = backward_replace(vec![1, 2], 8, |&p| vec![p * 10, p * 10 + 1], |a, b| a > b);
        assert_eq!(out, [10, 20, 21, 11]);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = half(4);
        let dec = DecoderConfig::new(4, 0.1).unwrap();
        assert!(decode_m_algorithm(0, &[0, 1], &cfg, &dec).is_err());
        assert!(DecoderConfig::new(0, 0.1).is_err());
        assert!(DecoderConfig::new(4, 0.6).is_err());
        let mut bad = dec.clone();
        bad.use_ccs = true;
        assert!(decode_m_algorithm(0, &[0; 4], &cfg, &bad).is_err());
    }
}
