//! Coset cardinality spectrum: the density `f_i(u)` of the bitstream projection
//! at depth `i`, computed backwards from the uniform final spectrum.

use crate::codec::CodeConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;
use std::str::FromStr;

/// Default number of bins.
pub const DEFAULT_BINS: usize = 1 << 16;

/// Discretisation of one backward step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcsScheme {
    Rounding,
    Linear,
    #[default]
    Fine,
}

impl FromStr for CcsScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rounding" => Ok(Self::Rounding),
            "linear" => Ok(Self::Linear),
            "fine" => Ok(Self::Fine),
            _ => Err(Error::InvalidConfig(format!("unknown scheme `{s}`"))),
        }
    }
}

/// Anything that can be evaluated as a density on `[0, 1)`.
pub trait Density {
    fn density(&self, u: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Density for F {
    fn density(&self, u: f64) -> f64 {
        self(u)
    }
}

/// Piecewise-constant density over `N` equal bins of `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub bins: Vec<f64>,
    pub level: usize,
}

impl Density for Spectrum {
    fn density(&self, u: f64) -> f64 {
        self.at(u)
    }
}

impl Spectrum {
    /// Uniform spectrum `Pi(u)`.
    pub fn uniform(n_bins: usize, level: usize) -> Self {
        Self { bins: vec![1.0; n_bins], level }
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Nearest-bin lookup; zero outside `[0, 1)`.
    pub fn at(&self, u: f64) -> f64 {
        if !(0.0..1.0).contains(&u) {
            return 0.0;
        }
        let n = self.bins.len();
        self.bins[((u * n as f64) as usize).min(n - 1)]
    }

    /// `(1/N) sum bins`.
    pub fn mass(&self) -> f64 {
        self.bins.iter().sum::<f64>() / self.bins.len() as f64
    }

    pub fn normalize(&mut self) {
        let m = self.mass();
        if m > 0.0 {
            self.bins.iter_mut().for_each(|b| *b /= m);
        }
    }

    fn get(&self, k: i64) -> f64 {
        if k < 0 || k >= self.bins.len() as i64 {
            0.0
        } else {
            self.bins[k as usize]
        }
    }

    /// Prefix sums `P[k] = sum_{i<k} bins[i]`.
    fn prefix(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.bins.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for &b in &self.bins {
            acc += b;
            p.push(acc);
        }
        p
    }

    /// `f_{i-1}` from `f_i` at body rate `r`, renormalised.
    pub fn backward_step(&self, r: f64, scheme: CcsScheme) -> Spectrum {
        let mut s = Spectrum { bins: self.raw_step(r, scheme), level: self.level.saturating_sub(1) };
        s.normalize();
        s
    }

    fn raw_step(&self, r: f64, scheme: CcsScheme) -> Vec<f64> {
        let (n, bins) = (self.bins.len(), self.bins.len() as f64);
        let q = r.exp2();
        let shift = bins * (1.0 - (-r).exp2());
        match scheme {
            CcsScheme::Rounding => {
                let pick = |l: f64| self.get((l + 0.5).floor() as i64);
                let c = (r - 1.0).exp2();
                (0..n)
                    .map(|j| {
                        let j = j as f64;
                        c * (pick(j * q) + pick((j - shift) * q))
                    })
                    .collect()
            }
            CcsScheme::Linear => {
                let interp = |l: f64| {
                    let lo = l.floor();
                    let a = l - lo;
                    (1.0 - a) * self.get(lo as i64) + a * self.get(lo as i64 + 1)
                };
                let c = (r - 1.0).exp2();
                (0..n)
                    .map(|j| {
                        let j = j as f64;
                        c * (interp(j * q) + interp((j - shift) * q))
                    })
                    .collect()
            }
            CcsScheme::Fine => {
                let p = self.prefix();
                let cum = |x: f64| {
                    if x <= 0.0 {
                        0.0
                    } else if x >= bins {
                        p[n]
                    } else {
                        let k = x.floor() as usize;
                        p[k] + (x - k as f64) * self.bins[k]
                    }
                };
                (0..n)
                    .map(|j| {
                        let j = j as f64;
                        let l0 = j * q;
                        let l1 = (j - shift) * q;
                        (cum(l0 + q) - cum(l0) + cum(l1 + q) - cum(l1)) / 2.0
                    })
                    .collect()
            }
        }
    }

    /// Pointwise value of the fixed point at `u`, found by unrolling
    /// `f(u) = 2^{r-1} (f(2^r u) + f(2^r u + 1 - 2^r))` up to `depth` times
    /// before falling back to bin lookup. Branches are capped at 2^16 leaves.
    pub fn density_unrolled(&self, u: f64, r: f64, depth: usize) -> f64 {
        let (q, c) = (r.exp2(), (r - 1.0).exp2());
        let mut frontier = vec![(u, 1.0f64)];
        for _ in 0..depth {
            if frontier.is_empty() || frontier.len() > 1 << 16 {
                break;
            }
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for &(v, w) in &frontier {
                for x in [v * q, v * q + 1.0 - q] {
                    if (0.0..1.0).contains(&x) {
                        next.push((x, w * c));
                    }
                }
            }
            frontier = next;
        }
        frontier.iter().map(|&(v, w)| w * self.at(v)).sum()
    }

    /// Mass of the Fine-scheme step before renormalisation.
    pub fn fine_step_mass(&self, r: f64) -> f64 {
        let raw = self.raw_step(r, CcsScheme::Fine);
        raw.iter().sum::<f64>() / raw.len() as f64
    }

    /// `(1/N) sum f^2`, the normalised expected coset cardinality.
    pub fn ecc_normalized(&self) -> f64 {
        self.bins.iter().map(|b| b * b).sum::<f64>() / self.bins.len() as f64
    }

    /// `(1/N) sum f log2 f`, with `0 log 0 = 0`.
    pub fn rate_loss(&self) -> f64 {
        self.bins.iter().filter(|&&b| b > 0.0).map(|b| b * b.log2()).sum::<f64>() / self.bins.len() as f64
    }

    /// Differential entropy `h(U) = -rate_loss`.
    pub fn entropy(&self) -> f64 {
        -self.rate_loss()
    }

    /// `int_a^b f(u) du` with exact partial bins.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let n = self.bins.len();
        let bins = n as f64;
        let p = self.prefix();
        let cum = |u: f64| {
            let x = u * bins;
            if x <= 0.0 {
                0.0
            } else if x >= bins {
                p[n]
            } else {
                let k = x.floor() as usize;
                p[k] + (x - k as f64) * self.bins[k]
            }
        };
        (cum(b) - cum(a)) / bins
    }

    /// `1 + int_{1-2^-r}^{2^-r} f(u) du`.
    pub fn expansion_factor(&self, r: f64) -> f64 {
        let hi = (-r).exp2();
        1.0 + self.integral(1.0 - hi, hi)
    }

    /// Mean of the three central bins.
    pub fn f_half(&self) -> f64 {
        let n = self.bins.len();
        let c = n / 2;
        if n < 3 {
            return self.bins[c.min(n - 1)];
        }
        (self.bins[c - 1] + self.bins[c] + self.bins[c + 1]) / 3.0
    }

    /// Largest `|f(j) - g(u_j)|` over bins whose centre lies in `[lo, hi]`.
    pub fn max_deviation(&self, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let bins = self.bins.len() as f64;
        self.bins
            .iter()
            .enumerate()
            .map(|(j, &b)| ((j as f64 + 0.5) / bins, b))
            .filter(|(u, _)| (lo..=hi).contains(u))
            .map(|(u, b)| (b - g(u)).abs())
            .fold(0.0, f64::max)
    }
}

/// Uniform final spectrum.
pub fn final_ccs(n_bins: usize) -> Result<Spectrum> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig("need at least two bins".into()));
    }
    Ok(Spectrum::uniform(n_bins, 0))
}

/// Spectra of every level, indexed by level: `result[i]` is `f_i`, `result[n]` uniform.
pub fn compute_ccs(cfg: &CodeConfig, n_bins: usize, scheme: CcsScheme) -> Result<Vec<Spectrum>> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig("need at least two bins".into()));
    }
    let n = cfg.n();
    let body = cfg.body_len();
    let mut levels = vec![Spectrum::uniform(n_bins, n)];
    for i in (0..n).rev() {
        let next = if i >= body {
            Spectrum::uniform(n_bins, i)
        } else {
            levels.last().expect("nonempty").backward_step(cfg.r(), scheme)
        };
        levels.push(next);
    }
    levels.reverse();
    Ok(levels)
}

/// Iterates from uniform until the mean absolute change drops below `1e-8` or `max_steps`.
pub fn asymptotic_ccs(r: f64, n_bins: usize, scheme: CcsScheme, max_steps: usize) -> Result<(Spectrum, usize)> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("rate {r} outside [0, 1]")));
    }
    let mut f = final_ccs(n_bins)?;
    f.level = max_steps;
    for step in 1..=max_steps {
        let g = f.backward_step(r, scheme);
        let change = f.bins.iter().zip(&g.bins).map(|(a, b)| (a - b).abs()).sum::<f64>() / n_bins as f64;
        f = g;
        if change < 1e-8 {
            return Ok((f, step));
        }
    }
    Ok((f, max_steps))
}

/// Closed-form asymptotic spectrum at `r = 1/2`.
pub fn asymptotic_ccs_half_rate(u: f64) -> f64 {
    let a = 3.0 * SQRT_2 - 4.0;
    if !(0.0..1.0).contains(&u) {
        0.0
    } else if u < SQRT_2 - 1.0 {
        u / a
    } else if u < 2.0 - SQRT_2 {
        1.0 / (2.0 - SQRT_2)
    } else {
        (1.0 - u) / a
    }
}

/// `int f^2` of the closed form, `1/(3(sqrt2 - 1)) + 1/2`.
pub fn half_rate_ecc() -> f64 {
    1.0 / (3.0 * (SQRT_2 - 1.0)) + 0.5
}

/// `p(x | u) = 2^{r-1} f_i((u - x(1-2^-r)) 2^r) / f_{i-1}(u)`, clamped to `[0, 1]`.
pub fn conditional_symbol_prob(u: f64, x: u8, f_prev: &impl Density, f_cur: &impl Density, r: f64) -> Result<f64> {
    let den = f_prev.density(u);
    if den <= 0.0 {
        return Err(Error::UndefinedRegion(u));
    }
    let v = (u - f64::from(x & 1) * (1.0 - (-r).exp2())) * r.exp2();
    Ok(((r - 1.0).exp2() * f_cur.density(v) / den).clamp(0.0, 1.0))
}
