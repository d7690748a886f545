//! Monte-Carlo FER harness over a BSC side-information channel.
//!
//! Trial `k` draws from its own ChaCha stream `(seed, k)`: first the block,
//! then one uniform per symbol, flipped when below `eps`. The same trial index
//! therefore sees coupled noise at every `eps`, tail length or decoder
//! setting, and results do not depend on the worker count.

use crate::ccs::{compute_ccs, CcsScheme, DEFAULT_BINS};
use crate::codec::{index_of_sum, CodeConfig, Rate};
use crate::decoder::{decode_backward_replacing, decode_m_algorithm, DecoderConfig};
use crate::error::{Error, Result};
use crate::Bits;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use std::sync::Arc;
use std::time::Instant;

/// Largest `k` for the known-prefix regime.
pub const MAX_UNKNOWN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Decode the whole block with the tree decoder.
    Full,
    /// The decoder knows `x^{n-k}` and searches the last `k` symbols exactly.
    KnownPrefix(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    #[default]
    MAlgorithm,
    BackwardReplacing,
}

fn default_beam() -> usize {
    16
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn default_regime() -> Regime {
    Regime::Full
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub rate: Rate,
    #[serde(default)]
    pub t: usize,
    pub eps_list: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_beam")]
    pub beam: usize,
    #[serde(default)]
    pub use_ccs: bool,
    #[serde(default = "default_bins")]
    pub ccs_bins: usize,
    #[serde(default)]
    pub ccs_scheme: CcsScheme,
    #[serde(default)]
    pub decoder: DecoderKind,
    #[serde(default = "default_regime")]
    pub regime: Regime,
}

impl ExperimentConfig {
    /// Full-decoding experiment with default decoder settings.
    pub fn new(n: usize, rate: Rate, eps_list: Vec<f64>, trials: u64, seed: u64) -> Self {
        Self {
            n,
            rate,
            t: 0,
            eps_list,
            trials,
            seed,
            beam: default_beam(),
            use_ccs: false,
            ccs_bins: DEFAULT_BINS,
            ccs_scheme: CcsScheme::Fine,
            decoder: DecoderKind::MAlgorithm,
            regime: Regime::Full,
        }
    }

    pub fn code(&self) -> Result<CodeConfig> {
        CodeConfig::new(self.n, self.rate, self.t)
    }

    pub fn validate(&self) -> Result<CodeConfig> {
        let cfg = self.code()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.eps_list.is_empty() {
            return Err(Error::InvalidConfig("eps_list is empty".into()));
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e >= 0.0 && **e < 0.5)) {
            return Err(Error::InvalidProbability(format!("crossover {e} outside [0, 1/2)")));
        }
        match self.regime {
            Regime::Full => {
                cfg.ensure_exact()?;
                if self.beam == 0 {
                    return Err(Error::InvalidConfig("beam must be at least 1".into()));
                }
            }
            Regime::KnownPrefix(k) => {
                if k == 0 || k > MAX_UNKNOWN.min(self.n) {
                    return Err(Error::InvalidConfig(format!(
                        "unknown suffix length {k} outside [1, {}]",
                        MAX_UNKNOWN.min(self.n)
                    )));
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FerPoint {
    pub eps: f64,
    /// Frames not recovered, including decoder failures.
    pub errors: u64,
    /// Trials where no path survived.
    pub failures: u64,
    pub trials: u64,
    pub fer: f64,
    /// Wilson 95% interval.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FerReport {
    pub config: ExperimentConfig,
    pub points: Vec<FerPoint>,
    pub wall_seconds: f64,
}

impl FerReport {
    /// `eps,fer,lo,hi` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,fer,lo,hi\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{}\n", p.eps, p.fer, p.lo, p.hi));
        }
        s
    }
}

/// Wilson score interval at 95%.
pub fn wilson(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let den = 1.0 + z * z / n;
    let mid = (p + z * z / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    let lo = if errors == 0 { 0.0 } else { (mid - half).max(0.0) };
    let hi = if errors >= trials { 1.0 } else { (mid + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// Trials where only the first arm failed.
    pub only_a: u64,
    /// Trials where only the second arm failed.
    pub only_b: u64,
    /// Exact two-sided p-value.
    pub p_value: f64,
}

/// Exact McNemar test on paired error flags.
pub fn mcnemar(a: &[bool], b: &[bool]) -> Result<McNemar> {
    if a.len() != b.len() {
        return Err(Error::InvalidConfig("paired runs differ in length".into()));
    }
    let only_a = a.iter().zip(b).filter(|(x, y)| **x && !**y).count() as u64;
    let only_b = a.iter().zip(b).filter(|(x, y)| !**x && **y).count() as u64;
    let total = only_a + only_b;
    let p_value = if total == 0 {
        1.0
    } else {
        let bin = Binomial::new(0.5, total).map_err(|e| Error::Domain(e.to_string()))?;
        (2.0 * bin.cdf(only_a.min(only_b))).min(1.0)
    };
    Ok(McNemar { only_a, only_b, p_value })
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Flips each symbol independently with probability `eps`.
pub fn bsc_corrupt(x: &[u8], eps: f64, rng: &mut impl Rng) -> Bits {
    x.iter().map(|&b| b ^ u8::from(rng.gen::<f64>() < eps)).collect()
}

fn uniform_block(n: usize, rng: &mut impl RngCore) -> Bits {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = rng.next_u64();
        out.extend((0..64.min(n - out.len())).map(|k| ((w >> k) & 1) as u8));
    }
    out
}

/// Shared state for one configuration.
struct Runner {
    exp: ExperimentConfig,
    cfg: CodeConfig,
    spectra: Option<Arc<Vec<crate::ccs::Spectrum>>>,
    suffix_sums: Vec<u128>,
}

enum Outcome {
    Ok,
    Error,
    Failure,
}

impl Runner {
    fn new(exp: &ExperimentConfig) -> Result<Self> {
        let cfg = exp.validate()?;
        let spectra = match (exp.regime, exp.use_ccs) {
            (Regime::Full, true) => Some(Arc::new(compute_ccs(&cfg, exp.ccs_bins, exp.ccs_scheme)?)),
            _ => None,
        };
        let suffix_sums = match exp.regime {
            Regime::KnownPrefix(k) => {
                let w = &cfg.fixed_weights()[cfg.n() - k..];
                (0..1usize << k)
                    .map(|v| (0..k).filter(|b| v >> (k - 1 - b) & 1 == 1).fold(0u128, |acc, b| acc.wrapping_add(w[b])))
                    .collect()
            }
            Regime::Full => Vec::new(),
        };
        Ok(Self { exp: exp.clone(), cfg, spectra, suffix_sums })
    }

    fn trial(&self, eps: f64, trial: u64, dec: &DecoderConfig) -> Outcome {
        let n = self.cfg.n();
        let mut rng = trial_rng(self.exp.seed, trial);
        let x = uniform_block(n, &mut rng);
        let y = bsc_corrupt(&x, eps, &mut rng);
        match self.exp.regime {
            Regime::Full => {
                let m = match self.cfg.coset_index(&x) {
                    Ok(m) => m,
                    Err(_) => return Outcome::Failure,
                };
                let out = match self.exp.decoder {
                    DecoderKind::MAlgorithm => decode_m_algorithm(m, &y, &self.cfg, dec),
                    DecoderKind::BackwardReplacing => decode_backward_replacing(m, &y, &self.cfg, dec),
                };
                match out {
                    Ok(o) if o.block == x => Outcome::Ok,
                    Ok(_) => Outcome::Error,
                    Err(_) => Outcome::Failure,
                }
            }
            Regime::KnownPrefix(k) => {
                let split = n - k;
                let prefix = self.cfg.fixed_sum(&[&x[..split], &vec![0u8; k][..]].concat());
                let target = index_of_sum(self.cfg.fixed_sum(&x));
                let truth = x[split..].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
                let side = y[split..].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
                let mut best = u32::MAX;
                let mut ties: Vec<usize> = Vec::new();
                for (v, &s) in self.suffix_sums.iter().enumerate() {
                    if index_of_sum(prefix.wrapping_add(s)) != target {
                        continue;
                    }
                    let d = (v ^ side).count_ones();
                    if d < best {
                        best = d;
                        ties.clear();
                    }
                    if d == best {
                        ties.push(v);
                    }
                }
                let pick = ties[rng.gen_range(0..ties.len())];
                if pick == truth {
                    Outcome::Ok
                } else {
                    Outcome::Error
                }
            }
        }
    }

    fn decoder_for(&self, eps: f64) -> Result<DecoderConfig> {
        // eps = 0 still needs a finite mismatch penalty
        let dec = DecoderConfig::new(self.exp.beam.max(1), eps.max(1e-12))?;
        Ok(match &self.spectra {
            Some(s) => dec.with_ccs(s.clone()),
            None => dec,
        })
    }

    fn outcomes(&self, eps: f64) -> Result<Vec<Outcome>> {
        let dec = self.decoder_for(eps)?;
        Ok((0..self.exp.trials).into_par_iter().map(|k| self.trial(eps, k, &dec)).collect())
    }
}

/// Per-trial error flags at one `eps`, in trial order.
pub fn run_trials(exp: &ExperimentConfig, eps: f64) -> Result<Vec<bool>> {
    let runner = Runner::new(exp)?;
    Ok(runner.outcomes(eps)?.into_iter().map(|o| !matches!(o, Outcome::Ok)).collect())
}

pub fn run_fer(exp: &ExperimentConfig) -> Result<FerReport> {
    let start = Instant::now();
    let runner = Runner::new(exp)?;
    let mut points = Vec::with_capacity(exp.eps_list.len());
    for &eps in &exp.eps_list {
        let out = runner.outcomes(eps)?;
        let failures = out.iter().filter(|o| matches!(o, Outcome::Failure)).count() as u64;
        let errors = out.iter().filter(|o| !matches!(o, Outcome::Ok)).count() as u64;
        let (lo, hi) = wilson(errors, exp.trials);
        points.push(FerPoint {
            eps,
            errors,
            failures,
            trials: exp.trials,
            fer: errors as f64 / exp.trials as f64,
            lo,
            hi,
        });
    }
    Ok(FerReport { config: exp.clone(), points, wall_seconds: start.elapsed().as_secs_f64() })
}

/// One report per tail length, all on the same trial streams.
pub fn tail_sweep(base: &ExperimentConfig, t_list: &[usize]) -> Result<Vec<FerReport>> {
    t_list
        .iter()
        .map(|&t| {
            let mut exp = base.clone();
            exp.t = t;
            run_fer(&exp)
        })
        .collect()
}
