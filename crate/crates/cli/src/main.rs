//! `oac`: command-line front end for overlapped arithmetic codes.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input, 3 complexity guard.

mod json;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oac_core::arithmetic::{arithmetic_decode, arithmetic_encode, decode_with_tail, BiasProb, Bitstream, Mode};
use oac_core::ccs::{asymptotic_ccs, compute_ccs, CcsScheme, DEFAULT_BINS};
use oac_core::codec::{format_bits, parse_bits, CodeConfig, Rate};
use oac_core::coexist::{fer_one_unknown, fer_two_unknown};
use oac_core::decoder::{decode_backward_replacing, decode_m_algorithm, DecoderConfig};
use oac_core::hds::{
    hds_binomial, hds_exhaustive, hds_fast, hds_hard, hds_soft, psi3_divergence, work_log2, HdsMethod, HdsVector,
    BUDGET_LOG2,
};
use oac_core::sim::{run_fer, tail_sweep, ExperimentConfig};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("OAC_BUILD_HASH"), ")");

/// Steps allowed when iterating the CCS to its fixed point.
const CCS_MAX_STEPS: usize = 4096;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] oac_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
    /// Output was written but some requested entries were refused.
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use oac_core::Error as E;
        match self {
            Self::Core(E::ComplexityGuard(_)) | Self::Partial(_) => 3,
            Self::Core(E::InvalidConfig(_) | E::InvalidProbability(_) | E::Domain(_) | E::Format(_)) => 2,
            Self::Json(_) | Self::Usage(_) => 2,
            Self::Core(_) | Self::Io { .. } => 1,
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn parse_rate(s: &str) -> std::result::Result<Rate, String> {
    s.parse::<Rate>().map_err(|e| format!("{e}; rates are fractions p/q with n*R an integer"))
}

fn parse_bias(s: &str) -> std::result::Result<BiasProb, String> {
    BiasProb::parse(s).map_err(|e| e.to_string())
}

#[derive(Parser)]
#[command(name = "oac", version = VERSION, about = "Overlapped arithmetic codes for distributed source coding")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Arithmetic-encode a block of bits read as 0/1 text.
    Encode(EncodeArgs),
    /// Decode a bitstream file back to n bits.
    Decode(DecodeArgs),
    /// Coset sizes (`m,size`) or the members of one coset.
    Cosets(CosetArgs),
    /// Coset cardinality spectrum at one level (`j,u,f`).
    Ccs(CcsArgs),
    /// Hamming distance spectrum (`d,psi`).
    Hds(HdsArgs),
    /// Search for divergence pairs of psi(3).
    Psi3(Psi3Args),
    /// Closed-form FER with the last one or two symbols unknown (`eps,fer`).
    FerTheory(FerTheoryArgs),
    /// Monte-Carlo FER from a JSON experiment config.
    FerSim(FerSimArgs),
    /// Monte-Carlo FER over several tail lengths on shared trial streams.
    TailSweep(TailSweepArgs),
    /// Recover a block from its coset index and side information.
    DecodeSw(DecodeSwArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecMode {
    Prefix,
    Halftail,
}

impl From<CodecMode> for Mode {
    fn from(m: CodecMode) -> Self {
        match m {
            CodecMode::Prefix => Mode::Prefix,
            CodecMode::Halftail => Mode::HalfTail,
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    /// Probability of symbol 0, as NUM/DEN or a decimal.
    #[arg(long, value_parser = parse_bias)]
    p: BiasProb,
    /// Window width in bits.
    #[arg(long, default_value_t = 16)]
    w: u8,
    #[arg(long, value_enum, default_value_t = CodecMode::Prefix)]
    mode: CodecMode,
    /// Text file of 0/1 symbols; stdin when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Bitstream file; the bits are printed as text when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, value_parser = parse_bias)]
    p: BiasProb,
    /// Number of symbols to recover.
    #[arg(long)]
    n: usize,
    /// Bitstream file written by `encode`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Bits that follow a prefix-mode stream, as 0/1 text.
    #[arg(long)]
    tail: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CodeArgs {
    /// Block length.
    #[arg(long)]
    n: usize,
    /// Average rate p/q.
    #[arg(long = "R", value_parser = parse_rate)]
    rate: Rate,
    /// Tail length.
    #[arg(long, default_value_t = 0)]
    t: usize,
}

impl CodeArgs {
    fn config(&self) -> Res<CodeConfig> {
        Ok(CodeConfig::new(self.n, self.rate, self.t)?)
    }
}

#[derive(Args)]
struct CosetArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// List the members of coset m instead of the size table.
    #[arg(long)]
    list: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Rounding,
    Linear,
    Fine,
}

impl From<Scheme> for CcsScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Rounding => CcsScheme::Rounding,
            Scheme::Linear => CcsScheme::Linear,
            Scheme::Fine => CcsScheme::Fine,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct CcsArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Number of bins.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, value_enum, default_value_t = Scheme::Fine)]
    scheme: Scheme,
    /// Level i in [0, n].
    #[arg(long, default_value_t = 0)]
    level: usize,
    /// Output format, written to stdout.
    #[arg(long = "out", value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct HdsArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// exhaustive, th1 (binomial), th2 (soft), th3 (hard) or th4 (fast).
    #[arg(long, default_value = "th2", value_parser = |s: &str| s.parse::<HdsMethod>().map_err(|e| e.to_string()))]
    method: HdsMethod,
    /// Largest distance; defaults to n.
    #[arg(long)]
    dmax: Option<usize>,
    /// CCS bins used by th1 and th4.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Psi3Args {
    /// Body rate as a real number.
    #[arg(long)]
    r: f64,
    /// Largest i + j searched.
    #[arg(long, default_value_t = 64)]
    bound: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FerTheoryArgs {
    #[arg(long = "R", value_parser = parse_rate)]
    rate: Rate,
    /// Number of unknown ending symbols.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    unknown: u8,
    /// Comma-separated crossover probabilities.
    #[arg(long, value_delimiter = ',', required = true)]
    eps_list: Vec<f64>,
    /// Significant digits of the fer column (1 to 17).
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=17))]
    digits: u8,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FerSimArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// JSON report; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `eps,fer,lo,hi` rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TailSweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated tail lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    t_list: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `t,eps,fer,lo,hi` rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderChoice {
    MAlgorithm,
    BackwardReplacing,
}

#[derive(Args)]
struct DecodeSwArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Beam width.
    #[arg(long = "M", default_value_t = 16)]
    beam: usize,
    /// Crossover probability of the side information.
    #[arg(long)]
    eps: f64,
    /// Add the CCS term to the path metric.
    #[arg(long)]
    use_ccs: bool,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, value_enum, default_value_t = Scheme::Fine)]
    scheme: Scheme,
    #[arg(long, value_enum, default_value_t = DecoderChoice::MAlgorithm)]
    decoder: DecoderChoice,
    /// Coset index.
    #[arg(long)]
    m: u64,
    /// Side information as 0/1 text.
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_text(path: Option<&Path>) -> Res<String> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(io_err(p)),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(io_err(Path::new("<stdin>")))?;
            Ok(s)
        }
    }
}

fn read_bits(path: Option<&Path>) -> Res<Vec<u8>> {
    let text: String = read_text(path)?.chars().filter(|c| !c.is_whitespace()).collect();
    Ok(parse_bits(&text)?)
}

fn emit(out: Option<&Path>, content: &str) -> Res<()> {
    match out {
        Some(p) => fs::write(p, content).map_err(io_err(p)),
        None => io::stdout().write_all(content.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn encode(a: &EncodeArgs) -> Res<()> {
    let x = read_bits(a.input.as_deref())?;
    let bs = arithmetic_encode(&x, a.p, u32::from(a.w), a.mode.into())?;
    match &a.out {
        Some(p) => fs::write(p, bs.to_bytes(a.w)).map_err(io_err(p)),
        None => emit(None, &format!("{}\n", bs.to_string_bits())),
    }
}

fn decode(a: &DecodeArgs) -> Res<()> {
    let data = fs::read(&a.input).map_err(io_err(&a.input))?;
    let (bs, w): (Bitstream, u8) = Bitstream::from_bytes(&data)?;
    let x = match &a.tail {
        Some(t) => decode_with_tail(&bs, &parse_bits(t)?, a.p, u32::from(w), a.n)?,
        None => arithmetic_decode(&bs, a.p, u32::from(w), a.n)?,
    };
    emit(a.out.as_deref(), &format!("{}\n", format_bits(&x)))
}

fn cosets(a: &CosetArgs) -> Res<()> {
    let cfg = a.code.config()?;
    let mut s = String::new();
    match a.list {
        Some(m) => {
            s.push_str("x\n");
            for x in cfg.enumerate_coset(m)? {
                s.push_str(&format_bits(&x));
                s.push('\n');
            }
        }
        None => {
            s.push_str("m,size\n");
            for (m, size) in cfg.coset_size_histogram()?.iter().enumerate() {
                s.push_str(&format!("{m},{size}\n"));
            }
        }
    }
    emit(a.out.as_deref(), &s)
}

fn ccs(a: &CcsArgs) -> Res<()> {
    let cfg = a.code.config()?;
    if a.level > cfg.n() {
        return Err(CliError::Usage(format!("level {} outside [0, {}]", a.level, cfg.n())));
    }
    let spectra = compute_ccs(&cfg, a.bins, a.scheme.into())?;
    let f = &spectra[a.level];
    let nb = f.n_bins() as f64;
    let out = match a.format {
        Format::Csv => {
            let mut s = String::from("j,u,f\n");
            for (j, v) in f.bins.iter().enumerate() {
                s.push_str(&format!("{j},{},{v}\n", (j as f64 + 0.5) / nb));
            }
            s
        }
        Format::Json => json::to_string(&serde_json::json!({
            "n": cfg.n(),
            "rate": cfg.rate(),
            "t": cfg.t(),
            "scheme": CcsScheme::from(a.scheme),
            "level": a.level,
            "int_f2": f.ecc_normalized(),
            "expansion_factor": f.expansion_factor(cfg.r()),
            "rate_loss": f.rate_loss(),
            "f": f.bins,
        }))?,
    };
    emit(None, &out)
}

fn hds(a: &HdsArgs) -> Res<()> {
    let cfg = a.code.config()?;
    let n = cfg.n();
    let dmax = a.dmax.unwrap_or(n).min(n);
    let converged = |bins| asymptotic_ccs(cfg.r(), bins, CcsScheme::Fine, CCS_MAX_STEPS).map(|(f, _)| f);
    let v: HdsVector = match a.method {
        HdsMethod::Exhaustive => {
            eprintln!("work estimate: 2^{n} blocks");
            hds_exhaustive(&cfg)?
        }
        HdsMethod::Soft | HdsMethod::Hard => {
            let worst = (1..=dmax).map(|d| work_log2(n, d)).fold(0.0, f64::max);
            eprintln!("work estimate: up to 2^{worst:.1} shift evaluations per distance (budget 2^{BUDGET_LOG2})");
            if a.method == HdsMethod::Soft {
                hds_soft(&cfg, dmax)?
            } else {
                hds_hard(&cfg, dmax)?
            }
        }
        HdsMethod::Binomial => hds_binomial(&cfg, converged(a.bins)?.ecc_normalized()),
        HdsMethod::Fast => hds_fast(&cfg, converged(a.bins)?.f_half()),
    };
    let mut s = String::from("d,psi\n");
    let mut refused = Vec::new();
    for d in 0..=dmax {
        match v.get(d) {
            Some(p) => s.push_str(&format!("{d},{p}\n")),
            None => refused.push(d),
        }
    }
    emit(a.out.as_deref(), &s)?;
    if refused.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(format!(
            "distances {refused:?} refused: more than 2^{BUDGET_LOG2} shift evaluations each"
        )))
    }
}

fn psi3(a: &Psi3Args) -> Res<()> {
    let rep = psi3_divergence(a.r, a.bound)?;
    emit(a.out.as_deref(), &json::to_string(&rep)?)
}

fn round_sig(x: f64, digits: u8) -> f64 {
    format!("{:.*e}", usize::from(digits - 1), x).parse().unwrap_or(x)
}

fn fer_theory(a: &FerTheoryArgs) -> Res<()> {
    let r = a.rate.value();
    let mut s = String::from("eps,fer\n");
    for &e in &a.eps_list {
        let fer = if a.unknown == 1 { fer_one_unknown(r, e)? } else { fer_two_unknown(r, e)? };
        s.push_str(&format!("{e},{}\n", round_sig(fer, a.digits)));
    }
    emit(a.out.as_deref(), &s)
}

fn load_config(path: &Path) -> Res<ExperimentConfig> {
    let exp: ExperimentConfig = serde_json::from_str(&read_text(Some(path))?)?;
    exp.validate()?;
    Ok(exp)
}

fn fer_sim(a: &FerSimArgs) -> Res<()> {
    let rep = run_fer(&load_config(&a.config)?)?;
    if let Some(p) = &a.csv {
        emit(Some(p), &rep.to_csv())?;
    }
    emit(a.out.as_deref(), &json::to_string(&rep)?)
}

fn tail_sweep_cmd(a: &TailSweepArgs) -> Res<()> {
    let reps = tail_sweep(&load_config(&a.config)?, &a.t_list)?;
    if let Some(p) = &a.csv {
        let mut s = String::from("t,eps,fer,lo,hi\n");
        for r in &reps {
            for pt in &r.points {
                s.push_str(&format!("{},{},{},{},{}\n", r.config.t, pt.eps, pt.fer, pt.lo, pt.hi));
            }
        }
        emit(Some(p), &s)?;
    }
    emit(a.out.as_deref(), &json::to_string(&reps)?)
}

fn decode_sw(a: &DecodeSwArgs) -> Res<()> {
    let cfg = a.code.config()?;
    let y = read_bits(Some(&a.y))?;
    if y.len() != cfg.n() {
        return Err(CliError::Usage(format!("side information has {} bits, expected {}", y.len(), cfg.n())));
    }
    let mut dec = DecoderConfig::new(a.beam, a.eps)?;
    if a.use_ccs {
        dec = dec.with_ccs(Arc::new(compute_ccs(&cfg, a.bins, a.scheme.into())?));
    }
    let out = match a.decoder {
        DecoderChoice::MAlgorithm => decode_m_algorithm(a.m, &y, &cfg, &dec)?,
        DecoderChoice::BackwardReplacing => decode_backward_replacing(a.m, &y, &cfg, &dec)?,
    };
    let flips = out.block.iter().zip(&y).filter(|(a, b)| a != b).count();
    let report = serde_json::json!({
        "block": format_bits(&out.block),
        "coset": a.m,
        "metric": out.metric,
        "hamming_to_y": flips,
        "survivors": out.survivors,
        "branches": out.branches,
    });
    emit(a.out.as_deref(), &json::to_string(&report)?)
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Encode(a) => encode(a),
        Cmd::Decode(a) => decode(a),
        Cmd::Cosets(a) => cosets(a),
        Cmd::Ccs(a) => ccs(a),
        Cmd::Hds(a) => hds(a),
        Cmd::Psi3(a) => psi3(a),
        Cmd::FerTheory(a) => fer_theory(a),
        Cmd::FerSim(a) => fer_sim(a),
        Cmd::TailSweep(a) => tail_sweep_cmd(a),
        Cmd::DecodeSw(a) => decode_sw(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oac: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
