//! Overlapped arithmetic codes for Slepian-Wolf coding of uniform binary sources.
//!
//! Modules, bottom-up:
//! - [`arithmetic`]: bit-exact finite-precision arithmetic coder.
//! - [`codec`]: overlapped mapping, s-values and coset indices.
//! - [`ccs`]: coset cardinality spectrum.
//! - [`decoder`]: M-algorithm and backward-replacing list decoders.
//! - [`coexist`]: shift function and FER closed forms.
//! - [`hds`]: Hamming distance spectrum.
//! - [`sim`]: Monte-Carlo harness.

pub mod arithmetic;
pub mod ccs;
pub mod codec;
pub mod coexist;
pub mod decoder;
pub mod error;
pub mod hds;
pub mod sim;

pub use arithmetic::{arithmetic_decode, arithmetic_encode, BiasProb, Bitstream, Mode, SlidingWindow};
pub use ccs::{CcsScheme, Spectrum};
pub use codec::{CodeConfig, Rate};
pub use decoder::{DecodeOutcome, DecoderConfig};
pub use error::{Error, Result};
pub use hds::{DivergenceReport, HdsMethod, HdsVector};
pub use sim::{ExperimentConfig, FerReport, Regime};

/// A block of binary symbols, one `0`/`1` per entry, first symbol first.
pub type Bits = Vec<u8>;
