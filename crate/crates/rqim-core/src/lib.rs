//! Reversible watermarking for floating-point model weights.
//!
//! The core algorithm perturbs selected weights toward dithered quantization
//! lattice points (`qim`), which makes the hidden message recoverable by
//! minimum-distance decoding and — given the embedding strength α — makes the
//! original weights exactly recoverable too. A histogram-shifting baseline
//! over significant-digit pairs lives in `hs`. The `schemes` module wires the
//! scalar operations into key-managed tensor workflows, `keying` handles key
//! material and location derivation, `io` the file formats, and `stats` the
//! evaluation metrics.

pub mod error;
pub mod hs;
pub mod io;
pub mod keying;
pub mod qim;
pub mod schemes;
pub mod stats;

pub use error::{Error, Result};
pub use io::{Precision, WatermarkMessage, WeightTensor};
pub use keying::{LocationSequence, SecretKey, WatermarkInfo};
pub use qim::QimParams;
pub use schemes::VerificationReport;
pub use stats::{DistributionSummary, RegionProbabilities};
