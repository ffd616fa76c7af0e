//! Frequency-domain fusion of a phase-faithful deterministic separation
//! estimate with a phase-blind generative estimate.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`spectral`]: STFT / iSTFT, mel spectrograms, Griffin-Lim.
//! - [`alignment`]: phase and magnitude features, cross-correlation alignment.
//! - [`fusion`]: the convolutional combiner, its training loop, and a
//!   least-squares oracle combiner.
//! - [`metrics`]: SDR, SI-SDR, segment MSE statistics, Hungarian assignment.
//! - [`bounds`]: discrete mutual-information identities, the Laplace/AWGN
//!   information curve, and SDR upper bounds.
//! - [`synthbench`]: synthetic mixtures, estimate simulators, benchmark runner.
//!
//! Runnable walkthroughs for each stage live in `examples/`.

pub mod alignment;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod spectral;
pub mod synthbench;
pub mod wav;

pub use error::{Error, Result};
pub use spectral::{istft, stft, SpectralConfig, Spectrogram, TimeSignal};
