//! Blind dereverberation by reverberation matching.
//!
//! A wet recording is modeled in the STFT domain as a convolutive transfer
//! function (CTF) applied to an unknown dry spectrogram. Given a room impulse
//! response, either measured or drawn from a Polack stochastic model, the dry
//! spectrogram is recovered by gradient descent on a magnitude-aware
//! reconstruction loss.
//!
//! ```no_run
//! use std::sync::Arc;
//! use reverb_match::{dereverb, PolackParams, SolverConfig, StftConfig, Waveform};
//!
//! let wet = Waveform::new(vec![0.0; 16_000], 16_000)?;
//! let cfg = Arc::new(StftConfig::default());
//! let params = PolackParams::from_rt60(0.5, 16_000, 7);
//! let out = dereverb(&wet, &params, &cfg, &SolverConfig::default())?;
//! println!("final loss {}", out.final_loss.total);
//! # Ok::<(), reverb_match::Error>(())
//! ```

// Negated comparisons are how validation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ctf;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod reverb;
pub mod signal;
pub mod solver;

pub use ctf::{
    ctf_adjoint, ctf_convolve, ctf_from_rir, full_ctf_convolve, CtfConvolver, CtfTensor,
};
pub use error::{Error, Result};
pub use loss::{loss_and_gradient, reverb_match_loss, LossReport, LossWeights};
pub use metrics::{align_to_reference, sisdr, spectral_log_error, MetricScore};
pub use reverb::{
    align_normalize_rir, reverberate, simulate_shoebox_rir, synth_polack_rir, PolackParams, Rir,
    RoomSpec,
};
pub use signal::{istft, stft, Spectrogram, StftConfig, Waveform};
pub use solver::{dereverb, dereverb_oracle, DereverbResult, Init, SolverConfig};
