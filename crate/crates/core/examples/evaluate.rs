//! Scores a reverberant signal and a mildly distorted copy against the dry
//! reference.
//!
//! `cargo run --release --example evaluate`

use std::sync::Arc;

use reverb_match::cli::dataset::speech_shaped_noise;
use reverb_match::{
    align_to_reference, reverberate, sisdr, spectral_log_error, synth_polack_rir, PolackParams,
    StftConfig, Waveform,
};

fn main() -> reverb_match::Result<()> {
    let fs = 16_000;
    let cfg = Arc::new(StftConfig::default());
    let dry = speech_shaped_noise(2 * fs as usize, fs, 5);
    let wet = reverberate(
        &dry,
        &synth_polack_rir(&PolackParams::from_rt60(0.6, fs, 5))?,
    )?
    .resized(dry.len());

    // A delayed, attenuated copy: SISDR ignores the gain but not the delay.
    let mut shifted = vec![0.0; 40];
    shifted.extend(dry.samples.iter().map(|x| 0.5 * x));
    let shifted = Waveform::new(shifted, fs)?;
    let (aligned, lag) = align_to_reference(&dry, &shifted, 1600);

    for (name, est) in [
        ("wet", &wet),
        ("shifted", &shifted.resized(dry.len())),
        ("realigned", &aligned),
    ] {
        println!(
            "{name:>10}: SISDR {:7.2} dB, log-spectral error {:.3}",
            sisdr(&dry, est)?.value,
            spectral_log_error(&dry, est, &cfg)?.value
        );
    }
    println!("recovered lag {lag}");
    Ok(())
}
