//! The full cross-band model reproduces the STFT of a time-domain
//! convolution to machine precision.
//!
//! `cargo run --release --example ctf_exactness`

use std::sync::Arc;
use std::time::Instant;

use reverb_match::{
    full_ctf_convolve, reverberate, stft, synth_polack_rir, PolackParams, StftConfig, Waveform,
};

fn main() -> reverb_match::Result<()> {
    let cfg = Arc::new(StftConfig::default());
    let s = Waveform::new(
        (0..16_000)
            .map(|i| ((i as f64) * 0.37).sin() * (1.0 + (i % 97) as f64 / 97.0))
            .collect(),
        16_000,
    )?;
    let h = synth_polack_rir(&PolackParams::from_rt60(0.25, 16_000, 1))?;

    let start = Instant::now();
    let model = full_ctf_convolve(&stft(&s, &cfg)?, &h, &cfg)?;
    let elapsed = start.elapsed();
    let exact = stft(&reverberate(&s, &h)?, &cfg)?;

    let frames = model.frames().min(exact.frames());
    let (mut num, mut den) = (0.0, 0.0);
    for f in 0..exact.bins() {
        for t in 0..frames {
            num += (model.get(f, t) - exact.get(f, t)).norm_sqr();
            den += exact.get(f, t).norm_sqr();
        }
    }
    println!("frames compared       {frames}");
    println!("relative L2 error     {:.3e}", (num / den).sqrt());
    println!("full-band convolution {:.2} s", elapsed.as_secs_f64());
    Ok(())
}
