//! Error of the banded model against the full-band reference as the number
//! of retained cross-bands grows.
//!
//! `cargo run --release --example banded_sweep`

use std::sync::Arc;
use std::time::Instant;

use reverb_match::cli::dataset::speech_shaped_noise;
use reverb_match::{
    ctf_convolve, ctf_from_rir, full_ctf_convolve, stft, synth_polack_rir, PolackParams, StftConfig,
};

fn main() -> reverb_match::Result<()> {
    let cfg = Arc::new(StftConfig::default());
    let s = stft(&speech_shaped_noise(16_000, 16_000, 2), &cfg)?;
    let h = synth_polack_rir(&PolackParams::from_rt60(0.5, 16_000, 4))?;
    let reference = full_ctf_convolve(&s, &h, &cfg)?;

    println!("{:>4} {:>12} {:>10}", "F'", "rel. error", "time (ms)");
    for half_width in [0, 1, 2, 4, 8, 16] {
        let start = Instant::now();
        let y = ctf_convolve(&s, &ctf_from_rir(&h, &cfg, half_width)?)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in y.data().iter().zip(reference.data()) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        println!("{half_width:>4} {:>12.3e} {ms:>10.1}", (num / den).sqrt());
    }
    Ok(())
}
