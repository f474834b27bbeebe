//! Dereverberates speech-shaped noise with the exact room impulse response.
//!
//! `cargo run --release --example dereverb_oracle -- [iters] [step]`

use std::sync::Arc;
use std::time::Instant;

use reverb_match::cli::dataset::speech_shaped_noise;
use reverb_match::{
    align_normalize_rir, dereverb_oracle, reverberate, simulate_shoebox_rir, sisdr, RoomSpec,
    SolverConfig, StftConfig,
};

fn main() -> reverb_match::Result<()> {
    let mut args = std::env::args().skip(1);
    let iters: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(500);
    let step: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.1);

    let fs = 16_000;
    let dry = speech_shaped_noise(3 * fs as usize, fs, 11);
    let room = RoomSpec::new([6.0, 7.0, 3.0], [2.0, 3.0, 1.5], [3.2, 3.8, 1.4], 0.5, fs);
    let h = align_normalize_rir(&simulate_shoebox_rir(&room, 10_000)?)?;
    let wet = reverberate(&dry, &h)?.resized(dry.len());

    let cfg = Arc::new(StftConfig::default());
    let sc = SolverConfig {
        max_iters: iters,
        step_size: step,
        ..SolverConfig::default()
    };
    let start = Instant::now();
    let out = dereverb_oracle(&wet, &h, &cfg, &sc)?;

    let before = sisdr(&dry, &wet)?.value;
    let after = sisdr(&dry, &out.dry_estimate)?.value;
    println!("iterations      {}", out.iters_run);
    println!(
        "loss            {:.4e} -> {:.4e}",
        out.loss_trace[0].total, out.final_loss.total
    );
    println!("SISDR wet       {before:.2} dB");
    println!("SISDR estimate  {after:.2} dB ({:+.2} dB)", after - before);
    println!("elapsed         {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
