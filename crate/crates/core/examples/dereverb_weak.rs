//! Dereverberation when only the reverberation time is known: the model RIR
//! is a Polack draw. Passing `fit` as sigma uses the tail level fitted to the
//! true RIR instead of the default.
//!
//! `cargo run --release --example dereverb_weak -- [iters] [step] [sigma|fit]`

use std::sync::Arc;
use std::time::Instant;

use reverb_match::cli::dataset::speech_shaped_noise;
use reverb_match::reverb::{estimate_polack_sigma, DEFAULT_SIGMA};
use reverb_match::{
    align_normalize_rir, dereverb, reverberate, simulate_shoebox_rir, sisdr, PolackParams,
    RoomSpec, SolverConfig, StftConfig,
};

fn main() -> reverb_match::Result<()> {
    let mut args = std::env::args().skip(1);
    let iters: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(500);
    let step: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.1);
    let sigma_arg = args.next();

    let fs = 16_000;
    let dry = speech_shaped_noise(3 * fs as usize, fs, 11);
    let room = RoomSpec::new([6.0, 7.0, 3.0], [2.0, 3.0, 1.5], [3.2, 3.8, 1.4], 0.5, fs);
    let h = align_normalize_rir(&simulate_shoebox_rir(&room, 10_000)?)?;
    let wet = reverberate(&dry, &h)?.resized(dry.len());

    let mut p = PolackParams::from_rt60(0.5, fs, 3);
    let sigma = match sigma_arg.as_deref() {
        Some("fit") => estimate_polack_sigma(&h, 0.5, p.tail_start()?),
        Some(s) => s.parse().unwrap_or(DEFAULT_SIGMA),
        None => DEFAULT_SIGMA,
    };
    p = p.with_sigma(sigma);

    let cfg = Arc::new(StftConfig::default());
    let sc = SolverConfig {
        max_iters: iters,
        step_size: step,
        ..SolverConfig::default()
    };
    let start = Instant::now();
    let out = dereverb(&wet, &p, &cfg, &sc)?;

    let before = sisdr(&dry, &wet)?.value;
    let after = sisdr(&dry, &out.dry_estimate)?.value;
    println!("sigma           {sigma:.4}");
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
