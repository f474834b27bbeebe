//! Draws a Polack RIR from weak room parameters and writes it as a WAV file.
//!
//! `cargo run --release --example synth_rir -- [rt60] [out.wav]`

use reverb_match::cli::wav::{write_wav, WavFormat};
use reverb_match::{synth_polack_rir, PolackParams};

fn main() -> reverb_match::Result<()> {
    let mut args = std::env::args().skip(1);
    let rt60: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let out = args.next().unwrap_or_else(|| "polack_rir.wav".into());

    // Known RT60 plus a room of 100 m^3 with 145 m^2 of walls.
    let p = PolackParams::from_rt60(rt60, 16_000, 7).with_room(100.0, 145.0);
    let h = synth_polack_rir(&p)?;

    println!("decay constant tau  {:.2} samples", p.tau()?);
    println!("tail starts at      {} samples", p.tail_start()?);
    println!("length              {} samples", h.len());
    let late: f64 = h
        .samples
        .iter()
        .skip(p.tail_start()? + 1)
        .map(|x| x * x)
        .sum();
    println!("tail energy         {late:.4e}");

    write_wav(&out, &h.to_waveform(), WavFormat::Float32)?;
    println!("wrote {out}");
    Ok(())
}
