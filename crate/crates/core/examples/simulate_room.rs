//! Image-source RIR of a shoebox room, aligned and normalized, with its
//! measured decay time.
//!
//! `cargo run --release --example simulate_room`

use reverb_match::reverb::default_rir_len;
use reverb_match::{align_normalize_rir, simulate_shoebox_rir, RoomSpec};

fn main() -> reverb_match::Result<()> {
    let fs = 16_000;
    let room = RoomSpec::new([6.0, 7.0, 3.0], [2.0, 3.0, 1.5], [3.2, 3.8, 1.4], 0.5, fs);
    println!(
        "volume {:.1} m^3, wall area {:.1} m^2",
        room.volume(),
        room.wall_area()
    );
    println!(
        "wall reflection coefficient {:.3}",
        room.reflection_coefficient()
    );
    println!("reflection order {}", room.effective_max_order());
    println!("direct path at sample {}", room.direct_path_index());

    let raw = simulate_shoebox_rir(&room, default_rir_len(0.5, fs) + room.direct_path_index())?;
    let h = align_normalize_rir(&raw)?;
    println!(
        "aligned peak {} at index {}",
        h.samples[h.peak_index()],
        h.peak_index()
    );
    println!(
        "T20 estimate {:.3} s (target 0.5 s)",
        t20(&h.samples, fs as f64)
    );
    Ok(())
}

/// Reverberation time from the -5..-25 dB span of the Schroeder decay curve.
fn t20(h: &[f64], fs: f64) -> f64 {
    let mut edc: Vec<f64> = h
        .iter()
        .rev()
        .scan(0.0, |acc, x| {
            *acc += x * x;
            Some(*acc)
        })
        .collect();
    edc.reverse();
    let db = |i: usize| 10.0 * (edc[i] / edc[0]).log10();
    let first = (0..h.len()).find(|&i| db(i) <= -5.0).unwrap();
    let last = (0..h.len()).find(|&i| db(i) <= -25.0).unwrap();
    3.0 * (last - first) as f64 / fs
}
