//! Generates a small simulated dataset and summarizes its manifest.
//!
//! `cargo run --release --example gen_dataset -- [out_dir]`

use reverb_match::cli::dataset::{gen_dataset, read_manifest, DatasetOptions};

fn main() -> reverb_match::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "dataset".into());
    let opts = DatasetOptions {
        n_rooms: 3,
        n_rirs: 6,
        out_dir: out_dir.into(),
        dry_dir: None,
        seed: 1,
        sample_rate: 16_000,
    };
    let manifest = gen_dataset(&opts)?;
    println!("manifest: {}", manifest.display());
    for r in read_manifest(&manifest)? {
        println!(
            "room {} {:.2} x {:.2} x {:.2} m, RT60 {:.2} s, sigma {:.3}, distance {:.2} m -> {}",
            r.room_index,
            r.dims[0],
            r.dims[1],
            r.dims[2],
            r.rt60,
            r.sigma,
            r.src_mic_distance,
            r.wet_path
        );
    }
    Ok(())
}
