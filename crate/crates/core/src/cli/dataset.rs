//! Simulated dry/wet/RIR dataset generation.
//!
//! Rooms are drawn uniformly from `[5, 10] x [5, 10] x [2.5, 4]` m with RT60 in
//! `[0.2, 1.0]` s. For each RIR the source-microphone distance is uniform in
//! `[0.75, 2.5]` m and both points keep 0.5 m from every wall. RIRs are
//! aligned on their direct path and normalized to a unit peak.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::wav::{read_wav, write_wav, WavFormat};
use crate::error::{Error, Result};
use crate::reverb::{
    align_normalize_rir, default_rir_len, estimate_polack_sigma, mixing_time, reverberate,
    simulate_shoebox_rir, RoomSpec, SPEED_OF_SOUND,
};
use crate::signal::Waveform;

pub const ROOM_X_RANGE: (f64, f64) = (5.0, 10.0);
pub const ROOM_Y_RANGE: (f64, f64) = (5.0, 10.0);
pub const ROOM_Z_RANGE: (f64, f64) = (2.5, 4.0);
pub const RT60_RANGE: (f64, f64) = (0.2, 1.0);
pub const DISTANCE_RANGE: (f64, f64) = (0.75, 2.5);
pub const WALL_CLEARANCE: f64 = 0.5;
/// Length of synthetic dry excerpts (about 3 s at 16 kHz).
pub const DRY_EXCERPT_LEN: usize = 49_151;

const PLACEMENT_RETRIES: usize = 1000;

/// Sampled geometry of one dataset record, before any simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDraw {
    pub index: usize,
    pub room_index: usize,
    pub dims: [f64; 3],
    pub rt60: f64,
    pub source: [f64; 3],
    pub mic: [f64; 3],
    pub seed: u64,
}

impl RecordDraw {
    pub fn distance(&self) -> f64 {
        self.source
            .iter()
            .zip(&self.mic)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn room(&self, sample_rate: u32) -> RoomSpec {
        RoomSpec::new(self.dims, self.source, self.mic, self.rt60, sample_rate)
    }
}

/// One line of the JSON-lines manifest. Paths are relative to the output
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifestRecord {
    pub dry_path: String,
    pub wet_path: String,
    pub rir_path: String,
    pub rt60: f64,
    /// Polack σ fitted to the aligned RIR tail.
    pub sigma: f64,
    pub volume: f64,
    pub area: f64,
    pub src_mic_distance: f64,
    pub seed: u64,
    pub room_index: usize,
    pub dims: [f64; 3],
    pub source: [f64; 3],
    pub mic: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub n_rooms: usize,
    pub n_rirs: usize,
    pub out_dir: PathBuf,
    /// Dry WAVs to draw from; synthetic speech-shaped noise when `None`.
    pub dry_dir: Option<PathBuf>,
    pub seed: u64,
    pub sample_rate: u32,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

/// Draws room geometry, RT60 and source/microphone placements.
/// RIR `i` belongs to room `i % n_rooms`.
pub fn sample_records(n_rooms: usize, n_rirs: usize, seed: u64) -> Result<Vec<RecordDraw>> {
    if n_rooms == 0 {
        return Err(Error::InvalidInput("need at least one room".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rooms: Vec<([f64; 3], f64)> = (0..n_rooms)
        .map(|_| {
            let dims = [
                uniform(&mut rng, ROOM_X_RANGE),
                uniform(&mut rng, ROOM_Y_RANGE),
                uniform(&mut rng, ROOM_Z_RANGE),
            ];
            (dims, uniform(&mut rng, RT60_RANGE))
        })
        .collect();

    (0..n_rirs)
        .map(|index| {
            let room_index = index % n_rooms;
            let (dims, rt60) = rooms[room_index];
            let record_seed = splitmix64(seed ^ splitmix64(index as u64));
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
            let (source, mic) = place(&mut rng, &dims).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "could not place source and microphone in room {dims:?} after {PLACEMENT_RETRIES} tries"
                ))
            })?;
            Ok(RecordDraw { index, room_index, dims, rt60, source, mic, seed: record_seed })
        })
        .collect()
}

fn place(rng: &mut ChaCha8Rng, dims: &[f64; 3]) -> Option<([f64; 3], [f64; 3])> {
    let inside = |p: &[f64; 3]| {
        p.iter()
            .zip(dims)
            .all(|(x, l)| *x >= WALL_CLEARANCE && *x <= l - WALL_CLEARANCE)
    };
    for _ in 0..PLACEMENT_RETRIES {
        let mic = [
            uniform(rng, (WALL_CLEARANCE, dims[0] - WALL_CLEARANCE)),
            uniform(rng, (WALL_CLEARANCE, dims[1] - WALL_CLEARANCE)),
            uniform(rng, (WALL_CLEARANCE, dims[2] - WALL_CLEARANCE)),
        ];
        let dist = uniform(rng, DISTANCE_RANGE);
        let dir: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let source = [0, 1, 2].map(|i| mic[i] + dist * dir[i] / norm);
        if inside(&source) {
            return Some((source, mic));
        }
    }
    None
}

/// Amplitude-modulated, band-shaped Gaussian noise with pauses, used as a
/// stand-in for dry speech.
pub fn speech_shaped_noise(len: usize, sample_rate: u32, seed: u64) -> Waveform {
    let fs = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Band shaping: one-pole high-pass near 100 Hz followed by two one-pole
    // low-passes near 1.5 kHz.
    let hp = (-2.0 * std::f64::consts::PI * 100.0 / fs).exp();
    let lp = (-2.0 * std::f64::consts::PI * 1500.0 / fs).exp();
    let (mut prev_in, mut prev_hp, mut lp1, mut lp2) = (0.0, 0.0, 0.0, 0.0);
    let mut shaped = Vec::with_capacity(len);
    for _ in 0..len {
        let x: f64 = rng.sample(StandardNormal);
        let h = hp * (prev_hp + x - prev_in);
        prev_in = x;
        prev_hp = h;
        lp1 = lp * lp1 + (1.0 - lp) * h;
        lp2 = lp * lp2 + (1.0 - lp) * lp1;
        shaped.push(lp2);
    }

    // Syllable-like bursts of 80-250 ms separated by 30-200 ms pauses.
    let mut env = vec![0.0; len];
    let mut pos = (rng.random_range(0.0..0.1) * fs) as usize;
    while pos < len {
        let dur = (rng.random_range(0.08..0.25) * fs) as usize;
        let gain = rng.random_range(0.4..1.0);
        for i in 0..dur.min(len - pos) {
            env[pos + i] = gain * (std::f64::consts::PI * i as f64 / dur as f64).sin();
        }
        pos += dur + (rng.random_range(0.03..0.2) * fs) as usize;
    }

    let mut samples: Vec<f64> = shaped.iter().zip(&env).map(|(x, e)| x * e).collect();
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|x| *x *= 0.5 / peak);
    }
    Waveform {
        samples,
        sample_rate,
    }
}

fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no .wav files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

/// Generates RIRs, dry and wet signals plus `manifest.jsonl` under
/// `opts.out_dir`. Returns the manifest path.
pub fn gen_dataset(opts: &DatasetOptions) -> Result<PathBuf> {
    let draws = sample_records(opts.n_rooms, opts.n_rirs, opts.seed)?;
    let dry_files = opts.dry_dir.as_deref().map(list_wavs).transpose()?;
    for sub in ["rir", "dry", "wet"] {
        fs::create_dir_all(opts.out_dir.join(sub))?;
    }
    let fs_hz = opts.sample_rate;

    let mut lines = Vec::with_capacity(draws.len());
    for draw in &draws {
        let room = draw.room(fs_hz);
        let len = default_rir_len(draw.rt60, fs_hz) + room.direct_path_index();
        let rir = align_normalize_rir(&simulate_shoebox_rir(&room, len)?)?;

        let mut rng = ChaCha8Rng::seed_from_u64(draw.seed);
        let dry = match &dry_files {
            Some(files) => {
                let w = read_wav(&files[rng.random_range(0..files.len())])?;
                if w.sample_rate != fs_hz {
                    return Err(Error::InvalidInput(format!(
                        "dry file is {} Hz, dataset is {fs_hz} Hz",
                        w.sample_rate
                    )));
                }
                w
            }
            None => speech_shaped_noise(DRY_EXCERPT_LEN, fs_hz, rng.random()),
        };
        let wet = reverberate(&dry, &rir)?;

        let name = format!("{:06}.wav", draw.index);
        let rel = |sub: &str| format!("{sub}/{name}");
        write_wav(
            opts.out_dir.join(rel("rir")),
            &rir.to_waveform(),
            WavFormat::Float32,
        )?;
        write_wav(opts.out_dir.join(rel("dry")), &dry, WavFormat::Float32)?;
        write_wav(opts.out_dir.join(rel("wet")), &wet, WavFormat::Float32)?;

        let volume = room.volume();
        let area = room.wall_area();
        let n_m = mixing_time(volume, area, fs_hz as f64, SPEED_OF_SOUND)?;
        let record = DatasetManifestRecord {
            dry_path: rel("dry"),
            wet_path: rel("wet"),
            rir_path: rel("rir"),
            rt60: draw.rt60,
            sigma: estimate_polack_sigma(&rir, draw.rt60, 2 * n_m.round() as usize),
            volume,
            area,
            src_mic_distance: draw.distance(),
            seed: draw.seed,
            room_index: draw.room_index,
            dims: draw.dims,
            source: draw.source,
            mic: draw.mic,
        };
        lines.push(serde_json::to_string(&record).map_err(|e| Error::Format(e.to_string()))?);
    }

    let manifest = opts.out_dir.join("manifest.jsonl");
    let mut f = fs::File::create(&manifest)?;
    for line in lines {
        writeln!(f, "{line}")?;
    }
    Ok(manifest)
}

/// Reads a JSON-lines manifest.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetManifestRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Format(e.to_string())))
        .collect()
}
