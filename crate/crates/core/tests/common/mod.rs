//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use reverb_match::{Spectrogram, StftConfig, Waveform};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.sample(StandardNormal)).collect()
}

pub fn complex_gaussian(len: usize, seed: u64) -> Vec<Complex64> {
    let mut r = rng(seed);
    (0..len)
        .map(|_| Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)))
        .collect()
}

pub fn noise_wave(len: usize, seed: u64) -> Waveform {
    Waveform::new(gaussian(len, seed), 16_000).unwrap()
}

/// Decaying random RIR of `len` samples with a unit first tap.
pub fn random_rir(len: usize, seed: u64) -> reverb_match::Rir {
    let mut h = gaussian(len, seed);
    let scale = len as f64 / 5.0;
    for (n, x) in h.iter_mut().enumerate() {
        *x *= 0.3 * (-(n as f64) / scale).exp();
    }
    h[0] = 1.0;
    reverb_match::Rir::new(h, 16_000).unwrap()
}

/// O(n m) linear convolution.
pub fn direct_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Naive O(N^2) DFT.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| {
                    v * Complex64::from_polar(1.0, -2.0 * PI * (k * i % n) as f64 / n as f64)
                })
                .sum()
        })
        .collect()
}

/// Window cross-term by its defining sum.
pub fn direct_w(cfg: &StftConfig, f: usize, fp: usize, m: isize) -> Complex64 {
    let n_len = cfg.window_len() as isize;
    let big_f = cfg.fft_size() as f64;
    let (ws, wa) = (cfg.synthesis_window(), cfg.analysis_window());
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..n_len {
        let k = n + m;
        if k < 0 || k >= n_len {
            continue;
        }
        let phase = 2.0 * PI * ((fp as f64) * k as f64 - (f as f64) * n as f64) / big_f;
        acc += Complex64::from_polar(ws[k as usize] * wa[n as usize], phase);
    }
    acc / big_f
}

/// CTF coefficient `H[f, f', t']` by its defining double sum.
pub fn direct_h(cfg: &StftConfig, h: &[f64], f: usize, fp: usize, t_lag: isize) -> Complex64 {
    let n_len = cfg.window_len() as isize;
    let l = cfg.hop() as isize;
    let mut acc = Complex64::new(0.0, 0.0);
    for m in (-n_len + 1)..n_len {
        let idx = t_lag * l - m;
        if idx < 0 || idx >= h.len() as isize || h[idx as usize] == 0.0 {
            continue;
        }
        acc += direct_w(cfg, f, fp, m) * h[idx as usize];
    }
    acc
}

/// Banded convolution evaluated straight from its definition, with the band
/// offsets and lag range of `tensor`.
pub fn direct_banded(s: &Spectrogram, tensor: &reverb_match::CtfTensor) -> Vec<Complex64> {
    let bins = tensor.bins();
    let t_out = tensor.output_frames(s.frames());
    let k = tensor.lookahead() as isize;
    let mut out = vec![Complex64::new(0.0, 0.0); bins * t_out];
    for f in 0..bins {
        for t in 0..t_out as isize {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..tensor.bands() {
                let d = tensor.band_lo() + b as isize;
                let fp = (f as isize + d).rem_euclid(bins as isize) as usize;
                for t_lag in -k..tensor.frames() as isize {
                    let src = t - t_lag;
                    if src < 0 || src >= s.frames() as isize {
                        continue;
                    }
                    acc += tensor.get(f, d, t_lag) * s.get(fp, src as usize);
                }
            }
            out[f * t_out + t as usize] = acc;
        }
    }
    out
}

/// Relative L2 distance over the first `frames` frames of two bin-major
/// spectrograms.
pub fn rel_err_frames(a: &Spectrogram, b: &Spectrogram, frames: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for f in 0..a.bins() {
        for t in 0..frames {
            num += (a.get(f, t) - b.get(f, t)).norm_sqr();
            den += b.get(f, t).norm_sqr();
        }
    }
    (num / den).sqrt()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// RT60 from the Schroeder energy decay curve of `h[start..]`, fitting a line
/// to the decay between `hi_db` and `lo_db` (both negative).
pub fn schroeder_rt60(h: &[f64], start: usize, fs: f64, hi_db: f64, lo_db: f64) -> f64 {
    let tail = &h[start..];
    let mut edc = vec![0.0; tail.len()];
    let mut acc = 0.0;
    for i in (0..tail.len()).rev() {
        acc += tail[i] * tail[i];
        edc[i] = acc;
    }
    let total = edc[0];
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &e) in edc.iter().enumerate() {
        let db = 10.0 * (e / total).log10();
        if db <= hi_db && db >= lo_db {
            let x = i as f64 / fs;
            sx += x;
            sy += db;
            sxx += x * x;
            sxy += x * db;
            n += 1.0;
        }
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    -60.0 / slope
}
