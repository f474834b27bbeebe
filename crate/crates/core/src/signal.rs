//! STFT analysis and synthesis.
//!
//! Spectra are two-sided: a frame of `N` samples yields `F = N` complex bins.
//! The signal is preceded by `N - L` zeros so that every sample is covered by
//! the full set of overlapping frames, and frame `t` starts at sample
//! `t * L - (N - L)`. Synthesis uses the canonical dual of the analysis window,
//! which makes `istft(stft(x)) == x` up to round-off for any hop that divides
//! the window length and keeps the frames overlapping.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Default analysis window length and FFT size.
pub const DEFAULT_WINDOW_LEN: usize = 512;
/// Default hop (50% overlap).
pub const DEFAULT_HOP: usize = 256;
/// Default sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Tolerance used to accept a window/hop pair as satisfying the COLA condition.
pub const COLA_TOLERANCE: f64 = 1e-12;

/// A mono, real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Truncates or zero-extends to `len` samples.
    pub fn resized(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Window and hop configuration shared by every time-frequency operation.
#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    window_len: usize,
    hop: usize,
    sample_rate: u32,
    analysis: Vec<f64>,
    synthesis: Vec<f64>,
}

impl StftConfig {
    /// Hann analysis window with its canonical dual as synthesis window.
    pub fn new(window_len: usize, hop: usize, sample_rate: u32) -> Result<Self> {
        if window_len == 0 || hop == 0 {
            return Err(Error::Config(
                "window length and hop must be positive".into(),
            ));
        }
        if !window_len.is_multiple_of(hop) {
            return Err(Error::Config(format!(
                "hop {hop} does not divide window length {window_len}"
            )));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        let analysis = hann(window_len);
        let synthesis = dual_window(&analysis, hop)?;
        let cfg = Self {
            window_len,
            hop,
            sample_rate,
            analysis,
            synthesis,
        };
        let dev = cfg.cola_deviation();
        if dev > COLA_TOLERANCE {
            return Err(Error::Config(format!(
                "COLA deviation {dev:e} exceeds tolerance"
            )));
        }
        Ok(cfg)
    }

    /// Window length `N`.
    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Hop size `L`.
    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Number of two-sided frequency bins `F` (equal to the window length).
    pub fn fft_size(&self) -> usize {
        self.window_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn analysis_window(&self) -> &[f64] {
        &self.analysis
    }

    pub fn synthesis_window(&self) -> &[f64] {
        &self.synthesis
    }

    /// Zeros inserted before the first sample.
    pub fn pad(&self) -> usize {
        self.window_len - self.hop
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        (len + self.window_len - self.hop).div_ceil(self.hop)
    }

    /// `max_n |sum_k w_s(n - kL) w_a(n - kL) - 1|`.
    pub fn cola_deviation(&self) -> f64 {
        (0..self.hop)
            .map(|n| {
                let s: f64 = (n..self.window_len)
                    .step_by(self.hop)
                    .map(|i| self.synthesis[i] * self.analysis[i])
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Default for StftConfig {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW_LEN, DEFAULT_HOP, DEFAULT_SAMPLE_RATE)
            .expect("default STFT configuration is valid")
    }
}

/// Builds a configuration (`make_stft_config`).
pub fn make_stft_config(window_len: usize, hop: usize, sample_rate: u32) -> Result<StftConfig> {
    StftConfig::new(window_len, hop, sample_rate)
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

fn dual_window(analysis: &[f64], hop: usize) -> Result<Vec<f64>> {
    let n = analysis.len();
    let peak = analysis.iter().fold(0.0f64, |m, w| m.max(w * w));
    let mut denom = vec![0.0; hop];
    for (i, w) in analysis.iter().enumerate() {
        denom[i % hop] += w * w;
    }
    if let Some(min) = denom.iter().copied().reduce(f64::min) {
        if min <= 1e-10 * peak {
            return Err(Error::Config(format!(
                "COLA unreachable: overlapped window energy vanishes (min {min:e}) for hop {hop}"
            )));
        }
    }
    Ok((0..n).map(|i| analysis[i] / denom[i % hop]).collect())
}

/// Complex `F x T` matrix stored bin-major: entry `(f, t)` lives at `f * T + t`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    data: Vec<Complex64>,
    bins: usize,
    frames: usize,
    config: Arc<StftConfig>,
}

impl Spectrogram {
    pub fn zeros(config: Arc<StftConfig>, frames: usize) -> Self {
        let bins = config.fft_size();
        Self {
            data: vec![Complex64::new(0.0, 0.0); bins * frames],
            bins,
            frames,
            config,
        }
    }

    pub fn from_data(config: Arc<StftConfig>, frames: usize, data: Vec<Complex64>) -> Result<Self> {
        let bins = config.fft_size();
        if frames == 0 {
            return Err(Error::Shape("spectrogram needs at least one frame".into()));
        }
        if data.len() != bins * frames {
            return Err(Error::Shape(format!(
                "expected {} entries for {bins}x{frames}, got {}",
                bins * frames,
                data.len()
            )));
        }
        Ok(Self {
            data,
            bins,
            frames,
            config,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn config(&self) -> &Arc<StftConfig> {
        &self.config
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, f: usize, t: usize) -> Complex64 {
        self.data[f * self.frames + t]
    }

    pub fn set(&mut self, f: usize, t: usize, v: Complex64) {
        self.data[f * self.frames + t] = v;
    }

    /// All frames of bin `f`.
    pub fn row(&self, f: usize) -> &[Complex64] {
        &self.data[f * self.frames..(f + 1) * self.frames]
    }

    pub fn row_mut(&mut self, f: usize) -> &mut [Complex64] {
        &mut self.data[f * self.frames..(f + 1) * self.frames]
    }

    /// Keeps the first `frames` frames, zero-extending if needed.
    pub fn with_frames(&self, frames: usize) -> Self {
        let mut out = Self::zeros(self.config.clone(), frames);
        let keep = frames.min(self.frames);
        for f in 0..self.bins {
            out.row_mut(f)[..keep].copy_from_slice(&self.row(f)[..keep]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn same_layout(&self, other: &Spectrogram) -> bool {
        self.bins == other.bins && self.frames == other.frames && self.config == other.config
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `sum conj(self) * other`.
    pub fn inner(&self, other: &Spectrogram) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Short-time Fourier transform with the padding convention described in the
/// module docs.
pub fn stft(x: &Waveform, cfg: &Arc<StftConfig>) -> Result<Spectrogram> {
    if x.is_empty() {
        return Err(Error::InvalidInput("cannot analyse an empty signal".into()));
    }
    let n = cfg.window_len();
    let hop = cfg.hop();
    let pad = cfg.pad() as isize;
    let frames = cfg.num_frames(x.len());
    let fft = FftPlanner::new().plan_fft_forward(n);
    let w = cfg.analysis_window();

    let mut out = Spectrogram::zeros(cfg.clone(), frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..frames {
        let start = (t * hop) as isize - pad;
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = start + i as isize;
            let s = if idx >= 0 && (idx as usize) < x.len() {
                x.samples[idx as usize]
            } else {
                0.0
            };
            *b = Complex64::new(s * w[i], 0.0);
        }
        fft.process(&mut buf);
        for (f, v) in buf.iter().enumerate() {
            out.data[f * frames + t] = *v;
        }
    }
    Ok(out)
}

/// Weighted overlap-add inverse of [`stft`], truncated or zero-extended to
/// `out_len` samples.
pub fn istft(spec: &Spectrogram, out_len: usize) -> Result<Waveform> {
    if out_len == 0 {
        return Err(Error::InvalidInput("output length must be positive".into()));
    }
    if !spec.is_finite() {
        return Err(Error::InvalidInput(
            "spectrogram contains non-finite values".into(),
        ));
    }
    let cfg = spec.config();
    let n = cfg.window_len();
    let hop = cfg.hop();
    let pad = cfg.pad();
    let frames = spec.frames();
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let ws = cfg.synthesis_window();
    let scale = 1.0 / n as f64;

    // Accumulate into the padded timeline, then drop the leading pad.
    let total = (frames - 1) * hop + n;
    let mut acc = vec![0.0; total.max(pad + out_len)];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..frames {
        for (f, b) in buf.iter_mut().enumerate() {
            *b = spec.data[f * frames + t];
        }
        ifft.process(&mut buf);
        let start = t * hop;
        for i in 0..n {
            acc[start + i] += buf[i].re * scale * ws[i];
        }
    }
    let samples = acc[pad..pad + out_len].to_vec();
    Ok(Waveform {
        samples,
        sample_rate: cfg.sample_rate(),
    })
}
