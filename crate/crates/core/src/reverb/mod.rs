//! Room acoustics: decay constants, mixing time, Polack RIR synthesis,
//! alignment, time-domain reverberation and a shoebox image-source simulator.

mod shoebox;

pub use shoebox::{simulate_shoebox_rir, RoomSpec, ISM_HIGHPASS_HZ};

use std::f64::consts::LN_10;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;
/// Median Polack standard deviation used when none is given.
pub const DEFAULT_SIGMA: f64 = 0.02;
/// Delay between the direct path and the start of the late tail when no room
/// geometry is known.
pub const DEFAULT_MIXING_TIME_SECS: f64 = 0.020;

/// A room impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Set when the direct path sits at index 0 with unit amplitude.
    pub aligned: bool,
}

impl Rir {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput(
                "RIR must have at least one sample".into(),
            ));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite RIR sample at {i}")));
        }
        let mut rir = Self {
            samples,
            sample_rate,
            aligned: false,
        };
        rir.aligned = rir.check_aligned();
        Ok(rir)
    }

    /// Unit impulse of the given length.
    pub fn impulse(len: usize, sample_rate: u32) -> Self {
        let mut samples = vec![0.0; len.max(1)];
        samples[0] = 1.0;
        Self {
            samples,
            sample_rate,
            aligned: true,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index of the largest-magnitude sample (first one on ties).
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, x) in self.samples.iter().enumerate() {
            if x.abs() > self.samples[best].abs() {
                best = i;
            }
        }
        best
    }

    fn check_aligned(&self) -> bool {
        self.samples[0] == 1.0 && self.peak_index() == 0
    }

    pub fn to_waveform(&self) -> Waveform {
        Waveform {
            samples: self.samples.clone(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Exponential decay constant in samples: `RT60 * fs / (3 ln 10)`.
pub fn tau(rt60: f64, sample_rate: f64) -> Result<f64> {
    if !(rt60 > 0.0) || !rt60.is_finite() {
        return Err(Error::InvalidInput(format!(
            "RT60 must be positive, got {rt60}"
        )));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidInput("sample rate must be positive".into()));
    }
    Ok(rt60 * sample_rate / (3.0 * LN_10))
}

/// Mean-free-path based mixing time in samples: `4 V fs / (c A)`.
pub fn mixing_time(volume: f64, surface_area: f64, sample_rate: f64, c: f64) -> Result<f64> {
    for (name, v) in [
        ("volume", volume),
        ("surface area", surface_area),
        ("sample rate", sample_rate),
        ("speed of sound", c),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(4.0 * volume * sample_rate / (c * surface_area))
}

/// Default RIR length: enough for a 60 dB decay plus a 25% margin.
pub fn default_rir_len(rt60: f64, sample_rate: u32) -> usize {
    (1.25 * rt60 * sample_rate as f64).ceil() as usize
}

/// Weak acoustic description of a room, from which a Polack RIR is drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct PolackParams {
    pub rt60: f64,
    pub sigma: f64,
    pub volume: Option<f64>,
    pub surface_area: Option<f64>,
    /// Time in seconds between the direct path and the start of the late
    /// tail. Takes precedence over `volume`/`surface_area`.
    pub mixing_time_override: Option<f64>,
    pub sample_rate: u32,
    pub rir_len: usize,
    pub seed: u64,
}

impl PolackParams {
    /// Only the reverberation time is known: σ and the mixing time take their
    /// fixed defaults.
    pub fn from_rt60(rt60: f64, sample_rate: u32, seed: u64) -> Self {
        Self {
            rt60,
            sigma: DEFAULT_SIGMA,
            volume: None,
            surface_area: None,
            mixing_time_override: Some(DEFAULT_MIXING_TIME_SECS),
            sample_rate,
            rir_len: default_rir_len(rt60, sample_rate),
            seed,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Uses the room volume and wall area for the mixing time instead of the
    /// fixed default.
    pub fn with_room(mut self, volume: f64, surface_area: f64) -> Self {
        self.volume = Some(volume);
        self.surface_area = Some(surface_area);
        self.mixing_time_override = None;
        self
    }

    pub fn with_mixing_time(mut self, secs: f64) -> Self {
        self.mixing_time_override = Some(secs);
        self
    }

    pub fn with_rir_len(mut self, len: usize) -> Self {
        self.rir_len = len;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rt60 > 0.0) || !self.rt60.is_finite() {
            return Err(Error::InvalidInput(format!(
                "RT60 must be positive, got {}",
                self.rt60
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        for v in [self.volume, self.surface_area].into_iter().flatten() {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(
                    "volume and area must be positive".into(),
                ));
            }
        }
        match (self.mixing_time_override, self.volume, self.surface_area) {
            (Some(m), _, _) if !(m >= 0.0) => Err(Error::InvalidInput(format!(
                "mixing time must be non-negative, got {m}"
            ))),
            (Some(_), _, _) | (None, Some(_), Some(_)) => Ok(()),
            _ => Err(Error::InvalidInput(
                "mixing time needs either an override or both volume and surface area".into(),
            )),
        }
    }

    /// Mean free path `n_m` in samples. The late tail starts `2 n_m` after the
    /// direct path, so an override of `M` seconds maps to `n_m = M fs / 2`.
    pub fn mean_free_path_samples(&self) -> Result<f64> {
        self.validate()?;
        let fs = self.sample_rate as f64;
        match (self.mixing_time_override, self.volume, self.surface_area) {
            (Some(m), _, _) => Ok(m * fs / 2.0),
            (None, Some(v), Some(a)) => mixing_time(v, a, fs, SPEED_OF_SOUND),
            _ => unreachable!("validated above"),
        }
    }

    /// Last index of the silent gap after the direct path (`2 round(n_m)`).
    pub fn tail_start(&self) -> Result<usize> {
        Ok(2 * self.mean_free_path_samples()?.round() as usize)
    }

    pub fn tau(&self) -> Result<f64> {
        tau(self.rt60, self.sample_rate as f64)
    }
}

/// Draws an aligned Polack RIR: a unit direct path, silence up to `2 n_m`,
/// then the magnitude of seeded Gaussian noise under an exponential envelope
/// reaching -60 dB after RT60 seconds.
pub fn synth_polack_rir(p: &PolackParams) -> Result<Rir> {
    let gap = p.tail_start()?;
    if p.rir_len <= gap + 1 {
        return Err(Error::InvalidInput(format!(
            "RIR length {} leaves no room for a tail starting after sample {gap}",
            p.rir_len
        )));
    }
    let decay = 3.0 * LN_10 / (p.rt60 * p.sample_rate as f64);
    let normal = Normal::new(0.0, p.sigma)
        .map_err(|e| Error::InvalidInput(format!("invalid sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut samples = vec![0.0; p.rir_len];
    samples[0] = 1.0;
    for (n, h) in samples.iter_mut().enumerate().skip(gap + 1) {
        let b: f64 = normal.sample(&mut rng);
        *h = b.abs() * (-(n as f64) * decay).exp();
    }
    Ok(Rir {
        samples,
        sample_rate: p.sample_rate,
        aligned: true,
    })
}

/// Fits Polack's σ to the tail of an aligned RIR: the RMS of `h(n) e^{n / tau}`
/// over `tail_start < n < RT60 fs`.
pub fn estimate_polack_sigma(h: &Rir, rt60: f64, tail_start: usize) -> f64 {
    let decay = 3.0 * LN_10 / (rt60 * h.sample_rate as f64);
    let end = ((rt60 * h.sample_rate as f64) as usize).min(h.len());
    if tail_start + 1 >= end {
        return 0.0;
    }
    let sum: f64 = (tail_start + 1..end)
        .map(|n| (h.samples[n] * (n as f64 * decay).exp()).powi(2))
        .sum();
    (sum / (end - tail_start - 1) as f64).sqrt()
}

/// Drops everything before the strongest sample and scales it to 1.
pub fn align_normalize_rir(h: &Rir) -> Result<Rir> {
    let peak = h.peak_index();
    let amp = h.samples[peak];
    if amp == 0.0 {
        return Err(Error::InvalidInput("cannot align an all-zero RIR".into()));
    }
    let mut samples: Vec<f64> = h.samples[peak..].iter().map(|x| x / amp).collect();
    samples[0] = 1.0;
    Ok(Rir {
        samples,
        sample_rate: h.sample_rate,
        aligned: true,
    })
}

/// Full linear convolution `s * h` (length `len(s) + len(h) - 1`) via FFT.
pub fn reverberate(s: &Waveform, h: &Rir) -> Result<Waveform> {
    if s.sample_rate != h.sample_rate {
        return Err(Error::InvalidInput(format!(
            "sample rate mismatch: signal {} Hz, RIR {} Hz",
            s.sample_rate, h.sample_rate
        )));
    }
    if s.is_empty() {
        return Err(Error::InvalidInput(
            "cannot reverberate an empty signal".into(),
        ));
    }
    Ok(Waveform {
        samples: fft_convolve(&s.samples, &h.samples),
        sample_rate: s.sample_rate,
    })
}

pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(size, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|z| z.re * scale).collect()
}
