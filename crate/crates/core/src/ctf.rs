//! Cross-band convolutive transfer functions.
//!
//! A time-domain convolution `y = s * h` becomes, in the STFT domain, a sum
//! over neighbouring frequency bands and past frames:
//!
//! ```text
//! Y[f, t] = sum_{f'} sum_{t'} H[f, f', t'] S[f', t - t']
//! H[f, f', t'] = sum_{m = -N+1}^{N-1} h(t' L - m) W[f, f'](m)
//! W[f, f'](m)  = 1/F sum_{n=0}^{N-1} w_s(n + m) w_a(n) exp(j 2 pi (f'(n + m) - f n) / F)
//! ```
//!
//! With the frame convention of [`crate::signal`] an analysis frame of `y`
//! also overlaps the next `ceil(N / L) - 1` synthesis frames of `s`, so the
//! exact identity needs a few negative lags `t' < 0`. Tensors store those
//! look-ahead lags in front of the causal ones.
//!
//! Band offsets `d = f' - f` wrap modulo `F`. Once `2 F' + 1 >= F` every bin is
//! reached exactly once and the model is the exact full-band convolution.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::reverb::Rir;
use crate::signal::{Spectrogram, StftConfig};

/// Number of cross-bands kept on each side in the banded model.
pub const DEFAULT_CROSSBANDS: usize = 4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Band offsets covered by a half-width: `(lowest offset, count)`.
pub fn band_offsets(fft_size: usize, half_width: usize) -> (isize, usize) {
    if 2 * half_width + 1 >= fft_size {
        (-((fft_size / 2) as isize), fft_size)
    } else {
        (-(half_width as isize), 2 * half_width + 1)
    }
}

/// Number of look-ahead frames needed by the exact model.
pub fn lookahead_frames(cfg: &StftConfig) -> usize {
    (cfg.window_len() - 1) / cfg.hop()
}

/// Number of causal CTF frames for an RIR of `rir_len` samples.
pub fn ctf_frames(cfg: &StftConfig, rir_len: usize) -> usize {
    (rir_len + cfg.window_len() - 1).div_ceil(cfg.hop())
}

/// The window cross-term `W[f, f'](m)`.
///
/// Only the `f`-independent part `V(d, m) = W[f, f + d](m) exp(-j 2 pi (f + d) m / F)`
/// is stored; [`CrossWindowTable::get`] restores the phase. `|W|` therefore
/// depends on the band offset and the lag only.
#[derive(Debug, Clone)]
pub struct CrossWindowTable {
    config: Arc<StftConfig>,
    half_width: usize,
    /// `V(d mod F, m)` at `(m + N - 1) * F + (d mod F)`.
    base: Vec<Complex64>,
}

impl CrossWindowTable {
    pub fn new(cfg: &Arc<StftConfig>, half_width: usize) -> Result<Self> {
        let f_size = cfg.fft_size();
        if half_width >= f_size {
            return Err(Error::Config(format!(
                "cross-band half width {half_width} must be below the FFT size {f_size}"
            )));
        }
        let n = cfg.window_len();
        let wa = cfg.analysis_window();
        let ws = cfg.synthesis_window();
        let ifft = FftPlanner::new().plan_fft_inverse(f_size);
        let scale = 1.0 / f_size as f64;

        let mut base = vec![ZERO; (2 * n - 1) * f_size];
        let mut buf = vec![ZERO; f_size];
        for mi in 0..2 * n - 1 {
            let m = mi as isize - (n as isize - 1);
            buf.fill(ZERO);
            // p_m(n) = w_s(n + m) w_a(n) over the overlap of both supports.
            let lo = (-m).max(0) as usize;
            let hi = (n as isize - m).min(n as isize) as usize;
            for i in lo..hi {
                buf[i] = Complex64::new(ws[(i as isize + m) as usize] * wa[i] * scale, 0.0);
            }
            // Unnormalized inverse transform: sum_n p_m(n) exp(+j 2 pi d n / F).
            ifft.process(&mut buf);
            base[mi * f_size..(mi + 1) * f_size].copy_from_slice(&buf);
        }
        Ok(Self {
            config: cfg.clone(),
            half_width,
            base,
        })
    }

    pub fn config(&self) -> &Arc<StftConfig> {
        &self.config
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Band offsets reachable through this table.
    pub fn offsets(&self) -> impl Iterator<Item = isize> {
        let (lo, count) = band_offsets(self.config.fft_size(), self.half_width);
        (0..count as isize).map(move |i| lo + i)
    }

    /// `V(d, m)`; zero for `|m| >= N`.
    pub fn base(&self, d: isize, m: isize) -> Complex64 {
        let n = self.config.window_len() as isize;
        if m.abs() >= n {
            return ZERO;
        }
        let f_size = self.config.fft_size() as isize;
        let mi = (m + n - 1) as usize;
        self.base[mi * f_size as usize + d.rem_euclid(f_size) as usize]
    }

    /// `W[f, (f + d) mod F](m)`.
    ///
    /// Panics if `|d|` exceeds the half width.
    pub fn get(&self, f: usize, d: isize, m: isize) -> Complex64 {
        assert!(
            d.unsigned_abs() <= self.half_width,
            "band offset {d} outside half width {}",
            self.half_width
        );
        let f_size = self.config.fft_size() as isize;
        let fp = (f as isize + d).rem_euclid(f_size);
        let phase =
            2.0 * std::f64::consts::PI * ((fp * m).rem_euclid(f_size)) as f64 / f_size as f64;
        self.base(d, m) * Complex64::from_polar(1.0, phase)
    }

    /// `sum_m |W[., d](m)|^2`.
    pub fn band_energy(&self, d: isize) -> f64 {
        let n = self.config.window_len() as isize;
        (-n + 1..n).map(|m| self.base(d, m).norm_sqr()).sum()
    }

    /// Fraction of the total cross-term energy carried by offsets `|d| <= k`.
    pub fn energy_share(&self, k: usize) -> f64 {
        let f_size = self.config.fft_size() as isize;
        let (lo, count) = band_offsets(f_size as usize, f_size as usize - 1);
        let total: f64 = (lo..lo + count as isize).map(|d| self.band_energy(d)).sum();
        let near: f64 = (lo..lo + count as isize)
            .filter(|d| d.unsigned_abs() <= k)
            .map(|d| self.band_energy(d))
            .sum();
        near / total
    }
}

/// Builds the window cross-term table (`cross_window_table`).
pub fn cross_window_table(cfg: &Arc<StftConfig>, half_width: usize) -> Result<CrossWindowTable> {
    CrossWindowTable::new(cfg, half_width)
}

/// Banded STFT-domain representation of an RIR.
///
/// Stored as `[f][band][lag]`, where band `b` is the offset `d = band_lo + b`
/// and lag `l` is the frame delay `t' = l - lookahead`.
#[derive(Debug, Clone)]
pub struct CtfTensor {
    data: Vec<Complex64>,
    bins: usize,
    half_width: usize,
    band_lo: isize,
    bands: usize,
    lookahead: usize,
    frames: usize,
    config: Arc<StftConfig>,
}

impl CtfTensor {
    /// Wraps raw coefficients laid out as `[f][band][lag]` with
    /// `lookahead + frames` lags.
    pub fn from_raw(
        config: Arc<StftConfig>,
        half_width: usize,
        lookahead: usize,
        frames: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        let bins = config.fft_size();
        if half_width >= bins {
            return Err(Error::Config(format!(
                "half width {half_width} must be below {bins}"
            )));
        }
        if frames == 0 {
            return Err(Error::Shape(
                "CTF tensor needs at least one causal frame".into(),
            ));
        }
        let (band_lo, bands) = band_offsets(bins, half_width);
        let expect = bins * bands * (lookahead + frames);
        if data.len() != expect {
            return Err(Error::Shape(format!(
                "expected {expect} coefficients, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput(
                "CTF tensor contains non-finite values".into(),
            ));
        }
        Ok(Self {
            data,
            bins,
            half_width,
            band_lo,
            bands,
            lookahead,
            frames,
            config,
        })
    }

    pub fn config(&self) -> &Arc<StftConfig> {
        &self.config
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn band_lo(&self) -> isize {
        self.band_lo
    }

    /// Causal frames `T_h`.
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn lookahead(&self) -> usize {
        self.lookahead
    }

    /// Total stored lags, look-ahead included.
    pub fn lags(&self) -> usize {
        self.lookahead + self.frames
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Coefficients of all lags for bin `f` and band index `b`.
    pub fn taps(&self, f: usize, b: usize) -> &[Complex64] {
        let lags = self.lags();
        let start = (f * self.bands + b) * lags;
        &self.data[start..start + lags]
    }

    /// `H[f, (f + d) mod F, t']`, zero outside the stored range.
    pub fn get(&self, f: usize, d: isize, t_lag: isize) -> Complex64 {
        let b = d - self.band_lo;
        let l = t_lag + self.lookahead as isize;
        if b < 0 || b >= self.bands as isize || l < 0 || l >= self.lags() as isize {
            return ZERO;
        }
        self.taps(f, b as usize)[l as usize]
    }

    /// Source bin for output bin `f` and band index `b`.
    pub fn source_bin(&self, f: usize, b: usize) -> usize {
        (f as isize + self.band_lo + b as isize).rem_euclid(self.bins as isize) as usize
    }

    /// Frame count of `ctf_convolve` output for `input_frames` input frames.
    pub fn output_frames(&self, input_frames: usize) -> usize {
        input_frames + self.frames - 1
    }

    /// Writes the `CTF1` little-endian binary dump. The lag axis holds the
    /// look-ahead lags first; their count is `(N - 1) / L`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"CTF1")?;
        for v in [
            self.bins,
            self.bands,
            self.lags(),
            self.config.window_len(),
            self.config.hop(),
        ] {
            let v =
                u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
            w.write_all(&v.to_le_bytes())?;
        }
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a `CTF1` dump. `N`, `L` and `F` must agree with `config`.
    pub fn read_from<R: Read>(mut r: R, config: Arc<StftConfig>) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CTF1" {
            return Err(Error::Format("bad magic, expected CTF1".into()));
        }
        let mut header = [0usize; 5];
        for h in header.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *h = u32::from_le_bytes(b) as usize;
        }
        let [bins, bands, lags, n, hop] = header;
        if bins != config.fft_size() || n != config.window_len() || hop != config.hop() {
            return Err(Error::Format(format!(
                "dump is for F={bins} N={n} L={hop}, config has F={} N={} L={}",
                config.fft_size(),
                config.window_len(),
                config.hop()
            )));
        }
        let half_width = if bands >= bins {
            bins - 1
        } else {
            (bands.max(1) - 1) / 2
        };
        if band_offsets(bins, half_width).1 != bands {
            return Err(Error::Format(format!("invalid band count {bands}")));
        }
        let lookahead = lookahead_frames(&config);
        if lags <= lookahead {
            return Err(Error::Format(format!(
                "lag count {lags} leaves no causal frame"
            )));
        }
        let mut data = Vec::with_capacity(bins * bands * lags);
        let mut buf = [0u8; 16];
        for _ in 0..bins * bands * lags {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            data.push(Complex64::new(re, im));
        }
        Self::from_raw(config, half_width, lookahead, lags - lookahead, data)
    }
}

/// Banded CTF tensor of an RIR (`ctf_from_rir`).
pub fn ctf_from_rir(h: &Rir, cfg: &Arc<StftConfig>, half_width: usize) -> Result<CtfTensor> {
    let table = CrossWindowTable::new(cfg, half_width)?;
    ctf_from_rir_with_table(h, &table)
}

/// Same as [`ctf_from_rir`] but reuses a precomputed window table.
pub fn ctf_from_rir_with_table(h: &Rir, table: &CrossWindowTable) -> Result<CtfTensor> {
    let cfg = table.config();
    if h.sample_rate != cfg.sample_rate() {
        return Err(Error::InvalidInput(format!(
            "RIR sample rate {} differs from STFT sample rate {}",
            h.sample_rate,
            cfg.sample_rate()
        )));
    }
    let f_size = cfg.fft_size();
    let n = cfg.window_len() as isize;
    let hop = cfg.hop() as isize;
    let n_h = h.len() as isize;
    let lookahead = lookahead_frames(cfg);
    let frames = ctf_frames(cfg, h.len());
    let lags = lookahead + frames;
    let (band_lo, bands) = band_offsets(f_size, table.half_width());
    let ifft = FftPlanner::new().plan_fft_inverse(f_size);

    let mut data = vec![ZERO; f_size * bands * lags];
    let mut folded = vec![ZERO; f_size];
    for b in 0..bands {
        let d = band_lo + b as isize;
        for l in 0..lags {
            let t_lag = l as isize - lookahead as isize;
            let center = t_lag * hop;
            // h(t'L - m) is nonzero for t'L - N_h < m <= t'L.
            let m_lo = (-n + 1).max(center - n_h + 1);
            let m_hi = (n - 1).min(center);
            if m_lo > m_hi {
                continue;
            }
            // H[f, f + d, t'] = sum_m h(t'L - m) V(d, m) exp(j 2 pi (f + d) m / F):
            // fold m modulo F and take one inverse transform over the folded lag.
            folded.fill(ZERO);
            for m in m_lo..=m_hi {
                let r = m.rem_euclid(f_size as isize) as usize;
                folded[r] += table.base(d, m) * h.samples[(center - m) as usize];
            }
            ifft.process(&mut folded);
            for f in 0..f_size {
                let k = (f as isize + d).rem_euclid(f_size as isize) as usize;
                data[(f * bands + b) * lags + l] = folded[k];
            }
        }
    }
    CtfTensor::from_raw(cfg.clone(), table.half_width(), lookahead, frames, data)
}

fn check_compatible(s: &Spectrogram, h: &CtfTensor) -> Result<()> {
    if s.config() != h.config() {
        return Err(Error::Config(
            "spectrogram and CTF tensor use different STFT configurations".into(),
        ));
    }
    Ok(())
}

/// Banded cross-band convolution (`ctf_convolve`). Output has
/// `T_s + T_h - 1` frames.
pub fn ctf_convolve(s: &Spectrogram, h: &CtfTensor) -> Result<Spectrogram> {
    check_compatible(s, h)?;
    let t_s = s.frames() as isize;
    let t_out = h.output_frames(s.frames());
    let mut out = Spectrogram::zeros(s.config().clone(), t_out);
    let k = h.lookahead() as isize;
    for f in 0..h.bins() {
        let row = out.row_mut(f);
        for b in 0..h.bands() {
            let src = s.row(h.source_bin(f, b));
            for (l, &c) in h.taps(f, b).iter().enumerate() {
                if c == ZERO {
                    continue;
                }
                let shift = l as isize - k;
                let lo = shift.max(0);
                let hi = (shift + t_s).min(t_out as isize);
                for t in lo..hi {
                    row[t as usize] += c * src[(t - shift) as usize];
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint (conjugate transpose) of [`ctf_convolve`] for inputs of
/// `input_frames` frames: `<ctf_convolve(S, H), Z> = <S, ctf_adjoint(Z, H)>`.
/// `z` may have fewer frames than the forward output; missing frames count as
/// zero.
pub fn ctf_adjoint(z: &Spectrogram, h: &CtfTensor, input_frames: usize) -> Result<Spectrogram> {
    check_compatible(z, h)?;
    if input_frames == 0 {
        return Err(Error::Shape("input frame count must be positive".into()));
    }
    let t_z = z.frames() as isize;
    let mut out = Spectrogram::zeros(z.config().clone(), input_frames);
    let k = h.lookahead() as isize;
    for f in 0..h.bins() {
        let zrow = z.row(f);
        for b in 0..h.bands() {
            let dst_bin = h.source_bin(f, b);
            let dst = out.row_mut(dst_bin);
            for (l, &c) in h.taps(f, b).iter().enumerate() {
                if c == ZERO {
                    continue;
                }
                let c = c.conj();
                let shift = l as isize - k;
                // dst[n] += conj(c) z[n + shift] for valid n and n + shift.
                let lo = (-shift).max(0);
                let hi = (input_frames as isize).min(t_z - shift);
                for n in lo..hi {
                    dst[n as usize] += c * zrow[(n + shift) as usize];
                }
            }
        }
    }
    Ok(out)
}

/// Exact full-band convolution summing every source band `f' = 0..F-1`
/// (`full_ctf_convolve`). Serves as the reference for the banded model.
pub fn full_ctf_convolve(s: &Spectrogram, h: &Rir, cfg: &Arc<StftConfig>) -> Result<Spectrogram> {
    if s.config() != cfg {
        return Err(Error::Config(
            "spectrogram does not use the given STFT configuration".into(),
        ));
    }
    let full = ctf_from_rir(h, cfg, cfg.fft_size() - 1)?;
    let f_size = cfg.fft_size();
    let k = full.lookahead() as isize;
    let t_s = s.frames() as isize;
    let t_out = full.output_frames(s.frames());
    let mut out = Spectrogram::zeros(cfg.clone(), t_out);
    for f in 0..f_size {
        let row = out.row_mut(f);
        for fp in 0..f_size {
            let d = fp as isize - f as isize;
            // Representative offset of d within the stored band range.
            let d = (d - full.band_lo()).rem_euclid(f_size as isize) + full.band_lo();
            let src = s.row(fp);
            for l in 0..full.lags() as isize {
                let c = full.get(f, d, l - k);
                let shift = l - k;
                let lo = shift.max(0);
                let hi = (shift + t_s).min(t_out as isize);
                for t in lo..hi {
                    row[t as usize] += c * src[(t - shift) as usize];
                }
            }
        }
    }
    Ok(out)
}

/// FFT-accelerated banded convolution for a fixed tensor and input length.
///
/// Each `(f, band)` tap sequence is convolved along frames through
/// zero-padded transforms of length `P >= T_s + lags - 1`; the tap spectra
/// are computed once. Used by the solver where the same operator is applied
/// hundreds of times.
pub struct CtfConvolver {
    tensor: Arc<CtfTensor>,
    input_frames: usize,
    size: usize,
    /// Tap spectra at `(f * bands + b) * size`.
    spectra: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CtfConvolver {
    pub fn new(tensor: Arc<CtfTensor>, input_frames: usize) -> Result<Self> {
        if input_frames == 0 {
            return Err(Error::Shape("input frame count must be positive".into()));
        }
        let size = (input_frames + tensor.lags() - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let bins = tensor.bins();
        let bands = tensor.bands();
        let mut spectra = vec![ZERO; bins * bands * size];
        for f in 0..bins {
            for b in 0..bands {
                let slot = &mut spectra[(f * bands + b) * size..(f * bands + b + 1) * size];
                slot[..tensor.lags()].copy_from_slice(tensor.taps(f, b));
                fwd.process(slot);
            }
        }
        Ok(Self {
            tensor,
            input_frames,
            size,
            spectra,
            fwd,
            inv,
        })
    }

    pub fn tensor(&self) -> &Arc<CtfTensor> {
        &self.tensor
    }

    pub fn input_frames(&self) -> usize {
        self.input_frames
    }

    pub fn output_frames(&self) -> usize {
        self.tensor.output_frames(self.input_frames)
    }

    fn spectrum(&self, f: usize, b: usize) -> &[Complex64] {
        let start = (f * self.tensor.bands() + b) * self.size;
        &self.spectra[start..start + self.size]
    }

    /// Same result as [`ctf_convolve`], truncated to `out_frames` frames.
    pub fn apply(&self, s: &Spectrogram, out_frames: usize) -> Result<Spectrogram> {
        check_compatible(s, &self.tensor)?;
        if s.frames() != self.input_frames {
            return Err(Error::Shape(format!(
                "convolver prepared for {} frames, got {}",
                self.input_frames,
                s.frames()
            )));
        }
        let h = &self.tensor;
        let bins = h.bins();
        let size = self.size;
        let k = h.lookahead();
        let out_frames = out_frames.min(self.output_frames());

        let mut src_spec = vec![ZERO; bins * size];
        for fp in 0..bins {
            let slot = &mut src_spec[fp * size..(fp + 1) * size];
            slot[..self.input_frames].copy_from_slice(s.row(fp));
            self.fwd.process(slot);
        }
        let mut out = Spectrogram::zeros(s.config().clone(), out_frames);
        let mut acc = vec![ZERO; size];
        let scale = 1.0 / size as f64;
        for f in 0..bins {
            acc.fill(ZERO);
            for b in 0..h.bands() {
                let src = &src_spec[h.source_bin(f, b) * size..][..size];
                for ((a, x), y) in acc.iter_mut().zip(self.spectrum(f, b)).zip(src) {
                    *a += x * y;
                }
            }
            self.inv.process(&mut acc);
            // Linear-convolution index u maps to output frame u - lookahead.
            for (dst, v) in out.row_mut(f).iter_mut().zip(&acc[k..k + out_frames]) {
                *dst = v * scale;
            }
        }
        Ok(out)
    }

    /// Same result as [`ctf_adjoint`] with this convolver's input length.
    pub fn adjoint(&self, z: &Spectrogram) -> Result<Spectrogram> {
        check_compatible(z, &self.tensor)?;
        let h = &self.tensor;
        let bins = h.bins();
        let size = self.size;
        let k = h.lookahead();
        let used = z.frames().min(self.output_frames());

        let mut z_spec = vec![ZERO; bins * size];
        for f in 0..bins {
            let slot = &mut z_spec[f * size..(f + 1) * size];
            slot[k..k + used].copy_from_slice(&z.row(f)[..used]);
            self.fwd.process(slot);
        }
        let mut acc = vec![ZERO; bins * size];
        for f in 0..bins {
            let zs = &z_spec[f * size..(f + 1) * size];
            for b in 0..h.bands() {
                let dst = &mut acc[h.source_bin(f, b) * size..][..size];
                for ((a, x), y) in dst.iter_mut().zip(self.spectrum(f, b)).zip(zs) {
                    *a += x.conj() * y;
                }
            }
        }
        let mut out = Spectrogram::zeros(z.config().clone(), self.input_frames);
        let scale = 1.0 / size as f64;
        for fp in 0..bins {
            let slot = &mut acc[fp * size..(fp + 1) * size];
            self.inv.process(slot);
            for (dst, v) in out.row_mut(fp).iter_mut().zip(slot.iter()) {
                *dst = v * scale;
            }
        }
        Ok(out)
    }
}
