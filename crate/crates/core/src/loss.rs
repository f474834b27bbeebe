//! Reverberation-matching loss and its gradient with respect to the dry
//! spectrogram estimate.
//!
//! ```text
//! L = sum_{f,t} |Yh - Y|^2 + lambda * ln((1 + gamma |Yh|) / (1 + gamma |Y|))^2
//! ```
//!
//! Gradients follow the convention `G = 2 dL/d conj(S)`: for a real
//! perturbation direction `D`, the directional derivative is `Re <G, D>`, and
//! `S - eta G` is a descent step.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

use crate::ctf::{ctf_adjoint, ctf_convolve, CtfConvolver, CtfTensor};
use crate::error::{Error, Result};
use crate::signal::{Spectrogram, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "loss weights need lambda >= 0 and gamma > 0, got {lambda}, {gamma}"
            )));
        }
        Ok(Self { lambda, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub total: f64,
    /// `sum |Yh - Y|^2`.
    pub data_term: f64,
    /// Unweighted log-magnitude term; `total = data_term + lambda * log_term`.
    pub log_term: f64,
}

fn log_ratio(est: f64, obs: f64, gamma: f64) -> f64 {
    (1.0 + gamma * est).ln() - (1.0 + gamma * obs).ln()
}

/// Evaluates the loss between an estimated and an observed wet spectrogram.
pub fn reverb_match_loss(
    est: &Spectrogram,
    obs: &Spectrogram,
    w: LossWeights,
) -> Result<LossReport> {
    if !est.same_layout(obs) {
        return Err(Error::Shape(format!(
            "estimate is {}x{}, observation is {}x{}",
            est.bins(),
            est.frames(),
            obs.bins(),
            obs.frames()
        )));
    }
    Ok(loss_of(est.data(), obs.data(), w))
}

fn loss_of(est: &[Complex64], obs: &[Complex64], w: LossWeights) -> LossReport {
    let mut data_term = 0.0;
    let mut log_term = 0.0;
    for (a, b) in est.iter().zip(obs) {
        data_term += (a - b).norm_sqr();
        let r = log_ratio(a.norm(), b.norm(), w.gamma);
        log_term += r * r;
    }
    LossReport {
        total: data_term + w.lambda * log_term,
        data_term,
        log_term,
    }
}

/// Gradient `2 dL/d conj(Yh)` of the loss with respect to the wet estimate.
/// Where `|Yh| = 0` the log term contributes nothing.
pub fn wet_gradient(est: &Spectrogram, obs: &Spectrogram, w: LossWeights) -> Result<Spectrogram> {
    if !est.same_layout(obs) {
        return Err(Error::Shape(
            "estimate and observation differ in shape".into(),
        ));
    }
    let mut g = est.clone();
    for (gv, (a, b)) in g
        .data_mut()
        .iter_mut()
        .zip(est.data().iter().zip(obs.data()))
    {
        let mut v = 2.0 * (a - b);
        let mag = a.norm();
        if w.lambda != 0.0 && mag > 0.0 {
            let r = log_ratio(mag, b.norm(), w.gamma);
            v += a * (2.0 * w.lambda * r * w.gamma / ((1.0 + w.gamma * mag) * mag));
        }
        *gv = v;
    }
    Ok(g)
}

/// Loss of `ctf_convolve(S, H)` against the observation, together with the
/// gradient with respect to `S`.
///
/// The model output is truncated to the observation's frame count, which may
/// be shorter than `T_s + T_h - 1`: frames past the end of the recording are
/// unobserved and do not enter the loss.
pub fn loss_and_gradient(
    s_est: &Spectrogram,
    obs: &Spectrogram,
    h: &CtfTensor,
    w: LossWeights,
) -> Result<(LossReport, Spectrogram)> {
    let full = ctf_convolve(s_est, h)?;
    let y_est = truncate_to(&full, obs)?;
    let report = reverb_match_loss(&y_est, obs, w)?;
    let g_wet = wet_gradient(&y_est, obs, w)?;
    let g = ctf_adjoint(&g_wet, h, s_est.frames())?;
    Ok((report, g))
}

/// Gradient of the loss with respect to the dry estimate (`loss_gradient`).
pub fn loss_gradient(
    s_est: &Spectrogram,
    obs: &Spectrogram,
    h: &CtfTensor,
    w: LossWeights,
) -> Result<Spectrogram> {
    loss_and_gradient(s_est, obs, h, w).map(|(_, g)| g)
}

/// [`loss_and_gradient`] through a prepared FFT convolver.
pub fn loss_and_gradient_with(
    s_est: &Spectrogram,
    obs: &Spectrogram,
    conv: &CtfConvolver,
    w: LossWeights,
) -> Result<(LossReport, Spectrogram)> {
    if obs.frames() > conv.output_frames() {
        return Err(Error::Shape(format!(
            "observation has {} frames, model produces only {}",
            obs.frames(),
            conv.output_frames()
        )));
    }
    let y_est = conv.apply(s_est, obs.frames())?;
    let report = reverb_match_loss(&y_est, obs, w)?;
    let g_wet = wet_gradient(&y_est, obs, w)?;
    let g = conv.adjoint(&g_wet)?;
    Ok((report, g))
}

/// Loss of the model output for `s_est` (no gradient).
pub fn model_loss(
    s_est: &Spectrogram,
    obs: &Spectrogram,
    h: &CtfTensor,
    w: LossWeights,
) -> Result<LossReport> {
    let full = ctf_convolve(s_est, h)?;
    reverb_match_loss(&truncate_to(&full, obs)?, obs, w)
}

fn truncate_to(full: &Spectrogram, obs: &Spectrogram) -> Result<Spectrogram> {
    if obs.frames() > full.frames() {
        return Err(Error::Shape(format!(
            "observation has {} frames, model produces only {}",
            obs.frames(),
            full.frames()
        )));
    }
    if obs.frames() == full.frames() {
        Ok(full.clone())
    } else {
        Ok(full.with_frames(obs.frames()))
    }
}

/// Outcome of [`finite_difference_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub directions: usize,
}

/// Compares `Re <G, D>` with central differences of the loss along random
/// complex directions, on a random instance with `fft_size` bins, `frames`
/// input frames, `ctf_frames` causal CTF frames and the given half width.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_check(
    fft_size: usize,
    frames: usize,
    ctf_frames: usize,
    half_width: usize,
    weights: &[LossWeights],
    directions: usize,
    step: f64,
    seed: u64,
) -> Result<GradCheck> {
    if fft_size < 2 || !fft_size.is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "FFT size must be even and at least 2".into(),
        ));
    }
    let cfg = Arc::new(StftConfig::new(fft_size, fft_size / 2, 16_000)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut randc = |n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    };
    let lookahead = crate::ctf::lookahead_frames(&cfg);
    let bands = crate::ctf::band_offsets(fft_size, half_width).1;
    let tensor = CtfTensor::from_raw(
        cfg.clone(),
        half_width,
        lookahead,
        ctf_frames,
        randc(fft_size * bands * (lookahead + ctf_frames)),
    )?;
    let s = Spectrogram::from_data(cfg.clone(), frames, randc(fft_size * frames))?;
    let out_frames = tensor.output_frames(frames);
    let obs = Spectrogram::from_data(cfg.clone(), out_frames, randc(fft_size * out_frames))?;
    let dirs: Vec<Vec<Complex64>> = (0..directions).map(|_| randc(fft_size * frames)).collect();

    let mut max_rel: f64 = 0.0;
    for &w in weights {
        let (_, g) = loss_and_gradient(&s, &obs, &tensor, w)?;
        for d in &dirs {
            let analytic: f64 = g.data().iter().zip(d).map(|(a, b)| (a.conj() * b).re).sum();
            let shifted = |sign: f64| -> Result<f64> {
                let mut p = s.clone();
                for (x, dx) in p.data_mut().iter_mut().zip(d) {
                    *x += dx * (sign * step);
                }
                Ok(model_loss(&p, &obs, &tensor, w)?.total)
            };
            let numeric = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * step);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(GradCheck {
        max_rel_error: max_rel,
        directions: directions * weights.len(),
    })
}
