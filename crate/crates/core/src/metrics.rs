//! Objective scores for dereverberated signals.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{stft, StftConfig, Waveform};

/// Scores are clamped to `[-SCORE_CAP_DB, SCORE_CAP_DB]`.
pub const SCORE_CAP_DB: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricScore {
    pub name: &'static str,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale-invariant signal-to-distortion ratio in dB.
pub fn sisdr(reference: &Waveform, estimate: &Waveform) -> Result<MetricScore> {
    if reference.len() != estimate.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: reference {}, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let r = &reference.samples;
    let e = &estimate.samples;
    let rr = dot(r, r);
    if rr == 0.0 {
        return Err(Error::InvalidInput("SISDR reference is all zeros".into()));
    }
    let scale = dot(e, r) / rr;
    let target: f64 = scale * scale * rr;
    let noise: f64 = r
        .iter()
        .zip(e)
        .map(|(ri, ei)| (ei - scale * ri).powi(2))
        .sum();
    let value = if target == 0.0 {
        -SCORE_CAP_DB
    } else if noise == 0.0 {
        SCORE_CAP_DB
    } else {
        (10.0 * (target / noise).log10()).clamp(-SCORE_CAP_DB, SCORE_CAP_DB)
    };
    Ok(MetricScore {
        name: "sisdr",
        value,
    })
}

/// Mean over STFT bins of `ln((1 + |E|) / (1 + |R|))^2`.
pub fn spectral_log_error(
    reference: &Waveform,
    estimate: &Waveform,
    cfg: &Arc<StftConfig>,
) -> Result<MetricScore> {
    if reference.len() != estimate.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: reference {}, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let r = stft(reference, cfg)?;
    let e = stft(estimate, cfg)?;
    let sum: f64 = r
        .data()
        .iter()
        .zip(e.data())
        .map(|(a, b)| ((1.0 + b.norm()).ln() - (1.0 + a.norm()).ln()).powi(2))
        .sum();
    Ok(MetricScore {
        name: "slog",
        value: sum / r.data().len() as f64,
    })
}

/// Shifts `estimate` by the lag (within `max_lag` samples) that maximizes its
/// cross-correlation with `reference`. Output length equals the reference's.
pub fn align_to_reference(
    reference: &Waveform,
    estimate: &Waveform,
    max_lag: usize,
) -> (Waveform, isize) {
    let n = reference.len() + estimate.len();
    let size = n.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        v.resize(size, Complex64::new(0.0, 0.0));
        v
    };
    let mut fr = pad(&reference.samples);
    let mut fe = pad(&estimate.samples);
    fwd.process(&mut fr);
    fwd.process(&mut fe);
    for (a, b) in fe.iter_mut().zip(&fr) {
        *a *= b.conj();
    }
    inv.process(&mut fe);
    // fe[k] = sum_n e[n + k] r[n]; negative lags wrap to the end.
    let max_lag = max_lag as isize;
    let mut best = (0isize, f64::NEG_INFINITY);
    for lag in -max_lag..=max_lag {
        let v = fe[lag.rem_euclid(size as isize) as usize].re;
        if v > best.1 {
            best = (lag, v);
        }
    }
    let lag = best.0;
    let samples = (0..reference.len() as isize)
        .map(|i| {
            let j = i + lag;
            if j >= 0 && (j as usize) < estimate.len() {
                estimate.samples[j as usize]
            } else {
                0.0
            }
        })
        .collect();
    (
        Waveform {
            samples,
            sample_rate: estimate.sample_rate,
        },
        lag,
    )
}
