//! Gradient-based dereverberation.
//!
//! The dry spectrogram estimate is optimized directly so that, once passed
//! through the banded convolutive model of an RIR, it matches the observed wet
//! spectrogram under the reverberation-matching loss. The RIR is either drawn
//! from Polack's model (weak supervision) or given exactly (oracle).
//! The dry signal itself is never an input.

use std::sync::Arc;

use num_complex::Complex64;

use crate::ctf::{ctf_from_rir_with_table, CrossWindowTable, CtfConvolver, DEFAULT_CROSSBANDS};
use crate::error::{Error, Result};
use crate::loss::{loss_and_gradient_with, LossReport, LossWeights};
use crate::reverb::{synth_polack_rir, PolackParams, Rir};
use crate::signal::{istft, stft, Spectrogram, StftConfig, Waveform};

/// Starting point of the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Start from the STFT of the wet signal.
    #[default]
    WetCopy,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_size: f64,
    /// Moment-adaptive updates; plain gradient steps otherwise.
    pub adaptive: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Stop once the relative loss change over `tol_window` iterations
    /// falls below this.
    pub tol: f64,
    pub tol_window: usize,
    pub init: Init,
    pub crossbands: usize,
    pub weights: LossWeights,
    /// Redraw the Polack noise at every iteration (seed + iteration).
    pub resample_rir: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_size: 1e-2,
            adaptive: true,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            tol: 1e-6,
            tol_window: 10,
            init: Init::WetCopy,
            crossbands: DEFAULT_CROSSBANDS,
            weights: LossWeights::default(),
            resample_rir: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        if !(self.tol >= 0.0) || self.tol_window == 0 {
            return Err(Error::Config(
                "tolerance must be non-negative with a positive window".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        LossWeights::new(self.weights.lambda, self.weights.gamma)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DereverbResult {
    pub dry_estimate: Waveform,
    /// Spectrogram whose inverse STFT is `dry_estimate`.
    pub dry_spectrogram: Spectrogram,
    /// Loss of the returned estimate (the lowest one visited).
    pub final_loss: LossReport,
    /// Loss of every evaluated iterate, starting with the initial one.
    pub loss_trace: Vec<LossReport>,
    /// Number of parameter updates applied.
    pub iters_run: usize,
}

impl DereverbResult {
    pub fn totals(&self) -> Vec<f64> {
        self.loss_trace.iter().map(|r| r.total).collect()
    }
}

/// Source of the RIR used by the convolutive model.
enum RirSource<'a> {
    Polack(&'a PolackParams),
    Exact(&'a Rir),
}

/// Weakly supervised dereverberation: the model RIR is drawn from `params`.
pub fn dereverb(
    y: &Waveform,
    params: &PolackParams,
    cfg: &Arc<StftConfig>,
    sc: &SolverConfig,
) -> Result<DereverbResult> {
    params.validate()?;
    run(y, RirSource::Polack(params), cfg, sc, |_, _| {})
}

/// Dereverberation with the exact RIR, the upper-bound variant.
pub fn dereverb_oracle(
    y: &Waveform,
    h: &Rir,
    cfg: &Arc<StftConfig>,
    sc: &SolverConfig,
) -> Result<DereverbResult> {
    run(y, RirSource::Exact(h), cfg, sc, |_, _| {})
}

/// [`dereverb`] calling `observe(iteration, estimate)` on every iterate.
pub fn dereverb_observed<F>(
    y: &Waveform,
    params: &PolackParams,
    cfg: &Arc<StftConfig>,
    sc: &SolverConfig,
    observe: F,
) -> Result<DereverbResult>
where
    F: FnMut(usize, &Spectrogram),
{
    params.validate()?;
    run(y, RirSource::Polack(params), cfg, sc, observe)
}

/// [`dereverb_oracle`] calling `observe(iteration, estimate)` on every iterate.
pub fn dereverb_oracle_observed<F>(
    y: &Waveform,
    h: &Rir,
    cfg: &Arc<StftConfig>,
    sc: &SolverConfig,
    observe: F,
) -> Result<DereverbResult>
where
    F: FnMut(usize, &Spectrogram),
{
    run(y, RirSource::Exact(h), cfg, sc, observe)
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<Complex64>,
    v: Vec<Complex64>,
    t: i32,
}

impl Adam {
    fn new(len: usize, sc: &SolverConfig) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            beta1: sc.beta1,
            beta2: sc.beta2,
            eps: sc.eps,
            m: vec![zero; len],
            v: vec![zero; len],
            t: 0,
        }
    }

    /// Real and imaginary parts are separate coordinates.
    fn step(&mut self, x: &mut [Complex64], g: &[Complex64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let upd = |m: &mut f64, v: &mut f64, g: f64| -> f64 {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            (*m / c1) / ((*v / c2).sqrt() + eps)
        };
        for (((xi, gi), mi), vi) in x.iter_mut().zip(g).zip(&mut self.m).zip(&mut self.v) {
            let dr = upd(&mut mi.re, &mut vi.re, gi.re);
            let di = upd(&mut mi.im, &mut vi.im, gi.im);
            xi.re -= lr * dr;
            xi.im -= lr * di;
        }
    }
}

fn run<F>(
    y: &Waveform,
    source: RirSource<'_>,
    cfg: &Arc<StftConfig>,
    sc: &SolverConfig,
    mut observe: F,
) -> Result<DereverbResult>
where
    F: FnMut(usize, &Spectrogram),
{
    sc.validate()?;
    if y.is_empty() {
        return Err(Error::InvalidInput("wet signal is empty".into()));
    }
    if y.sample_rate != cfg.sample_rate() {
        return Err(Error::InvalidInput(format!(
            "wet signal is {} Hz, STFT configured for {} Hz",
            y.sample_rate,
            cfg.sample_rate()
        )));
    }
    let table = CrossWindowTable::new(cfg, sc.crossbands)?;
    let build = |h: &Rir| -> Result<CtfConvolver> {
        let tensor = ctf_from_rir_with_table(h, &table)?;
        CtfConvolver::new(Arc::new(tensor), cfg.num_frames(y.len()))
    };
    let mut conv = match &source {
        RirSource::Polack(p) => build(&synth_polack_rir(p)?)?,
        RirSource::Exact(h) => build(h)?,
    };

    let obs = stft(y, cfg)?;
    let mut est = match sc.init {
        Init::WetCopy => obs.clone(),
        Init::Zeros => Spectrogram::zeros(cfg.clone(), obs.frames()),
    };

    let mut adam = Adam::new(est.data().len(), sc);
    let mut trace: Vec<LossReport> = Vec::with_capacity(sc.max_iters + 1);
    let mut best: Option<(LossReport, Spectrogram)> = None;
    let mut iters_run = 0;

    for iter in 0..=sc.max_iters {
        if iter > 0 && sc.resample_rir {
            if let RirSource::Polack(p) = &source {
                let redraw = (*p).clone().with_seed(p.seed.wrapping_add(iter as u64));
                conv = build(&synth_polack_rir(&redraw)?)?;
            }
        }
        let (report, grad) = loss_and_gradient_with(&est, &obs, &conv, sc.weights)?;
        if !report.total.is_finite() || !grad.is_finite() {
            return Err(Error::Diverged {
                iteration: iter,
                loss: report.total,
            });
        }
        observe(iter, &est);
        trace.push(report);
        if best.as_ref().is_none_or(|(b, _)| report.total < b.total) {
            best = Some((report, est.clone()));
        }
        if iter == sc.max_iters || report.total == 0.0 || converged(&trace, sc) {
            break;
        }
        if sc.adaptive {
            adam.step(est.data_mut(), grad.data(), sc.step_size);
        } else {
            for (x, g) in est.data_mut().iter_mut().zip(grad.data()) {
                *x -= g * sc.step_size;
            }
        }
        iters_run += 1;
    }

    let (final_loss, dry_spectrogram) = best.expect("at least one iterate is evaluated");
    let dry_estimate = istft(&dry_spectrogram, y.len())?;
    Ok(DereverbResult {
        dry_estimate,
        dry_spectrogram,
        final_loss,
        loss_trace: trace,
        iters_run,
    })
}

fn converged(trace: &[LossReport], sc: &SolverConfig) -> bool {
    let n = trace.len();
    if n <= sc.tol_window {
        return false;
    }
    let before = trace[n - 1 - sc.tol_window].total;
    let now = trace[n - 1].total;
    before > 0.0 && ((before - now) / before).abs() < sc.tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SolverConfig {
            max_iters: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            step_size: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            tol: -1.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_input_needs_no_iterations() {
        let cfg = Arc::new(StftConfig::default());
        let y = Waveform::zeros(4000, 16_000);
        let p = PolackParams::from_rt60(0.3, 16_000, 1);
        let r = dereverb(&y, &p, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(r.iters_run, 0);
        assert_eq!(r.final_loss.total, 0.0);
        assert!(r.dry_estimate.samples.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn rejects_rate_mismatch() {
        let cfg = Arc::new(StftConfig::default());
        let y = Waveform::zeros(100, 8_000);
        let p = PolackParams::from_rt60(0.3, 16_000, 1);
        assert!(dereverb(&y, &p, &cfg, &SolverConfig::default()).is_err());
    }

    #[test]
    fn diverging_steps_are_reported() {
        let cfg = Arc::new(StftConfig::new(32, 16, 16_000).unwrap());
        let y = Waveform::new(
            (0..400).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect(),
            16_000,
        )
        .unwrap();
        let h = Rir::new(vec![1.0, 0.9, 0.8], 16_000).unwrap();
        let sc = SolverConfig {
            adaptive: false,
            step_size: 1e6,
            max_iters: 200,
            tol: 0.0,
            ..Default::default()
        };
        match dereverb_oracle(&y, &h, &cfg, &sc) {
            Err(Error::Diverged { iteration, .. }) => assert!(iteration > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
