mod common;

use std::sync::Arc;

use num_complex::Complex64;
use reverb_match::ctf::{
    cross_window_table, ctf_frames, lookahead_frames, CtfConvolver, CtfTensor,
};
use reverb_match::{
    ctf_adjoint, ctf_convolve, ctf_from_rir, full_ctf_convolve, reverberate, stft, Rir,
    Spectrogram, StftConfig,
};

fn small_cfg() -> Arc<StftConfig> {
    Arc::new(StftConfig::new(32, 16, 16_000).unwrap())
}

fn random_spec(cfg: &Arc<StftConfig>, frames: usize, seed: u64) -> Spectrogram {
    Spectrogram::from_data(
        cfg.clone(),
        frames,
        common::complex_gaussian(cfg.fft_size() * frames, seed),
    )
    .unwrap()
}

#[test]
fn window_table_matches_definition() {
    let cfg = small_cfg();
    let table = cross_window_table(&cfg, 31).unwrap();
    for f in 0..32 {
        for d in -16..=15isize {
            let fp = (f as isize + d).rem_euclid(32) as usize;
            for m in -31..=31 {
                let err = (table.get(f, d, m) - common::direct_w(&cfg, f, fp, m)).norm();
                assert!(err < 1e-14, "f={f} d={d} m={m}: {err}");
            }
        }
    }
}

#[test]
fn window_table_magnitude_ignores_f() {
    let cfg = Arc::new(StftConfig::default());
    let table = cross_window_table(&cfg, 4).unwrap();
    for (d, m) in [(0isize, 0isize), (1, 100), (-3, -257), (4, 511), (2, -1)] {
        let mags: Vec<f64> = (0..512).map(|f| table.get(f, d, m).norm()).collect();
        let (lo, hi) = mags
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi - lo < 1e-12, "({d}, {m})");
    }
}

#[test]
fn zero_offset_zero_lag_is_window_product() {
    let cfg = Arc::new(StftConfig::default());
    let table = cross_window_table(&cfg, 0).unwrap();
    let expect: f64 = cfg
        .synthesis_window()
        .iter()
        .zip(cfg.analysis_window())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / 512.0;
    for f in [0, 1, 200, 511] {
        let w = table.get(f, 0, 0);
        assert!((w.re - expect).abs() < 1e-14 && w.im.abs() < 1e-14);
        assert!(w.re > 0.0);
    }
}

#[test]
fn adjacent_bands_carry_most_cross_term_energy() {
    let cfg = Arc::new(StftConfig::default());
    let share = cross_window_table(&cfg, 1).unwrap().energy_share(1);
    assert!(share > 0.9, "share {share}");
}

#[test]
fn impulse_tensor_is_sampled_window_table() {
    let cfg = Arc::new(StftConfig::default());
    let table = cross_window_table(&cfg, 4).unwrap();
    let tensor = ctf_from_rir(&Rir::impulse(1, 16_000), &cfg, 4).unwrap();
    assert_eq!(tensor.frames(), ctf_frames(&cfg, 1));
    let k = lookahead_frames(&cfg) as isize;
    for f in [0usize, 17, 255, 300, 511] {
        for d in -4..=4 {
            for t_lag in -k..tensor.frames() as isize {
                let m = t_lag * 256;
                let expect = table.get(f, d, m);
                assert!((tensor.get(f, d, t_lag) - expect).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn tensor_matches_direct_double_sum() {
    let cfg = Arc::new(StftConfig::default());
    let h = common::random_rir(4000, 5);
    let tensor = ctf_from_rir(&h, &cfg, 4).unwrap();
    let mut r = common::rng(6);
    use rand::Rng;
    for _ in 0..40 {
        let f = r.random_range(0..512usize);
        let d = r.random_range(-4..=4i64) as isize;
        let t_lag = r.random_range(-1..tensor.frames() as i64) as isize;
        let fp = (f as isize + d).rem_euclid(512) as usize;
        let expect = common::direct_h(&cfg, &h.samples, f, fp, t_lag);
        let got = tensor.get(f, d, t_lag);
        assert!(
            (got - expect).norm() <= 1e-10 * expect.norm().max(1e-3),
            "f={f} d={d} t'={t_lag}"
        );
    }
}

#[test]
fn tensor_is_linear_in_h() {
    let cfg = small_cfg();
    let h1 = common::gaussian(200, 1);
    let h2 = common::gaussian(200, 2);
    let sum: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a + b).collect();
    let t = |v: Vec<f64>| ctf_from_rir(&Rir::new(v, 16_000).unwrap(), &cfg, 3).unwrap();
    let (a, b, c) = (t(h1), t(h2), t(sum));
    for i in 0..c.data().len() {
        assert!((c.data()[i] - a.data()[i] - b.data()[i]).norm() < 1e-12);
    }
}

#[test]
fn banded_convolution_matches_definition() {
    let cfg = small_cfg();
    let h = common::random_rir(150, 3);
    let s = random_spec(&cfg, 12, 4);
    for hw in [0, 2, 5, 31] {
        let tensor = ctf_from_rir(&h, &cfg, hw).unwrap();
        let got = ctf_convolve(&s, &tensor).unwrap();
        let expect = common::direct_banded(&s, &tensor);
        assert_eq!(got.frames(), s.frames() + tensor.frames() - 1);
        for (g, e) in got.data().iter().zip(&expect) {
            assert!((g - e).norm() < 1e-12, "hw {hw}");
        }
    }
}

#[test]
fn full_band_is_exact_on_small_config() {
    let cfg = small_cfg();
    for seed in 0..5 {
        let x = common::noise_wave(700, seed);
        let h = common::random_rir(90 + 13 * seed as usize, 50 + seed);
        let reference = stft(&reverberate(&x, &h).unwrap(), &cfg).unwrap();
        let model = full_ctf_convolve(&stft(&x, &cfg).unwrap(), &h, &cfg).unwrap();
        let frames = reference.frames().min(model.frames());
        assert!(common::rel_err_frames(&model, &reference, frames) < 1e-12);
    }
}

#[test]
fn full_band_banded_equals_reference_sum() {
    let cfg = Arc::new(StftConfig::new(64, 32, 16_000).unwrap());
    let h = common::random_rir(300, 8);
    let s = stft(&common::noise_wave(2000, 9), &cfg).unwrap();
    let banded = ctf_convolve(&s, &ctf_from_rir(&h, &cfg, 63).unwrap()).unwrap();
    let full = full_ctf_convolve(&s, &h, &cfg).unwrap();
    assert!(common::rel_err_frames(&banded, &full, full.frames()) < 1e-12);
}

#[test]
fn impulse_response_is_identity() {
    let cfg = Arc::new(StftConfig::default());
    let s = stft(&common::noise_wave(8000, 12), &cfg).unwrap();
    let tensor = ctf_from_rir(&Rir::impulse(1, 16_000), &cfg, 511).unwrap();
    let y = ctf_convolve(&s, &tensor).unwrap();
    assert!(common::rel_err_frames(&y, &s, s.frames()) < 1e-8);
}

#[test]
fn adjoint_identity() {
    let cfg = small_cfg();
    let h = common::random_rir(120, 21);
    for hw in [0, 2, 31] {
        let tensor = ctf_from_rir(&h, &cfg, hw).unwrap();
        let s = random_spec(&cfg, 9, 22);
        let z = random_spec(&cfg, tensor.output_frames(9), 23);
        let lhs = ctf_convolve(&s, &tensor).unwrap().inner(&z);
        let rhs = s.inner(&ctf_adjoint(&z, &tensor, 9).unwrap());
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm(), "hw {hw}");
    }
}

#[test]
fn fft_convolver_matches_direct_operators() {
    let cfg = Arc::new(StftConfig::default());
    let h = common::random_rir(3000, 31);
    let tensor = Arc::new(ctf_from_rir(&h, &cfg, 4).unwrap());
    let s = random_spec(&cfg, 40, 32);
    let conv = CtfConvolver::new(tensor.clone(), 40).unwrap();
    let direct = ctf_convolve(&s, &tensor).unwrap();
    let fast = conv.apply(&s, conv.output_frames()).unwrap();
    assert!(common::rel_err_frames(&fast, &direct, direct.frames()) < 1e-12);

    let z = random_spec(&cfg, 45, 33);
    let a = ctf_adjoint(&z, &tensor, 40).unwrap();
    let b = conv.adjoint(&z).unwrap();
    assert!(common::rel_err_frames(&b, &a, 40) < 1e-12);
}

#[test]
fn convolution_is_linear_in_s_and_h() {
    let cfg = small_cfg();
    let h1 = common::random_rir(100, 41);
    let h2 = common::random_rir(100, 42);
    let s1 = random_spec(&cfg, 10, 43);
    let s2 = random_spec(&cfg, 10, 44);
    let t1 = ctf_from_rir(&h1, &cfg, 2).unwrap();
    let t2 = ctf_from_rir(&h2, &cfg, 2).unwrap();
    let c = Complex64::new(0.3, -1.2);

    let mix = Spectrogram::from_data(
        cfg.clone(),
        10,
        s1.data()
            .iter()
            .zip(s2.data())
            .map(|(a, b)| a + b * c)
            .collect(),
    )
    .unwrap();
    let (y1, y2, ym) = (
        ctf_convolve(&s1, &t1).unwrap(),
        ctf_convolve(&s2, &t1).unwrap(),
        ctf_convolve(&mix, &t1).unwrap(),
    );
    for i in 0..ym.data().len() {
        assert!((ym.data()[i] - y1.data()[i] - y2.data()[i] * c).norm() < 1e-12);
    }

    let hsum = Rir::new(
        h1.samples
            .iter()
            .zip(&h2.samples)
            .map(|(a, b)| a + b)
            .collect(),
        16_000,
    )
    .unwrap();
    let ts = ctf_from_rir(&hsum, &cfg, 2).unwrap();
    let (a, b, sum) = (
        ctf_convolve(&s1, &t1).unwrap(),
        ctf_convolve(&s1, &t2).unwrap(),
        ctf_convolve(&s1, &ts).unwrap(),
    );
    for i in 0..sum.data().len() {
        assert!((sum.data()[i] - a.data()[i] - b.data()[i]).norm() < 1e-12);
    }
}

#[test]
fn dump_layout() {
    let cfg = small_cfg();
    let tensor = ctf_from_rir(&common::random_rir(40, 51), &cfg, 2).unwrap();
    let mut buf = Vec::new();
    tensor.write_to(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"CTF1");
    let word =
        |i: usize| u32::from_le_bytes(buf[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    assert_eq!(
        [word(0), word(1), word(2), word(3), word(4)],
        [32, 5, tensor.lags(), 32, 16]
    );
    assert_eq!(buf.len(), 24 + 16 * 32 * 5 * tensor.lags());
    // Second stored coefficient: f = 0, first band, second lag.
    let re = f64::from_le_bytes(buf[24 + 16..32 + 16].try_into().unwrap());
    let im = f64::from_le_bytes(buf[32 + 16..40 + 16].try_into().unwrap());
    assert_eq!(Complex64::new(re, im), tensor.taps(0, 0)[1]);

    let back = CtfTensor::read_from(&buf[..], cfg.clone()).unwrap();
    assert_eq!(back.data(), tensor.data());
    assert!(CtfTensor::read_from(&buf[..buf.len() - 3], cfg).is_err());
}

#[test]
fn mismatched_configs_are_rejected() {
    let a = small_cfg();
    let b = Arc::new(StftConfig::new(32, 8, 16_000).unwrap());
    let tensor = ctf_from_rir(&common::random_rir(40, 1), &a, 2).unwrap();
    assert!(ctf_convolve(&random_spec(&b, 5, 2), &tensor).is_err());
    assert!(full_ctf_convolve(&random_spec(&b, 5, 2), &common::random_rir(40, 1), &a).is_err());
}
