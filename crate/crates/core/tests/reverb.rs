mod common;

use reverb_match::reverb::{default_rir_len, mixing_time, tau};
use reverb_match::{
    align_normalize_rir, reverberate, simulate_shoebox_rir, synth_polack_rir, PolackParams, Rir,
    RoomSpec, Waveform,
};

fn polack(seed: u64) -> (PolackParams, Rir) {
    let p = PolackParams::from_rt60(0.5, 16_000, seed)
        .with_sigma(0.02)
        .with_rir_len(16_000);
    let h = synth_polack_rir(&p).unwrap();
    (p, h)
}

#[test]
fn constants_scale_as_expected() {
    assert!((tau(1.0, 16_000.0).unwrap() - 2.0 * tau(0.5, 16_000.0).unwrap()).abs() < 1e-9);
    let a = mixing_time(100.0, 145.0, 16_000.0, 343.0).unwrap();
    let b = mixing_time(200.0, 145.0, 16_000.0, 343.0).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-9);
    assert!(tau(0.0, 16_000.0).is_err());
    assert!(mixing_time(100.0, 0.0, 16_000.0, 343.0).is_err());
}

#[test]
fn polack_support_is_exact() {
    for seed in 0..20 {
        let (p, h) = polack(seed);
        let gap = p.tail_start().unwrap();
        assert_eq!(gap, 320);
        assert_eq!(h.samples[0], 1.0);
        assert!(h.samples[1..=gap].iter().all(|&x| x == 0.0));
        assert!(h.samples[gap + 1..].iter().all(|&x| x >= 0.0));
        assert_eq!(h.peak_index(), 0);
    }
}

#[test]
fn polack_tail_decays_at_rt60() {
    let mut sum = 0.0;
    for seed in 0..100 {
        let (p, h) = polack(seed);
        let est = common::schroeder_rt60(
            &h.samples,
            p.tail_start().unwrap() + 1,
            16_000.0,
            -5.0,
            -35.0,
        );
        sum += est;
    }
    let mean = sum / 100.0;
    assert!((0.45..=0.55).contains(&mean), "mean RT60 estimate {mean}");
}

#[test]
fn polack_ensemble_energy_slope() {
    let n = 16_000;
    let mut energy = vec![0.0; n];
    for seed in 0..200 {
        let (_, h) = polack(seed);
        for (e, x) in energy.iter_mut().zip(&h.samples) {
            *e += x * x / 200.0;
        }
    }
    // Least-squares slope of 10 log10 E[h^2] over 0.05 s .. 0.5 s.
    let pts: Vec<(f64, f64)> = (800..8000)
        .map(|i| (i as f64 / 16_000.0, 10.0 * energy[i].log10()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (sxx, sxy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let expect = -60.0 / 0.5;
    assert!(
        (slope - expect).abs() < 0.1 * expect.abs(),
        "slope {slope} dB/s"
    );
    // Level tracks sigma^2 exp(-2 n / tau).
    let t = tau(0.5, 16_000.0).unwrap();
    let ratio = energy[4000] / (0.02f64.powi(2) * (-2.0 * 4000.0 / t).exp());
    assert!((0.8..1.2).contains(&ratio), "level ratio {ratio}");
}

#[test]
fn polack_room_mixing_time() {
    let p = PolackParams::from_rt60(0.4, 16_000, 0).with_room(240.0, 236.0);
    assert_eq!(p.tail_start().unwrap(), 2 * 190);
    assert_eq!(p.rir_len, default_rir_len(0.4, 16_000));
    assert_eq!(p.rir_len, 8000);
}

#[test]
fn alignment_examples() {
    let (_, h) = polack(3);
    assert_eq!(align_normalize_rir(&h).unwrap().samples, h.samples);

    let mut v = vec![0.01; 100];
    v[40] = 0.5;
    let a = align_normalize_rir(&Rir::new(v, 16_000).unwrap()).unwrap();
    assert_eq!(a.len(), 60);
    assert_eq!(a.samples[0], 1.0);
    assert!(a.aligned);
}

#[test]
fn reverberate_matches_direct_convolution() {
    let s = common::noise_wave(1000, 1);
    let h = Rir::new(common::gaussian(1000, 2), 16_000).unwrap();
    let y = reverberate(&s, &h).unwrap();
    let expect = common::direct_convolve(&s.samples, &h.samples);
    assert_eq!(y.len(), 1999);
    let err = y
        .samples
        .iter()
        .zip(&expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn reverberate_identity_and_superposition() {
    let s = common::noise_wave(500, 3);
    let y = reverberate(&s, &Rir::impulse(4, 16_000)).unwrap();
    assert_eq!(y.len(), 503);
    assert!(common::rel_err(&y.samples[..500], &s.samples) < 1e-14);
    assert!(y.samples[500..].iter().all(|x| x.abs() < 1e-14));

    let s2 = common::noise_wave(500, 4);
    let h = Rir::new(common::gaussian(64, 5), 16_000).unwrap();
    let sum = Waveform::new(
        s.samples
            .iter()
            .zip(&s2.samples)
            .map(|(a, b)| a + b)
            .collect(),
        16_000,
    )
    .unwrap();
    let (a, b, c) = (
        reverberate(&s, &h).unwrap(),
        reverberate(&s2, &h).unwrap(),
        reverberate(&sum, &h).unwrap(),
    );
    for i in 0..c.len() {
        assert!((c.samples[i] - a.samples[i] - b.samples[i]).abs() < 1e-12);
    }
}

fn room() -> RoomSpec {
    RoomSpec::new(
        [6.0, 7.0, 3.0],
        [2.0, 3.0, 1.5],
        [3.2, 3.8, 1.4],
        0.5,
        16_000,
    )
}

#[test]
fn shoebox_direct_path_and_zero_order() {
    let r = room().with_max_order(0).with_highpass(None);
    let d = r.source_mic_distance();
    let h = simulate_shoebox_rir(&r, 400).unwrap();
    let idx = (d * 16_000.0 / 343.0).round() as usize;
    assert_eq!(r.direct_path_index(), idx);
    for (i, &x) in h.samples.iter().enumerate() {
        if i == idx {
            assert!((x - 1.0 / d).abs() < 1e-12);
        } else {
            assert_eq!(x, 0.0);
        }
    }
}

#[test]
fn shoebox_decay_follows_target_rt60() {
    let r = room();
    let h = simulate_shoebox_rir(&r, 12_000).unwrap();
    let a = align_normalize_rir(&h).unwrap();
    assert_eq!(a.peak_index(), 0);
    assert_eq!(a.samples[0], 1.0);
    let est = common::schroeder_rt60(&a.samples, 0, 16_000.0, -5.0, -25.0);
    assert!((0.375..=0.625).contains(&est), "RT60 estimate {est}");
}

#[test]
fn shoebox_is_deterministic() {
    let a = simulate_shoebox_rir(&room(), 3000).unwrap();
    let b = simulate_shoebox_rir(&room(), 3000).unwrap();
    assert_eq!(a.samples, b.samples);
}
