use super::{Rir, SPEED_OF_SOUND};
use crate::error::{Error, Result};

/// Default cutoff of the high-pass applied to simulated RIRs, in Hz.
pub const ISM_HIGHPASS_HZ: f64 = 100.0;

/// Rectangular room with an omnidirectional source and microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    /// `(Lx, Ly, Lz)` in meters.
    pub dimensions: [f64; 3],
    pub source: [f64; 3],
    pub mic: [f64; 3],
    pub target_rt60: f64,
    /// Maximum number of wall reflections; `None` picks
    /// `ceil(c * RT60 / min dimension)`.
    pub max_order: Option<usize>,
    pub speed_of_sound: f64,
    pub sample_rate: u32,
    /// Cutoff of the two-pole high-pass that removes the low-frequency
    /// build-up of coincident positive images; `None` leaves the raw image sum.
    pub highpass_hz: Option<f64>,
}

impl RoomSpec {
    pub fn new(
        dimensions: [f64; 3],
        source: [f64; 3],
        mic: [f64; 3],
        target_rt60: f64,
        sample_rate: u32,
    ) -> Self {
        Self {
            dimensions,
            source,
            mic,
            target_rt60,
            max_order: None,
            speed_of_sound: SPEED_OF_SOUND,
            sample_rate,
            highpass_hz: Some(ISM_HIGHPASS_HZ),
        }
    }

    pub fn with_highpass(mut self, cutoff_hz: Option<f64>) -> Self {
        self.highpass_hz = cutoff_hz;
        self
    }

    pub fn with_max_order(mut self, order: usize) -> Self {
        self.max_order = Some(order);
        self
    }

    pub fn volume(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        x * y * z
    }

    pub fn wall_area(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn source_mic_distance(&self) -> f64 {
        distance(&self.source, &self.mic)
    }

    /// Direct-path delay rounded to the nearest sample.
    pub fn direct_path_index(&self) -> usize {
        (self.source_mic_distance() * self.sample_rate as f64 / self.speed_of_sound).round()
            as usize
    }

    /// Sabine absorption `0.1611 V / (A RT60)`, kept inside (0, 1).
    pub fn absorption(&self) -> f64 {
        let alpha = 0.1611 * self.volume() / (self.wall_area() * self.target_rt60);
        alpha.clamp(1e-9, 1.0 - 1e-9)
    }

    /// Pressure reflection coefficient shared by every wall.
    pub fn reflection_coefficient(&self) -> f64 {
        (1.0 - self.absorption()).sqrt()
    }

    pub fn effective_max_order(&self) -> usize {
        self.max_order.unwrap_or_else(|| {
            let min_dim = self
                .dimensions
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            (self.speed_of_sound * self.target_rt60 / min_dim).ceil() as usize
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidInput(
                "room dimensions must be positive".into(),
            ));
        }
        for (name, p) in [("source", &self.source), ("microphone", &self.mic)] {
            let inside = p
                .iter()
                .zip(&self.dimensions)
                .all(|(x, l)| *x > 0.0 && x < l);
            if !inside {
                return Err(Error::InvalidInput(format!(
                    "{name} position {p:?} is outside the room"
                )));
            }
        }
        if !(self.target_rt60 > 0.0) {
            return Err(Error::InvalidInput("target RT60 must be positive".into()));
        }
        if !(self.speed_of_sound > 0.0) || self.sample_rate == 0 {
            return Err(Error::InvalidInput(
                "speed of sound and sample rate must be positive".into(),
            ));
        }
        if let Some(fc) = self.highpass_hz {
            if !(fc > 0.0 && fc < self.sample_rate as f64 / 2.0) {
                return Err(Error::InvalidInput(format!(
                    "high-pass cutoff {fc} Hz is outside (0, fs/2)"
                )));
            }
        }
        if self.source_mic_distance() == 0.0 {
            return Err(Error::InvalidInput("source and microphone coincide".into()));
        }
        Ok(())
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Image offsets along one axis: `(mic-to-image distance component, reflections)`
/// for every image within `reach` meters.
fn axis_images(len: f64, src: f64, mic: f64, reach: f64) -> Vec<(f64, usize)> {
    let n_max = (reach / (2.0 * len)).ceil() as i64 + 1;
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        for q in 0..2i64 {
            let pos = (1 - 2 * q) as f64 * src + 2.0 * n as f64 * len;
            let delta = pos - mic;
            if delta.abs() <= reach {
                out.push((delta, (2 * n - q).unsigned_abs() as usize));
            }
        }
    }
    out
}

/// Frequency-independent image-source RIR of `rir_len` samples. Each image
/// contributes `beta^order / distance` at its rounded delay, then the optional
/// high-pass of [`RoomSpec::highpass_hz`] is applied. The result keeps the
/// propagation delay; use [`super::align_normalize_rir`] to align it.
pub fn simulate_shoebox_rir(room: &RoomSpec, rir_len: usize) -> Result<Rir> {
    room.validate()?;
    if rir_len == 0 {
        return Err(Error::InvalidInput("RIR length must be positive".into()));
    }
    let fs = room.sample_rate as f64;
    let c = room.speed_of_sound;
    let beta = room.reflection_coefficient();
    let max_order = room.effective_max_order();
    // Anything farther than this lands past the end of the buffer.
    let reach = (rir_len as f64 + 0.5) * c / fs;

    let axes: Vec<Vec<(f64, usize)>> = (0..3)
        .map(|i| axis_images(room.dimensions[i], room.source[i], room.mic[i], reach))
        .collect();
    let beta_pow: Vec<f64> = (0..=max_order).map(|k| beta.powi(k as i32)).collect();

    let mut h = vec![0.0; rir_len];
    let reach2 = reach * reach;
    for &(dx, ox) in &axes[0] {
        if ox > max_order {
            continue;
        }
        let dx2 = dx * dx;
        for &(dy, oy) in &axes[1] {
            let oxy = ox + oy;
            let dxy2 = dx2 + dy * dy;
            if oxy > max_order || dxy2 > reach2 {
                continue;
            }
            for &(dz, oz) in &axes[2] {
                let order = oxy + oz;
                let d2 = dxy2 + dz * dz;
                if order > max_order || d2 > reach2 {
                    continue;
                }
                let d = d2.sqrt();
                let idx = (d * fs / c).round() as usize;
                if idx < rir_len {
                    h[idx] += beta_pow[order] / d;
                }
            }
        }
    }
    if let Some(fc) = room.highpass_hz {
        highpass(&mut h, fc, fs);
    }
    Rir::new(h, room.sample_rate)
}

/// Two-pole, two-zero high-pass with zeros at DC and `r`, poles at
/// `r e^{+-j w}`, `r = e^{-w}`, `w = 2 pi fc / fs` (Allen and Berkley's filter).
fn highpass(x: &mut [f64], cutoff_hz: f64, fs: f64) {
    let w = 2.0 * std::f64::consts::PI * cutoff_hz / fs;
    let r = (-w).exp();
    let (b1, b2) = (2.0 * r * w.cos(), -r * r);
    let (a1, a2) = (-(1.0 + r), r);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in x.iter_mut() {
        let x0 = *v;
        let y0 = b1 * y1 + b2 * y2 + x0 + a1 * x1 + a2 * x2;
        (x2, x1, y2, y1) = (x1, x0, y1, y0);
        *v = y0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> RoomSpec {
        RoomSpec::new(
            [6.0, 7.0, 3.0],
            [2.0, 3.0, 1.5],
            [3.5, 4.0, 1.2],
            0.5,
            16_000,
        )
    }

    #[test]
    fn derived_geometry() {
        let r = room();
        assert_eq!(r.volume(), 126.0);
        assert_eq!(r.wall_area(), 2.0 * (42.0 + 18.0 + 21.0));
        assert_eq!(
            r.effective_max_order(),
            (343.0f64 * 0.5 / 3.0).ceil() as usize
        );
        let alpha: f64 = 0.1611 * 126.0 / (162.0 * 0.5);
        assert!((r.reflection_coefficient() - (1.0 - alpha).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_order_is_a_single_impulse() {
        let r = room().with_max_order(0).with_highpass(None);
        let h = simulate_shoebox_rir(&r, 2000).unwrap();
        let d = r.source_mic_distance();
        let idx = r.direct_path_index();
        assert_eq!(idx, (d * 16_000.0 / 343.0).round() as usize);
        for (i, x) in h.samples.iter().enumerate() {
            if i == idx {
                assert!((x - 1.0 / d).abs() < 1e-15);
            } else {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn first_arrival_is_the_direct_path() {
        let r = room();
        let h = simulate_shoebox_rir(&r, 8000).unwrap();
        let first = h.samples.iter().position(|x| *x != 0.0).unwrap();
        assert!(h.samples[first] > 0.0);
        assert_eq!(first, r.direct_path_index());
        assert_eq!(h.peak_index(), r.direct_path_index());
        assert!(!h.aligned);
    }

    #[test]
    fn rejects_positions_outside() {
        let mut r = room();
        r.source = [7.0, 1.0, 1.0];
        assert!(simulate_shoebox_rir(&r, 100).is_err());
        let mut r = room();
        r.mic = [1.0, 1.0, 0.0];
        assert!(simulate_shoebox_rir(&r, 100).is_err());
    }

    #[test]
    fn deterministic() {
        let r = room();
        assert_eq!(
            simulate_shoebox_rir(&r, 4000).unwrap(),
            simulate_shoebox_rir(&r, 4000).unwrap()
        );
    }

    #[test]
    fn highpass_removes_dc_and_passes_impulse_onset() {
        let mut x = vec![0.0; 4000];
        x[0] = 1.0;
        highpass(&mut x, 100.0, 16_000.0);
        assert_eq!(x[0], 1.0);
        assert!(x.iter().sum::<f64>().abs() < 1e-6);
        assert!(room().with_highpass(Some(9000.0)).validate().is_err());
    }

    #[test]
    fn axis_image_orders() {
        let imgs = axis_images(5.0, 1.0, 2.0, 30.0);
        // Real source: n = 0, q = 0.
        assert!(imgs.contains(&(-1.0, 0)));
        // Mirror in the x = 0 wall: n = 0, q = 1.
        assert!(imgs.contains(&(-3.0, 1)));
        // Mirror in the x = L wall: n = 1, q = 1.
        assert!(imgs.contains(&(7.0, 1)));
    }
}
