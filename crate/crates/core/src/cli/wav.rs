//! Mono WAV input and output (PCM16 or IEEE float32).

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| with_path(e.into(), path))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!(
            "{}: mono required, file has {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::Wav(format!(
                "{}: unsupported codec {fmt:?} {bits}-bit (PCM16 or float32 only)",
                path.display()
            )))
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

pub fn write_wav(path: impl AsRef<Path>, w: &Waveform, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    let spec = match format {
        WavFormat::Pcm16 => WavSpec {
            channels: 1,
            sample_rate: w.sample_rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavFormat::Float32 => WavSpec {
            channels: 1,
            sample_rate: w.sample_rate,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| with_path(e.into(), path))?;
    match format {
        WavFormat::Pcm16 => {
            for &x in &w.samples {
                let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q)?;
            }
        }
        WavFormat::Float32 => {
            for &x in &w.samples {
                writer.write_sample(x as f32)?;
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Wav(msg) => Error::Wav(format!("{}: {msg}", path.display())),
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}
