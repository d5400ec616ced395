use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SampleBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported | hound::Error::FormatError(_) => Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: e.to_string(),
        },
        other => Error::Wav {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

/// Read a PCM16/PCM24/float32 WAV file, downmixing stereo by channel average.
pub fn load_wav(path: impl AsRef<Path>) -> Result<SampleBuffer> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("{} channels (mono or stereo expected)", spec.channels),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32_768.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, 24) => reader
            .into_samples::<i32>()
            .map(|s| s.map(|v| v as f64 / 8_388_608.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.to_path_buf(),
                detail: format!("{bits}-bit {fmt:?}"),
            })
        }
    }
    .map_err(|e| wav_err(path, e))?;

    let channels = spec.channels as usize;
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    if mono.is_empty() {
        return Err(Error::Empty(format!("{} has no samples", path.display())));
    }
    SampleBuffer::new(mono, spec.sample_rate)
}

/// Write a mono WAV file. Samples outside ±1.0 are clipped with a warning;
/// the number of clipped samples is returned.
pub fn save_wav(
    buffer: &SampleBuffer,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<usize> {
    let path = path.as_ref();
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, hound::SampleFormat::Int),
        WavEncoding::Pcm24 => (24, hound::SampleFormat::Int),
        WavEncoding::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    let mut clipped = 0usize;
    for &s in buffer.samples() {
        let v = if s.abs() > 1.0 {
            clipped += 1;
            s.signum()
        } else {
            s
        };
        let res = match encoding {
            WavEncoding::Pcm16 => {
                writer.write_sample((v * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16)
            }
            WavEncoding::Pcm24 => writer
                .write_sample((v * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32),
            WavEncoding::Float32 => writer.write_sample(v as f32),
        };
        res.map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))?;
    if clipped > 0 {
        log::warn!("{}: clipped {clipped} sample(s) to ±1.0", path.display());
    }
    Ok(clipped)
}
