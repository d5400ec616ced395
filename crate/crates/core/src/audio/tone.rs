use std::f64::consts::PI;

use super::SampleBuffer;
use crate::error::{Error, Result};

/// Raised-cosine ramp applied at both ends of synthesized tones.
pub const DEFAULT_FADE_S: f64 = 0.010;

/// A steady sine with optional onset delay and raised-cosine fades.
///
/// `samples[n] = amplitude * sin(2π f (n - d) / rate + phase) * fade(n - d)` for
/// `n >= d`, zero before the delay `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    pub fade_s: f64,
    pub delay_s: f64,
}

impl Tone {
    pub fn new(freq_hz: f64, amplitude: f64) -> Self {
        Self {
            freq_hz,
            amplitude,
            phase_rad: 0.0,
            fade_s: DEFAULT_FADE_S,
            delay_s: 0.0,
        }
    }

    pub fn with_phase(mut self, phase_rad: f64) -> Self {
        self.phase_rad = phase_rad;
        self
    }

    pub fn with_fade(mut self, fade_s: f64) -> Self {
        self.fade_s = fade_s;
        self
    }

    pub fn with_delay(mut self, delay_s: f64) -> Self {
        self.delay_s = delay_s;
        self
    }

    fn validate(&self, rate: u32) -> Result<()> {
        let nyquist = rate as f64 / 2.0;
        if !(self.freq_hz > 0.0) {
            return Err(Error::invalid(format!(
                "tone frequency must be positive, got {}",
                self.freq_hz
            )));
        }
        if self.freq_hz >= nyquist {
            return Err(Error::AboveNyquist {
                freq: self.freq_hz,
                nyquist,
            });
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("tone amplitude must be finite and >= 0"));
        }
        if !(self.fade_s >= 0.0) || !(self.delay_s >= 0.0) {
            return Err(Error::invalid("fade and delay must be >= 0"));
        }
        Ok(())
    }

    /// Render `len` samples at `rate`.
    pub fn render(&self, len: usize, rate: u32) -> Result<SampleBuffer> {
        self.validate(rate)?;
        let fs = rate as f64;
        let omega = 2.0 * PI * self.freq_hz / fs;
        let delay = self.delay_s * fs;
        let active = (len as f64 - delay).max(0.0);
        let fade_len = (self.fade_s * fs).min(active / 2.0);
        let samples = (0..len)
            .map(|n| {
                let t = n as f64 - delay;
                if t < 0.0 {
                    return 0.0;
                }
                let gain = if fade_len > 0.0 {
                    let from_end = active - t;
                    raised_cosine(t / fade_len) * raised_cosine(from_end / fade_len)
                } else {
                    1.0
                };
                self.amplitude * gain * (omega * t + self.phase_rad).sin()
            })
            .collect();
        Ok(SampleBuffer::from_trusted(samples, rate))
    }
}

fn raised_cosine(x: f64) -> f64 {
    if x >= 1.0 {
        1.0
    } else if x <= 0.0 {
        0.0
    } else {
        0.5 * (1.0 - (PI * x).cos())
    }
}

/// Probe tone with the default 10 ms fades.
pub fn synth_tone(
    freq_hz: f64,
    amplitude: f64,
    duration_s: f64,
    rate: u32,
    phase_rad: f64,
) -> Result<SampleBuffer> {
    if !(amplitude > 0.0 && amplitude <= 1.0) {
        return Err(Error::invalid(format!(
            "amplitude must be in (0, 1], got {amplitude}"
        )));
    }
    if rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if !(duration_s > 0.0) {
        return Err(Error::invalid("duration must be positive"));
    }
    let len = (duration_s * rate as f64).round() as usize;
    Tone::new(freq_hz, amplitude)
        .with_phase(phase_rad)
        .render(len, rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_rms_matches_sine_identity() {
        let b = synth_tone(3000.0, 0.1, 1.0, 48_000, 0.0).unwrap();
        assert_eq!(b.len(), 48_000);
        let fade = (DEFAULT_FADE_S * 48_000.0) as usize;
        let interior = b.slice(fade..b.len() - fade);
        let expected = 0.1 / 2f64.sqrt();
        assert!((interior.rms() - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn cosine_start_is_faded() {
        let b = synth_tone(1000.0, 0.5, 0.1, 48_000, PI / 2.0).unwrap();
        // fade(0) = 0
        assert_eq!(b.samples()[0], 0.0);
        let unfaded = Tone::new(1000.0, 0.5)
            .with_phase(PI / 2.0)
            .with_fade(0.0)
            .render(10, 48_000)
            .unwrap();
        assert!((unfaded.samples()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nyquist_is_rejected() {
        assert!(matches!(
            synth_tone(24_000.0, 0.1, 1.0, 48_000, 0.0),
            Err(Error::AboveNyquist { .. })
        ));
        assert!(synth_tone(1000.0, 1.5, 1.0, 48_000, 0.0).is_err());
    }

    #[test]
    fn delay_leaves_leading_silence() {
        let b = Tone::new(1000.0, 0.1)
            .with_delay(0.001)
            .render(480, 48_000)
            .unwrap();
        assert!(b.samples()[..48].iter().all(|&s| s == 0.0));
        assert!(b.peak() > 0.0);
    }
}
