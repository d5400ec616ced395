use std::ops::Range;

use crate::error::{Error, Result};

/// Uniformly sampled mono audio, full scale is ±1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Sub-range copy; panics if the range is out of bounds.
    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            samples: self.samples[range].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub(crate) fn from_trusted(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::Empty(what.to_string()))
        } else {
            Ok(())
        }
    }

    /// Sample-wise sum of two buffers at the same rate and length.
    pub fn mix(&self, other: &SampleBuffer) -> Result<Self> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::RateMismatch {
                expected: self.sample_rate,
                found: other.sample_rate,
                what: "mixed buffer".into(),
            });
        }
        if self.len() != other.len() {
            return Err(Error::Mismatch(format!(
                "cannot mix buffers of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Self::from_trusted(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            self.sample_rate,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_zero_rate() {
        assert!(SampleBuffer::new(vec![0.0, f64::NAN], 48_000).is_err());
        assert!(SampleBuffer::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn rms_and_peak() {
        let b = SampleBuffer::new(vec![1.0, -1.0, 1.0, -1.0], 4).unwrap();
        assert_eq!(b.rms(), 1.0);
        assert_eq!(b.peak(), 1.0);
        assert_eq!(b.duration_s(), 1.0);
    }
}
