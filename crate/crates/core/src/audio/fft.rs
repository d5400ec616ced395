//! Amplitude-normalized one-sided spectra.
//!
//! A bin-centred sine of amplitude `A` reads `A` in its bin: interior bins are
//! scaled by `2 / (N * cg)` and the DC/Nyquist bins by `1 / (N * cg)`, where
//! `cg` is the window's coherent gain. Any transform length is accepted.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::SampleBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Periodic (DFT-even) coefficients.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect(),
        }
    }

    pub fn coherent_gain(self, n: usize) -> f64 {
        self.coefficients(n).iter().sum::<f64>() / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bin_frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Hz per bin.
    pub resolution: f64,
    pub window: Window,
    pub transform_len: usize,
}

impl Spectrum {
    pub fn bin_of(&self, freq_hz: f64) -> usize {
        let k = (freq_hz / self.resolution).round().max(0.0) as usize;
        k.min(self.magnitudes.len() - 1)
    }

    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        self.magnitudes[self.bin_of(freq_hz)]
    }

    /// (bin index, magnitude) of the largest bin.
    pub fn peak(&self) -> (usize, f64) {
        self.magnitudes
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |best, (i, m)| if m > best.1 { (i, m) } else { best },
            )
    }
}

/// Complex forward DFT of a real sequence (no scaling).
pub fn forward(samples: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    if data.is_empty() {
        return data;
    }
    FftPlanner::new()
        .plan_fft_forward(data.len())
        .process(&mut data);
    data
}

/// Inverse DFT with `1/N` scaling; returns the real part.
pub fn inverse(spectrum: &[Complex64]) -> Vec<f64> {
    let mut data = spectrum.to_vec();
    if data.is_empty() {
        return Vec::new();
    }
    let n = data.len() as f64;
    FftPlanner::new()
        .plan_fft_inverse(data.len())
        .process(&mut data);
    data.into_iter().map(|c| c.re / n).collect()
}

/// One-sided magnitude spectrum of the first `n` samples.
///
/// With `zero_pad` the buffer may be shorter than `n`; otherwise a short
/// buffer is an error.
pub fn fft_magnitude(
    buffer: &SampleBuffer,
    window: Window,
    n: usize,
    zero_pad: bool,
) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::invalid("transform length must be positive"));
    }
    buffer.require_non_empty("spectrum input")?;
    if n > buffer.len() && !zero_pad {
        return Err(Error::BufferTooShort {
            needed: n - 1,
            got: buffer.len(),
        });
    }
    let take = n.min(buffer.len());
    let coeffs = window.coefficients(take);
    let mut frame = vec![0.0; n];
    for (i, (s, w)) in buffer.samples()[..take].iter().zip(&coeffs).enumerate() {
        frame[i] = s * w;
    }
    let cg = coeffs.iter().sum::<f64>() / take as f64;
    let bins = forward(&frame);
    let rate = buffer.sample_rate() as f64;
    let half = n / 2;
    let magnitudes = bins[..=half]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let edge = k == 0 || (n.is_multiple_of(2) && k == half);
            let scale = if edge { 1.0 } else { 2.0 };
            scale * c.norm() / (take as f64 * cg)
        })
        .collect();
    let resolution = rate / n as f64;
    Ok(Spectrum {
        bin_frequencies: (0..=half).map(|k| k as f64 * resolution).collect(),
        magnitudes,
        resolution,
        window,
        transform_len: n,
    })
}
