use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{EegRecording, Marker};
use crate::analysis::{group_stats, CiMethod, GroupStats};
use crate::audio::Window;
use crate::error::{Error, Result};

pub const EEG_REPORT_SCHEMA_VERSION: u32 = 1;

/// Power per band in µV².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BandPowers {
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub total: f64,
}

impl BandPowers {
    pub fn bands(&self) -> [f64; 4] {
        [self.delta, self.theta, self.alpha, self.beta]
    }

    fn add(&mut self, o: &BandPowers, w: f64) {
        self.delta += w * o.delta;
        self.theta += w * o.theta;
        self.alpha += w * o.alpha;
        self.beta += w * o.beta;
        self.total += w * o.total;
    }

    fn mean(items: &[BandPowers]) -> BandPowers {
        let mut m = BandPowers::default();
        let w = 1.0 / items.len() as f64;
        items.iter().for_each(|b| m.add(b, w));
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub window_s: f64,
    pub overlap: f64,
    /// Half-open band edges in Hz: delta, theta, alpha, beta.
    pub edges: [f64; 5],
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            window_s: 2.0,
            overlap: 0.5,
            edges: [0.5, 4.0, 8.0, 13.0, 30.0],
        }
    }
}

/// Averaged Hann periodogram scaled so that bins sum to mean-square power,
/// then summed within each band.
pub fn band_powers(x: &[f64], rate: f64, config: &PowerConfig) -> Result<BandPowers> {
    let len = (config.window_s * rate).round() as usize;
    if len < 2 || x.len() < len {
        return Err(Error::InsufficientData(format!(
            "segment of {} samples is shorter than one {}-s window",
            x.len(),
            config.window_s
        )));
    }
    let hop = ((1.0 - config.overlap) * len as f64).round().max(1.0) as usize;
    let window = Window::Hann.coefficients(len);
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut psd = vec![0.0; len / 2 + 1];
    let mut count = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut start = 0;
    while start + len <= x.len() {
        let seg = &x[start..start + len];
        let mean = seg.iter().sum::<f64>() / len as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            let one_sided = if k == 0 || 2 * k == len { 1.0 } else { 2.0 };
            *p += one_sided * buf[k].norm_sqr() / (len as f64 * wss);
        }
        count += 1;
        start += hop;
    }
    psd.iter_mut().for_each(|p| *p /= count as f64);
    let df = rate / len as f64;
    let e = config.edges;
    let band = |lo: f64, hi: f64| -> f64 {
        psd.iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 * df;
                f >= lo && f < hi
            })
            .map(|(_, p)| p)
            .sum()
    };
    Ok(BandPowers {
        delta: band(e[0], e[1]),
        theta: band(e[1], e[2]),
        alpha: band(e[2], e[3]),
        beta: band(e[3], e[4]),
        total: band(e[0], e[4]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPower {
    pub label: String,
    pub task_id: u8,
    pub channels: Vec<BandPowers>,
    /// Channel average.
    pub mean: BandPowers,
}

/// Band powers per marked segment and channel.
pub fn segment_and_power(
    rec: &EegRecording,
    segments: &[Marker],
    config: &PowerConfig,
) -> Result<Vec<SegmentPower>> {
    rec.validate()?;
    let min = (config.window_s * rec.sample_rate).round() as usize;
    for m in segments {
        if m.end_sample > rec.n_samples() || m.end_sample <= m.start_sample {
            return Err(Error::Mismatch(format!(
                "segment {} outside the recording",
                m.label
            )));
        }
        if m.end_sample - m.start_sample < min {
            return Err(Error::InsufficientData(format!(
                "segment {} is shorter than {} s",
                m.label, config.window_s
            )));
        }
    }
    segments
        .par_iter()
        .map(|m| {
            let channels = rec
                .channels
                .iter()
                .map(|c| band_powers(&c[m.start_sample..m.end_sample], rec.sample_rate, config))
                .collect::<Result<Vec<_>>>()?;
            Ok(SegmentPower {
                label: m.label.clone(),
                task_id: m.task_id,
                mean: BandPowers::mean(&channels),
                channels,
            })
        })
        .collect()
}

/// Per-task summary in kµV², across segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPower {
    pub task_id: u8,
    pub n_segments: usize,
    pub delta: GroupStats,
    pub theta: GroupStats,
    pub alpha: GroupStats,
    pub beta: GroupStats,
    pub total: GroupStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegReport {
    pub schema_version: u32,
    pub units: String,
    pub tasks: Vec<TaskPower>,
    pub rejected_components: Vec<usize>,
    pub rejection_reasons: Vec<String>,
    pub notes: Vec<String>,
}

impl EegReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn eeg_report(segments: &[SegmentPower], ci: CiMethod) -> Result<EegReport> {
    if segments.is_empty() {
        return Err(Error::Empty("no EEG segments".into()));
    }
    let mut tasks: Vec<u8> = segments.iter().map(|s| s.task_id).collect();
    tasks.sort_unstable();
    tasks.dedup();
    let k = 1e-3;
    let rows = tasks
        .into_iter()
        .map(|t| {
            let mine: Vec<&BandPowers> = segments
                .iter()
                .filter(|s| s.task_id == t)
                .map(|s| &s.mean)
                .collect();
            let stat = |f: fn(&BandPowers) -> f64| {
                group_stats(&mine.iter().map(|b| k * f(b)).collect::<Vec<_>>(), ci)
            };
            Ok(TaskPower {
                task_id: t,
                n_segments: mine.len(),
                delta: stat(|b| b.delta)?,
                theta: stat(|b| b.theta)?,
                alpha: stat(|b| b.alpha)?,
                beta: stat(|b| b.beta)?,
                total: stat(|b| b.total)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EegReport {
        schema_version: EEG_REPORT_SCHEMA_VERSION,
        units: "kuV^2".into(),
        tasks: rows,
        rejected_components: Vec::new(),
        rejection_reasons: Vec::new(),
        notes: vec!["delta band [0.5, 4) Hz is computed after the 1 Hz high-pass; content below 1 Hz is attenuated".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    #[test]
    fn sine_power_lands_in_alpha() {
        let a = 20.0;
        let x: Vec<f64> = (0..2500)
            .map(|n| a * (2.0 * PI * 10.0 * n as f64 / 250.0).sin())
            .collect();
        let p = band_powers(&x, 250.0, &PowerConfig::default()).unwrap();
        assert!(
            (p.alpha - a * a / 2.0).abs() / (a * a / 2.0) < 0.01,
            "{p:?}"
        );
        for other in [p.delta, p.theta, p.beta] {
            assert!(other <= 0.01 * p.alpha);
        }
        let sum: f64 = p.bands().iter().sum();
        assert!((sum - p.total).abs() <= 1e-9 * p.total);
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..250 * 600).map(|_| n.sample(&mut rng)).collect();
        let p = band_powers(&x, 250.0, &PowerConfig::default()).unwrap();
        let density = p.total / 29.5;
        for (power, width) in p.bands().iter().zip([3.5, 4.0, 5.0, 17.0]) {
            assert!((power / width / density - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn zero_and_short() {
        let p = band_powers(&[0.0; 1000], 250.0, &PowerConfig::default()).unwrap();
        assert_eq!(p.total, 0.0);
        assert!(band_powers(&[0.0; 400], 250.0, &PowerConfig::default()).is_err());
    }
}
