use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

use super::{EegRecording, Marker};
use crate::error::{Error, Result};

pub const MONTAGE_16: [&str; 16] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "C3", "Cz", "C4", "P3", "Pz", "P4", "O1", "O2",
    "T7",
];

/// Synthetic multichannel EEG whose broadband amplitude scales with task.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEeg {
    pub n_channels: usize,
    pub sample_rate: f64,
    pub segment_s: f64,
    pub gap_s: f64,
    /// Amplitude multiplier for tasks 1-4.
    pub task_scales: [f64; 4],
    pub segments_per_task: usize,
    /// Background noise standard deviation in µV.
    pub noise_uv: f64,
    pub alpha_uv: f64,
    /// Blink-like spikes per segment on frontal channels.
    pub blinks_per_segment: usize,
    pub mains_uv: f64,
    pub seed: u64,
}

impl Default for SyntheticEeg {
    fn default() -> Self {
        Self {
            n_channels: 16,
            sample_rate: 250.0,
            segment_s: 10.0,
            gap_s: 1.0,
            task_scales: [1.0, 1.2, 1.45, 1.7],
            segments_per_task: 3,
            noise_uv: 10.0,
            alpha_uv: 8.0,
            blinks_per_segment: 0,
            mains_uv: 5.0,
            seed: 0,
        }
    }
}

pub fn synthetic_eeg(spec: &SyntheticEeg) -> Result<EegRecording> {
    if spec.n_channels < 1
        || !(spec.sample_rate > 0.0)
        || !(spec.segment_s > 0.0)
        || spec.segments_per_task == 0
    {
        return Err(Error::invalid(
            "synthetic EEG needs channels, a positive rate and segment length",
        ));
    }
    let rate = spec.sample_rate;
    let seg = (spec.segment_s * rate).round() as usize;
    let gap = (spec.gap_s * rate).round() as usize;
    let mut markers = Vec::new();
    let mut cursor = gap;
    for task in 1..=4u8 {
        for r in 0..spec.segments_per_task {
            markers.push(Marker {
                label: format!("t{task}_s{r}"),
                task_id: task,
                start_sample: cursor,
                end_sample: cursor + seg,
            });
            cursor += seg + gap;
        }
    }
    let n = cursor;
    let scale_at = |t: usize| {
        markers
            .iter()
            .find(|m| (m.start_sample..m.end_sample).contains(&t))
            .map_or(spec.task_scales[0], |m| {
                spec.task_scales[m.task_id as usize - 1]
            })
    };
    let scales: Vec<f64> = (0..n).map(scale_at).collect();
    let names: Vec<String> = (0..spec.n_channels)
        .map(|i| {
            MONTAGE_16
                .get(i)
                .map_or_else(|| format!("E{}", i + 1), |s| s.to_string())
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    // Brown-ish background: AR(1) innovations scaled to the target std.
    let rho: f64 = 0.9;
    let innov = spec.noise_uv * (1.0 - rho * rho).sqrt();
    let alpha: Vec<f64> = (0..n)
        .map(|t| (2.0 * PI * 10.0 * t as f64 / rate).sin())
        .collect();
    let mut blink = vec![0.0; n];
    for m in &markers {
        for b in 0..spec.blinks_per_segment {
            let centre = m.start_sample + (b + 1) * seg / (spec.blinks_per_segment + 1);
            for (t, v) in blink
                .iter_mut()
                .enumerate()
                .take((centre + 25).min(n))
                .skip(centre.saturating_sub(25))
            {
                let x = (t as f64 - centre as f64) / 8.0;
                *v += 150.0 * (-0.5 * x * x).exp();
            }
        }
    }
    let channels = names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let frontal = super::ica::is_frontal(name);
            let alpha_gain = spec.alpha_uv * (0.5 + 0.5 * (c as f64 / spec.n_channels as f64));
            let phase = c as f64 * 0.3;
            let mut state = 0.0;
            (0..n)
                .map(|t| {
                    state = rho * state + innov * normal.sample(&mut rng);
                    let mains = spec.mains_uv * (2.0 * PI * 50.0 * t as f64 / rate + phase).sin();
                    let b = if frontal { blink[t] } else { 0.0 };
                    scales[t] * (state + alpha_gain * alpha[t]) + mains + b
                })
                .collect()
        })
        .collect();
    EegRecording::new(channels, rate, names, markers)
}
