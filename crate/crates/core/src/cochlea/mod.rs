//! Synthetic ear: playback plus a coherent, load-dependent emission tone
//! and white noise. Serves as the ground-truth oracle for extraction.

mod cohort;
mod session;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use cohort::{
    simulate_cohort, Cohort, CohortMember, CohortSpec, FrequencyProfile, GainSampler,
};
pub use session::{
    load_playbacks, simulate_session, write_cohort, write_simulation, GroundTruth,
    SimulatedSession, GROUND_TRUTH_FILE,
};

use crate::audio::{SampleBuffer, Tone};
use crate::error::{Error, Result};
use crate::stimulus::EmbeddedPlayback;

pub const DEFAULT_GAINS: [f64; 4] = [0.05, 0.08, 0.12, 0.18];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarModel {
    /// Emission amplitude as a fraction of the probe, keyed by task.
    pub oae_gain_per_load: BTreeMap<u8, f64>,
    /// Per-frequency multiplier on the gain; frequencies not listed use 1.
    #[serde(default)]
    pub frequency_weights: Vec<(f64, f64)>,
    pub oae_phase_rad: f64,
    pub oae_latency_ms: f64,
    pub passive_reflectance: f64,
    /// `None` disables noise.
    pub noise_floor_dbfs: Option<f64>,
    pub seed: u64,
}

impl Default for EarModel {
    fn default() -> Self {
        Self::with_gains(DEFAULT_GAINS)
    }
}

impl EarModel {
    pub fn with_gains(gains: [f64; 4]) -> Self {
        Self {
            oae_gain_per_load: (1..=4).zip(gains).collect(),
            frequency_weights: Vec::new(),
            oae_phase_rad: 0.0,
            oae_latency_ms: 0.0,
            passive_reflectance: 1.0,
            noise_floor_dbfs: None,
            seed: 0,
        }
    }

    /// No emission: passive reflection plus noise only.
    pub fn artificial(reflectance: f64, noise_floor_dbfs: Option<f64>, seed: u64) -> Self {
        Self {
            passive_reflectance: reflectance,
            noise_floor_dbfs,
            seed,
            ..Self::with_gains([0.0; 4])
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (&task, &g) in &self.oae_gain_per_load {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::invalid(format!(
                    "gain for task {task} must be in [0, 1], got {g}"
                )));
            }
        }
        for &(f, w) in &self.frequency_weights {
            if !(f > 0.0 && w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!(
                    "invalid frequency weight {w} at {f} Hz"
                )));
            }
        }
        if !(self.oae_latency_ms >= 0.0 && self.oae_latency_ms.is_finite()) {
            return Err(Error::invalid("latency must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.passive_reflectance) {
            return Err(Error::invalid("reflectance must be in [0, 1]"));
        }
        if !self.oae_phase_rad.is_finite() {
            return Err(Error::invalid("phase must be finite"));
        }
        if let Some(db) = self.noise_floor_dbfs {
            if db.is_nan() || db > 0.0 {
                return Err(Error::invalid(format!(
                    "noise floor must be <= 0 dBFS, got {db}"
                )));
            }
        }
        Ok(())
    }

    pub fn gain(&self, task_id: u8) -> Result<f64> {
        self.oae_gain_per_load
            .get(&task_id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("no gain for task {task_id}")))
    }

    pub fn weight(&self, f_s: f64) -> f64 {
        self.frequency_weights
            .iter()
            .find(|(f, _)| *f == f_s)
            .map_or(1.0, |&(_, w)| w)
    }

    /// Emission phase relative to the probe at `f_s`, latency included.
    pub fn relative_phase(&self, f_s: f64) -> f64 {
        self.oae_phase_rad - 2.0 * PI * f_s * self.oae_latency_ms / 1000.0
    }

    /// Probe-bin magnitude the recording should show, in probe units.
    pub fn expected_magnitude(&self, task_id: u8, f_s: f64, probe_amplitude: f64) -> Result<f64> {
        let a = probe_amplitude * self.gain(task_id)? * self.weight(f_s);
        let sum = Complex64::new(self.passive_reflectance * probe_amplitude, 0.0)
            + Complex64::from_polar(a, self.relative_phase(f_s));
        Ok(sum.norm())
    }

    fn noise_sigma(&self) -> Option<f64> {
        self.noise_floor_dbfs
            .filter(|db| db.is_finite())
            .map(|db| 10f64.powf(db / 20.0))
    }
}

/// Injected emission for one segment, in recording units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedOae {
    pub task_id: u8,
    pub f_s_hz: f64,
    pub oae_amplitude: f64,
    pub oae_phase_rad: f64,
    /// Probe-bin magnitude after undoing the playback normalization gain.
    pub expected_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRecording {
    pub audio: SampleBuffer,
    pub ground_truth: InjectedOae,
}

/// Noise stream for a segment; distinct per (task, frequency, repetition).
pub fn noise_stream(task_id: u8, f_s: f64, repetition: usize) -> u64 {
    ((task_id as u64) << 56)
        | ((repetition as u64 & 0xffff) << 40)
        | ((f_s * 1000.0).round() as u64 & 0xff_ffff_ffff)
}

pub fn simulate_ear(
    playback: &EmbeddedPlayback,
    model: &EarModel,
    task_id: u8,
) -> Result<SimulatedRecording> {
    simulate_ear_stream(
        playback,
        model,
        task_id,
        noise_stream(task_id, playback.notch_center, 0),
    )
}

/// As [`simulate_ear`] with an explicit noise stream.
pub fn simulate_ear_stream(
    playback: &EmbeddedPlayback,
    model: &EarModel,
    task_id: u8,
    stream: u64,
) -> Result<SimulatedRecording> {
    model.validate()?;
    let f_s = playback.notch_center;
    let rate = playback.audio.sample_rate();
    let gain = model.gain(task_id)?;
    let delivered = playback.delivered_probe_amplitude();
    let oae_amplitude = delivered * gain * model.weight(f_s);
    let mut out: Vec<f64> = playback
        .audio
        .samples()
        .iter()
        .map(|s| model.passive_reflectance * s)
        .collect();
    if oae_amplitude > 0.0 {
        let tone = Tone::new(f_s, oae_amplitude)
            .with_phase(model.oae_phase_rad)
            .with_fade(playback.fade_s)
            .with_delay(model.oae_latency_ms / 1000.0)
            .render(out.len(), rate)?;
        out.iter_mut()
            .zip(tone.samples())
            .for_each(|(o, t)| *o += t);
    }
    if let Some(sigma) = model.noise_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(stream);
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        out.iter_mut().for_each(|o| *o += normal.sample(&mut rng));
    }
    Ok(SimulatedRecording {
        audio: SampleBuffer::new(out, rate)?,
        ground_truth: InjectedOae {
            task_id,
            f_s_hz: f_s,
            oae_amplitude,
            oae_phase_rad: model.relative_phase(f_s),
            expected_magnitude: model.expected_magnitude(task_id, f_s, playback.probe_amplitude)?,
        },
    })
}

pub fn artificial_ear(
    playback: &EmbeddedPlayback,
    reflectance: f64,
    noise_floor_dbfs: Option<f64>,
    seed: u64,
    task_id: u8,
) -> Result<SimulatedRecording> {
    simulate_ear(
        playback,
        &EarModel::artificial(reflectance, noise_floor_dbfs, seed),
        task_id,
    )
}
