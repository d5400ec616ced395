//! Probe-band magnitude extraction and Sound Energy Differences.
//!
//! The recording is band-passed to the probe band (matching the stimulus
//! notch), cut into frames holding an integer number of probe cycles so the
//! probe sits exactly on an FFT bin, and the probe-bin magnitude is averaged
//! across frames. SEDs compare each task's magnitude against the Task 1
//! baseline: `|M_i^2 - M_1^2|`.

mod batch;
mod results;

use std::ops::Range;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use batch::{
    align_offset, batch_extract, compute_seds, extract_continuous, extract_segments,
    session_timeline, ExtractionResult, RecordingSource, ALIGN_SEARCH_S,
};
pub use results::{
    read_results, read_results_csv, write_results, write_results_csv, ResultRow, RESULTS_HEADER,
};

use crate::audio::{design_filter, FilterSpec, SampleBuffer, DEFAULT_FADE_S};
use crate::error::{Error, Result};

pub const BASELINE_TASK: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean of per-frame magnitudes; tolerant of slow clock drift.
    #[default]
    Magnitude,
    /// Magnitude of the mean complex bin; needs playback and recording on
    /// a shared clock.
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub band_half_width_hz: f64,
    pub filter_order: usize,
    pub frame_target_s: f64,
    pub averaging: Averaging,
    /// Probe fade length at both segment ends; excluded from analysis.
    pub edge_fade_s: f64,
    /// Residual transient level at which the band-pass counts as settled.
    pub settle_level: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            band_half_width_hz: 100.0,
            filter_order: 4,
            frame_target_s: 0.1,
            averaging: Averaging::Magnitude,
            edge_fade_s: DEFAULT_FADE_S,
            settle_level: 1e-7,
        }
    }
}

/// Probe-bin measurement for one segment, in recording amplitude units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeMeasurement {
    pub magnitude: f64,
    pub noise_floor: f64,
    pub window_count: usize,
    pub frame_len: usize,
    /// Whether the probe falls exactly on a bin.
    pub bin_centered: bool,
}

impl ProbeMeasurement {
    pub fn scaled(self, gain: f64) -> Self {
        Self {
            magnitude: self.magnitude * gain,
            noise_floor: self.noise_floor * gain,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeRecord {
    pub participant_id: String,
    pub task_id: u8,
    pub f_s_hz: f64,
    pub magnitude: f64,
    pub window_count: usize,
    pub noise_floor: f64,
}

impl MagnitudeRecord {
    pub fn new(
        participant_id: impl Into<String>,
        task_id: u8,
        f_s_hz: f64,
        m: ProbeMeasurement,
    ) -> Self {
        Self {
            participant_id: participant_id.into(),
            task_id,
            f_s_hz,
            magnitude: m.magnitude,
            window_count: m.window_count,
            noise_floor: m.noise_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SedRecord {
    pub participant_id: String,
    pub task_id: u8,
    pub f_s_hz: f64,
    pub sed: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Frame length and probe bin index for analysis at `f_s`.
///
/// Integer probe frequencies get frames of an exact whole number of cycles
/// (`rate * k / f_s` integral). Otherwise, or when the shortest exact frame
/// is far longer than the target, the nearest whole-cycle frame is used and
/// the probe lands slightly off-bin.
pub fn probe_frame(rate: u32, f_s: f64, target_s: f64) -> (usize, usize, bool) {
    let target = (target_s * rate as f64).max(1.0);
    if f_s.fract() == 0.0 && f_s > 0.0 {
        let f = f_s as u64;
        let g = gcd(rate as u64, f);
        let l_min = rate as u64 / g;
        let k_min = f / g;
        if (l_min as f64) <= 4.0 * target {
            let m = ((target / l_min as f64).round() as u64).max(1);
            return ((m * l_min) as usize, (m * k_min) as usize, true);
        }
    }
    let k = ((target_s * f_s).round() as usize).max(1);
    let len = (rate as f64 * k as f64 / f_s).round() as usize;
    (len, k, false)
}

/// Probe-band magnitude of `recording[segment]` at `f_s`.
pub fn extract_magnitude(
    recording: &SampleBuffer,
    f_s: f64,
    segment: Range<usize>,
    config: &ExtractConfig,
) -> Result<ProbeMeasurement> {
    let rate = recording.sample_rate();
    if segment.end > recording.len() || segment.start >= segment.end {
        return Err(Error::Mismatch(format!(
            "segment {segment:?} outside recording of {} samples",
            recording.len()
        )));
    }
    let min_len = (0.5 * rate as f64).round() as usize;
    if segment.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "segment of {} samples is shorter than 0.5 s",
            segment.len()
        )));
    }
    let band = FilterSpec::band_pass(
        f_s - config.band_half_width_hz,
        f_s + config.band_half_width_hz,
        config.filter_order,
    );
    let filter = design_filter(&band, rate as f64).map_err(|e| {
        Error::invalid(format!(
            "probe frequency {f_s} Hz outside the band-pass design range: {e}"
        ))
    })?;
    let filtered = filter.filtfilt(&recording.samples()[segment.clone()])?;

    let guard = (config.edge_fade_s * rate as f64).ceil() as usize
        + filter.settling_samples(config.settle_level);
    let (frame_len, bin, bin_centered) = probe_frame(rate, f_s, config.frame_target_s);
    let span = filtered.len().saturating_sub(2 * guard);
    let frames = span / frame_len;
    if frames == 0 || bin < 2 || bin + 2 > frame_len / 2 {
        return Err(Error::InsufficientData(format!(
            "segment too short for one {frame_len}-sample analysis frame after {guard}-sample guards"
        )));
    }
    if !bin_centered {
        log::debug!(
            "probe {f_s} Hz is not bin-centred at {rate} Hz; using nearest whole-cycle frame"
        );
    }

    let fft = FftPlanner::new().plan_fft_forward(frame_len);
    let scale = 2.0 / frame_len as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
    let mut complex_sum = Complex64::new(0.0, 0.0);
    let mut mag_sum = 0.0;
    let mut floor_sum = 0.0;
    for f in 0..frames {
        let start = guard + f * frame_len;
        for (b, &s) in buf.iter_mut().zip(&filtered[start..start + frame_len]) {
            *b = Complex64::new(s, 0.0);
        }
        fft.process(&mut buf);
        let probe = buf[bin] * scale;
        complex_sum += probe;
        mag_sum += probe.norm();
        floor_sum += [bin - 2, bin - 1, bin + 1, bin + 2]
            .iter()
            .map(|&k| buf[k].norm() * scale)
            .sum::<f64>()
            / 4.0;
    }
    let n = frames as f64;
    let magnitude = match config.averaging {
        Averaging::Magnitude => mag_sum / n,
        Averaging::Complex => complex_sum.norm() / n,
    };
    Ok(ProbeMeasurement {
        magnitude,
        noise_floor: floor_sum / n,
        window_count: frames,
        frame_len,
        bin_centered,
    })
}

/// `|M_task^2 - M_baseline^2|`.
pub fn sed(m_task: &MagnitudeRecord, m_baseline: &MagnitudeRecord) -> Result<SedRecord> {
    if m_task.participant_id != m_baseline.participant_id {
        return Err(Error::Mismatch(format!(
            "participant {} compared against baseline of {}",
            m_task.participant_id, m_baseline.participant_id
        )));
    }
    if m_task.f_s_hz != m_baseline.f_s_hz {
        return Err(Error::Mismatch(format!(
            "{} Hz compared against baseline at {} Hz",
            m_task.f_s_hz, m_baseline.f_s_hz
        )));
    }
    if m_baseline.task_id != BASELINE_TASK {
        return Err(Error::Mismatch(format!(
            "baseline must be task 1, got task {}",
            m_baseline.task_id
        )));
    }
    if !(2..=4).contains(&m_task.task_id) {
        return Err(Error::Mismatch(format!(
            "SED is defined for tasks 2-4, got {}",
            m_task.task_id
        )));
    }
    Ok(SedRecord {
        participant_id: m_task.participant_id.clone(),
        task_id: m_task.task_id,
        f_s_hz: m_task.f_s_hz,
        sed: (m_task.magnitude.powi(2) - m_baseline.magnitude.powi(2)).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::Tone;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn tone(f: f64, a: f64, phase: f64, secs: f64) -> SampleBuffer {
        Tone::new(f, a)
            .with_phase(phase)
            .render((secs * 48_000.0) as usize, 48_000)
            .unwrap()
    }

    fn rec(task: u8, m: f64) -> MagnitudeRecord {
        MagnitudeRecord {
            participant_id: "P".into(),
            task_id: task,
            f_s_hz: 3000.0,
            magnitude: m,
            window_count: 1,
            noise_floor: 0.0,
        }
    }

    #[test]
    fn frames_are_whole_cycles() {
        assert_eq!(probe_frame(48_000, 3000.0, 0.1), (4800, 300, true));
        assert_eq!(probe_frame(48_000, 1000.0, 0.1), (4800, 100, true));
        let (len, k, exact) = probe_frame(48_000, 997.0, 0.1);
        assert!(!exact);
        assert_eq!(k, 100);
        assert_eq!(len, 4814);
        let (len, k, exact) = probe_frame(44_100, 3000.0, 0.1);
        assert!(exact);
        assert_eq!(len * 3000, k * 44_100);
    }

    #[test]
    fn pure_tone_reads_amplitude_with_clean_floor() {
        for f in [1000.0, 2000.0, 3000.0] {
            let b = tone(f, 0.1, 0.3, 2.0);
            let m = extract_magnitude(&b, f, 0..b.len(), &ExtractConfig::default()).unwrap();
            assert!((m.magnitude - 0.1).abs() < 1e-4, "{f}: {m:?}");
            assert!(m.noise_floor <= 1e-6 * m.magnitude, "{f}: {m:?}");
            assert!(m.window_count >= 15);
        }
    }

    #[test]
    fn coherent_components_add_as_phasors() {
        let b = tone(3000.0, 0.1, 0.0, 1.0)
            .mix(&tone(3000.0, 0.01, 0.0, 1.0))
            .unwrap();
        let m = extract_magnitude(&b, 3000.0, 0..b.len(), &ExtractConfig::default()).unwrap();
        assert!((m.magnitude - 0.11).abs() < 1e-4);
    }

    #[test]
    fn tone_in_white_noise() {
        let clean = tone(2000.0, 0.1, 0.0, 2.0);
        let sigma = 10f64.powf(-40.0 / 20.0);
        let mut mags = Vec::new();
        for seed in 0..10 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, sigma).unwrap();
            let noisy: Vec<f64> = clean
                .samples()
                .iter()
                .map(|s| s + n.sample(&mut rng))
                .collect();
            let b = SampleBuffer::new(noisy, 48_000).unwrap();
            let m = extract_magnitude(&b, 2000.0, 0..b.len(), &ExtractConfig::default()).unwrap();
            assert!(m.noise_floor > 0.0);
            mags.push(m.magnitude);
        }
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        assert!((mean - 0.1).abs() / 0.1 < 0.01, "{mean}");
    }

    #[test]
    fn segment_bounds_and_length() {
        let b = tone(3000.0, 0.1, 0.0, 1.0);
        let cfg = ExtractConfig::default();
        assert!(extract_magnitude(&b, 3000.0, 0..20_000, &cfg).is_err());
        assert!(extract_magnitude(&b, 3000.0, 0..60_000, &cfg).is_err());
        assert!(extract_magnitude(&b, 50.0, 0..48_000, &cfg).is_err());
    }

    #[test]
    fn sed_arithmetic() {
        assert_eq!(sed(&rec(2, 0.1), &rec(1, 0.1)).unwrap().sed, 0.0);
        assert!((sed(&rec(2, 0.12), &rec(1, 0.10)).unwrap().sed - 0.0044).abs() < 1e-15);
        assert!((sed(&rec(3, 0.08), &rec(1, 0.10)).unwrap().sed - 0.0036).abs() < 1e-15);
    }

    #[test]
    fn sed_preconditions() {
        assert!(sed(&rec(2, 0.1), &rec(2, 0.1)).is_err());
        let mut other = rec(1, 0.1);
        other.participant_id = "Q".into();
        assert!(sed(&rec(2, 0.1), &other).is_err());
        let mut off = rec(1, 0.1);
        off.f_s_hz = 2000.0;
        assert!(sed(&rec(2, 0.1), &off).is_err());
    }
}
