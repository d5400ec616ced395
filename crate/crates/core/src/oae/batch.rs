use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{
    extract_magnitude, sed, ExtractConfig, MagnitudeRecord, ResultRow, SedRecord, BASELINE_TASK,
};
use crate::audio::{load_wav, SampleBuffer};
use crate::error::{Error, Result};
use crate::stimulus::SessionManifest;

/// Cross-correlation search range used when aligning a continuous recording.
pub const ALIGN_SEARCH_S: f64 = 0.05;

/// Where the recorded audio for a session lives.
#[derive(Debug, Clone)]
pub enum RecordingSource {
    /// One WAV per manifest segment, named as in the manifest.
    PerSegment(PathBuf),
    /// One WAV covering the whole session timeline. With `align`, the
    /// playback files in that session directory are used to estimate a
    /// constant offset within ±50 ms.
    Continuous {
        recording: PathBuf,
        align: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub participant_id: String,
    /// One per manifest segment, in manifest order.
    pub magnitudes: Vec<MagnitudeRecord>,
    /// One per (task 2-4, f_s), ordered by frequency then task.
    pub seds: Vec<SedRecord>,
    /// Applied continuous-recording offset in samples.
    pub offset: isize,
}

impl ExtractionResult {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.magnitudes
            .iter()
            .map(|m| ResultRow {
                participant_id: m.participant_id.clone(),
                task_id: m.task_id,
                f_s_hz: m.f_s_hz,
                magnitude: m.magnitude,
                noise_floor: m.noise_floor,
                sed: self
                    .seds
                    .iter()
                    .find(|s| s.task_id == m.task_id && s.f_s_hz == m.f_s_hz)
                    .map(|s| s.sed),
                window_count: m.window_count,
            })
            .collect()
    }
}

fn check_baselines(manifest: &SessionManifest) -> Result<()> {
    for f in manifest.frequencies() {
        if !manifest
            .segments
            .iter()
            .any(|s| s.task_id == BASELINE_TASK && s.f_s_hz == f)
        {
            return Err(Error::MissingBaseline {
                participant: manifest.participant_id.clone(),
                f_s_hz: f,
            });
        }
    }
    Ok(())
}

/// Extract every segment of a session and compute SEDs.
pub fn batch_extract(
    manifest: &SessionManifest,
    source: &RecordingSource,
    config: &ExtractConfig,
) -> Result<ExtractionResult> {
    check_baselines(manifest)?;
    match source {
        RecordingSource::PerSegment(dir) => {
            let paths: Vec<PathBuf> = manifest
                .segments
                .iter()
                .map(|s| dir.join(&s.file))
                .collect();
            if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
                return Err(Error::MissingFile(missing.clone()));
            }
            let recordings = paths.par_iter().map(load_wav).collect::<Result<Vec<_>>>()?;
            extract_segments(manifest, &recordings, config)
        }
        RecordingSource::Continuous { recording, align } => {
            let recording = load_wav(recording)?;
            let offset = match align {
                Some(session_dir) => {
                    let reference = session_timeline(manifest, session_dir)?;
                    let window = alignment_window(manifest);
                    let max_lag = (ALIGN_SEARCH_S * manifest.sample_rate as f64).round() as usize;
                    align_offset(&recording, &reference, window, max_lag)?
                }
                None => 0,
            };
            let mut result = extract_continuous(manifest, &recording, offset, config)?;
            result.offset = offset;
            Ok(result)
        }
    }
}

/// Extract from one recording per segment already in memory.
pub fn extract_segments(
    manifest: &SessionManifest,
    recordings: &[SampleBuffer],
    config: &ExtractConfig,
) -> Result<ExtractionResult> {
    check_baselines(manifest)?;
    if recordings.len() != manifest.segments.len() {
        return Err(Error::Mismatch(format!(
            "{} recordings for {} manifest segments",
            recordings.len(),
            manifest.segments.len()
        )));
    }
    for (seg, rec) in manifest.segments.iter().zip(recordings) {
        if rec.sample_rate() != manifest.sample_rate {
            return Err(Error::RateMismatch {
                expected: manifest.sample_rate,
                found: rec.sample_rate(),
                what: format!("recording for {}", seg.file),
            });
        }
        if rec.len() != seg.len() {
            return Err(Error::Mismatch(format!(
                "recording for {} has {} samples, manifest segment has {}",
                seg.file,
                rec.len(),
                seg.len()
            )));
        }
    }
    let ranges = recordings.iter().map(|r| 0..r.len()).collect::<Vec<_>>();
    collect(manifest, config, |i| (&recordings[i], ranges[i].clone()))
}

/// Extract from a continuous recording whose timeline is shifted by `offset`
/// samples relative to the manifest.
pub fn extract_continuous(
    manifest: &SessionManifest,
    recording: &SampleBuffer,
    offset: isize,
    config: &ExtractConfig,
) -> Result<ExtractionResult> {
    check_baselines(manifest)?;
    if recording.sample_rate() != manifest.sample_rate {
        return Err(Error::RateMismatch {
            expected: manifest.sample_rate,
            found: recording.sample_rate(),
            what: "continuous recording".into(),
        });
    }
    let mut ranges = Vec::with_capacity(manifest.segments.len());
    for seg in &manifest.segments {
        let start = seg.start_sample as isize + offset;
        let end = seg.end_sample as isize + offset;
        if start < 0 || end as usize > recording.len() {
            return Err(Error::Mismatch(format!(
                "segment {} ({start}..{end}) falls outside the {}-sample recording",
                seg.file,
                recording.len()
            )));
        }
        ranges.push(start as usize..end as usize);
    }
    let mut result = collect(manifest, config, |i| (recording, ranges[i].clone()))?;
    result.offset = offset;
    Ok(result)
}

fn collect<'a>(
    manifest: &SessionManifest,
    config: &ExtractConfig,
    get: impl Fn(usize) -> (&'a SampleBuffer, Range<usize>) + Sync,
) -> Result<ExtractionResult> {
    let magnitudes = manifest
        .segments
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let (buffer, range) = get(i);
            let m = extract_magnitude(buffer, seg.f_s_hz, range, config)?;
            Ok(MagnitudeRecord::new(
                manifest.participant_id.clone(),
                seg.task_id,
                seg.f_s_hz,
                m.scaled(1.0 / seg.norm_gain()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let seds = compute_seds(&magnitudes)?;
    Ok(ExtractionResult {
        participant_id: manifest.participant_id.clone(),
        magnitudes,
        seds,
        offset: 0,
    })
}

/// SEDs from per-segment magnitudes; repetitions of a (task, f_s) pair are
/// averaged before differencing.
pub fn compute_seds(magnitudes: &[MagnitudeRecord]) -> Result<Vec<SedRecord>> {
    let mut order: Vec<f64> = Vec::new();
    let mut groups: BTreeMap<(usize, u8), (f64, usize, &MagnitudeRecord)> = BTreeMap::new();
    for m in magnitudes {
        let fi = match order.iter().position(|&f| f == m.f_s_hz) {
            Some(i) => i,
            None => {
                order.push(m.f_s_hz);
                order.len() - 1
            }
        };
        let e = groups.entry((fi, m.task_id)).or_insert((0.0, 0, m));
        e.0 += m.magnitude;
        e.1 += 1;
    }
    let mean = |fi: usize, task: u8| {
        groups.get(&(fi, task)).map(|&(sum, n, r)| MagnitudeRecord {
            magnitude: sum / n as f64,
            ..r.clone()
        })
    };
    let mut out = Vec::new();
    for (fi, &f) in order.iter().enumerate() {
        let Some(baseline) = mean(fi, BASELINE_TASK) else {
            return Err(Error::MissingBaseline {
                participant: magnitudes[0].participant_id.clone(),
                f_s_hz: f,
            });
        };
        for task in 2..=4 {
            if let Some(m) = mean(fi, task) {
                out.push(sed(&m, &baseline)?);
            }
        }
    }
    Ok(out)
}

/// The session playback laid out on its continuous timeline.
pub fn session_timeline(manifest: &SessionManifest, session_dir: &Path) -> Result<SampleBuffer> {
    let total = manifest
        .segments
        .iter()
        .map(|s| s.end_sample)
        .max()
        .unwrap_or(0) as usize;
    let mut out = vec![0.0; total];
    for seg in &manifest.segments {
        let audio = load_wav(session_dir.join(&seg.file))?;
        if audio.len() != seg.len() {
            return Err(Error::Mismatch(format!(
                "{} has {} samples, manifest segment has {}",
                seg.file,
                audio.len(),
                seg.len()
            )));
        }
        out[seg.start_sample as usize..seg.end_sample as usize].copy_from_slice(audio.samples());
    }
    SampleBuffer::new(out, manifest.sample_rate)
}

fn alignment_window(manifest: &SessionManifest) -> Range<usize> {
    let seg = manifest
        .segments
        .iter()
        .find(|s| s.task_id != BASELINE_TASK)
        .unwrap_or(&manifest.segments[0]);
    let rate = manifest.sample_rate as usize;
    let start = seg.start_sample as usize + rate / 10;
    let end = (start + 2 * rate).min(seg.end_sample as usize);
    start.min(end)..end
}

/// Lag `d` (samples) maximizing the normalized correlation between
/// `reference[window]` and `recording[window + d]`, searched over
/// `|d| <= max_lag`.
pub fn align_offset(
    recording: &SampleBuffer,
    reference: &SampleBuffer,
    window: Range<usize>,
    max_lag: usize,
) -> Result<isize> {
    if window.is_empty() || window.end > reference.len() {
        return Err(Error::Alignment(
            "reference window is empty or out of range".into(),
        ));
    }
    let w = window.len();
    let span = w + 2 * max_lag;
    let rec: Vec<f64> = (0..span)
        .map(|i| {
            let t = window.start as isize - max_lag as isize + i as isize;
            if t < 0 {
                0.0
            } else {
                recording.samples().get(t as usize).copied().unwrap_or(0.0)
            }
        })
        .collect();
    let refw = &reference.samples()[window.clone()];
    let n = (span + w).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = rec.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    a.resize(n, Complex64::new(0.0, 0.0));
    let mut b: Vec<Complex64> = refw.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    b.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y.conj();
    }
    inv.process(&mut a);

    let ref_energy: f64 = refw.iter().map(|x| x * x).sum();
    let mut prefix = vec![0.0; span + 1];
    for (i, x) in rec.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x * x;
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for d in 0..=2 * max_lag {
        let energy = prefix[d + w] - prefix[d];
        if energy <= 0.0 {
            continue;
        }
        let rho = a[d].re / n as f64 / (ref_energy * energy).sqrt();
        if rho > best.1 {
            best = (d, rho);
        }
    }
    let (d, rho) = best;
    if !(rho >= 0.5) {
        return Err(Error::Alignment(format!(
            "no correlation peak within ±{max_lag} samples (best {rho:.3})"
        )));
    }
    if d == 0 || d == 2 * max_lag {
        return Err(Error::Alignment(format!(
            "offset exceeds the ±{max_lag}-sample search range"
        )));
    }
    Ok(d as isize - max_lag as isize)
}
