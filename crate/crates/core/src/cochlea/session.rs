use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::Cohort;
use super::{noise_stream, simulate_ear_stream, EarModel, InjectedOae};
use crate::analysis::{write_behavior, write_participants};
use crate::audio::{load_wav, save_wav, SampleBuffer, WavEncoding, DEFAULT_FADE_S};
use crate::error::{Error, Result};
use crate::oae::{compute_seds, MagnitudeRecord, SedRecord};
use crate::stimulus::{EmbeddedPlayback, SessionManifest, MANIFEST_FILE};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const GROUND_TRUTH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSegment {
    pub file: String,
    #[serde(flatten)]
    pub oae: InjectedOae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema_version: u32,
    pub participant_id: String,
    pub model: EarModel,
    pub segments: Vec<GroundTruthSegment>,
}

impl GroundTruth {
    pub fn expected_magnitudes(&self) -> Vec<MagnitudeRecord> {
        self.segments
            .iter()
            .map(|s| MagnitudeRecord {
                participant_id: self.participant_id.clone(),
                task_id: s.oae.task_id,
                f_s_hz: s.oae.f_s_hz,
                magnitude: s.oae.expected_magnitude,
                window_count: 1,
                noise_floor: 0.0,
            })
            .collect()
    }

    /// Closed-form SEDs implied by the injected phasors.
    pub fn expected_seds(&self) -> Result<Vec<SedRecord>> {
        compute_seds(&self.expected_magnitudes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::schema(
                path.display().to_string(),
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ground truth serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub manifest: SessionManifest,
    /// One per manifest segment.
    pub recordings: Vec<SampleBuffer>,
    pub ground_truth: GroundTruth,
}

/// Playback files of a session bundle, with the metadata needed to simulate.
pub fn load_playbacks(
    manifest: &SessionManifest,
    session_dir: &Path,
) -> Result<Vec<EmbeddedPlayback>> {
    manifest
        .segments
        .par_iter()
        .map(|seg| {
            let audio = load_wav(session_dir.join(&seg.file))?;
            if audio.sample_rate() != manifest.sample_rate {
                return Err(Error::RateMismatch {
                    expected: manifest.sample_rate,
                    found: audio.sample_rate(),
                    what: seg.file.clone(),
                });
            }
            if audio.len() != seg.len() {
                return Err(Error::Mismatch(format!(
                    "{} has {} samples, manifest segment has {}",
                    seg.file,
                    audio.len(),
                    seg.len()
                )));
            }
            Ok(EmbeddedPlayback {
                audio,
                notch_center: seg.f_s_hz,
                notch_width: manifest.notch_width_hz,
                probe_amplitude: manifest.probe_amplitude,
                norm_gain: seg.norm_gain(),
                fade_s: DEFAULT_FADE_S,
            })
        })
        .collect()
}

/// Run the ear model over every segment of a session.
pub fn simulate_session(
    manifest: &SessionManifest,
    playbacks: &[EmbeddedPlayback],
    participant_id: &str,
    model: &EarModel,
) -> Result<SimulatedSession> {
    model.validate()?;
    if playbacks.len() != manifest.segments.len() {
        return Err(Error::Mismatch(format!(
            "{} playbacks for {} manifest segments",
            playbacks.len(),
            manifest.segments.len()
        )));
    }
    for seg in &manifest.segments {
        model.gain(seg.task_id)?;
    }
    let streams: Vec<u64> = manifest
        .segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let rep = manifest.segments[..i]
                .iter()
                .filter(|s| s.task_id == seg.task_id && s.f_s_hz == seg.f_s_hz)
                .count();
            noise_stream(seg.task_id, seg.f_s_hz, rep)
        })
        .collect();
    let sims = manifest
        .segments
        .par_iter()
        .zip(playbacks)
        .zip(&streams)
        .map(|((seg, p), &stream)| simulate_ear_stream(p, model, seg.task_id, stream))
        .collect::<Result<Vec<_>>>()?;
    let mut out_manifest = manifest.clone();
    out_manifest.participant_id = participant_id.to_string();
    let segments = manifest
        .segments
        .iter()
        .zip(&sims)
        .map(|(seg, s)| GroundTruthSegment {
            file: seg.file.clone(),
            oae: s.ground_truth,
        })
        .collect();
    Ok(SimulatedSession {
        manifest: out_manifest,
        recordings: sims.into_iter().map(|s| s.audio).collect(),
        ground_truth: GroundTruth {
            schema_version: GROUND_TRUTH_SCHEMA_VERSION,
            participant_id: participant_id.to_string(),
            model: model.clone(),
            segments,
        },
    })
}

/// Write recordings, the participant's manifest and `ground_truth.json`.
/// Returns the number of clipped samples.
pub fn write_simulation(
    dir: &Path,
    sim: &SimulatedSession,
    encoding: WavEncoding,
) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut clipped = 0;
    for (seg, rec) in sim.manifest.segments.iter().zip(&sim.recordings) {
        clipped += save_wav(rec, dir.join(&seg.file), encoding)?;
    }
    sim.manifest.save(dir.join(MANIFEST_FILE))?;
    let gt = dir.join(GROUND_TRUTH_FILE);
    std::fs::write(&gt, sim.ground_truth.to_json()).map_err(|e| Error::io(&gt, e))?;
    Ok(clipped)
}

/// Simulate every cohort member and write one directory per participant
/// plus `participants.csv`, `behavior.csv` and `cohort.json`.
pub fn write_cohort(
    out_dir: &Path,
    manifest: &SessionManifest,
    playbacks: &[EmbeddedPlayback],
    cohort: &Cohort,
    encoding: WavEncoding,
) -> Result<()> {
    if playbacks.len() != manifest.segments.len() {
        return Err(Error::Mismatch(format!(
            "{} playbacks for {} manifest segments",
            playbacks.len(),
            manifest.segments.len()
        )));
    }
    for m in &cohort.members {
        m.model.validate()?;
        for seg in &manifest.segments {
            m.model.gain(seg.task_id)?;
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for m in &cohort.members {
        let sim = simulate_session(manifest, playbacks, &m.meta.participant_id, &m.model)?;
        write_simulation(&out_dir.join(&m.meta.participant_id), &sim, encoding)?;
    }
    let meta: Vec<_> = cohort.members.iter().map(|m| m.meta.clone()).collect();
    let behavior: Vec<_> = cohort
        .members
        .iter()
        .flat_map(|m| m.behavior.iter().cloned())
        .collect();
    let write = |name: &str, f: &dyn Fn(std::fs::File) -> Result<()>| {
        let path = out_dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f(file)
    };
    write("participants.csv", &|f| write_participants(f, &meta))?;
    write("behavior.csv", &|f| write_behavior(f, &behavior))?;
    let path = out_dir.join("cohort.json");
    std::fs::write(&path, cohort.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
