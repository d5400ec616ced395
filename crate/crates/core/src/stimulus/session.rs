use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{embed_with, EmbedConfig, EmbeddedPlayback};
use super::manifest::{ManifestSegment, SessionManifest, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION};
use crate::audio::{load_wav, save_wav, SampleBuffer, WavEncoding};
use crate::error::{Error, Result};

pub const DEFAULT_FREQUENCIES: [f64; 3] = [1000.0, 2000.0, 3000.0];

/// One listening task. Task 1 is the probe-only baseline and carries no clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: u8,
    /// Paths relative to the clip root.
    pub source_clips: Vec<PathBuf>,
    pub prompt_text: String,
    pub question_text: String,
    pub expected_answer: String,
    /// Indices into `source_clips`; empty means natural order.
    pub clip_order: Vec<usize>,
}

impl TaskSpec {
    pub fn baseline() -> Self {
        Self {
            task_id: 1,
            source_clips: Vec::new(),
            prompt_text: String::new(),
            question_text: String::new(),
            expected_answer: String::new(),
            clip_order: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.task_id {
            1 if !self.source_clips.is_empty() => Err(Error::invalid(
                "task 1 plays the probe alone and must not list clips",
            )),
            1 => Ok(()),
            2..=4 => {
                if self.source_clips.is_empty() {
                    return Err(Error::invalid(format!(
                        "task {} needs at least one clip",
                        self.task_id
                    )));
                }
                if self.prompt_text.trim().is_empty() || self.question_text.trim().is_empty() {
                    return Err(Error::invalid(format!(
                        "task {} needs a prompt and a question",
                        self.task_id
                    )));
                }
                if let Some(&bad) = self
                    .clip_order
                    .iter()
                    .find(|&&i| i >= self.source_clips.len())
                {
                    return Err(Error::invalid(format!(
                        "task {} clip_order index {bad} out of range",
                        self.task_id
                    )));
                }
                Ok(())
            }
            other => Err(Error::invalid(format!(
                "task_id must be 1..=4, got {other}"
            ))),
        }
    }

    fn ordered_clips(&self) -> Vec<&PathBuf> {
        if self.clip_order.is_empty() {
            self.source_clips.iter().collect()
        } else {
            self.clip_order
                .iter()
                .map(|&i| &self.source_clips[i])
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub task_id: u8,
    pub f_s_hz: f64,
    pub start_sample: u64,
    pub end_sample: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTiming {
    pub sample_rate: u32,
    pub frequencies: Vec<f64>,
    pub probe_amplitude: f64,
    pub segment_duration_s: f64,
    pub gap_s: f64,
    pub repetitions: usize,
}

impl Default for SessionTiming {
    fn default() -> Self {
        Self {
            sample_rate: crate::audio::DEFAULT_SAMPLE_RATE,
            frequencies: DEFAULT_FREQUENCIES.to_vec(),
            probe_amplitude: 0.1,
            segment_duration_s: 10.0,
            gap_s: 1.0,
            repetitions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionPlan {
    pub participant_id: String,
    pub stimulus_frequencies: Vec<f64>,
    pub stimulus_amplitude: f64,
    pub tasks: Vec<TaskSpec>,
    /// Ordered task-major, then frequency, then repetition.
    pub segments: Vec<Segment>,
    pub sample_rate: u32,
    pub embed: EmbedConfig,
}

impl SessionPlan {
    pub fn new(
        participant_id: impl Into<String>,
        tasks: Vec<TaskSpec>,
        timing: &SessionTiming,
    ) -> Result<Self> {
        if timing.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(timing.segment_duration_s > 0.0) || !(timing.gap_s >= 0.0) || timing.repetitions == 0 {
            return Err(Error::invalid(
                "segment duration, gap and repetitions must be positive",
            ));
        }
        let rate = timing.sample_rate as f64;
        let seg_len = (timing.segment_duration_s * rate).round() as u64;
        let gap = (timing.gap_s * rate).round() as u64;
        let mut segments = Vec::new();
        let mut cursor = 0u64;
        for task in &tasks {
            for &f_s in &timing.frequencies {
                for _ in 0..timing.repetitions {
                    segments.push(Segment {
                        task_id: task.task_id,
                        f_s_hz: f_s,
                        start_sample: cursor,
                        end_sample: cursor + seg_len,
                    });
                    cursor += seg_len + gap;
                }
            }
        }
        let plan = Self {
            participant_id: participant_id.into(),
            stimulus_frequencies: timing.frequencies.clone(),
            stimulus_amplitude: timing.probe_amplitude,
            tasks,
            segments,
            sample_rate: timing.sample_rate,
            embed: EmbedConfig::default(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.participant_id.trim().is_empty() {
            return Err(Error::invalid("participant_id must be non-empty"));
        }
        if self.stimulus_frequencies.is_empty() {
            return Err(Error::invalid("at least one probe frequency is required"));
        }
        if !(self.stimulus_amplitude > 0.0 && self.stimulus_amplitude <= 1.0) {
            return Err(Error::invalid("probe amplitude must be in (0, 1]"));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for &f in &self.stimulus_frequencies {
            if f >= nyquist {
                return Err(Error::AboveNyquist { freq: f, nyquist });
            }
            self.embed.notch_filter(f, self.sample_rate)?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tasks {
            t.validate()?;
            if !seen.insert(t.task_id) {
                return Err(Error::invalid(format!("task {} listed twice", t.task_id)));
            }
        }
        if !seen.contains(&1) {
            return Err(Error::invalid("the plan needs the task 1 baseline"));
        }
        let mut prev_end = 0;
        for s in &self.segments {
            if s.start_sample < prev_end || s.end_sample <= s.start_sample {
                return Err(Error::invalid(
                    "segments must be non-empty, ordered and non-overlapping",
                ));
            }
            prev_end = s.end_sample;
        }
        for t in &self.tasks {
            for &f in &self.stimulus_frequencies {
                if !self
                    .segments
                    .iter()
                    .any(|s| s.task_id == t.task_id && s.f_s_hz == f)
                {
                    return Err(Error::invalid(format!(
                        "no segment for task {} at {f} Hz",
                        t.task_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn segment_file_name(&self, index: usize) -> String {
        let seg = &self.segments[index];
        let rep = self.segments[..index]
            .iter()
            .filter(|s| s.task_id == seg.task_id && s.f_s_hz == seg.f_s_hz)
            .count();
        let hz = if seg.f_s_hz.fract() == 0.0 {
            format!("{:.0}", seg.f_s_hz)
        } else {
            seg.f_s_hz.to_string().replace('.', "p")
        };
        if rep == 0 {
            format!("t{}_f{hz}.wav", seg.task_id)
        } else {
            format!("t{}_f{hz}_r{rep}.wav", seg.task_id)
        }
    }

    fn task(&self, task_id: u8) -> &TaskSpec {
        self.tasks
            .iter()
            .find(|t| t.task_id == task_id)
            .expect("validated plan")
    }
}

/// Concatenate a task's clips in order and tile the result to `len` samples.
fn assemble_task_audio(clips: &[SampleBuffer], len: usize, rate: u32) -> SampleBuffer {
    if clips.is_empty() {
        return SampleBuffer::from_trusted(vec![0.0; len], rate);
    }
    let joined: Vec<f64> = clips
        .iter()
        .flat_map(|c| c.samples().iter().copied())
        .collect();
    let samples = joined.iter().copied().cycle().take(len).collect();
    SampleBuffer::from_trusted(samples, rate)
}

/// Render every segment's playback without touching the filesystem.
pub fn render_session(plan: &SessionPlan, clip_root: &Path) -> Result<Vec<EmbeddedPlayback>> {
    plan.validate()?;
    let mut task_clips: Vec<(u8, Vec<SampleBuffer>)> = Vec::new();
    for task in &plan.tasks {
        let mut clips = Vec::new();
        for rel in task.ordered_clips() {
            let path = clip_root.join(rel);
            let clip = load_wav(&path)?;
            if clip.sample_rate() != plan.sample_rate {
                return Err(Error::RateMismatch {
                    expected: plan.sample_rate,
                    found: clip.sample_rate(),
                    what: path.display().to_string(),
                });
            }
            clips.push(clip);
        }
        task_clips.push((task.task_id, clips));
    }
    plan.segments
        .par_iter()
        .map(|seg| {
            let len = (seg.end_sample - seg.start_sample) as usize;
            let clips = &task_clips
                .iter()
                .find(|(id, _)| *id == seg.task_id)
                .expect("validated")
                .1;
            debug_assert_eq!(plan.task(seg.task_id).task_id, seg.task_id);
            let audio = assemble_task_audio(clips, len, plan.sample_rate);
            embed_with(&audio, seg.f_s_hz, plan.stimulus_amplitude, &plan.embed)
        })
        .collect()
}

/// Write one playback file per segment plus `manifest.json` into `out_dir`.
///
/// All audio is rendered before anything is written, so a failing plan
/// leaves no partial bundle.
pub fn build_session(
    plan: &SessionPlan,
    clip_root: &Path,
    out_dir: &Path,
    encoding: WavEncoding,
) -> Result<SessionManifest> {
    let playbacks = render_session(plan, clip_root)?;
    let manifest = SessionManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        participant_id: plan.participant_id.clone(),
        sample_rate: plan.sample_rate,
        probe_amplitude: plan.stimulus_amplitude,
        notch_width_hz: plan.embed.notch_width_hz,
        segments: plan
            .segments
            .iter()
            .zip(&playbacks)
            .enumerate()
            .map(|(i, (s, p))| ManifestSegment {
                task_id: s.task_id,
                f_s_hz: s.f_s_hz,
                file: plan.segment_file_name(i),
                start_sample: s.start_sample,
                end_sample: s.end_sample,
                norm_gain_db: p.norm_gain_db(),
            })
            .collect(),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (seg, playback) in manifest.segments.iter().zip(&playbacks) {
        save_wav(&playback.audio, out_dir.join(&seg.file), encoding)?;
    }
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
