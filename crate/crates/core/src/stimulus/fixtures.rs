//! Small synthetic task clips: chirps and noise bursts for the low-load
//! task, two-tone "digit" beeps over babble-like noise for the language
//! tasks. They stand in for the speech corpus, which is not shipped.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::session::TaskSpec;
use crate::audio::{save_wav, SampleBuffer, WavEncoding};
use crate::error::{Error, Result};

pub const NATURE_CLIP: &str = "nature_chirps.wav";
pub const DIGITS_SINGLE_CLIP: &str = "digits_single.wav";
pub const DIGITS_MALE_CLIP: &str = "digits_male.wav";
pub const DIGITS_DUAL_CLIP: &str = "digits_dual.wav";

const CLIP_SECONDS: f64 = 3.0;
const ROWS: [f64; 4] = [697.0, 770.0, 852.0, 941.0];
const COLS: [f64; 3] = [1209.0, 1336.0, 1477.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Voice {
    Female,
    Male,
}

impl Voice {
    fn pitch(self) -> f64 {
        match self {
            Voice::Female => 1.6,
            Voice::Male => 1.0,
        }
    }
}

fn envelope(t: f64, len: f64) -> f64 {
    let ramp = 0.005_f64.min(len / 2.0);
    (t / ramp).min(1.0).min((len - t) / ramp).max(0.0)
}

fn add_noise(x: &mut [f64], rms: f64, rng: &mut ChaCha8Rng) {
    let n = Normal::new(0.0, rms).expect("finite rms");
    x.iter_mut().for_each(|s| *s += n.sample(rng));
}

/// Rising chirps and short noise bursts.
pub fn nature_sounds(rate: u32, duration_s: f64, seed: u64) -> SampleBuffer {
    let fs = rate as f64;
    let len = (duration_s * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; len];
    let mut t0 = 0.05;
    while t0 < duration_s - 0.3 {
        let (f_lo, f_hi) = (
            rng.random_range(1500.0..2500.0),
            rng.random_range(3500.0..5500.0),
        );
        let dur = rng.random_range(0.06..0.12);
        let amp = rng.random_range(0.15..0.3);
        let start = (t0 * fs) as usize;
        let mut phase = 0.0;
        for i in 0..(dur * fs) as usize {
            let t = i as f64 / fs;
            let f = f_lo + (f_hi - f_lo) * t / dur;
            phase += 2.0 * PI * f / fs;
            if let Some(s) = x.get_mut(start + i) {
                *s += amp * envelope(t, dur) * phase.sin();
            }
        }
        t0 += dur + rng.random_range(0.05..0.25);
    }
    let burst = Normal::new(0.0, 0.08).expect("finite");
    let mut t0 = 0.4;
    while t0 < duration_s - 0.3 {
        let start = (t0 * fs) as usize;
        let dur = 0.15;
        for i in 0..(dur * fs) as usize {
            if let Some(s) = x.get_mut(start + i) {
                *s += envelope(i as f64 / fs, dur) * burst.sample(&mut rng);
            }
        }
        t0 += 0.9;
    }
    add_noise(&mut x, 0.01, &mut rng);
    SampleBuffer::from_trusted(x, rate)
}

/// Two-tone beeps encoding `digits`, 200 ms on / 100 ms off.
pub fn digit_beeps(rate: u32, digits: &[u8], voice: Voice, amplitude: f64) -> SampleBuffer {
    let fs = rate as f64;
    let (on, off) = (0.2, 0.1);
    let len = (digits.len() as f64 * (on + off) * fs) as usize;
    let mut x = vec![0.0; len];
    for (k, &d) in digits.iter().enumerate() {
        let d = (d % 10) as usize;
        let (r, c) = if d == 0 {
            (3, 1)
        } else {
            ((d - 1) / 3, (d - 1) % 3)
        };
        let (f1, f2) = (ROWS[r] * voice.pitch(), COLS[c] * voice.pitch());
        let start = (k as f64 * (on + off) * fs) as usize;
        for i in 0..(on * fs) as usize {
            let t = i as f64 / fs;
            let v = 0.5
                * amplitude
                * envelope(t, on)
                * ((2.0 * PI * f1 * t).sin() + (2.0 * PI * f2 * t).sin());
            x[start + i] += v;
        }
    }
    SampleBuffer::from_trusted(x, rate)
}

fn padded(mut x: Vec<f64>, len: usize) -> Vec<f64> {
    x.resize(len, 0.0);
    x
}

/// Digits from one voice over background noise.
pub fn single_voice_digits(rate: u32, seed: u64) -> SampleBuffer {
    let len = (CLIP_SECONDS * rate as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let digits: Vec<u8> = (0..8).map(|_| rng.random_range(0..10)).collect();
    let mut x = padded(
        digit_beeps(rate, &digits, Voice::Female, 0.3).into_samples(),
        len,
    );
    add_noise(&mut x, 0.05, &mut rng);
    SampleBuffer::from_trusted(x, rate)
}

/// Male-voice digits only; mixed with the female stream for the dual task.
pub fn male_digits(rate: u32, seed: u64) -> SampleBuffer {
    let len = (CLIP_SECONDS * rate as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let digits: Vec<u8> = (0..9).map(|_| rng.random_range(0..10)).collect();
    SampleBuffer::from_trusted(
        padded(
            digit_beeps(rate, &digits, Voice::Male, 0.3).into_samples(),
            len,
        ),
        rate,
    )
}

/// Two overlapping voices over background noise.
pub fn dual_voice_digits(rate: u32, seed: u64) -> SampleBuffer {
    let len = (CLIP_SECONDS * rate as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<u8> = (0..8).map(|_| rng.random_range(0..10)).collect();
    let b: Vec<u8> = (0..8).map(|_| rng.random_range(0..10)).collect();
    let fa = padded(
        digit_beeps(rate, &a, Voice::Female, 0.25).into_samples(),
        len,
    );
    let mb = digit_beeps(rate, &b, Voice::Male, 0.25).into_samples();
    let offset = (0.13 * rate as f64) as usize;
    let mut x = fa;
    for (i, v) in mb.into_iter().enumerate() {
        if let Some(s) = x.get_mut(i + offset) {
            *s += v;
        }
    }
    add_noise(&mut x, 0.06, &mut rng);
    SampleBuffer::from_trusted(x, rate)
}

/// Task list referencing the fixture clip file names.
pub fn default_tasks() -> Vec<TaskSpec> {
    vec![
        TaskSpec::baseline(),
        TaskSpec {
            task_id: 2,
            source_clips: vec![NATURE_CLIP.into()],
            prompt_text: "Please focus on the animal sounds.".into(),
            question_text: "Did you hear a bird chirping?".into(),
            expected_answer: "yes".into(),
            clip_order: Vec::new(),
        },
        TaskSpec {
            task_id: 3,
            source_clips: vec![DIGITS_SINGLE_CLIP.into()],
            prompt_text: "Focus on the digits spoken by the female voice.".into(),
            question_text: "What is the last digit spoken by the female voice?".into(),
            expected_answer: "see clip".into(),
            clip_order: Vec::new(),
        },
        TaskSpec {
            task_id: 4,
            source_clips: vec![DIGITS_DUAL_CLIP.into(), DIGITS_MALE_CLIP.into()],
            prompt_text: "Focus on the digits spoken by the male voice.".into(),
            question_text: "What are the last two digits spoken by the male voice?".into(),
            expected_answer: "see clip".into(),
            clip_order: vec![0, 1],
        },
    ]
}

/// Fixture audio by clip name.
pub fn fixture_clip(name: &str, rate: u32) -> Option<SampleBuffer> {
    let clip = match name {
        NATURE_CLIP => nature_sounds(rate, CLIP_SECONDS, 11),
        DIGITS_SINGLE_CLIP => single_voice_digits(rate, 12),
        DIGITS_MALE_CLIP => male_digits(rate, 13),
        DIGITS_DUAL_CLIP => dual_voice_digits(rate, 14),
        _ => return None,
    };
    Some(clip)
}

/// Write the fixture clips into `dir` and return the matching task list.
pub fn write_fixture_clips(dir: &Path, rate: u32) -> Result<Vec<TaskSpec>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for name in [
        NATURE_CLIP,
        DIGITS_SINGLE_CLIP,
        DIGITS_MALE_CLIP,
        DIGITS_DUAL_CLIP,
    ] {
        let clip = fixture_clip(name, rate).expect("known fixture");
        save_wav(&clip, dir.join(name), WavEncoding::Float32)?;
    }
    Ok(default_tasks())
}
