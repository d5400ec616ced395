use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EarModel, DEFAULT_GAINS};
use crate::analysis::{BehavioralRecord, Gender, ParticipantMeta};
use crate::error::{Error, Result};

/// Per-participant gains: `template * s` with `s ~ U[scale_min, scale_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSampler {
    pub template: [f64; 4],
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for GainSampler {
    fn default() -> Self {
        Self {
            template: DEFAULT_GAINS,
            scale_min: 0.5,
            scale_max: 1.5,
        }
    }
}

/// Which probe frequency each participant is most sensitive at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub frequencies: Vec<f64>,
    /// `(frequency, share of the cohort)`; shares are rounded to whole
    /// participants by largest remainder.
    pub dominant: Vec<(f64, f64)>,
    /// Weight range for non-dominant frequencies (dominant weight is 1).
    pub secondary_weight: (f64, f64),
}

impl Default for FrequencyProfile {
    fn default() -> Self {
        Self {
            frequencies: vec![1000.0, 2000.0, 3000.0],
            dominant: vec![(3000.0, 12.0 / 19.0), (2000.0, 7.0 / 19.0)],
            secondary_weight: (0.3, 0.7),
        }
    }
}

impl FrequencyProfile {
    pub fn counts(&self, n: usize) -> Vec<(f64, usize)> {
        let total: f64 = self.dominant.iter().map(|d| d.1).sum();
        let exact: Vec<f64> = self
            .dominant
            .iter()
            .map(|d| d.1 / total * n as f64)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| {
            (exact[b] - exact[b].floor())
                .total_cmp(&(exact[a] - exact[a].floor()))
                .then(a.cmp(&b))
        });
        let mut left = n - counts.iter().sum::<usize>();
        for i in order.into_iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        self.dominant.iter().map(|d| d.0).zip(counts).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_participants: usize,
    pub gain_sampler: GainSampler,
    pub profile: FrequencyProfile,
    pub noise_floor_dbfs: Option<f64>,
    pub passive_reflectance: f64,
    pub oae_phase_rad: f64,
    pub oae_latency_ms: f64,
    /// Added to the task 2-4 gains of participants aged 40 or over.
    pub older_jump: f64,
    pub female_share: f64,
    pub age_range: (u32, u32),
    /// Artificial-ear cohort: every gain is zero.
    pub artificial: bool,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_participants: 19,
            gain_sampler: GainSampler::default(),
            profile: FrequencyProfile::default(),
            noise_floor_dbfs: Some(-40.0),
            passive_reflectance: 1.0,
            oae_phase_rad: 0.0,
            oae_latency_ms: 0.0,
            older_jump: 0.0,
            female_share: 8.0 / 19.0,
            age_range: (20, 55),
            artificial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub meta: ParticipantMeta,
    pub dominant_frequency_hz: f64,
    pub gain_scale: f64,
    pub model: EarModel,
    #[serde(skip)]
    pub behavior: Vec<BehavioralRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub schema_version: u32,
    pub seed: u64,
    pub spec: CohortSpec,
    pub members: Vec<CohortMember>,
    pub warnings: Vec<String>,
}

impl Cohort {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("cohort serializes");
        s.push('\n');
        s
    }
}

const QUESTIONS_PER_TASK: usize = 4;
const BASE_MINUTES: [f64; 3] = [1.2, 1.6, 2.1];
const P_CORRECT: [f64; 3] = [0.8, 0.75, 0.7];

fn participant_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Draw a reproducible synthetic cohort.
pub fn simulate_cohort(spec: &CohortSpec, seed: u64) -> Result<Cohort> {
    let n = spec.n_participants;
    if n < 2 {
        return Err(Error::invalid(format!(
            "cohort needs at least 2 participants, got {n}"
        )));
    }
    let s = &spec.gain_sampler;
    if !(s.scale_min >= 0.0 && s.scale_max >= s.scale_min)
        || s.template.iter().any(|g| !(0.0..=1.0).contains(g))
    {
        return Err(Error::invalid(
            "gain sampler needs 0 <= scale_min <= scale_max and template gains in [0, 1]",
        ));
    }
    let p = &spec.profile;
    if p.dominant.is_empty()
        || p.dominant
            .iter()
            .any(|d| !(d.1 >= 0.0) || !p.frequencies.contains(&d.0))
    {
        return Err(Error::invalid(
            "every dominant frequency must be listed in the profile with a non-negative share",
        ));
    }
    if p.dominant.iter().map(|d| d.1).sum::<f64>() <= 0.0 {
        return Err(Error::invalid("dominant shares sum to zero"));
    }
    let (w_lo, w_hi) = p.secondary_weight;
    if !(0.0 <= w_lo && w_lo <= w_hi && w_hi < 1.0) {
        return Err(Error::invalid(
            "secondary weights must satisfy 0 <= low <= high < 1",
        ));
    }
    if spec.age_range.0 < 20 || spec.age_range.1 < spec.age_range.0 {
        return Err(Error::invalid("age range must start at 20 or later"));
    }
    if !(0.0..=1.0).contains(&spec.female_share) {
        return Err(Error::invalid("female_share must be in [0, 1]"));
    }

    let mut warnings = Vec::new();
    if s.scale_min == s.scale_max && !spec.artificial {
        let msg =
            "gain sampler has zero variance; all participants share one gain profile".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dominant: Vec<f64> = p
        .counts(n)
        .into_iter()
        .flat_map(|(f, c)| std::iter::repeat_n(f, c))
        .collect();
    dominant.shuffle(&mut rng);
    let n_female = (spec.female_share * n as f64).round() as usize;
    let mut genders: Vec<Gender> = (0..n)
        .map(|i| {
            if i < n_female {
                Gender::Female
            } else {
                Gender::Male
            }
        })
        .collect();
    genders.shuffle(&mut rng);

    let width = n.to_string().len().max(2);
    let mut members = Vec::with_capacity(n);
    for (i, (&dom, &gender)) in dominant.iter().zip(&genders).enumerate() {
        let mut prng = participant_rng(seed, i);
        let participant_id = format!("P{:0width$}", i + 1);
        let age = prng.random_range(spec.age_range.0..=spec.age_range.1) as f64;
        let scale = if s.scale_max > s.scale_min {
            prng.random_range(s.scale_min..s.scale_max)
        } else {
            s.scale_min
        };
        let mut gains = s.template.map(|g| g * scale);
        if age >= 40.0 {
            gains[1..].iter_mut().for_each(|g| *g += spec.older_jump);
        }
        if spec.artificial {
            gains = [0.0; 4];
        }
        let gains = gains.map(|g| g.clamp(0.0, 1.0));
        let weights = p
            .frequencies
            .iter()
            .map(|&f| {
                let w = if f == dom {
                    1.0
                } else if w_hi > w_lo {
                    prng.random_range(w_lo..w_hi)
                } else {
                    w_lo
                };
                (f, w)
            })
            .collect();
        let model = EarModel {
            frequency_weights: weights,
            oae_phase_rad: spec.oae_phase_rad,
            oae_latency_ms: spec.oae_latency_ms,
            passive_reflectance: spec.passive_reflectance,
            noise_floor_dbfs: spec.noise_floor_dbfs,
            seed: prng.next_u64(),
            ..EarModel::with_gains(gains)
        };
        model.validate()?;
        let behavior = synth_behavior(&participant_id, &mut prng);
        members.push(CohortMember {
            meta: ParticipantMeta {
                participant_id,
                gender,
                age,
            },
            dominant_frequency_hz: dom,
            gain_scale: scale,
            model,
            behavior,
        });
    }
    Ok(Cohort {
        schema_version: 1,
        seed,
        spec: spec.clone(),
        members,
        warnings,
    })
}

fn synth_behavior(participant_id: &str, rng: &mut ChaCha8Rng) -> Vec<BehavioralRecord> {
    let jitter = Normal::new(0.0, 0.15).expect("valid");
    let mut out = Vec::new();
    for (k, task_id) in (2u8..=4).enumerate() {
        for _ in 0..QUESTIONS_PER_TASK {
            let minutes = (BASE_MINUTES[k] * (1.0 + jitter.sample(rng))).max(0.2);
            out.push(BehavioralRecord {
                participant_id: participant_id.to_string(),
                task_id,
                response_time_min: (minutes * 1000.0).round() / 1000.0,
                correct: rng.random_bool(P_CORRECT[k]),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominant_counts_follow_shares() {
        let p = FrequencyProfile::default();
        assert_eq!(p.counts(19), vec![(3000.0, 12), (2000.0, 7)]);
        let c = simulate_cohort(&CohortSpec::default(), 7).unwrap();
        assert_eq!(
            c.members
                .iter()
                .filter(|m| m.dominant_frequency_hz == 3000.0)
                .count(),
            12
        );
        assert_eq!(
            c.members
                .iter()
                .filter(|m| m.meta.gender == Gender::Female)
                .count(),
            8
        );
        for m in &c.members {
            assert_eq!(m.model.weight(m.dominant_frequency_hz), 1.0);
            let g: Vec<f64> = (1..=4).map(|t| m.model.gain(t).unwrap()).collect();
            assert!(g.windows(2).all(|w| w[0] < w[1]));
            assert!(m.meta.age >= 20.0 && m.meta.age <= 55.0);
            assert_eq!(m.behavior.len(), 12);
        }
    }

    #[test]
    fn reproducible_from_seed() {
        let a = simulate_cohort(&CohortSpec::default(), 3).unwrap();
        let b = simulate_cohort(&CohortSpec::default(), 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a, b);
        let c = simulate_cohort(&CohortSpec::default(), 4).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn degenerate_sampler_warns() {
        let mut spec = CohortSpec::default();
        spec.gain_sampler.scale_max = spec.gain_sampler.scale_min;
        let c = simulate_cohort(&spec, 1).unwrap();
        assert_eq!(c.warnings.len(), 1);
        spec.n_participants = 1;
        assert!(simulate_cohort(&spec, 1).is_err());
    }

    #[test]
    fn older_participants_get_extra_load_gain() {
        let spec = CohortSpec {
            older_jump: 0.1,
            gain_sampler: GainSampler {
                scale_min: 1.0,
                scale_max: 1.0,
                ..GainSampler::default()
            },
            ..CohortSpec::default()
        };
        let c = simulate_cohort(&spec, 5).unwrap();
        for m in &c.members {
            let jump = m.model.gain(2).unwrap() - m.model.gain(1).unwrap();
            let expected = if m.meta.age >= 40.0 { 0.13 } else { 0.03 };
            assert!((jump - expected).abs() < 1e-12);
        }
    }
}
