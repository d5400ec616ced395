use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ols::ols_fit;
use super::stats::{group_stats, CiMethod, GroupStats};
use super::tables::{BehavioralRecord, ParticipantMeta};
use crate::error::{Error, Result};
use crate::oae::{ResultRow, SedRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub participant_id: String,
    pub f_s_hz: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub slope_std_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityOptions {
    /// Include Task 1 as the point (1, 0).
    pub baseline_zero: bool,
    /// Divide each participant's SEDs by their largest SED first.
    pub max_normalize: bool,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        Self {
            baseline_zero: true,
            max_normalize: false,
        }
    }
}

fn task_value(seds: &[SedRecord], task: u8) -> Result<&SedRecord> {
    seds.iter()
        .find(|s| s.task_id == task)
        .ok_or_else(|| Error::MissingTask {
            participant: seds
                .first()
                .map(|s| s.participant_id.clone())
                .unwrap_or_default(),
            task_id: task,
            f_s_hz: seds.first().map_or(0.0, |s| s.f_s_hz),
        })
}

/// Regression of SED on task index for one participant and frequency.
pub fn sensitivity(seds: &[SedRecord], baseline_zero: bool) -> Result<SensitivityResult> {
    let first = seds
        .first()
        .ok_or_else(|| Error::Empty("no SED records".into()))?;
    if seds
        .iter()
        .any(|s| s.participant_id != first.participant_id || s.f_s_hz != first.f_s_hz)
    {
        return Err(Error::Mismatch(
            "sensitivity needs SEDs of one participant at one frequency".into(),
        ));
    }
    let mut points = Vec::with_capacity(4);
    if baseline_zero {
        points.push((1.0, 0.0));
    }
    for task in 2..=4 {
        points.push((task as f64, task_value(seds, task)?.sed));
    }
    let fit = ols_fit(&points)?;
    Ok(SensitivityResult {
        participant_id: first.participant_id.clone(),
        f_s_hz: first.f_s_hz,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        n_points: fit.n_points,
        slope_std_err: fit.slope_std_err,
    })
}

/// Participants in first-appearance order, frequencies ascending.
pub(crate) fn index(seds: &[SedRecord]) -> (Vec<String>, Vec<f64>) {
    let mut participants: Vec<String> = Vec::new();
    for s in seds {
        if !participants.contains(&s.participant_id) {
            participants.push(s.participant_id.clone());
        }
    }
    let mut freqs: Vec<f64> = Vec::new();
    for s in seds {
        if !freqs.contains(&s.f_s_hz) {
            freqs.push(s.f_s_hz);
        }
    }
    freqs.sort_by(f64::total_cmp);
    (participants, freqs)
}

/// Sensitivities for every (participant, frequency) pair.
pub fn sensitivities(
    seds: &[SedRecord],
    options: SensitivityOptions,
) -> Result<Vec<SensitivityResult>> {
    let (participants, freqs) = index(seds);
    let mut out = Vec::new();
    for p in &participants {
        let mut mine: Vec<SedRecord> = seds
            .iter()
            .filter(|s| &s.participant_id == p)
            .cloned()
            .collect();
        if options.max_normalize {
            let max = mine.iter().map(|s| s.sed).fold(0.0, f64::max);
            if max > 0.0 {
                mine.iter_mut().for_each(|s| s.sed /= max);
            }
        }
        for &f in &freqs {
            let at: Vec<SedRecord> = mine.iter().filter(|s| s.f_s_hz == f).cloned().collect();
            if at.is_empty() {
                return Err(Error::MissingTask {
                    participant: p.clone(),
                    task_id: 2,
                    f_s_hz: f,
                });
            }
            out.push(sensitivity(&at, options.baseline_zero)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFrequency {
    pub participant_id: String,
    pub f_s_hz: f64,
    pub slope: f64,
    /// Another frequency had the same slope; the higher one was chosen.
    pub tied: bool,
}

/// Frequency of largest sensitivity per participant; ties go to the higher
/// frequency.
pub fn peak_frequencies(sens: &[SensitivityResult]) -> Vec<PeakFrequency> {
    let mut participants: Vec<&str> = Vec::new();
    for s in sens {
        if !participants.contains(&s.participant_id.as_str()) {
            participants.push(&s.participant_id);
        }
    }
    participants
        .into_iter()
        .map(|p| {
            let mine: Vec<&SensitivityResult> =
                sens.iter().filter(|s| s.participant_id == p).collect();
            let best = mine
                .iter()
                .max_by(|a, b| {
                    a.slope
                        .total_cmp(&b.slope)
                        .then(a.f_s_hz.total_cmp(&b.f_s_hz))
                })
                .expect("participant has sensitivities");
            let tied = mine.iter().filter(|s| s.slope == best.slope).count() > 1;
            if tied {
                log::info!(
                    "participant {p}: sensitivity tie, choosing {} Hz",
                    best.f_s_hz
                );
            }
            PeakFrequency {
                participant_id: p.to_string(),
                f_s_hz: best.f_s_hz,
                slope: best.slope,
                tied,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub task_id: u8,
    #[serde(flatten)]
    pub stats: GroupStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub dimension: String,
    pub value: String,
    pub f_s_hz: f64,
    pub n: usize,
    /// Tasks 1-4; Task 1 is identically zero.
    pub tasks: Vec<TaskStats>,
}

pub const AGE_BINS: [&str; 3] = ["20-29", "30-39", "40+"];

pub fn age_bin(age: f64) -> Result<&'static str> {
    match age {
        a if a < 20.0 => Err(Error::invalid(format!(
            "age {a} is below the youngest bin (20-29)"
        ))),
        a if a < 30.0 => Ok(AGE_BINS[0]),
        a if a < 40.0 => Ok(AGE_BINS[1]),
        _ => Ok(AGE_BINS[2]),
    }
}

/// Per-task SED summaries for every participant at each frequency.
pub fn sed_summary(seds: &[SedRecord], ci: CiMethod) -> Result<Vec<GroupSummary>> {
    let (participants, freqs) = index(seds);
    freqs
        .iter()
        .map(|&f| summarize(seds, &participants, f, "all", "all", ci))
        .collect()
}

fn summarize(
    seds: &[SedRecord],
    members: &[String],
    f_s: f64,
    dimension: &str,
    value: &str,
    ci: CiMethod,
) -> Result<GroupSummary> {
    let mut tasks = vec![TaskStats {
        task_id: 1,
        stats: group_stats(&vec![0.0; members.len()], ci)?,
    }];
    for task in 2..=4u8 {
        let values = members
            .iter()
            .map(|p| {
                seds.iter()
                    .find(|s| &s.participant_id == p && s.f_s_hz == f_s && s.task_id == task)
                    .map(|s| s.sed)
                    .ok_or_else(|| Error::MissingTask {
                        participant: p.clone(),
                        task_id: task,
                        f_s_hz: f_s,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        tasks.push(TaskStats {
            task_id: task,
            stats: group_stats(&values, ci)?,
        });
    }
    Ok(GroupSummary {
        dimension: dimension.into(),
        value: value.into(),
        f_s_hz: f_s,
        n: members.len(),
        tasks,
    })
}

/// SED summaries grouped by gender and by age bin.
pub fn demographic_report(
    seds: &[SedRecord],
    meta: &[ParticipantMeta],
    ci: CiMethod,
) -> Result<Vec<GroupSummary>> {
    let (participants, freqs) = index(seds);
    let mut gender: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut age: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for p in &participants {
        let m = meta
            .iter()
            .find(|m| &m.participant_id == p)
            .ok_or_else(|| Error::Mismatch(format!("participant {p} has no demographic record")))?;
        gender
            .entry(m.gender.as_str().to_string())
            .or_default()
            .push(p.clone());
        age.entry(age_bin(m.age)?).or_default().push(p.clone());
    }
    let mut out = Vec::new();
    for &f in &freqs {
        for (g, members) in &gender {
            out.push(summarize(seds, members, f, "gender", g, ci)?);
        }
        for bin in AGE_BINS {
            if let Some(members) = age.get(bin) {
                out.push(summarize(seds, members, f, "age_bin", bin, ci)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSummary {
    pub task_id: u8,
    /// Minutes.
    pub response_time: GroupStats,
    /// Percent correct.
    pub accuracy: GroupStats,
}

/// Per-task response time and accuracy across participants.
pub fn behavioral_summary(
    records: &[BehavioralRecord],
    ci: CiMethod,
) -> Result<Vec<BehaviorSummary>> {
    if records.is_empty() {
        return Err(Error::Empty("no behavioral records".into()));
    }
    if let Some(r) = records.iter().find(|r| !(2..=4).contains(&r.task_id)) {
        return Err(Error::invalid(format!(
            "behavioral record for task {} of {}: only tasks 2-4 have questions",
            r.task_id, r.participant_id
        )));
    }
    if let Some(r) = records.iter().find(|r| !(r.response_time_min > 0.0)) {
        return Err(Error::invalid(format!(
            "non-positive response time for {}",
            r.participant_id
        )));
    }
    let tasks: BTreeSet<u8> = records.iter().map(|r| r.task_id).collect();
    let mut out = Vec::new();
    for task in tasks {
        let mut per: Vec<(&str, f64, usize, usize)> = Vec::new();
        for r in records.iter().filter(|r| r.task_id == task) {
            match per.iter_mut().find(|e| e.0 == r.participant_id) {
                Some(e) => {
                    e.1 += r.response_time_min;
                    e.2 += r.correct as usize;
                    e.3 += 1;
                }
                None => per.push((
                    &r.participant_id,
                    r.response_time_min,
                    r.correct as usize,
                    1,
                )),
            }
        }
        let times: Vec<f64> = per.iter().map(|e| e.1 / e.3 as f64).collect();
        let acc: Vec<f64> = per
            .iter()
            .map(|e| 100.0 * e.2 as f64 / e.3 as f64)
            .collect();
        out.push(BehaviorSummary {
            task_id: task,
            response_time: group_stats(&times, ci)?,
            accuracy: group_stats(&acc, ci)?,
        });
    }
    Ok(out)
}

/// SED records carried by results rows, one per (participant, task, f_s).
pub fn seds_from_rows(rows: &[ResultRow]) -> Vec<SedRecord> {
    let mut out: Vec<SedRecord> = Vec::new();
    for r in rows {
        if let Some(sed) = r.sed {
            if !out.iter().any(|s| {
                s.participant_id == r.participant_id
                    && s.task_id == r.task_id
                    && s.f_s_hz == r.f_s_hz
            }) {
                out.push(SedRecord {
                    participant_id: r.participant_id.clone(),
                    task_id: r.task_id,
                    f_s_hz: r.f_s_hz,
                    sed,
                });
            }
        }
    }
    out
}

/// `[delta_2, delta_3, delta_4]` per participant, at one frequency or
/// averaged over all frequencies when `f_s` is `None`.
pub fn sed_matrix(seds: &[SedRecord], f_s: Option<f64>) -> Result<Vec<[f64; 3]>> {
    let (participants, freqs) = index(seds);
    let freqs: Vec<f64> = match f_s {
        Some(f) => vec![f],
        None => freqs,
    };
    participants
        .iter()
        .map(|p| {
            let mut row = [0.0; 3];
            for (k, task) in (2..=4u8).enumerate() {
                for &f in &freqs {
                    let s = seds
                        .iter()
                        .find(|s| &s.participant_id == p && s.f_s_hz == f && s.task_id == task)
                        .ok_or_else(|| Error::MissingTask {
                            participant: p.clone(),
                            task_id: task,
                            f_s_hz: f,
                        })?;
                    row[k] += s.sed / freqs.len() as f64;
                }
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Gender;

    fn seds(p: &str, f: f64, d: [f64; 3]) -> Vec<SedRecord> {
        (2..=4)
            .zip(d)
            .map(|(t, sed)| SedRecord {
                participant_id: p.into(),
                task_id: t,
                f_s_hz: f,
                sed,
            })
            .collect()
    }

    #[test]
    fn sensitivity_modes() {
        let s = sensitivity(&seds("P", 3000.0, [1.0, 2.0, 3.0]), true).unwrap();
        assert!((s.slope - 1.0).abs() < 1e-15);
        assert_eq!(s.n_points, 4);
        let s = sensitivity(&seds("P", 3000.0, [1.0, 2.0, 3.0]), false).unwrap();
        assert_eq!(s.n_points, 3);
        let s = sensitivity(&seds("P", 3000.0, [0.0; 3]), true).unwrap();
        assert_eq!(s.slope, 0.0);
        let mut missing = seds("P", 3000.0, [1.0, 2.0, 3.0]);
        missing.remove(1);
        assert!(matches!(
            sensitivity(&missing, true),
            Err(Error::MissingTask { task_id: 3, .. })
        ));
    }

    #[test]
    fn peak_ties_go_high() {
        let mut all = seds("P", 2000.0, [1.0, 2.0, 3.0]);
        all.extend(seds("P", 3000.0, [1.0, 2.0, 3.0]));
        all.extend(seds("P", 1000.0, [0.5, 1.0, 1.5]));
        let sens = sensitivities(&all, SensitivityOptions::default()).unwrap();
        let peaks = peak_frequencies(&sens);
        assert_eq!(peaks[0].f_s_hz, 3000.0);
        assert!(peaks[0].tied);
    }

    #[test]
    fn age_bins() {
        assert_eq!(age_bin(20.0).unwrap(), "20-29");
        assert_eq!(age_bin(39.9).unwrap(), "30-39");
        assert_eq!(age_bin(55.0).unwrap(), "40+");
        assert!(age_bin(19.0).is_err());
    }

    #[test]
    fn demographics_partition_cohort() {
        let mut all = Vec::new();
        let mut meta = Vec::new();
        for i in 0..6 {
            let id = format!("P{i}");
            all.extend(seds(&id, 3000.0, [i as f64, 2.0, 3.0]));
            meta.push(ParticipantMeta {
                participant_id: id,
                gender: if i % 3 == 0 {
                    Gender::Female
                } else {
                    Gender::Male
                },
                age: 22.0 + 5.0 * i as f64,
            });
        }
        let groups = demographic_report(&all, &meta, CiMethod::StudentT).unwrap();
        let by = |d: &str| {
            groups
                .iter()
                .filter(|g| g.dimension == d)
                .map(|g| g.n)
                .sum::<usize>()
        };
        assert_eq!(by("gender"), 6);
        assert_eq!(by("age_bin"), 6);
        meta.pop();
        assert!(demographic_report(&all, &meta, CiMethod::StudentT).is_err());
    }

    #[test]
    fn behavior_arithmetic() {
        let rec = |p: &str, c: bool| BehavioralRecord {
            participant_id: p.into(),
            task_id: 2,
            response_time_min: 1.0,
            correct: c,
        };
        let mut rs = vec![
            rec("A", true),
            rec("A", true),
            rec("A", true),
            rec("A", false),
        ];
        let s = behavioral_summary(&rs, CiMethod::StudentT).unwrap();
        assert_eq!(s[0].accuracy.mean, 75.0);
        rs = vec![rec("A", true), rec("B", true), rec("B", false)];
        let s = behavioral_summary(&rs, CiMethod::StudentT).unwrap();
        assert_eq!(s[0].accuracy.mean, 75.0);
        assert!((s[0].accuracy.std - 35.355_339_059_327_38).abs() < 1e-12);
        assert!(behavioral_summary(&[], CiMethod::StudentT).is_err());
        rs[0].task_id = 1;
        assert!(behavioral_summary(&rs, CiMethod::StudentT).is_err());
    }
}
