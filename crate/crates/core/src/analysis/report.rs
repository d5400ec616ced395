use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cohort::{
    behavioral_summary, demographic_report, index, peak_frequencies, sed_matrix, sed_summary,
    seds_from_rows, sensitivities, BehaviorSummary, GroupSummary, PeakFrequency,
    SensitivityOptions, SensitivityResult,
};
use super::significance::{load_effect_test, LoadEffect, TestMethod};
use super::stats::CiMethod;
use super::tables::{BehavioralRecord, ParticipantMeta};
use crate::error::{Error, Result};
use crate::oae::ResultRow;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub ci: CiMethod,
    pub test: TestMethod,
    pub sensitivity: SensitivityOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            ci: CiMethod::StudentT,
            test: TestMethod::Wilcoxon,
            sensitivity: SensitivityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyLoadEffect {
    /// `None` for the test on SEDs averaged across frequencies.
    pub f_s_hz: Option<f64>,
    #[serde(flatten)]
    pub result: LoadEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakShare {
    pub f_s_hz: f64,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub options: AnalysisOptions,
    pub n_participants: usize,
    pub frequencies_hz: Vec<f64>,
    pub sensitivities: Vec<SensitivityResult>,
    pub peak_frequencies: Vec<PeakFrequency>,
    pub peak_share: Vec<PeakShare>,
    pub sed_summary: Vec<GroupSummary>,
    pub load_effect: Vec<FrequencyLoadEffect>,
    pub demographics: Vec<GroupSummary>,
    pub behavior: Vec<BehaviorSummary>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    /// Load-effect result on frequency-averaged SEDs.
    pub fn pooled_load_effect(&self) -> Option<&LoadEffect> {
        self.load_effect
            .iter()
            .find(|l| l.f_s_hz.is_none())
            .map(|l| &l.result)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Full cohort analysis from results rows plus demographics and behavior.
pub fn analyze(
    rows: &[ResultRow],
    meta: &[ParticipantMeta],
    behavior: &[BehavioralRecord],
    options: AnalysisOptions,
) -> Result<AnalysisReport> {
    let seds = seds_from_rows(rows);
    if seds.is_empty() {
        return Err(Error::Empty("results contain no SED rows".into()));
    }
    let (participants, freqs) = index(&seds);
    let mut warnings = Vec::new();
    if options.sensitivity.max_normalize {
        warnings.push("SEDs max-normalized per participant before regression".to_string());
    }
    if !options.sensitivity.baseline_zero {
        warnings.push("Task 1 excluded from sensitivity regression".to_string());
    }
    let sens = sensitivities(&seds, options.sensitivity)?;
    let peaks = peak_frequencies(&sens);
    let peak_share = freqs
        .iter()
        .map(|&f| {
            let count = peaks.iter().filter(|p| p.f_s_hz == f).count();
            PeakShare {
                f_s_hz: f,
                count,
                fraction: count as f64 / participants.len() as f64,
            }
        })
        .collect();

    let mut load_effect = Vec::new();
    for f in freqs.iter().copied().map(Some).chain([None]) {
        match load_effect_test(&sed_matrix(&seds, f)?, options.test) {
            Ok(result) => {
                if result.undefined {
                    warnings.push(format!(
                        "load-effect test undefined at {f:?} Hz: all differences zero"
                    ));
                }
                load_effect.push(FrequencyLoadEffect { f_s_hz: f, result });
            }
            Err(Error::InsufficientData(msg)) => {
                warnings.push(format!("load-effect test skipped: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if participants
        .iter()
        .any(|p| !meta.iter().any(|m| &m.participant_id == p))
    {
        return Err(Error::Mismatch(format!(
            "participants without demographic records: {}",
            participants
                .iter()
                .filter(|p| !meta.iter().any(|m| &m.participant_id == *p))
                .cloned()
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let behavior = if behavior.is_empty() {
        warnings.push("no behavioral records".to_string());
        Vec::new()
    } else {
        behavioral_summary(behavior, options.ci)?
    };
    Ok(AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        options,
        n_participants: participants.len(),
        frequencies_hz: freqs,
        sensitivities: sens,
        peak_frequencies: peaks,
        peak_share,
        sed_summary: sed_summary(&seds, options.ci)?,
        load_effect,
        demographics: demographic_report(&seds, meta, options.ci)?,
        behavior,
        warnings,
    })
}

fn tsv(rows: impl IntoIterator<Item = (f64, f64, f64, f64)>) -> String {
    let mut s = String::from("x\ty\terr_low\terr_high\n");
    for (x, y, lo, hi) in rows {
        let _ = writeln!(s, "{x}\t{y}\t{lo}\t{hi}");
    }
    s
}

fn group_tsv(g: &GroupSummary) -> String {
    tsv(g.tasks.iter().map(|t| {
        (
            t.task_id as f64,
            t.stats.mean,
            t.stats.ci_low,
            t.stats.ci_high,
        )
    }))
}

/// Plot-data tables as `(file name, contents)`.
pub fn plot_data(report: &AnalysisReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for g in &report.sed_summary {
        out.push((format!("sed_vs_task_f{}.tsv", g.f_s_hz), group_tsv(g)));
    }
    for &f in &report.frequencies_hz {
        let rows = report
            .sensitivities
            .iter()
            .filter(|s| s.f_s_hz == f)
            .enumerate()
            .map(|(i, s)| {
                let half = 2.0 * s.slope_std_err.unwrap_or(0.0);
                ((i + 1) as f64, s.slope, s.slope - half, s.slope + half)
            });
        out.push((format!("sensitivity_f{f}.tsv"), tsv(rows)));
    }
    for g in &report.demographics {
        let value = g.value.replace('+', "plus");
        out.push((
            format!("{}_{}_f{}.tsv", g.dimension, value, g.f_s_hz),
            group_tsv(g),
        ));
    }
    out
}

/// Write `report.json` and the plot-data TSVs into `dir`.
pub fn write_report(dir: &Path, report: &AnalysisReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let path = dir.join(REPORT_FILE);
    std::fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    for (name, body) in plot_data(report) {
        let path = plots.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
