//! Regression, group statistics and significance tests over SEDs.

mod cohort;
mod ols;
mod report;
mod significance;
mod stats;
mod tables;

pub use cohort::{
    age_bin, behavioral_summary, demographic_report, peak_frequencies, sed_matrix, sed_summary,
    seds_from_rows, sensitivities, sensitivity, BehaviorSummary, GroupSummary, PeakFrequency,
    SensitivityOptions, SensitivityResult, TaskStats, AGE_BINS,
};
pub use ols::{ols_fit, OlsFit};
pub use report::{
    analyze, plot_data, write_report, AnalysisOptions, AnalysisReport, FrequencyLoadEffect,
    PeakShare, REPORT_FILE, REPORT_SCHEMA_VERSION,
};
pub use significance::{
    load_effect_test, sign_flip_test, wilcoxon_signed_rank, Alternative, LoadEffect, TestMethod,
    WilcoxonResult, DEFAULT_PERMUTATIONS, EXACT_WILCOXON_MAX_N, MIN_TEST_PARTICIPANTS,
};
pub use stats::{
    group_stats, midranks, pearson, quantile_sorted, spearman, CiMethod, GroupStats,
    DEFAULT_BOOTSTRAP_RESAMPLES,
};
pub use tables::{
    read_behavior, read_behavior_csv, read_participants, read_participants_csv, write_behavior,
    write_participants, BehavioralRecord, Gender, ParticipantMeta,
};
