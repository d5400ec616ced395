use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::exit::{fail, MISSING_INPUT, USAGE};

pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub participant_id: String,
    pub sample_rate: u32,
    pub frequencies: Vec<f64>,
    pub probe_amplitude: f64,
    pub notch_width_hz: f64,
    pub segment_duration_s: f64,
    pub gap_s: f64,
    pub repetitions: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            participant_id: "P01".into(),
            sample_rate: 48_000,
            frequencies: vec![1000.0, 2000.0, 3000.0],
            probe_amplitude: 0.1,
            notch_width_hz: 200.0,
            segment_duration_s: 10.0,
            gap_s: 1.0,
            repetitions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub gains: [f64; 4],
    /// `-inf` disables noise.
    pub noise_dbfs: f64,
    pub reflectance: f64,
    pub phase_rad: f64,
    pub latency_ms: f64,
    /// Cohort gain scale range.
    pub scale_min: f64,
    pub scale_max: f64,
    /// `[frequency, share]` pairs for cohort peak-frequency assignment.
    pub dominant: Vec<(f64, f64)>,
    pub older_jump: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            gains: [0.05, 0.08, 0.12, 0.18],
            noise_dbfs: -40.0,
            reflectance: 1.0,
            phase_rad: 0.0,
            latency_ms: 0.0,
            scale_min: 0.5,
            scale_max: 1.5,
            dominant: vec![(3000.0, 12.0 / 19.0), (2000.0, 7.0 / 19.0)],
            older_jump: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CiKind {
    T,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Wilcoxon,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AveragingKind {
    Magnitude,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub ci: CiKind,
    pub test: TestKind,
    pub baseline_zero: bool,
    pub max_normalize: bool,
    pub bootstrap_resamples: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub averaging: AveragingKind,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            ci: CiKind::T,
            test: TestKind::Wilcoxon,
            baseline_zero: true,
            max_normalize: false,
            bootstrap_resamples: 10_000,
            permutations: 10_000,
            alpha: 0.01,
            averaging: AveragingKind::Magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EegConfig {
    /// ICA components; defaults to channels - 1 after average reference.
    pub components: Option<usize>,
    pub common_average: bool,
    pub notch_hz: f64,
    pub max_iter: usize,
}

impl Default for EegConfig {
    fn default() -> Self {
        Self {
            components: None,
            common_average: true,
            notch_hz: 50.0,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub root: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub session_dir: Option<PathBuf>,
    pub results_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub session: SessionConfig,
    pub simulation: SimulationConfig,
    pub analysis: AnalysisConfig,
    pub eeg: EegConfig,
    pub seeds: SeedConfig,
    pub paths: PathConfig,
}

/// Independent seed for one consumer of the root seed.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            fail(
                MISSING_INPUT,
                format!("cannot read config {}: {e}", path.display()),
            )
        })?;
        Self::from_toml(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| fail(USAGE, format!("config error: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let s = &self.session;
        let bad =
            |field: &str, msg: String| Err(fail(USAGE, format!("config field {field}: {msg}")));
        if s.sample_rate == 0 {
            return bad("session.sample_rate", "must be positive".into());
        }
        if s.participant_id.trim().is_empty() {
            return bad("session.participant_id", "must be non-empty".into());
        }
        if s.frequencies.is_empty() {
            return bad(
                "session.frequencies",
                "at least one frequency is required".into(),
            );
        }
        let nyquist = s.sample_rate as f64 / 2.0;
        for &f in &s.frequencies {
            if f >= nyquist {
                return bad(
                    "session.frequencies",
                    format!(
                        "frequency exceeds Nyquist: {f} Hz >= {nyquist} Hz at {} Hz",
                        s.sample_rate
                    ),
                );
            }
            if !(f > 0.0) {
                return bad(
                    "session.frequencies",
                    format!("{f} Hz is not a positive frequency"),
                );
            }
        }
        if !(s.probe_amplitude > 0.0 && s.probe_amplitude <= 1.0) {
            return bad(
                "session.probe_amplitude",
                format!("{} is outside (0, 1]", s.probe_amplitude),
            );
        }
        if !(s.notch_width_hz > 0.0) {
            return bad("session.notch_width_hz", "must be positive".into());
        }
        if !(s.segment_duration_s > 0.0) || !(s.gap_s >= 0.0) || s.repetitions == 0 {
            return bad(
                "session.segment_duration_s",
                "durations must be positive and repetitions >= 1".into(),
            );
        }
        let m = &self.simulation;
        if m.gains.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return bad("simulation.gains", "gains must be in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&m.reflectance) {
            return bad("simulation.reflectance", "must be in [0, 1]".into());
        }
        if m.noise_dbfs.is_nan() || m.noise_dbfs > 0.0 {
            return bad(
                "simulation.noise_dbfs",
                "must be <= 0 (or -inf to disable)".into(),
            );
        }
        if !(m.latency_ms >= 0.0) {
            return bad("simulation.latency_ms", "must be non-negative".into());
        }
        if !(0.0 < self.analysis.alpha && self.analysis.alpha < 1.0) {
            return bad("analysis.alpha", "must be in (0, 1)".into());
        }
        if self.analysis.bootstrap_resamples < 2 || self.analysis.permutations == 0 {
            return bad(
                "analysis.permutations",
                "resample counts must be positive".into(),
            );
        }
        Ok(())
    }

    /// Write the effective configuration next to a command's outputs.
    pub fn echo(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(CONFIG_ECHO);
        std::fs::write(&path, self.to_toml()).with_context(|| format!("writing {}", path.display()))
    }
}
