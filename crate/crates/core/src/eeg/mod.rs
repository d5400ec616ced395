//! EEG side of the study: filtering and re-referencing, ICA artifact
//! removal, and band power per task segment.

mod ica;
mod io;
mod power;
mod preprocess;
mod synth;

use serde::{Deserialize, Serialize};

pub use ica::{
    fastica, reject_components, ComponentDiagnostics, IcaConfig, IcaDecomposition, RejectPolicy,
    Rejection,
};
pub use io::{read_eeg_csv, read_markers, write_eeg_csv, write_markers, MarkerFile, MARKERS_FILE};
pub use power::{
    band_powers, eeg_report, segment_and_power, BandPowers, EegReport, PowerConfig, SegmentPower,
    TaskPower, EEG_REPORT_SCHEMA_VERSION,
};
pub use preprocess::{preprocess, PreprocessConfig};
pub use synth::{synthetic_eeg, SyntheticEeg};

use crate::error::{Error, Result};

/// A labelled stretch of the recording, in EEG samples (end exclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub task_id: u8,
    pub start_sample: usize,
    pub end_sample: usize,
}

/// Multichannel EEG in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub channel_names: Vec<String>,
    pub markers: Vec<Marker>,
}

impl EegRecording {
    pub fn new(
        channels: Vec<Vec<f64>>,
        sample_rate: f64,
        channel_names: Vec<String>,
        markers: Vec<Marker>,
    ) -> Result<Self> {
        let rec = Self {
            channels,
            sample_rate,
            channel_names,
            markers,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("EEG sample rate must be positive"));
        }
        if self.channels.is_empty() {
            return Err(Error::Empty("EEG recording has no channels".into()));
        }
        if self.channel_names.len() != self.channels.len() {
            return Err(Error::Mismatch(format!(
                "{} channel names for {} channels",
                self.channel_names.len(),
                self.channels.len()
            )));
        }
        let n = self.channels[0].len();
        if self.channels.iter().any(|c| c.len() != n) {
            return Err(Error::Mismatch("EEG channels differ in length".into()));
        }
        if self.channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("EEG samples must be finite"));
        }
        let mut prev = 0;
        for m in &self.markers {
            if m.start_sample < prev {
                return Err(Error::Mismatch(format!(
                    "marker {} is out of order",
                    m.label
                )));
            }
            if m.end_sample <= m.start_sample || m.end_sample > n {
                return Err(Error::Mismatch(format!(
                    "marker {} ({}..{}) outside the {n}-sample recording",
                    m.label, m.start_sample, m.end_sample
                )));
            }
            prev = m.start_sample;
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn scaled(&self, g: f64) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * g).collect())
                .collect(),
            ..self.clone()
        }
    }
}
