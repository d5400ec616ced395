use rayon::prelude::*;

use super::EegRecording;
use crate::audio::{design_filter, FilterSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub band_hz: (f64, f64),
    pub band_order: usize,
    /// Mains frequency; `None` skips the notch.
    pub notch_hz: Option<f64>,
    pub notch_q: f64,
    pub common_average: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            band_hz: (1.0, 30.0),
            band_order: 4,
            notch_hz: Some(50.0),
            notch_q: 30.0,
            common_average: true,
        }
    }
}

/// Zero-phase band-pass and notch per channel, then common-average
/// re-reference.
pub fn preprocess(raw: &EegRecording, config: &PreprocessConfig) -> Result<EegRecording> {
    raw.validate()?;
    if raw.n_channels() < 2 && config.common_average {
        return Err(Error::invalid("re-referencing needs at least 2 channels"));
    }
    let rate = raw.sample_rate;
    if rate < 100.0 || config.band_hz.1 >= rate / 2.0 {
        return Err(Error::invalid(format!(
            "sample rate {rate} Hz is too low for the {}-{} Hz band (need at least 100 Hz)",
            config.band_hz.0, config.band_hz.1
        )));
    }
    let band = design_filter(
        &FilterSpec::band_pass(config.band_hz.0, config.band_hz.1, config.band_order),
        rate,
    )?;
    let notch = match config.notch_hz {
        Some(f) if f < rate / 2.0 => {
            Some(design_filter(&FilterSpec::notch(f, config.notch_q), rate)?)
        }
        Some(f) => {
            log::warn!("notch at {f} Hz is at or above Nyquist for {rate} Hz; skipped");
            None
        }
        None => None,
    };
    let mut channels = raw
        .channels
        .par_iter()
        .map(|c| {
            let x = band.filtfilt(c)?;
            match &notch {
                Some(n) => n.filtfilt(&x),
                None => Ok(x),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if config.common_average {
        let k = channels.len() as f64;
        for t in 0..raw.n_samples() {
            let mean = channels.iter().map(|c| c[t]).sum::<f64>() / k;
            channels.iter_mut().for_each(|c| c[t] -= mean);
        }
    }
    Ok(EegRecording {
        channels,
        ..raw.clone()
    })
}
