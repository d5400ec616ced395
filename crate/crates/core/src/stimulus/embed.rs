use crate::audio::{
    design_filter, fft, FilterSpec, SampleBuffer, SosFilter, Tone, Window, DEFAULT_FADE_S,
};
use crate::error::{Error, Result};

/// Parameters of the probe-band construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedConfig {
    /// Width of the band cleared of task content, centred on the probe.
    pub notch_width_hz: f64,
    /// Butterworth prototype order of the band-stop.
    pub notch_order: usize,
    /// Distance between the band-stop's -3 dB edges. Wider than
    /// `notch_width_hz` so the whole cleared band sits deep in the stopband.
    pub design_width_hz: f64,
    /// Extra margin on each side of the notch excluded from the
    /// out-of-band comparison.
    pub guard_hz: f64,
    pub fade_s: f64,
    /// Mixed playback is scaled down so its peak does not exceed this.
    pub peak_limit: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            notch_width_hz: 200.0,
            notch_order: 6,
            design_width_hz: 320.0,
            guard_hz: 100.0,
            fade_s: DEFAULT_FADE_S,
            peak_limit: 0.95,
        }
    }
}

impl EmbedConfig {
    pub fn notch_filter(&self, f_s: f64, rate: u32) -> Result<SosFilter> {
        let nyquist = rate as f64 / 2.0;
        let half = self.design_width_hz.max(self.notch_width_hz) / 2.0;
        if f_s - half <= 0.0 || f_s + half >= nyquist {
            return Err(Error::invalid(format!(
                "probe at {f_s} Hz is too close to DC or Nyquist for a {} Hz notch",
                self.notch_width_hz
            )));
        }
        design_filter(
            &FilterSpec::band_stop(f_s - half, f_s + half, self.notch_order),
            rate as f64,
        )
    }

    pub fn probe(&self, f_s: f64, amplitude: f64, len: usize, rate: u32) -> Result<SampleBuffer> {
        Tone::new(f_s, amplitude)
            .with_fade(self.fade_s)
            .render(len, rate)
    }
}

/// Playback for one segment: `gain * (probe + bandstop(task audio))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPlayback {
    pub audio: SampleBuffer,
    pub notch_center: f64,
    pub notch_width: f64,
    /// Probe amplitude before the normalization gain.
    pub probe_amplitude: f64,
    /// Linear gain applied to the mix (<= 1).
    pub norm_gain: f64,
    pub fade_s: f64,
}

impl EmbeddedPlayback {
    pub fn norm_gain_db(&self) -> f64 {
        20.0 * self.norm_gain.log10()
    }

    /// Probe amplitude as actually delivered.
    pub fn delivered_probe_amplitude(&self) -> f64 {
        self.probe_amplitude * self.norm_gain
    }
}

pub fn embed_stimulus(
    task_audio: &SampleBuffer,
    f_s: f64,
    probe_amplitude: f64,
) -> Result<EmbeddedPlayback> {
    embed_with(task_audio, f_s, probe_amplitude, &EmbedConfig::default())
}

pub fn embed_with(
    task_audio: &SampleBuffer,
    f_s: f64,
    probe_amplitude: f64,
    config: &EmbedConfig,
) -> Result<EmbeddedPlayback> {
    task_audio.require_non_empty("task audio")?;
    if !(probe_amplitude > 0.0 && probe_amplitude <= 1.0) {
        return Err(Error::invalid(format!(
            "probe amplitude must be in (0, 1], got {probe_amplitude}"
        )));
    }
    let rate = task_audio.sample_rate();
    let notch = config.notch_filter(f_s, rate)?;
    let cleared = notch.filtfilt(task_audio.samples())?;
    let probe = config.probe(f_s, probe_amplitude, task_audio.len(), rate)?;
    let mut mixed: Vec<f64> = cleared
        .iter()
        .zip(probe.samples())
        .map(|(a, p)| a + p)
        .collect();
    let peak = mixed.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let norm_gain = if peak > config.peak_limit {
        config.peak_limit / peak
    } else {
        1.0
    };
    if norm_gain != 1.0 {
        mixed.iter_mut().for_each(|s| *s *= norm_gain);
    }
    Ok(EmbeddedPlayback {
        audio: SampleBuffer::new(mixed, rate)?,
        notch_center: f_s,
        notch_width: config.notch_width_hz,
        probe_amplitude,
        norm_gain,
        fade_s: config.fade_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchReport {
    /// Task energy removed inside the notch, dB. `+inf` when nothing is left
    /// (including the case where there was nothing to remove).
    pub in_band_attenuation_db: f64,
    /// Largest per-bin deviation between the residual task content and the
    /// original outside the notch and guard, dB.
    pub out_of_band_deviation_db: f64,
}

/// Compare the task content left in `embedded` (playback with the probe
/// removed and the normalization undone) against the `original` task audio.
pub fn verify_notch(embedded: &EmbeddedPlayback, original: &SampleBuffer) -> Result<NotchReport> {
    verify_notch_with(embedded, original, EmbedConfig::default().guard_hz)
}

pub fn verify_notch_with(
    embedded: &EmbeddedPlayback,
    original: &SampleBuffer,
    guard_hz: f64,
) -> Result<NotchReport> {
    let rate = original.sample_rate();
    if embedded.audio.len() != original.len() || embedded.audio.sample_rate() != rate {
        return Err(Error::Mismatch(
            "embedded and original differ in length or rate".into(),
        ));
    }
    original.require_non_empty("original task audio")?;
    let probe = Tone::new(embedded.notch_center, embedded.probe_amplitude)
        .with_fade(embedded.fade_s)
        .render(original.len(), rate)?;
    let residual: Vec<f64> = embedded
        .audio
        .samples()
        .iter()
        .zip(probe.samples())
        .map(|(e, p)| e / embedded.norm_gain - p)
        .collect();

    let power = |x: &[f64]| -> Vec<f64> {
        let w = Window::Hann.coefficients(x.len());
        let frame: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        fft::forward(&frame)[..=x.len() / 2]
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    };
    let p_orig = power(original.samples());
    let p_res = power(&residual);
    let res_hz = rate as f64 / original.len() as f64;
    let half = embedded.notch_width / 2.0;

    let (mut e_orig, mut e_res) = (0.0, 0.0);
    let floor = p_orig.iter().fold(0.0f64, |m, &p| m.max(p)) * 1e-8;
    let mut deviation = 0.0f64;
    for (k, (&po, &pr)) in p_orig.iter().zip(&p_res).enumerate() {
        let offset = (k as f64 * res_hz - embedded.notch_center).abs();
        if offset <= half {
            e_orig += po;
            e_res += pr;
        } else if offset > half + guard_hz && po > floor && k > 0 {
            deviation = deviation.max((10.0 * (pr / po).log10()).abs());
        }
    }
    let in_band_attenuation_db = if e_res == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (e_orig / e_res).log10()
    };
    Ok(NotchReport {
        in_band_attenuation_db,
        out_of_band_deviation_db: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn white_noise(len: usize, rms: f64, seed: u64) -> SampleBuffer {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, rms).unwrap();
        SampleBuffer::new((0..len).map(|_| n.sample(&mut rng)).collect(), 48_000).unwrap()
    }

    /// Energy of `x` in [lo, hi] Hz from a Hann-windowed periodogram.
    fn band_energy(x: &[f64], rate: f64, lo: f64, hi: f64) -> f64 {
        let w = Window::Hann.coefficients(x.len());
        let frame: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let spec = fft::forward(&frame);
        let res = rate / x.len() as f64;
        (0..=x.len() / 2)
            .filter(|&k| (lo..=hi).contains(&(k as f64 * res)))
            .map(|k| spec[k].norm_sqr())
            .sum()
    }

    #[test]
    fn white_noise_band_is_dominated_by_probe() {
        let noise = white_noise(48_000 * 4, 0.1, 3);
        let e = embed_stimulus(&noise, 3000.0, 0.1).unwrap();
        let probe = EmbedConfig::default()
            .probe(3000.0, 0.1, noise.len(), 48_000)
            .unwrap();
        let residual: Vec<f64> = e
            .audio
            .samples()
            .iter()
            .zip(probe.samples())
            .map(|(a, p)| a / e.norm_gain - p)
            .collect();
        let e_probe = band_energy(probe.samples(), 48_000.0, 2900.0, 3100.0);
        let e_res = band_energy(&residual, 48_000.0, 2900.0, 3100.0);
        let rel = 10.0 * (e_probe / e_res).log10();
        assert!(rel >= 40.0, "residual only {rel} dB below probe");
        let report = verify_notch(&e, &noise).unwrap();
        assert!(report.in_band_attenuation_db >= 40.0, "{report:?}");
        assert!(report.out_of_band_deviation_db <= 1.0, "{report:?}");
    }

    #[test]
    fn silent_task_audio_yields_pure_probe() {
        let silent = SampleBuffer::silence(48_000, 48_000).unwrap();
        let e = embed_stimulus(&silent, 2000.0, 0.1).unwrap();
        let probe = EmbedConfig::default()
            .probe(2000.0, 0.1, 48_000, 48_000)
            .unwrap();
        assert_eq!(e.norm_gain, 1.0);
        assert_eq!(e.audio, probe);
        let report = verify_notch(&e, &silent).unwrap();
        assert_eq!(report.in_band_attenuation_db, f64::INFINITY);
    }

    #[test]
    fn self_comparison_is_zero_db() {
        let noise = white_noise(48_000, 0.1, 9);
        let fake = EmbeddedPlayback {
            audio: noise
                .mix(
                    &EmbedConfig::default()
                        .probe(1000.0, 0.1, noise.len(), 48_000)
                        .unwrap(),
                )
                .unwrap(),
            notch_center: 1000.0,
            notch_width: 200.0,
            probe_amplitude: 0.1,
            norm_gain: 1.0,
            fade_s: DEFAULT_FADE_S,
        };
        let report = verify_notch(&fake, &noise).unwrap();
        assert!(report.in_band_attenuation_db.abs() < 1e-9);
        assert!(report.out_of_band_deviation_db < 1e-9);
    }

    #[test]
    fn probe_too_close_to_dc() {
        let noise = white_noise(48_000, 0.1, 1);
        assert!(embed_stimulus(&noise, 60.0, 0.1).is_err());
        assert!(embed_stimulus(&noise, 23_950.0, 0.1).is_err());
        let empty = SampleBuffer::new(vec![], 48_000).unwrap();
        assert!(matches!(
            embed_stimulus(&empty, 1000.0, 0.1),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn loud_mix_is_normalized() {
        let noise = white_noise(48_000, 0.5, 5);
        let e = embed_stimulus(&noise, 1000.0, 0.1).unwrap();
        assert!(e.norm_gain < 1.0);
        assert!(e.audio.peak() <= 0.95 + 1e-12);
        assert!(e.norm_gain_db() < 0.0);
    }
}
