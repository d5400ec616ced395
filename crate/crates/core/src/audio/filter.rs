//! Butterworth and second-order notch IIR design, realized as cascaded
//! biquads, with forward-backward (zero-phase) application.
//!
//! Butterworth designs follow the classic analog-prototype route: prototype
//! poles, frequency transformation (low/high/band-pass/band-stop) against
//! pre-warped edges, bilinear transform, then grouping of conjugate pole pairs
//! into sections. Each section is scaled to unit gain at the passband
//! reference frequency, so the cascade inherits the prototype's unit gain.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SampleBuffer;
use crate::error::{Error, Result};

const MAX_ORDER: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    BandStop,
    BandPass,
    Notch,
    LowPass,
    HighPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignFamily {
    Butterworth,
    /// Single biquad notch with bandwidth `center / quality`.
    SecondOrderNotch {
        quality: f64,
    },
}

/// What to build. For Butterworth designs `order` is the prototype order,
/// so band-pass and band-stop realizations have `2 * order` poles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub edges: Vec<f64>,
    pub order: usize,
    pub design: DesignFamily,
}

impl FilterSpec {
    pub fn low_pass(edge: f64, order: usize) -> Self {
        Self::butter(FilterKind::LowPass, vec![edge], order)
    }

    pub fn high_pass(edge: f64, order: usize) -> Self {
        Self::butter(FilterKind::HighPass, vec![edge], order)
    }

    pub fn band_pass(low: f64, high: f64, order: usize) -> Self {
        Self::butter(FilterKind::BandPass, vec![low, high], order)
    }

    pub fn band_stop(low: f64, high: f64, order: usize) -> Self {
        Self::butter(FilterKind::BandStop, vec![low, high], order)
    }

    pub fn notch(center: f64, quality: f64) -> Self {
        Self {
            kind: FilterKind::Notch,
            edges: vec![center],
            order: 2,
            design: DesignFamily::SecondOrderNotch { quality },
        }
    }

    fn butter(kind: FilterKind, edges: Vec<f64>, order: usize) -> Self {
        Self {
            kind,
            edges,
            order,
            design: DesignFamily::Butterworth,
        }
    }

    fn validate(&self, rate: f64) -> Result<()> {
        let nyquist = rate / 2.0;
        let expected_edges = match self.kind {
            FilterKind::BandPass | FilterKind::BandStop => 2,
            _ => 1,
        };
        if self.edges.len() != expected_edges {
            return Err(Error::invalid(format!(
                "{:?} needs {expected_edges} edge(s), got {}",
                self.kind,
                self.edges.len()
            )));
        }
        for &e in &self.edges {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::invalid(format!("filter edge {e} Hz must be > 0")));
            }
            if e >= nyquist {
                return Err(Error::AboveNyquist { freq: e, nyquist });
            }
        }
        if expected_edges == 2 && self.edges[0] >= self.edges[1] {
            return Err(Error::invalid(format!(
                "band edges must be ordered, got {:?}",
                self.edges
            )));
        }
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(Error::invalid(format!(
                "filter order must be in 1..={MAX_ORDER}, got {}",
                self.order
            )));
        }
        match (self.kind, self.design) {
            (FilterKind::Notch, DesignFamily::SecondOrderNotch { quality }) => {
                if !(quality > 0.0 && quality.is_finite()) {
                    return Err(Error::invalid("notch quality must be positive"));
                }
                Ok(())
            }
            (FilterKind::Notch, _) | (_, DesignFamily::SecondOrderNotch { .. }) => Err(
                Error::invalid("notch kind requires the second-order notch design and vice versa"),
            ),
            _ => Ok(()),
        }
    }
}

/// Transposed direct-form II section with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn from_roots(zeros: &[Complex64], poles: &[Complex64]) -> Self {
        let (b1, b2) = poly2(zeros);
        let (a1, a2) = poly2(poles);
        Self {
            b0: 1.0,
            b1,
            b2,
            a1,
            a2,
        }
    }

    pub fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b0 + self.b1 * zi + self.b2 * zi2) / (1.0 + self.a1 * zi + self.a2 * zi2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    fn scale(&mut self, g: f64) {
        self.b0 *= g;
        self.b1 *= g;
        self.b2 *= g;
    }

    pub fn poles(&self) -> Vec<Complex64> {
        if self.a2 == 0.0 {
            if self.a1 == 0.0 {
                return Vec::new();
            }
            return vec![Complex64::new(-self.a1, 0.0)];
        }
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        vec![(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    /// Steady-state state vector for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        [y - self.b0, self.b2 - self.a2 * y]
    }

    #[inline]
    fn tick(&self, x: f64, s: &mut [f64; 2]) -> f64 {
        let y = self.b0 * x + s[0];
        s[0] = self.b1 * x - self.a1 * y + s[1];
        s[1] = self.b2 * x - self.a2 * y;
        y
    }
}

/// Coefficients (c1, c2) of `(1 - r1 z^-1)(1 - r2 z^-1) = 1 + c1 z^-1 + c2 z^-2`.
fn poly2(roots: &[Complex64]) -> (f64, f64) {
    match roots {
        [] => (0.0, 0.0),
        [r] => (-r.re, 0.0),
        [r1, r2] => (-(r1 + r2).re, (r1 * r2).re),
        _ => unreachable!("a section holds at most two roots"),
    }
}

/// A realized cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
    pub spec: FilterSpec,
}

impl SosFilter {
    /// Total number of poles.
    pub fn order(&self) -> usize {
        self.sections.iter().map(|s| s.poles().len()).sum()
    }

    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / self.sample_rate);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.magnitude(freq_hz).log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().fold(0.0, |m, p| m.max(p.norm()))
    }

    /// Samples for the slowest pole to decay by `factor`.
    pub fn settling_samples(&self, factor: f64) -> usize {
        let r = self.max_pole_radius();
        if r <= 0.0 {
            return 0;
        }
        (factor.ln() / r.ln()).ceil().max(0.0) as usize
    }

    /// Causal single pass starting from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let mut state = [0.0; 2];
            for v in y.iter_mut() {
                *v = s.tick(*v, &mut state);
            }
        }
        y
    }

    /// Causal pass whose initial states are the steady state for a constant
    /// input equal to `x[0]`.
    fn filter_steady(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut level = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let zi = s.step_state();
            let mut state = [zi[0] * level, zi[1] * level];
            for v in y.iter_mut() {
                *v = s.tick(*v, &mut state);
            }
            level *= s.dc_gain();
        }
        y
    }

    /// Minimum input length accepted by [`SosFilter::filtfilt`] is this plus one.
    pub fn min_len(&self) -> usize {
        3 * self.order()
    }

    /// Forward-backward filtering with odd-reflection edge padding.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= self.min_len() {
            return Err(Error::BufferTooShort {
                needed: self.min_len(),
                got: n,
            });
        }
        let base_pad = 3 * (2 * self.sections.len() + 1);
        let pad = base_pad.max(self.settling_samples(1e-6)).min(n - 1);

        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((0..pad).map(|i| 2.0 * x[0] - x[pad - i]));
        ext.extend_from_slice(x);
        ext.extend((0..pad).map(|i| 2.0 * x[n - 1] - x[n - 2 - i]));

        let mut y = self.filter_steady(&ext);
        y.reverse();
        let mut y = self.filter_steady(&y);
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}

/// Realize `spec` at `rate` Hz.
pub fn design_filter(spec: &FilterSpec, rate: f64) -> Result<SosFilter> {
    if !(rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    spec.validate(rate)?;
    let sections = match spec.design {
        DesignFamily::Butterworth => butterworth_sections(spec, rate),
        DesignFamily::SecondOrderNotch { quality } => {
            vec![notch_section(spec.edges[0], quality, rate)]
        }
    };
    let filter = SosFilter {
        sections,
        sample_rate: rate,
        spec: spec.clone(),
    };
    let max_radius = filter.max_pole_radius();
    let finite = filter
        .sections
        .iter()
        .all(|s| [s.b0, s.b1, s.b2, s.a1, s.a2].iter().all(|c| c.is_finite()));
    if !finite || !(max_radius < 1.0 - 1e-12) {
        return Err(Error::UnstableFilter { max_radius });
    }
    Ok(filter)
}

/// Zero-phase application of a realized filter.
pub fn apply_filter_zero_phase(buffer: &SampleBuffer, filter: &SosFilter) -> Result<SampleBuffer> {
    if (buffer.sample_rate() as f64 - filter.sample_rate).abs() > 1e-9 {
        return Err(Error::RateMismatch {
            expected: filter.sample_rate as u32,
            found: buffer.sample_rate(),
            what: "filtered buffer".into(),
        });
    }
    let y = filter.filtfilt(buffer.samples())?;
    Ok(SampleBuffer::from_trusted(y, buffer.sample_rate()))
}

fn notch_section(center: f64, quality: f64, rate: f64) -> Biquad {
    let w0 = 2.0 * PI * center / rate;
    let beta = (w0 / quality / 2.0).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    Biquad {
        b0: gain,
        b1: -2.0 * gain * c,
        b2: gain,
        a1: -2.0 * gain * c,
        a2: 2.0 * gain - 1.0,
    }
}

fn butterworth_sections(spec: &FilterSpec, rate: f64) -> Vec<Biquad> {
    let n = spec.order;
    let fs2 = 2.0 * rate;
    let warp = |f: f64| fs2 * (PI * f / rate).tan();
    let prototype: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, PI * (2 * k + 1 + n) as f64 / (2 * n) as f64))
        .collect();

    let analog: Vec<Complex64> = match spec.kind {
        FilterKind::LowPass => {
            let wc = warp(spec.edges[0]);
            prototype.iter().map(|p| p * wc).collect()
        }
        FilterKind::HighPass => {
            let wc = warp(spec.edges[0]);
            prototype.iter().map(|p| wc / p).collect()
        }
        FilterKind::BandPass | FilterKind::BandStop => {
            let (w1, w2) = (warp(spec.edges[0]), warp(spec.edges[1]));
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            prototype
                .iter()
                .flat_map(|p| {
                    let half = if spec.kind == FilterKind::BandPass {
                        p * bw / 2.0
                    } else {
                        bw / (2.0 * p)
                    };
                    let root = (half * half - w0sq).sqrt();
                    [half + root, half - root]
                })
                .collect()
        }
        FilterKind::Notch => unreachable!("validated"),
    };
    let digital: Vec<Complex64> = analog.iter().map(|s| (fs2 + s) / (fs2 - s)).collect();

    let one = Complex64::new(1.0, 0.0);
    let (zero_pair, reference): ([Complex64; 2], Complex64) = match spec.kind {
        FilterKind::LowPass => ([-one, -one], one),
        FilterKind::HighPass => ([one, one], -one),
        FilterKind::BandPass => {
            let w0 = (warp(spec.edges[0]) * warp(spec.edges[1])).sqrt();
            let wc = 2.0 * (w0 / fs2).atan();
            ([one, -one], Complex64::from_polar(1.0, wc))
        }
        FilterKind::BandStop => {
            let w0 = (warp(spec.edges[0]) * warp(spec.edges[1])).sqrt();
            let wd = 2.0 * (w0 / fs2).atan();
            let z = Complex64::from_polar(1.0, wd);
            ([z, z.conj()], one)
        }
        FilterKind::Notch => unreachable!("validated"),
    };

    let mut sections: Vec<(f64, Biquad)> = group_poles(&digital)
        .into_iter()
        .map(|poles| {
            let zeros = &zero_pair[..poles.len()];
            let mut bq = Biquad::from_roots(zeros, &poles);
            let g = bq.response(reference).norm();
            bq.scale(1.0 / g);
            let radius = poles.iter().fold(0.0f64, |m, p| m.max(p.norm()));
            (radius, bq)
        })
        .collect();
    sections.sort_by(|a, b| a.0.total_cmp(&b.0));
    sections.into_iter().map(|(_, s)| s).collect()
}

/// Conjugate pairs first, then real poles two at a time.
fn group_poles(poles: &[Complex64]) -> Vec<Vec<Complex64>> {
    let tol = 1e-10;
    let mut groups = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im.abs() <= tol {
            reals.push(Complex64::new(p.re, 0.0));
        } else if p.im > 0.0 {
            groups.push(vec![*p, p.conj()]);
        }
    }
    reals.sort_by(|a, b| a.re.total_cmp(&b.re));
    for chunk in reals.chunks(2) {
        groups.push(chunk.to_vec());
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::Tone;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn band_stop_3k_response() {
        let f = design_filter(&FilterSpec::band_stop(2900.0, 3100.0, 4), 48_000.0).unwrap();
        assert_eq!(f.order(), 8);
        assert!(
            f.magnitude_db(3000.0) <= -60.0,
            "{}",
            f.magnitude_db(3000.0)
        );
        assert!(f.magnitude_db(3400.0) >= -1.0);
        assert!((f.magnitude(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_pass_3k_response() {
        let f = design_filter(&FilterSpec::band_pass(2900.0, 3100.0, 4), 48_000.0).unwrap();
        assert!(f.magnitude_db(3000.0) >= -0.5);
        assert!(f.magnitude_db(2000.0) <= -40.0);
        // -3 dB at the design edges
        assert!((f.magnitude_db(2900.0) + 3.0103).abs() < 0.01);
        assert!((f.magnitude_db(3100.0) + 3.0103).abs() < 0.01);
    }

    #[test]
    fn low_and_high_pass_edges() {
        for order in 1..=6 {
            let lp = design_filter(&FilterSpec::low_pass(1000.0, order), 48_000.0).unwrap();
            assert!((lp.magnitude(0.0) - 1.0).abs() < 1e-12);
            assert!((lp.magnitude_db(1000.0) + 3.0103).abs() < 1e-3);
            let hp = design_filter(&FilterSpec::high_pass(1000.0, order), 48_000.0).unwrap();
            assert!((hp.magnitude(24_000.0) - 1.0).abs() < 1e-12);
            assert!((hp.magnitude_db(1000.0) + 3.0103).abs() < 1e-3);
            assert_eq!(lp.order(), order);
        }
    }

    #[test]
    fn edge_validation() {
        assert!(matches!(
            design_filter(&FilterSpec::low_pass(24_000.0, 4), 48_000.0),
            Err(Error::AboveNyquist { .. })
        ));
        assert!(design_filter(&FilterSpec::band_pass(3100.0, 2900.0, 4), 48_000.0).is_err());
        assert!(design_filter(&FilterSpec::band_pass(0.0, 2900.0, 4), 48_000.0).is_err());
        assert!(design_filter(&FilterSpec::low_pass(100.0, 0), 48_000.0).is_err());
        let mut bad = FilterSpec::notch(50.0, 30.0);
        bad.design = DesignFamily::Butterworth;
        assert!(design_filter(&bad, 250.0).is_err());
    }

    #[test]
    fn notch_kills_its_center() {
        let f = design_filter(&FilterSpec::notch(50.0, 30.0), 250.0).unwrap();
        assert!(f.magnitude(50.0) < 1e-12);
        assert!((f.magnitude(0.0) - 1.0).abs() < 1e-12);
        // -3 dB bandwidth is center / Q
        assert!((f.magnitude_db(50.0 + 50.0 / 60.0) + 3.0).abs() < 0.1);
    }

    #[test]
    fn zero_phase_keeps_tone_aligned() {
        let rate = 48_000;
        let f = design_filter(&FilterSpec::band_pass(2900.0, 3100.0, 4), rate as f64).unwrap();
        let x = Tone::new(3000.0, 0.5)
            .with_fade(0.0)
            .render(48_000, rate)
            .unwrap();
        let y = apply_filter_zero_phase(&x, &f).unwrap();
        assert_eq!(y.len(), x.len());
        let mid = 10_000..38_000;
        let xs = &x.samples()[mid.clone()];
        let ys = &y.samples()[mid];
        let xcorr = |lag: isize| -> f64 {
            (100..xs.len() - 100)
                .map(|i| xs[i] * ys[(i as isize + lag) as usize])
                .sum()
        };
        let best = (-8..=8)
            .max_by(|a, b| xcorr(*a).total_cmp(&xcorr(*b)))
            .unwrap();
        assert_eq!(best, 0);
        let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        let ripple = (rms(ys) / rms(xs)).log10().abs() * 20.0;
        // twice the single-pass passband deviation at the tone
        assert!(
            ripple <= 2.0 * f.magnitude_db(3000.0).abs() + 1e-6,
            "{ripple}"
        );
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let f = design_filter(&FilterSpec::band_stop(900.0, 1100.0, 6), 48_000.0).unwrap();
        let y = f.filtfilt(&vec![0.0; 1000]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_band_tone_through_band_stop_is_removed() {
        let rate = 48_000u32;
        let f = design_filter(&FilterSpec::band_stop(2900.0, 3100.0, 4), rate as f64).unwrap();
        let x = Tone::new(3000.0, 0.5)
            .with_fade(0.0)
            .render(96_000, rate)
            .unwrap();
        let y = apply_filter_zero_phase(&x, &f).unwrap();
        let settle = f.settling_samples(1e-6);
        let mid = settle..y.len() - settle;
        let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        let rel = db(rms(&y.samples()[mid.clone()]) / rms(&x.samples()[mid]));
        assert!(rel <= -80.0, "{rel}");
    }

    #[test]
    fn too_short_buffer_is_rejected() {
        let f = design_filter(&FilterSpec::band_pass(2900.0, 3100.0, 4), 48_000.0).unwrap();
        assert!(matches!(
            f.filtfilt(&[0.0; 24]),
            Err(Error::BufferTooShort { .. })
        ));
        assert!(f.filtfilt(&[0.0; 25]).is_ok());
    }

    #[test]
    fn wide_band_pass_uses_real_pole_pairs() {
        // 1-30 Hz at 250 Hz: the band transform yields real poles
        let f = design_filter(&FilterSpec::band_pass(1.0, 30.0, 4), 250.0).unwrap();
        assert_eq!(f.order(), 8);
        assert!(f.magnitude_db(10.0) > -0.1);
        assert!(f.magnitude_db(0.1) < -40.0);
        assert!((f.magnitude_db(30.0) + 3.0103).abs() < 1e-3);
        assert!((f.magnitude_db(1.0) + 3.0103).abs() < 1e-3);
    }
}
