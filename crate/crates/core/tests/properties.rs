use std::f64::consts::PI;

use earload_core::analysis::{
    demographic_report, group_stats, ols_fit, CiMethod, Gender, ParticipantMeta,
};
use earload_core::audio::fft::{forward, inverse};
use earload_core::audio::{design_filter, synth_tone, FilterSpec, SampleBuffer};
use earload_core::cochlea::{artificial_ear, simulate_ear, EarModel};
use earload_core::eeg::{
    band_powers, fastica, reject_components, EegRecording, IcaConfig, PowerConfig, RejectPolicy,
};
use earload_core::oae::{extract_magnitude, sed, ExtractConfig, MagnitudeRecord, SedRecord};
use earload_core::stimulus::embed_stimulus;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

const RATE: u32 = 48_000;

fn noise(len: usize, seed: u64, sigma: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    (0..len).map(|_| n.sample(&mut rng)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn pure_tone(f: f64, amp: f64, phase: f64, len: usize) -> SampleBuffer {
    let x = (0..len)
        .map(|n| amp * (2.0 * PI * f * n as f64 / RATE as f64 + phase).sin())
        .collect();
    SampleBuffer::new(x, RATE).unwrap()
}

fn probe_freq() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1000.0, 1500.0, 2000.0, 3000.0, 4000.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_phase_filter_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, lo in 200.0f64..2000.0) {
        let f = design_filter(&FilterSpec::band_pass(lo, lo * 2.0, 4), RATE as f64).unwrap();
        let x = noise(4000, seed, 1.0);
        let y = noise(4000, seed ^ 1, 1.0);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = f.filtfilt(&mix).unwrap();
        let fx = f.filtfilt(&x).unwrap();
        let fy = f.filtfilt(&y).unwrap();
        let rhs: Vec<f64> = fx.iter().zip(&fy).map(|(p, q)| a * p + b * q).collect();
        let err: Vec<f64> = lhs.iter().zip(&rhs).map(|(p, q)| p - q).collect();
        prop_assert!(max_abs(&err) <= 1e-9 * max_abs(&rhs).max(1e-300));
    }

    #[test]
    fn parseval_and_fft_round_trip(seed in any::<u64>(), len in 1usize..3000) {
        let x = noise(len, seed, 0.5);
        let spec = forward(&x);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / len as f64;
        prop_assert!(rel(freq, time) <= 1e-6);
        let back = inverse(&spec);
        let err: Vec<f64> = back.iter().zip(&x).map(|(p, q)| p - q).collect();
        prop_assert!(max_abs(&err) <= 1e-9 * max_abs(&x));
    }

    #[test]
    fn designed_filters_settle(lo in 50.0f64..5000.0, order in 1usize..=4, kind in 0usize..4) {
        let spec = match kind {
            0 => FilterSpec::low_pass(lo, order),
            1 => FilterSpec::high_pass(lo, order),
            2 => FilterSpec::band_pass(lo, lo + 200.0, order),
            _ => FilterSpec::band_stop(lo, lo + 200.0, order),
        };
        let f = design_filter(&spec, RATE as f64).unwrap();
        prop_assert!(f.max_pole_radius() < 1.0);
        let horizon = 10 * f.settling_samples(1e-12).max(1);
        let mut impulse = vec![0.0; horizon + 64];
        impulse[0] = 1.0;
        let h = f.filter(&impulse);
        prop_assert!(max_abs(&h[horizon..]) < 1e-12);
    }

    #[test]
    fn notch_band_carries_only_the_probe(seed in any::<u64>(), f_s in probe_freq(), level in 0.05f64..0.9) {
        let task = SampleBuffer::new(noise(RATE as usize / 2, seed, level / 3.0), RATE).unwrap();
        let e = embed_stimulus(&task, f_s, 0.1).unwrap();
        let band = design_filter(&FilterSpec::band_pass(f_s - 100.0, f_s + 100.0, 4), RATE as f64).unwrap();
        let got = band.filtfilt(e.audio.samples()).unwrap();
        let probe = e.audio.samples().len();
        let tone = synth_tone(f_s, 0.1, probe as f64 / RATE as f64, RATE, 0.0).unwrap();
        let want = band.filtfilt(tone.samples()).unwrap();
        // Ignore the fades at either end.
        let core = probe / 10..probe - probe / 10;
        let (g, w) = (&got[core.clone()], &want[core]);
        let dot: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
        let corr = dot / (g.iter().map(|a| a * a).sum::<f64>() * w.iter().map(|b| b * b).sum::<f64>()).sqrt();
        prop_assert!(corr >= 0.99, "correlation {corr}");
    }

    #[test]
    fn embedding_is_deterministic(seed in any::<u64>(), f_s in probe_freq()) {
        let task = SampleBuffer::new(noise(6000, seed, 0.2), RATE).unwrap();
        let a = embed_stimulus(&task, f_s, 0.1).unwrap();
        let b = embed_stimulus(&task, f_s, 0.1).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn extraction_is_scale_equivariant(f_s in probe_freq(), g in 0.01f64..20.0, amp in 0.01f64..0.5, phase in -PI..PI) {
        let len = RATE as usize / 2;
        let x = pure_tone(f_s, amp, phase, len);
        let cfg = ExtractConfig::default();
        let m = extract_magnitude(&x, f_s, 0..len, &cfg).unwrap();
        let ms = extract_magnitude(&x.scaled(g), f_s, 0..len, &cfg).unwrap();
        prop_assert!(rel(ms.magnitude, g * m.magnitude) <= 1e-9);

        let y = pure_tone(f_s, amp * 1.3, phase, len);
        let base = MagnitudeRecord::new("P", 1, f_s, m);
        let task = MagnitudeRecord::new("P", 2, f_s, extract_magnitude(&y, f_s, 0..len, &cfg).unwrap());
        let scaled_base = MagnitudeRecord::new("P", 1, f_s, ms);
        let scaled_task =
            MagnitudeRecord::new("P", 2, f_s, extract_magnitude(&y.scaled(g), f_s, 0..len, &cfg).unwrap());
        let d = sed(&task, &base).unwrap().sed;
        prop_assert!(d >= 0.0);
        prop_assert!(rel(sed(&scaled_task, &scaled_base).unwrap().sed, g * g * d) <= 1e-9);
    }

    #[test]
    fn pure_tone_noise_floor_and_duration(f_s in probe_freq(), amp in 0.01f64..0.5, phase in -PI..PI) {
        let cfg = ExtractConfig::default();
        let len = RATE as usize / 2;
        let x = pure_tone(f_s, amp, phase, 2 * len);
        let short = extract_magnitude(&x, f_s, 0..len, &cfg).unwrap();
        let long = extract_magnitude(&x, f_s, 0..2 * len, &cfg).unwrap();
        prop_assert!(short.magnitude >= 0.0 && short.window_count >= 1);
        prop_assert!(short.noise_floor <= 1e-6 * short.magnitude);
        prop_assert!(rel(long.magnitude, short.magnitude) < 0.005);
    }

    #[test]
    fn artificial_ear_equals_zero_gain_model(seed in any::<u64>(), f_s in probe_freq(), r in 0.0f64..=1.0, task in 1u8..=4) {
        let audio = SampleBuffer::new(noise(8000, seed, 0.1), RATE).unwrap();
        let pb = embed_stimulus(&audio, f_s, 0.1).unwrap();
        let a = artificial_ear(&pb, r, Some(-40.0), seed, task).unwrap();
        let model = EarModel { passive_reflectance: r, noise_floor_dbfs: Some(-40.0), seed, ..EarModel::with_gains([0.0; 4]) };
        let b = simulate_ear(&pb, &model, task).unwrap();
        prop_assert_eq!(a.audio.samples(), b.audio.samples());
    }

    #[test]
    fn short_latency_keeps_magnitude(f_s in probe_freq(), latency in 0.0f64..=10.0, phase in -PI..PI) {
        let silence = SampleBuffer::silence(RATE as usize / 2, RATE).unwrap();
        let pb = embed_stimulus(&silence, f_s, 0.1).unwrap();
        let base = EarModel { oae_phase_rad: phase, ..EarModel::with_gains([0.1; 4]) };
        let delayed = EarModel { oae_latency_ms: latency, ..base.clone() };
        let cfg = ExtractConfig::default();
        let len = pb.audio.len();
        let m0 = extract_magnitude(&simulate_ear(&pb, &base, 2).unwrap().audio, f_s, 0..len, &cfg).unwrap();
        let m1 = extract_magnitude(&simulate_ear(&pb, &delayed, 2).unwrap().audio, f_s, 0..len, &cfg).unwrap();
        // Latency rotates the emission phase; compare against the matching phasor sum.
        let rotated = phase - 2.0 * PI * f_s * latency * 1e-3;
        let want = |p: f64| ((1.0 + 0.1 * p.cos()).powi(2) + (0.1 * p.sin()).powi(2)).sqrt();
        prop_assert!(rel(m1.magnitude / m0.magnitude, want(rotated) / want(phase)) <= 0.005);
    }

    #[test]
    fn monotone_gains_give_monotone_seds(f_s in probe_freq(), g1 in 0.0f64..0.2, steps in prop::array::uniform3(0.005f64..0.2)) {
        let gains = [g1, g1 + steps[0], g1 + steps[0] + steps[1], g1 + steps[0] + steps[1] + steps[2]];
        prop_assume!(gains[3] <= 1.0);
        let silence = SampleBuffer::silence(RATE as usize, RATE).unwrap();
        let pb = embed_stimulus(&silence, f_s, 0.1).unwrap();
        let model = EarModel::with_gains(gains);
        let cfg = ExtractConfig::default();
        let len = pb.audio.len();
        let mags: Vec<MagnitudeRecord> = (1..=4u8)
            .map(|t| {
                let rec = simulate_ear(&pb, &model, t).unwrap();
                MagnitudeRecord::new("P", t, f_s, extract_magnitude(&rec.audio, f_s, 0..len, &cfg).unwrap())
            })
            .collect();
        let d: Vec<f64> = mags[1..].iter().map(|m| sed(m, &mags[0]).unwrap().sed).collect();
        prop_assert!(d[0] < d[1] && d[1] < d[2], "{d:?}");
    }

    #[test]
    fn ols_affine_equivariance(seed in any::<u64>(), n in 3usize..30, c in -50.0f64..50.0, g in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 + rng.random_range(0.0..0.5), rng.random_range(-5.0..5.0))).collect();
        let base = ols_fit(&pts).unwrap();
        prop_assert!((0.0..=1.0).contains(&base.r_squared) && base.n_points == n);
        let shifted = ols_fit(&pts.iter().map(|&(x, y)| (x, y + c)).collect::<Vec<_>>()).unwrap();
        let scaled = ols_fit(&pts.iter().map(|&(x, y)| (x, g * y)).collect::<Vec<_>>()).unwrap();
        let tol = 1e-9 * (1.0 + base.slope.abs() + base.intercept.abs() + c.abs());
        prop_assert!((shifted.slope - base.slope).abs() <= tol);
        prop_assert!((shifted.intercept - (base.intercept + c)).abs() <= tol);
        prop_assert!((scaled.slope - g * base.slope).abs() <= g * tol);
        prop_assert!((scaled.intercept - g * base.intercept).abs() <= g * tol);
    }

    #[test]
    fn ci_brackets_mean(values in prop::collection::vec(-100.0f64..100.0, 1..40), boot in any::<bool>(), seed in any::<u64>()) {
        let method = if boot { CiMethod::Bootstrap { resamples: 200, seed } } else { CiMethod::StudentT };
        let s = group_stats(&values, method).unwrap();
        prop_assert!(s.n == values.len() && s.ci_low <= s.mean && s.mean <= s.ci_high);
    }

    #[test]
    fn band_power_scale_law(seed in any::<u64>(), g in 0.01f64..100.0) {
        let x = noise(2500, seed, 10.0);
        let cfg = PowerConfig::default();
        let p = band_powers(&x, 250.0, &cfg).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| g * v).collect();
        let ps = band_powers(&xs, 250.0, &cfg).unwrap();
        for (a, b) in p.bands().iter().zip(ps.bands()) {
            prop_assert!(*a >= 0.0 && *a <= p.total);
            prop_assert!(rel(b, g * g * a) <= 1e-9);
        }
        prop_assert!(rel(ps.total, g * g * p.total) <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ica_round_trip_and_whitening(seed in any::<u64>(), k in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3000;
        let sources: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..n).map(|t| if i % 2 == 0 { rng.random_range(-1.0..1.0) } else { (0.05 * t as f64 * (i + 1) as f64).sin() }).collect())
            .collect();
        let channels: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                (0..n).map(|t| w.iter().zip(&sources).map(|(a, s)| a * s[t]).sum::<f64>() + 3.0).collect()
            })
            .collect();
        let names = (0..k).map(|i| format!("C{i}")).collect();
        let rec = EegRecording::new(channels.clone(), 250.0, names, Vec::new()).unwrap();
        let d = fastica(&rec, &IcaConfig::new(k, seed)).unwrap();
        let id = &d.unmixing * &d.mixing;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((id[(i, j)] - want).abs() <= 1e-6, "W*A = {id}");
            }
        }
        let cov = &d.components * d.components.transpose() / n as f64;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((cov[(i, j)] - want).abs() <= 1e-6, "cov = {cov}");
            }
        }
        let back = reject_components(&d, &RejectPolicy::none()).unwrap();
        for (a, b) in back.recording.channels.iter().zip(&channels) {
            for (p, q) in a.iter().zip(b) {
                prop_assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
            }
        }
    }
}

#[test]
fn white_noise_power_tracks_bandwidth() {
    let cfg = PowerConfig::default();
    let trials = 40;
    let mut acc = [0.0; 4];
    for seed in 0..trials {
        let p = band_powers(&noise(250 * 60, seed, 1.0), 250.0, &cfg).unwrap();
        for (a, b) in acc.iter_mut().zip(p.bands()) {
            *a += b / trials as f64;
        }
    }
    let widths: Vec<f64> = cfg.edges.windows(2).map(|e| e[1] - e[0]).collect();
    let density: Vec<f64> = acc.iter().zip(&widths).map(|(p, w)| p / w).collect();
    let mean = density.iter().sum::<f64>() / 4.0;
    for d in &density {
        assert!(rel(*d, mean) <= 0.10, "per-Hz power {density:?}");
    }
}

#[test]
fn demographic_groups_partition_cohort() {
    let genders = [Gender::Female, Gender::Male, Gender::Other];
    let meta: Vec<ParticipantMeta> = (0..19)
        .map(|i| ParticipantMeta {
            participant_id: format!("P{i:02}"),
            gender: genders[i % 3],
            age: 20.0 + (i * 7 % 36) as f64,
        })
        .collect();
    let mut seds = Vec::new();
    for m in &meta {
        for f in [1000.0, 2000.0] {
            for t in 2..=4u8 {
                seds.push(SedRecord {
                    participant_id: m.participant_id.clone(),
                    task_id: t,
                    f_s_hz: f,
                    sed: t as f64 * 1e-4,
                });
            }
        }
    }
    let groups = demographic_report(&seds, &meta, CiMethod::StudentT).unwrap();
    for dim in ["gender", "age_bin"] {
        for f in [1000.0, 2000.0] {
            let total: usize = groups
                .iter()
                .filter(|g| g.dimension == dim && g.f_s_hz == f)
                .map(|g| g.n)
                .sum();
            assert_eq!(total, meta.len(), "{dim} at {f} Hz");
        }
    }
}
