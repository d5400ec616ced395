//! Python bindings: tone and playback synthesis, ear simulation, probe
//! extraction, cohort statistics and EEG band power.

use std::path::PathBuf;

use earload_core::analysis::{
    self, Alternative, AnalysisOptions, CiMethod, SensitivityOptions, TestMethod,
};
use earload_core::audio::{self, SampleBuffer, WavEncoding};
use earload_core::cochlea;
use earload_core::eeg::{self, EegRecording, IcaConfig};
use earload_core::oae::{self, Averaging, ExtractConfig, RecordingSource};
use earload_core::stimulus::{self, fixtures, SessionManifest, SessionPlan, SessionTiming};
use earload_core::Error;
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyFileNotFoundError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(
    earload,
    EarloadError,
    PyException,
    "Processing failure in earload."
);
create_exception!(
    earload,
    SchemaError,
    EarloadError,
    "Input file does not match its schema."
);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::InvalidParameter(_) | Error::AboveNyquist { .. } | Error::UnstableFilter { .. } => {
            PyValueError::new_err(msg)
        }
        Error::MissingFile(_) | Error::MissingBaseline { .. } => PyFileNotFoundError::new_err(msg),
        Error::Schema { .. } | Error::MissingTask { .. } | Error::Mismatch(_) => {
            SchemaError::new_err(msg)
        }
        _ => EarloadError::new_err(msg),
    }
}

trait PyResultExt<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> PyResultExt<T> for earload_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn buffer(samples: Vec<f64>, rate: u32) -> PyResult<SampleBuffer> {
    SampleBuffer::new(samples, rate).py()
}

fn encoding(name: &str) -> PyResult<WavEncoding> {
    match name {
        "pcm16" => Ok(WavEncoding::Pcm16),
        "pcm24" => Ok(WavEncoding::Pcm24),
        "float32" => Ok(WavEncoding::Float32),
        other => Err(PyValueError::new_err(format!("unknown encoding {other:?}"))),
    }
}

fn averaging(name: &str) -> PyResult<Averaging> {
    match name {
        "magnitude" => Ok(Averaging::Magnitude),
        "complex" => Ok(Averaging::Complex),
        other => Err(PyValueError::new_err(format!(
            "unknown averaging {other:?}"
        ))),
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Sine tone with 10 ms raised-cosine fades.
#[pyfunction]
#[pyo3(signature = (freq_hz, amplitude, duration_s, rate=48000, phase_rad=0.0))]
fn synth_tone(
    freq_hz: f64,
    amplitude: f64,
    duration_s: f64,
    rate: u32,
    phase_rad: f64,
) -> PyResult<Vec<f64>> {
    Ok(
        audio::synth_tone(freq_hz, amplitude, duration_s, rate, phase_rad)
            .py()?
            .into_samples(),
    )
}

/// Returns `(samples, sample_rate)`.
#[pyfunction]
fn load_wav(path: PathBuf) -> PyResult<(Vec<f64>, u32)> {
    let b = audio::load_wav(path).py()?;
    let rate = b.sample_rate();
    Ok((b.into_samples(), rate))
}

/// Returns the number of clipped samples.
#[pyfunction]
#[pyo3(signature = (samples, rate, path, encoding="float32"))]
fn save_wav(samples: Vec<f64>, rate: u32, path: PathBuf, encoding: &str) -> PyResult<usize> {
    let enc = self::encoding(encoding)?;
    audio::save_wav(&buffer(samples, rate)?, path, enc).py()
}

/// Band-stop the task audio around `f_s` and add the probe.
/// Returns `(playback, norm_gain)`.
#[pyfunction]
fn embed_stimulus(
    task_audio: Vec<f64>,
    rate: u32,
    f_s: f64,
    probe_amplitude: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let p = stimulus::embed_stimulus(&buffer(task_audio, rate)?, f_s, probe_amplitude).py()?;
    Ok((p.audio.into_samples(), p.norm_gain))
}

/// Probe-band magnitude of a whole recording at `f_s`.
#[pyfunction]
#[pyo3(signature = (samples, rate, f_s, averaging="magnitude"))]
fn extract_magnitude<'py>(
    py: Python<'py>,
    samples: Vec<f64>,
    rate: u32,
    f_s: f64,
    averaging: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let config = ExtractConfig {
        averaging: self::averaging(averaging)?,
        ..ExtractConfig::default()
    };
    let len = samples.len();
    let b = buffer(samples, rate)?;
    let m = py
        .detach(|| oae::extract_magnitude(&b, f_s, 0..len, &config))
        .py()?;
    let d = PyDict::new(py);
    d.set_item("magnitude", m.magnitude)?;
    d.set_item("noise_floor", m.noise_floor)?;
    d.set_item("window_count", m.window_count)?;
    d.set_item("frame_len", m.frame_len)?;
    d.set_item("bin_centered", m.bin_centered)?;
    Ok(d)
}

/// Simulated ear: probe reflection plus a load-dependent emission.
#[pyclass(name = "EarModel")]
struct PyEarModel {
    inner: cochlea::EarModel,
}

#[pymethods]
impl PyEarModel {
    #[new]
    #[pyo3(signature = (gains=[0.05, 0.08, 0.12, 0.18], phase_rad=0.0, latency_ms=0.0, reflectance=1.0, noise_dbfs=None, seed=0))]
    fn new(
        gains: [f64; 4],
        phase_rad: f64,
        latency_ms: f64,
        reflectance: f64,
        noise_dbfs: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = cochlea::EarModel {
            oae_phase_rad: phase_rad,
            oae_latency_ms: latency_ms,
            passive_reflectance: reflectance,
            noise_floor_dbfs: noise_dbfs,
            seed,
            ..cochlea::EarModel::with_gains(gains)
        };
        inner.validate().py()?;
        Ok(Self { inner })
    }

    /// Zero-gain ear.
    #[staticmethod]
    #[pyo3(signature = (reflectance=1.0, noise_dbfs=None, seed=0))]
    fn artificial(reflectance: f64, noise_dbfs: Option<f64>, seed: u64) -> PyResult<Self> {
        let inner = cochlea::EarModel::artificial(reflectance, noise_dbfs, seed);
        inner.validate().py()?;
        Ok(Self { inner })
    }

    fn gain(&self, task_id: u8) -> PyResult<f64> {
        self.inner.gain(task_id).py()
    }

    fn expected_magnitude(&self, task_id: u8, f_s: f64, probe_amplitude: f64) -> PyResult<f64> {
        self.inner
            .expected_magnitude(task_id, f_s, probe_amplitude)
            .py()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("model serializes")
    }

    fn __repr__(&self) -> String {
        let g: Vec<f64> = self.inner.oae_gain_per_load.values().copied().collect();
        format!(
            "EarModel(gains={g:?}, reflectance={}, noise_dbfs={:?}, seed={})",
            self.inner.passive_reflectance, self.inner.noise_floor_dbfs, self.inner.seed
        )
    }
}

/// Simulated recording of one playback. Returns `(recording, expected_magnitude)`.
#[pyfunction]
#[pyo3(signature = (playback, rate, f_s, probe_amplitude, norm_gain, model, task_id))]
fn simulate_ear(
    playback: Vec<f64>,
    rate: u32,
    f_s: f64,
    probe_amplitude: f64,
    norm_gain: f64,
    model: &PyEarModel,
    task_id: u8,
) -> PyResult<(Vec<f64>, f64)> {
    let p = stimulus::EmbeddedPlayback {
        audio: buffer(playback, rate)?,
        notch_center: f_s,
        notch_width: stimulus::EmbedConfig::default().notch_width_hz,
        probe_amplitude,
        norm_gain,
        fade_s: audio::DEFAULT_FADE_S,
    };
    let r = cochlea::simulate_ear(&p, &model.inner, task_id).py()?;
    Ok((r.audio.into_samples(), r.ground_truth.expected_magnitude))
}

/// Write a session bundle built from the fixture clips (or clips in
/// `clips`). Returns the manifest as JSON.
#[pyfunction]
#[pyo3(signature = (out_dir, frequencies=vec![1000.0, 2000.0, 3000.0], rate=48000, duration_s=10.0, probe_amplitude=0.1, participant_id="P01", clips=None))]
fn build_session(
    py: Python<'_>,
    out_dir: PathBuf,
    frequencies: Vec<f64>,
    rate: u32,
    duration_s: f64,
    probe_amplitude: f64,
    participant_id: &str,
    clips: Option<PathBuf>,
) -> PyResult<String> {
    let timing = SessionTiming {
        sample_rate: rate,
        frequencies,
        probe_amplitude,
        segment_duration_s: duration_s,
        ..SessionTiming::default()
    };
    let plan = SessionPlan::new(participant_id, fixtures::default_tasks(), &timing).py()?;
    plan.validate().py()?;
    let manifest = py
        .detach(|| {
            let root = match clips {
                Some(dir) => dir,
                None => {
                    let dir = out_dir.join("clips");
                    fixtures::write_fixture_clips(&dir, rate)?;
                    dir
                }
            };
            stimulus::build_session(&plan, &root, &out_dir, WavEncoding::Float32)
        })
        .py()?;
    Ok(manifest.to_json())
}

/// Simulate one ear for every segment of a session. Returns clipped-sample count.
#[pyfunction]
fn simulate_session(
    py: Python<'_>,
    session_dir: PathBuf,
    out_dir: PathBuf,
    model: &PyEarModel,
) -> PyResult<usize> {
    let model = model.inner.clone();
    py.detach(|| {
        let manifest = SessionManifest::load(session_dir.join(stimulus::MANIFEST_FILE))?;
        let playbacks = cochlea::load_playbacks(&manifest, &session_dir)?;
        let sim =
            cochlea::simulate_session(&manifest, &playbacks, &manifest.participant_id, &model)?;
        cochlea::write_simulation(&out_dir, &sim, WavEncoding::Float32)
    })
    .py()
}

/// Simulate a cohort into `out_dir/<participant>/`. Returns participant ids.
#[pyfunction]
#[pyo3(signature = (session_dir, out_dir, n_participants=19, seed=0, noise_dbfs=Some(-40.0), artificial=false))]
fn simulate_cohort(
    py: Python<'_>,
    session_dir: PathBuf,
    out_dir: PathBuf,
    n_participants: usize,
    seed: u64,
    noise_dbfs: Option<f64>,
    artificial: bool,
) -> PyResult<Vec<String>> {
    py.detach(|| {
        let manifest = SessionManifest::load(session_dir.join(stimulus::MANIFEST_FILE))?;
        let playbacks = cochlea::load_playbacks(&manifest, &session_dir)?;
        let spec = cochlea::CohortSpec {
            n_participants,
            noise_floor_dbfs: noise_dbfs,
            artificial,
            profile: cochlea::FrequencyProfile {
                frequencies: manifest.frequencies(),
                ..cochlea::FrequencyProfile::default()
            },
            ..cochlea::CohortSpec::default()
        };
        let cohort = cochlea::simulate_cohort(&spec, seed)?;
        cochlea::write_cohort(
            &out_dir,
            &manifest,
            &playbacks,
            &cohort,
            WavEncoding::Float32,
        )?;
        Ok(cohort
            .members
            .iter()
            .map(|m| m.meta.participant_id.clone())
            .collect())
    })
    .py()
}

/// Extract one participant's recordings (one WAV per segment). Returns
/// result rows as dicts; `sed` is `None` for the baseline task.
#[pyfunction]
#[pyo3(signature = (session_dir, recordings_dir, out_csv=None, averaging="magnitude"))]
fn extract_session<'py>(
    py: Python<'py>,
    session_dir: PathBuf,
    recordings_dir: PathBuf,
    out_csv: Option<PathBuf>,
    averaging: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = ExtractConfig {
        averaging: self::averaging(averaging)?,
        ..ExtractConfig::default()
    };
    let rows = py
        .detach(|| {
            let manifest = SessionManifest::load(session_dir.join(stimulus::MANIFEST_FILE))?;
            let r = oae::batch_extract(
                &manifest,
                &RecordingSource::PerSegment(recordings_dir),
                &config,
            )?;
            let rows = r.rows();
            if let Some(path) = &out_csv {
                oae::write_results_csv(path, &rows)?;
            }
            Ok(rows)
        })
        .py()?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("participant_id", r.participant_id)?;
            d.set_item("task_id", r.task_id)?;
            d.set_item("f_s_hz", r.f_s_hz)?;
            d.set_item("magnitude", r.magnitude)?;
            d.set_item("noise_floor", r.noise_floor)?;
            d.set_item("sed", r.sed)?;
            d.set_item("window_count", r.window_count)?;
            Ok(d)
        })
        .collect()
}

/// Spectral energy difference `|M_task^2 - M_baseline^2|`.
#[pyfunction]
fn sed(m_task: f64, m_baseline: f64) -> f64 {
    (m_task * m_task - m_baseline * m_baseline).abs()
}

/// Least-squares line. Returns a dict with slope, intercept, r_squared,
/// n_points and slope_std_err.
#[pyfunction]
fn ols_fit<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("x and y differ in length"));
    }
    let pts: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
    let f = analysis::ols_fit(&pts).py()?;
    let d = PyDict::new(py);
    d.set_item("slope", f.slope)?;
    d.set_item("intercept", f.intercept)?;
    d.set_item("r_squared", f.r_squared)?;
    d.set_item("n_points", f.n_points)?;
    d.set_item("slope_std_err", f.slope_std_err)?;
    Ok(d)
}

/// Wilcoxon signed-rank test; exact for up to 25 non-zero differences.
#[pyfunction]
#[pyo3(signature = (diffs, alternative="greater"))]
fn wilcoxon_signed_rank<'py>(
    py: Python<'py>,
    diffs: Vec<f64>,
    alternative: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let alt = match alternative {
        "greater" => Alternative::Greater,
        "less" => Alternative::Less,
        "two-sided" | "two_sided" => Alternative::TwoSided,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown alternative {other:?}"
            )))
        }
    };
    let r = analysis::wilcoxon_signed_rank(&diffs, alt).py()?;
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("w_plus", r.w_plus)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("exact", r.exact)?;
    d.set_item("undefined", r.undefined)?;
    Ok(d)
}

/// Load-effect p-value for per-participant `[sed2, sed3, sed4]`.
#[pyfunction]
#[pyo3(signature = (seds, method="wilcoxon", permutations=10000, seed=0))]
fn load_effect_test(
    seds: Vec<[f64; 3]>,
    method: &str,
    permutations: usize,
    seed: u64,
) -> PyResult<f64> {
    let m = match method {
        "wilcoxon" => TestMethod::Wilcoxon,
        "permutation" => TestMethod::Permutation { permutations, seed },
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    Ok(analysis::load_effect_test(&seds, m).py()?.p_value)
}

/// Full cohort analysis. Writes report.json and plots/ when `out_dir` is
/// given; returns the report JSON.
#[pyfunction]
#[pyo3(signature = (results_csv, participants_csv, behavior_csv=None, out_dir=None, ci="t", test="wilcoxon", seed=0, baseline_zero=true, max_normalize=false))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    results_csv: PathBuf,
    participants_csv: PathBuf,
    behavior_csv: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    ci: &str,
    test: &str,
    seed: u64,
    baseline_zero: bool,
    max_normalize: bool,
) -> PyResult<String> {
    let options = AnalysisOptions {
        ci: match ci {
            "t" => CiMethod::StudentT,
            "bootstrap" => CiMethod::Bootstrap {
                resamples: analysis::DEFAULT_BOOTSTRAP_RESAMPLES,
                seed,
            },
            other => return Err(PyValueError::new_err(format!("unknown ci {other:?}"))),
        },
        test: match test {
            "wilcoxon" => TestMethod::Wilcoxon,
            "permutation" => TestMethod::Permutation {
                permutations: analysis::DEFAULT_PERMUTATIONS,
                seed,
            },
            other => return Err(PyValueError::new_err(format!("unknown test {other:?}"))),
        },
        sensitivity: SensitivityOptions {
            baseline_zero,
            max_normalize,
        },
    };
    py.detach(|| {
        let rows = oae::read_results_csv(&results_csv)?;
        let meta = analysis::read_participants_csv(&participants_csv)?;
        let behavior = match &behavior_csv {
            Some(p) => analysis::read_behavior_csv(p)?,
            None => Vec::new(),
        };
        let report = analysis::analyze(&rows, &meta, &behavior, options)?;
        if let Some(dir) = &out_dir {
            analysis::write_report(dir, &report)?;
        }
        Ok(report.to_json())
    })
    .py()
}

/// Welch band powers (µV²) of one channel: delta, theta, alpha, beta, total.
#[pyfunction]
fn band_powers<'py>(py: Python<'py>, samples: Vec<f64>, rate: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = eeg::band_powers(&samples, rate, &eeg::PowerConfig::default()).py()?;
    let d = PyDict::new(py);
    d.set_item("delta", p.delta)?;
    d.set_item("theta", p.theta)?;
    d.set_item("alpha", p.alpha)?;
    d.set_item("beta", p.beta)?;
    d.set_item("total", p.total)?;
    Ok(d)
}

/// FastICA on `channels` (one list per channel). Returns a dict with
/// components, mixing, unmixing, iterations, converged and kurtosis.
#[pyfunction]
#[pyo3(signature = (channels, rate, n_components, seed=0))]
fn fastica<'py>(
    py: Python<'py>,
    channels: Vec<Vec<f64>>,
    rate: f64,
    n_components: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let names = (0..channels.len()).map(|i| format!("ch{i}")).collect();
    let rec = EegRecording::new(channels, rate, names, Vec::new()).py()?;
    let ica = py
        .detach(|| eeg::fastica(&rec, &IcaConfig::new(n_components, seed)))
        .py()?;
    let d = PyDict::new(py);
    d.set_item("components", rows_of(&ica.components))?;
    d.set_item("mixing", rows_of(&ica.mixing))?;
    d.set_item("unmixing", rows_of(&ica.unmixing))?;
    d.set_item("iterations", ica.iterations)?;
    d.set_item("converged", ica.converged)?;
    d.set_item(
        "kurtosis",
        ica.diagnostics
            .iter()
            .map(|c| c.kurtosis)
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// 16-channel synthetic EEG with task-scaled amplitude.
/// Returns `(channels, sample_rate, channel_names, markers)`, each marker a
/// `(label, task_id, start_sample, end_sample)` tuple.
#[pyfunction]
#[pyo3(signature = (seed=0, blinks_per_segment=0))]
#[allow(clippy::type_complexity)]
fn synthetic_eeg(
    seed: u64,
    blinks_per_segment: usize,
) -> PyResult<(
    Vec<Vec<f64>>,
    f64,
    Vec<String>,
    Vec<(String, u8, usize, usize)>,
)> {
    let rec = eeg::synthetic_eeg(&eeg::SyntheticEeg {
        seed,
        blinks_per_segment,
        ..eeg::SyntheticEeg::default()
    })
    .py()?;
    let markers = rec
        .markers
        .iter()
        .map(|m| (m.label.clone(), m.task_id, m.start_sample, m.end_sample))
        .collect();
    Ok((rec.channels, rec.sample_rate, rec.channel_names, markers))
}

#[pymodule]
fn earload(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EarloadError", m.py().get_type::<EarloadError>())?;
    m.add("SchemaError", m.py().get_type::<SchemaError>())?;
    m.add_class::<PyEarModel>()?;
    m.add_function(wrap_pyfunction!(synth_tone, m)?)?;
    m.add_function(wrap_pyfunction!(load_wav, m)?)?;
    m.add_function(wrap_pyfunction!(save_wav, m)?)?;
    m.add_function(wrap_pyfunction!(embed_stimulus, m)?)?;
    m.add_function(wrap_pyfunction!(extract_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ear, m)?)?;
    m.add_function(wrap_pyfunction!(build_session, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_session, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(extract_session, m)?)?;
    m.add_function(wrap_pyfunction!(sed, m)?)?;
    m.add_function(wrap_pyfunction!(ols_fit, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(load_effect_test, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(band_powers, m)?)?;
    m.add_function(wrap_pyfunction!(fastica, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_eeg, m)?)?;
    Ok(())
}
