use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use earload_core::cochlea::{GroundTruth, GROUND_TRUTH_FILE};
use earload_core::oae::{
    batch_extract, write_results_csv, Averaging, ExtractConfig, ExtractionResult, RecordingSource,
    ResultRow, BASELINE_TASK,
};
use earload_core::stimulus::{SessionManifest, MANIFEST_FILE};

use super::{load_manifest, require_file};
use crate::config::{AveragingKind, RunConfig};
use crate::exit::{fail, MISSING_INPUT, PROCESSING, SCHEMA};

/// Relative SED tolerance of `--verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-3;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Session bundle directory the recordings were made from
    #[arg(long)]
    pub session: PathBuf,

    /// One participant directory, or a directory of participant directories
    #[arg(long)]
    pub recordings: Option<PathBuf>,

    /// Continuous whole-session recording instead of per-segment files
    #[arg(long, conflicts_with = "recordings")]
    pub continuous: Option<PathBuf>,

    /// Estimate the continuous recording's offset (within ±50 ms) by cross-correlation
    #[arg(long, requires = "continuous")]
    pub align: bool,

    /// Results CSV to write
    #[arg(long)]
    pub out: PathBuf,

    /// Frame averaging: magnitude (drift tolerant) or complex (shared clock)
    #[arg(long, value_enum)]
    pub averaging: Option<AveragingKind>,

    /// Compare SEDs with the simulator ground truth (0.1% relative);
    /// defaults to ground_truth.json in each participant directory
    #[arg(long, num_args = 0..=1)]
    pub verify: Option<Option<PathBuf>>,
}

struct Job {
    dir: PathBuf,
    manifest: SessionManifest,
    source: RecordingSource,
}

pub fn run(mut cfg: RunConfig, args: Args) -> anyhow::Result<()> {
    if let Some(a) = args.averaging {
        cfg.analysis.averaging = a;
    }
    cfg.paths.session_dir = Some(args.session.clone());
    let results_dir = args.out.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.paths.results_dir = Some(results_dir.clone());
    cfg.validate()?;

    let session = load_manifest(&args.session)?;
    let jobs = jobs(&args, &session)?;
    let config = ExtractConfig {
        averaging: match cfg.analysis.averaging {
            AveragingKind::Magnitude => Averaging::Magnitude,
            AveragingKind::Complex => Averaging::Complex,
        },
        ..ExtractConfig::default()
    };

    let mut results = Vec::with_capacity(jobs.len());
    for job in &jobs {
        let r = batch_extract(&job.manifest, &job.source, &config)
            .with_context(|| format!("participant {}", job.manifest.participant_id))?;
        if r.offset != 0 {
            log::info!(
                "{}: continuous recording offset {} samples",
                r.participant_id,
                r.offset
            );
        }
        results.push(r);
    }

    if let Some(verify) = &args.verify {
        for (job, r) in jobs.iter().zip(&results) {
            let path = match verify {
                Some(p) if jobs.len() == 1 => p.clone(),
                Some(p) => p.join(&job.manifest.participant_id).join(GROUND_TRUTH_FILE),
                None => job.dir.join(GROUND_TRUTH_FILE),
            };
            let worst = verify_against(r, &path)?;
            println!(
                "verify {}: max relative SED error {worst:.3e}",
                r.participant_id
            );
        }
    }

    let rows: Vec<ResultRow> = results.iter().flat_map(ExtractionResult::rows).collect();
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    write_results_csv(&args.out, &rows)?;
    cfg.echo(&results_dir)?;
    print_summary(&rows);
    Ok(())
}

fn jobs(args: &Args, session: &SessionManifest) -> anyhow::Result<Vec<Job>> {
    if let Some(recording) = &args.continuous {
        require_file(recording, "recording")?;
        return Ok(vec![Job {
            dir: recording
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default(),
            manifest: session.clone(),
            source: RecordingSource::Continuous {
                recording: recording.clone(),
                align: args.align.then(|| args.session.clone()),
            },
        }]);
    }
    let root = args.recordings.as_ref().ok_or_else(|| {
        fail(
            crate::exit::USAGE,
            "one of --recordings or --continuous is required",
        )
    })?;
    if !root.is_dir() {
        return Err(fail(
            MISSING_INPUT,
            format!("missing recordings directory: {}", root.display()),
        ));
    }
    let dirs: Vec<PathBuf> = if root.join(MANIFEST_FILE).is_file() || has_wav(root)? {
        vec![root.clone()]
    } else {
        let mut subdirs: Vec<PathBuf> = std::fs::read_dir(root)
            .with_context(|| format!("listing {}", root.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(MANIFEST_FILE).is_file())
            .collect();
        subdirs.sort();
        subdirs
    };
    if dirs.is_empty() {
        return Err(fail(
            MISSING_INPUT,
            format!("no recordings found in {}", root.display()),
        ));
    }
    dirs.into_iter()
        .map(|dir| {
            let manifest = if dir.join(MANIFEST_FILE).is_file() {
                let m = load_manifest(&dir)?;
                check_same_session(&m, session, &dir)?;
                m
            } else {
                session.clone()
            };
            for seg in &manifest.segments {
                let path = dir.join(&seg.file);
                if !path.is_file() {
                    let what = if seg.task_id == BASELINE_TASK {
                        format!("baseline (task 1, {} Hz) recording", seg.f_s_hz)
                    } else {
                        format!("task {} recording", seg.task_id)
                    };
                    return Err(fail(
                        MISSING_INPUT,
                        format!("missing {what}: {}", path.display()),
                    ));
                }
            }
            Ok(Job {
                source: RecordingSource::PerSegment(dir.clone()),
                dir,
                manifest,
            })
        })
        .collect()
}

fn has_wav(dir: &Path) -> anyhow::Result<bool> {
    Ok(std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok())
        .any(|e| {
            e.path()
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("wav"))
        }))
}

fn check_same_session(
    m: &SessionManifest,
    session: &SessionManifest,
    dir: &Path,
) -> anyhow::Result<()> {
    let same = m.sample_rate == session.sample_rate
        && m.segments.len() == session.segments.len()
        && m.segments.iter().zip(&session.segments).all(|(a, b)| {
            a.task_id == b.task_id && a.f_s_hz == b.f_s_hz && a.file == b.file && a.len() == b.len()
        });
    if same {
        Ok(())
    } else {
        Err(fail(
            SCHEMA,
            format!(
                "{}: manifest does not match the session's segments",
                dir.display()
            ),
        ))
    }
}

fn verify_against(r: &ExtractionResult, path: &Path) -> anyhow::Result<f64> {
    require_file(path, "ground truth")?;
    let gt = GroundTruth::load(path)?;
    let expected = gt.expected_seds()?;
    let baselines = gt.expected_magnitudes();
    let mut worst = 0.0f64;
    for e in &expected {
        let got = r
            .seds
            .iter()
            .find(|s| s.task_id == e.task_id && s.f_s_hz == e.f_s_hz)
            .ok_or_else(|| {
                fail(
                    SCHEMA,
                    format!("no SED for task {} at {} Hz", e.task_id, e.f_s_hz),
                )
            })?;
        let m1 = baselines
            .iter()
            .find(|m| m.task_id == BASELINE_TASK && m.f_s_hz == e.f_s_hz)
            .map_or(0.0, |m| m.magnitude);
        let scale = e.sed.abs().max(1e-3 * m1 * m1).max(f64::MIN_POSITIVE);
        let err = (got.sed - e.sed).abs() / scale;
        worst = worst.max(err);
        if err > VERIFY_TOLERANCE {
            return Err(fail(
                PROCESSING,
                format!(
                    "{}: SED task {} at {} Hz is {:.6e}, ground truth {:.6e} (relative error {err:.3e})",
                    r.participant_id, e.task_id, e.f_s_hz, got.sed, e.sed
                ),
            ));
        }
    }
    Ok(worst)
}

fn print_summary(rows: &[ResultRow]) {
    let mut by_freq: BTreeMap<u64, (f64, BTreeMap<u8, Vec<f64>>)> = BTreeMap::new();
    for r in rows {
        let entry = by_freq
            .entry(r.f_s_hz.to_bits())
            .or_insert_with(|| (r.f_s_hz, BTreeMap::new()));
        if let Some(s) = r.sed {
            entry.1.entry(r.task_id).or_default().push(s);
        }
    }
    let mut freqs: Vec<_> = by_freq.into_values().collect();
    freqs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (f, tasks) in freqs {
        let n = tasks.values().map(Vec::len).max().unwrap_or(0);
        let means: Vec<String> = tasks
            .iter()
            .map(|(t, v)| format!("task{t}={:.4e}", v.iter().sum::<f64>() / v.len() as f64))
            .collect();
        println!("f_s={f} Hz n={n} mean SED {}", means.join(" "));
    }
}
