use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use earload_core::analysis::CiMethod;
use earload_core::eeg::{
    eeg_report, fastica, preprocess, read_eeg_csv, reject_components, segment_and_power,
    synthetic_eeg, IcaConfig, PowerConfig, PreprocessConfig, RejectPolicy, SyntheticEeg,
    MARKERS_FILE,
};
use earload_core::stimulus::SessionManifest;

use super::require_file;
use crate::config::{derive_seed, RunConfig};
use crate::exit::{fail, SCHEMA, USAGE};

pub const EEG_REPORT_FILE: &str = "eeg_report.json";
const ICA_SEED_STREAM: u64 = 5;
const SYNTH_SEED_STREAM: u64 = 6;

/// Component rejection choice on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum Reject {
    None,
    Auto,
    Manual(Vec<usize>),
}

impl FromStr for Reject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" | "" => Ok(Reject::None),
            "auto" => Ok(Reject::Auto),
            list => list
                .split(',')
                .map(|i| {
                    i.trim()
                        .parse::<usize>()
                        .map_err(|e| format!("bad component index {i:?}: {e}"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Reject::Manual),
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// EEG CSV (sample_index plus one column per channel, µV)
    #[arg(long, required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,

    /// Markers JSON; defaults to markers.json next to the input
    #[arg(long)]
    pub markers: Option<PathBuf>,

    /// Use a generated 16-channel recording with task-scaled amplitude
    #[arg(long, conflicts_with = "input")]
    pub synthetic: bool,

    /// Blink-like artifacts per segment in the synthetic recording
    #[arg(long, default_value_t = 0, requires = "synthetic")]
    pub blinks: usize,

    /// Output directory for eeg_report.json
    #[arg(long)]
    pub out: PathBuf,

    /// ICA components to remove: "none", "auto" (kurtosis / frontal low-frequency heuristic) or a list like 0,3
    #[arg(long, default_value = "none")]
    pub reject: Reject,

    /// ICA components to estimate (default: channels - 1 with average reference)
    #[arg(long)]
    pub components: Option<usize>,

    /// Skip the common-average re-reference
    #[arg(long)]
    pub no_car: bool,

    /// Mains notch frequency in Hz
    #[arg(long)]
    pub notch: Option<f64>,

    /// Session manifest whose tasks the markers must cover
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(mut cfg: RunConfig, args: Args) -> anyhow::Result<()> {
    if let Some(k) = args.components {
        cfg.eeg.components = Some(k);
    }
    if args.no_car {
        cfg.eeg.common_average = false;
    }
    if let Some(n) = args.notch {
        cfg.eeg.notch_hz = n;
    }
    cfg.paths.results_dir = Some(args.out.clone());
    cfg.validate()?;

    let mut notes = Vec::new();
    let raw = if args.synthetic {
        let seed = derive_seed(cfg.seeds.root, SYNTH_SEED_STREAM);
        notes.push(format!("synthetic input, seed {seed}"));
        synthetic_eeg(&SyntheticEeg {
            blinks_per_segment: args.blinks,
            seed,
            ..SyntheticEeg::default()
        })?
    } else {
        let input = args.input.as_ref().expect("required by clap");
        require_file(input, "EEG input")?;
        let markers = args.markers.clone().unwrap_or_else(|| {
            input
                .parent()
                .unwrap_or(std::path::Path::new("."))
                .join(MARKERS_FILE)
        });
        require_file(&markers, "markers")?;
        read_eeg_csv(input, &markers)?
    };
    if cfg.eeg.common_average && raw.n_channels() < 2 {
        return Err(fail(
            USAGE,
            format!(
                "{} channel input: common-average re-reference impossible",
                raw.n_channels()
            ),
        ));
    }
    if raw.markers.is_empty() {
        return Err(fail(SCHEMA, "no markers: nothing to segment"));
    }
    if let Some(path) = &args.manifest {
        require_file(path, "manifest")?;
        check_markers(&raw.markers, &SessionManifest::load(path)?)?;
    }

    let pre = preprocess(
        &raw,
        &PreprocessConfig {
            notch_hz: (cfg.eeg.notch_hz > 0.0).then_some(cfg.eeg.notch_hz),
            common_average: cfg.eeg.common_average,
            ..PreprocessConfig::default()
        },
    )?;
    let rank = if cfg.eeg.common_average {
        raw.n_channels() - 1
    } else {
        raw.n_channels()
    };
    let k = cfg.eeg.components.unwrap_or(rank);
    if k == 0 || k > rank {
        return Err(fail(
            USAGE,
            format!(
                "--components must be in 1..={rank} for {} channels",
                raw.n_channels()
            ),
        ));
    }
    let policy = match &args.reject {
        Reject::None => RejectPolicy::none(),
        Reject::Auto => RejectPolicy::heuristic(),
        Reject::Manual(idx) => RejectPolicy::Manual {
            indices: idx.clone(),
        },
    };
    let cleaned = if matches!(args.reject, Reject::None) {
        notes.push("ICA skipped: no rejection requested".into());
        earload_core::eeg::Rejection {
            recording: pre,
            rejected: Vec::new(),
            reasons: Vec::new(),
        }
    } else {
        let ica = IcaConfig {
            max_iter: cfg.eeg.max_iter,
            ..IcaConfig::new(k, derive_seed(cfg.seeds.root, ICA_SEED_STREAM))
        };
        let decomp = fastica(&pre, &ica)?;
        if !decomp.converged {
            let msg = format!("ICA did not converge in {} iterations", decomp.iterations);
            log::warn!("{msg}");
            notes.push(msg);
        }
        reject_components(&decomp, &policy)?
    };

    let segments = segment_and_power(&cleaned.recording, &raw.markers, &PowerConfig::default())?;
    let mut report = eeg_report(&segments, CiMethod::StudentT)?;
    report.rejected_components = cleaned.rejected;
    report.rejection_reasons = cleaned.reasons;
    report.notes.extend(notes);

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(EEG_REPORT_FILE);
    std::fs::write(&path, report.to_json())
        .with_context(|| format!("writing {}", path.display()))?;
    cfg.echo(&args.out)?;
    for t in &report.tasks {
        println!(
            "task {}: total {:.4} kuV^2 (delta {:.4}, theta {:.4}, alpha {:.4}, beta {:.4})",
            t.task_id, t.total.mean, t.delta.mean, t.theta.mean, t.alpha.mean, t.beta.mean
        );
    }
    if !report.rejected_components.is_empty() {
        println!("rejected components: {:?}", report.rejected_components);
    }
    Ok(())
}

fn check_markers(
    markers: &[earload_core::eeg::Marker],
    manifest: &SessionManifest,
) -> anyhow::Result<()> {
    let session: BTreeSet<u8> = manifest.segments.iter().map(|s| s.task_id).collect();
    let marked: BTreeSet<u8> = markers.iter().map(|m| m.task_id).collect();
    if session != marked {
        return Err(fail(
            SCHEMA,
            format!("marker tasks {marked:?} do not match session tasks {session:?}"),
        ));
    }
    Ok(())
}
