use std::path::PathBuf;

use anyhow::Context;
use earload_core::stimulus::fixtures::{default_tasks, fixture_clip};
use earload_core::stimulus::{build_session, SessionPlan, SessionTiming};

use super::Encoding;
use crate::config::RunConfig;
use crate::exit::{fail, MISSING_INPUT};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory for the session bundle
    #[arg(long)]
    pub out: PathBuf,

    /// Directory holding the task clips; fixture clips are generated when omitted
    #[arg(long)]
    pub clips: Option<PathBuf>,

    /// Probe frequencies in Hz, comma separated
    #[arg(long, value_delimiter = ',')]
    pub frequencies: Option<Vec<f64>>,

    /// Sample rate in Hz
    #[arg(long)]
    pub rate: Option<u32>,

    /// Probe amplitude (full scale = 1)
    #[arg(long)]
    pub amplitude: Option<f64>,

    /// Width of the band cleared around each probe, Hz
    #[arg(long)]
    pub notch_width: Option<f64>,

    /// Segment length in seconds
    #[arg(long)]
    pub duration: Option<f64>,

    /// Repetitions of every (task, frequency) segment
    #[arg(long)]
    pub repetitions: Option<usize>,

    #[arg(long)]
    pub participant: Option<String>,

    /// Sample encoding of the written WAV files
    #[arg(long, value_enum, default_value = "float32")]
    pub encoding: Encoding,
}

pub fn run(mut cfg: RunConfig, args: Args) -> anyhow::Result<()> {
    let s = &mut cfg.session;
    if let Some(f) = args.frequencies {
        s.frequencies = f;
    }
    if let Some(r) = args.rate {
        s.sample_rate = r;
    }
    if let Some(a) = args.amplitude {
        s.probe_amplitude = a;
    }
    if let Some(w) = args.notch_width {
        s.notch_width_hz = w;
    }
    if let Some(d) = args.duration {
        s.segment_duration_s = d;
    }
    if let Some(r) = args.repetitions {
        s.repetitions = r;
    }
    if let Some(p) = args.participant {
        s.participant_id = p;
    }
    cfg.paths.session_dir = Some(args.out.clone());
    cfg.validate()?;
    let plan = plan_from(&cfg)?;

    let tasks = default_tasks();
    let clip_root = match &args.clips {
        Some(dir) => {
            for clip in tasks.iter().flat_map(|t| &t.source_clips) {
                let path = dir.join(clip);
                if !path.is_file() {
                    return Err(fail(
                        MISSING_INPUT,
                        format!("missing clip: {}", path.display()),
                    ));
                }
            }
            dir.clone()
        }
        None => {
            let dir = args.out.join("clips");
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for clip in tasks.iter().flat_map(|t| &t.source_clips) {
                let name = clip.to_string_lossy();
                let audio = fixture_clip(&name, plan.sample_rate).expect("fixture clip");
                earload_core::audio::save_wav(
                    &audio,
                    dir.join(clip),
                    earload_core::audio::WavEncoding::Float32,
                )?;
            }
            dir
        }
    };

    let manifest = build_session(&plan, &clip_root, &args.out, args.encoding.into())?;
    cfg.echo(&args.out)?;
    log::info!("{} segments written", manifest.segments.len());
    println!(
        "{}",
        args.out
            .join(earload_core::stimulus::MANIFEST_FILE)
            .display()
    );
    Ok(())
}

/// Session plan for the configured timing and the fixture task list.
pub fn plan_from(cfg: &RunConfig) -> anyhow::Result<SessionPlan> {
    let s = &cfg.session;
    let timing = SessionTiming {
        sample_rate: s.sample_rate,
        frequencies: s.frequencies.clone(),
        probe_amplitude: s.probe_amplitude,
        segment_duration_s: s.segment_duration_s,
        gap_s: s.gap_s,
        repetitions: s.repetitions,
    };
    let mut plan = SessionPlan::new(s.participant_id.clone(), default_tasks(), &timing)?;
    plan.embed.notch_width_hz = s.notch_width_hz;
    plan.embed.design_width_hz = 1.6 * s.notch_width_hz;
    plan.embed.guard_hz = s.notch_width_hz / 2.0;
    plan.validate()?;
    Ok(plan)
}
