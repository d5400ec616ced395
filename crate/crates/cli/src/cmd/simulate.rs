use std::path::PathBuf;

use earload_core::cochlea::{
    load_playbacks, simulate_cohort, simulate_session, write_cohort, write_simulation, CohortSpec,
    EarModel, FrequencyProfile, GainSampler,
};
use earload_core::stimulus::SessionManifest;

use super::{load_manifest, Encoding};
use crate::config::{derive_seed, RunConfig};

const EAR_SEED_STREAM: u64 = 1;
const COHORT_SEED_STREAM: u64 = 2;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Session bundle directory (manifest.json plus playback files)
    #[arg(long)]
    pub session: PathBuf,

    /// Output directory for recordings and ground truth
    #[arg(long)]
    pub out: PathBuf,

    /// Zero-gain artificial ear: passive reflection plus noise only
    #[arg(long)]
    pub artificial: bool,

    /// Simulate a cohort of this many participants, one directory each
    #[arg(long)]
    pub cohort: Option<usize>,

    /// OAE gains for tasks 1-4, comma separated
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub gains: Option<Vec<f64>>,

    /// Recording noise floor in dBFS RMS; "off" disables noise
    #[arg(long, value_parser = parse_dbfs)]
    pub noise_dbfs: Option<f64>,

    /// Passive probe reflectance
    #[arg(long)]
    pub reflectance: Option<f64>,

    /// OAE phase offset in radians
    #[arg(long)]
    pub phase: Option<f64>,

    /// OAE group latency in milliseconds
    #[arg(long)]
    pub latency_ms: Option<f64>,

    /// Gain added to tasks 2-4 for cohort members aged 40 or over
    #[arg(long)]
    pub older_jump: Option<f64>,

    #[arg(long, value_enum, default_value = "float32")]
    pub encoding: Encoding,
}

fn parse_dbfs(s: &str) -> Result<f64, String> {
    match s.trim() {
        "off" | "none" | "-inf" => Ok(f64::NEG_INFINITY),
        v => v.parse().map_err(|e| format!("{e}")),
    }
}

fn noise(cfg: &RunConfig) -> Option<f64> {
    let n = cfg.simulation.noise_dbfs;
    n.is_finite().then_some(n)
}

pub fn run(mut cfg: RunConfig, args: Args) -> anyhow::Result<()> {
    let m = &mut cfg.simulation;
    if let Some(g) = args.gains {
        m.gains.copy_from_slice(&g);
    }
    if let Some(n) = args.noise_dbfs {
        m.noise_dbfs = n;
    }
    if let Some(r) = args.reflectance {
        m.reflectance = r;
    }
    if let Some(p) = args.phase {
        m.phase_rad = p;
    }
    if let Some(l) = args.latency_ms {
        m.latency_ms = l;
    }
    if let Some(j) = args.older_jump {
        m.older_jump = j;
    }
    cfg.paths.session_dir = Some(args.session.clone());
    cfg.validate()?;

    let manifest = load_manifest(&args.session)?;
    let playbacks = load_playbacks(&manifest, &args.session)?;
    match args.cohort {
        Some(n) => {
            let spec = cohort_spec(&cfg, &manifest, n, args.artificial);
            let cohort = simulate_cohort(&spec, derive_seed(cfg.seeds.root, COHORT_SEED_STREAM))?;
            write_cohort(
                &args.out,
                &manifest,
                &playbacks,
                &cohort,
                args.encoding.into(),
            )?;
            cfg.echo(&args.out)?;
            println!(
                "{} participants written to {}",
                cohort.members.len(),
                args.out.display()
            );
        }
        None => {
            let seed = derive_seed(cfg.seeds.root, EAR_SEED_STREAM);
            let model = if args.artificial {
                EarModel::artificial(cfg.simulation.reflectance, noise(&cfg), seed)
            } else {
                EarModel {
                    oae_phase_rad: cfg.simulation.phase_rad,
                    oae_latency_ms: cfg.simulation.latency_ms,
                    passive_reflectance: cfg.simulation.reflectance,
                    noise_floor_dbfs: noise(&cfg),
                    seed,
                    ..EarModel::with_gains(cfg.simulation.gains)
                }
            };
            let sim = simulate_session(&manifest, &playbacks, &manifest.participant_id, &model)?;
            let clipped = write_simulation(&args.out, &sim, args.encoding.into())?;
            if clipped > 0 {
                log::warn!("{clipped} samples clipped to full scale");
            }
            cfg.echo(&args.out)?;
            println!(
                "{} recordings written to {}",
                sim.recordings.len(),
                args.out.display()
            );
        }
    }
    Ok(())
}

fn cohort_spec(
    cfg: &RunConfig,
    manifest: &SessionManifest,
    n: usize,
    artificial: bool,
) -> CohortSpec {
    let sim = &cfg.simulation;
    let frequencies = manifest.frequencies();
    let mut dominant: Vec<(f64, f64)> = sim
        .dominant
        .iter()
        .copied()
        .filter(|d| frequencies.contains(&d.0))
        .collect();
    if dominant.is_empty() {
        let top = frequencies.iter().copied().fold(f64::MIN, f64::max);
        log::warn!(
            "no configured dominant frequency is in the session; all members peak at {top} Hz"
        );
        dominant = vec![(top, 1.0)];
    }
    CohortSpec {
        n_participants: n,
        gain_sampler: GainSampler {
            template: sim.gains,
            scale_min: sim.scale_min,
            scale_max: sim.scale_max,
        },
        profile: FrequencyProfile {
            frequencies,
            dominant,
            ..FrequencyProfile::default()
        },
        noise_floor_dbfs: noise(cfg),
        passive_reflectance: sim.reflectance,
        oae_phase_rad: sim.phase_rad,
        oae_latency_ms: sim.latency_ms,
        older_jump: sim.older_jump,
        artificial,
        ..CohortSpec::default()
    }
}
