use std::path::PathBuf;

use earload_core::analysis::{
    analyze, read_behavior_csv, read_participants_csv, write_report, AnalysisOptions, CiMethod,
    SensitivityOptions, TestMethod,
};
use earload_core::oae::read_results_csv;

use super::require_file;
use crate::config::{derive_seed, CiKind, RunConfig, TestKind};
use crate::exit::{fail, PROCESSING};

const BOOTSTRAP_SEED_STREAM: u64 = 3;
const PERMUTATION_SEED_STREAM: u64 = 4;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Results CSV from `extract`
    #[arg(long)]
    pub results: PathBuf,

    /// participants.csv (participant_id, gender, age)
    #[arg(long)]
    pub participants: PathBuf,

    /// behavior.csv (participant_id, task_id, response_time_min, correct)
    #[arg(long)]
    pub behavior: Option<PathBuf>,

    /// Output directory for report.json and plot data
    #[arg(long)]
    pub out: PathBuf,

    /// Confidence interval method for group means
    #[arg(long, value_enum)]
    pub ci: Option<CiKind>,

    /// Load-effect test: Wilcoxon on delta4 - delta2, or sign-flip permutation of slopes
    #[arg(long, value_enum)]
    pub test: Option<TestKind>,

    /// Leave out the (task 1, 0) point from the sensitivity regression
    #[arg(long)]
    pub no_baseline_zero: bool,

    /// Divide each participant's SEDs by their maximum before regression
    #[arg(long)]
    pub max_normalize: bool,

    /// Bootstrap resamples for --ci bootstrap
    #[arg(long)]
    pub resamples: Option<usize>,

    /// Permutations for --test permutation
    #[arg(long)]
    pub permutations: Option<usize>,

    /// Fail (exit 5) if the pooled load effect is significant at --alpha
    #[arg(long)]
    pub expect_null: bool,

    /// Significance level for --expect-null
    #[arg(long)]
    pub alpha: Option<f64>,
}

pub fn options(cfg: &RunConfig) -> AnalysisOptions {
    let a = &cfg.analysis;
    AnalysisOptions {
        ci: match a.ci {
            CiKind::T => CiMethod::StudentT,
            CiKind::Bootstrap => CiMethod::Bootstrap {
                resamples: a.bootstrap_resamples,
                seed: derive_seed(cfg.seeds.root, BOOTSTRAP_SEED_STREAM),
            },
        },
        test: match a.test {
            TestKind::Wilcoxon => TestMethod::Wilcoxon,
            TestKind::Permutation => TestMethod::Permutation {
                permutations: a.permutations,
                seed: derive_seed(cfg.seeds.root, PERMUTATION_SEED_STREAM),
            },
        },
        sensitivity: SensitivityOptions {
            baseline_zero: a.baseline_zero,
            max_normalize: a.max_normalize,
        },
    }
}

pub fn run(mut cfg: RunConfig, args: Args) -> anyhow::Result<()> {
    let a = &mut cfg.analysis;
    if let Some(ci) = args.ci {
        a.ci = ci;
    }
    if let Some(t) = args.test {
        a.test = t;
    }
    if args.no_baseline_zero {
        a.baseline_zero = false;
    }
    if args.max_normalize {
        a.max_normalize = true;
    }
    if let Some(r) = args.resamples {
        a.bootstrap_resamples = r;
    }
    if let Some(p) = args.permutations {
        a.permutations = p;
    }
    if let Some(alpha) = args.alpha {
        a.alpha = alpha;
    }
    cfg.paths.results_dir = Some(args.out.clone());
    cfg.validate()?;

    require_file(&args.results, "results")?;
    require_file(&args.participants, "participants table")?;
    let rows = read_results_csv(&args.results)?;
    let meta = read_participants_csv(&args.participants)?;
    let behavior = match &args.behavior {
        Some(p) => {
            require_file(p, "behavior table")?;
            read_behavior_csv(p)?
        }
        None => Vec::new(),
    };

    let report = analyze(&rows, &meta, &behavior, options(&cfg))?;
    write_report(&args.out, &report)?;
    cfg.echo(&args.out)?;

    for w in &report.warnings {
        log::warn!("{w}");
    }
    for l in &report.load_effect {
        let label = l.f_s_hz.map_or("pooled".to_string(), |f| format!("{f} Hz"));
        println!(
            "load effect {label}: n={} p={:.4e}{}",
            l.result.n_participants,
            l.result.p_value,
            if l.result.undefined {
                " (undefined)"
            } else {
                ""
            }
        );
    }
    for s in &report.peak_share {
        println!(
            "peak at {} Hz: {}/{}",
            s.f_s_hz, s.count, report.n_participants
        );
    }
    if args.expect_null {
        let pooled = report
            .pooled_load_effect()
            .ok_or_else(|| fail(PROCESSING, "no pooled load-effect result"))?;
        if !pooled.undefined && pooled.p_value < cfg.analysis.alpha {
            return Err(fail(
                PROCESSING,
                format!(
                    "expected no load effect, but p = {:.4e} < alpha = {}",
                    pooled.p_value, cfg.analysis.alpha
                ),
            ));
        }
    }
    Ok(())
}
