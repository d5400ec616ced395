use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use earload_core::analysis::AnalysisReport;
use earload_core::eeg::EegReport;

use super::require_file;
use crate::exit::{fail, SCHEMA};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// report.json from `analyze`
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// eeg_report.json from `eeg`
    #[arg(long)]
    pub eeg: Option<PathBuf>,

    /// Write the summary here as well as to stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load<T: serde::de::DeserializeOwned>(path: &PathBuf, what: &str) -> anyhow::Result<T> {
    require_file(path, what)?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        fail(
            SCHEMA,
            format!(
                "{}: line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ),
        )
    })
}

pub fn run(args: Args) -> anyhow::Result<()> {
    if args.report.is_none() && args.eeg.is_none() {
        return Err(fail(crate::exit::USAGE, "give --report and/or --eeg"));
    }
    let mut text = String::new();
    if let Some(path) = &args.report {
        let r: AnalysisReport = load(path, "analysis report")?;
        summarize_analysis(&r, &mut text);
    }
    if let Some(path) = &args.eeg {
        let r: EegReport = load(path, "EEG report")?;
        summarize_eeg(&r, &mut text);
    }
    print!("{text}");
    if let Some(out) = &args.out {
        std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn summarize_analysis(r: &AnalysisReport, s: &mut String) {
    let _ = writeln!(s, "participants: {}", r.n_participants);
    let _ = writeln!(s, "frequencies (Hz): {:?}", r.frequencies_hz);
    for l in &r.load_effect {
        let label = l.f_s_hz.map_or("pooled".to_string(), |f| format!("{f} Hz"));
        let _ = writeln!(
            s,
            "load effect {label}: p = {:.4e} (n = {})",
            l.result.p_value, l.result.n_participants
        );
    }
    for p in &r.peak_share {
        let _ = writeln!(
            s,
            "peak sensitivity at {} Hz: {} ({:.1}%)",
            p.f_s_hz,
            p.count,
            100.0 * p.fraction
        );
    }
    for g in &r.sed_summary {
        let means: Vec<String> = g
            .tasks
            .iter()
            .map(|t| format!("{:.3e}", t.stats.mean))
            .collect();
        let _ = writeln!(
            s,
            "SED {} {} at {} Hz: {}",
            g.dimension,
            g.value,
            g.f_s_hz,
            means.join(" / ")
        );
    }
    if !r.behavior.is_empty() {
        let _ = writeln!(s, "task  response time (min)  accuracy");
        for b in &r.behavior {
            let _ = writeln!(
                s,
                "{:>4}  {:>8.2} ± {:<8.2}  {:.1}%",
                b.task_id, b.response_time.mean, b.response_time.std, b.accuracy.mean
            );
        }
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
}

fn summarize_eeg(r: &EegReport, s: &mut String) {
    let _ = writeln!(
        s,
        "EEG band power ({}): task delta theta alpha beta total",
        r.units
    );
    for t in &r.tasks {
        let _ = writeln!(
            s,
            "{:>4} {:.3} {:.3} {:.3} {:.3} {:.3}",
            t.task_id, t.delta.mean, t.theta.mean, t.alpha.mean, t.beta.mean, t.total.mean
        );
    }
    if !r.rejected_components.is_empty() {
        let _ = writeln!(s, "rejected ICA components: {:?}", r.rejected_components);
    }
}
