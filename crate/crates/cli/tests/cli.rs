use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn earload(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earload"))
        .args(args)
        .output()
        .expect("run earload")
}

fn ok(args: &[&str]) -> String {
    let out = earload(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn wav_count(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "wav")
        })
        .count()
}

/// One short session, a noise-free ear and a 19-member cohort, shared by the tests.
struct Pipeline {
    _tmp: TempDir,
    root: PathBuf,
}

impl Pipeline {
    fn session(&self) -> PathBuf {
        self.root.join("session")
    }
    fn ear(&self) -> PathBuf {
        self.root.join("ear")
    }
    fn cohort(&self) -> PathBuf {
        self.root.join("cohort")
    }
    fn cohort_results(&self) -> PathBuf {
        self.root.join("results").join("cohort.csv")
    }
}

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let root = tmp.path().to_path_buf();
        let session = root.join("session");
        ok(&["synth", "--out", p(&session), "--duration", "1.5"]);
        ok(&[
            "simulate",
            "--session",
            p(&session),
            "--out",
            p(&root.join("ear")),
            "--noise-dbfs",
            "off",
        ]);
        ok(&[
            "simulate",
            "--session",
            p(&session),
            "--out",
            p(&root.join("cohort")),
            "--cohort",
            "19",
            "--seed",
            "7",
        ]);
        ok(&[
            "extract",
            "--session",
            p(&session),
            "--recordings",
            p(&root.join("cohort")),
            "--out",
            p(&root.join("results").join("cohort.csv")),
        ]);
        Pipeline { _tmp: tmp, root }
    })
}

#[test]
fn synth_writes_twelve_segments_and_manifest() {
    let pl = pipeline();
    assert_eq!(wav_count(&pl.session()), 12);
    assert!(pl.session().join("manifest.json").is_file());
    assert!(pl.session().join("config.toml").is_file());
}

#[test]
fn synth_single_frequency_writes_four_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let stdout = ok(&[
        "synth",
        "--out",
        p(&out),
        "--frequencies",
        "3000",
        "--duration",
        "0.5",
    ]);
    assert_eq!(wav_count(&out), 4);
    assert!(stdout.contains("manifest.json"));
}

#[test]
fn synth_above_nyquist_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let r = earload(&[
        "synth",
        "--out",
        p(&out),
        "--frequencies",
        "30000",
        "--rate",
        "48000",
    ]);
    assert_eq!(code(&r), 2);
    assert!(
        stderr(&r).contains("frequency exceeds Nyquist"),
        "{}",
        stderr(&r)
    );
    assert!(!out.exists(), "nothing may be written on a config error");
}

#[test]
fn synth_missing_clip_names_the_file() {
    let tmp = TempDir::new().unwrap();
    let r = earload(&[
        "synth",
        "--out",
        p(&tmp.path().join("s")),
        "--clips",
        p(&tmp.path().join("no_clips")),
    ]);
    assert_eq!(code(&r), 3);
    assert!(stderr(&r).contains("nature_chirps.wav"), "{}", stderr(&r));
}

#[test]
fn synth_is_deterministic_and_config_echo_reproduces_it() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    ok(&[
        "synth",
        "--out",
        p(&a),
        "--frequencies",
        "2000",
        "--duration",
        "0.5",
        "--seed",
        "9",
    ]);
    let b = tmp.path().join("b");
    ok(&[
        "--config",
        p(&a.join("config.toml")),
        "synth",
        "--out",
        p(&b),
    ]);
    for f in ["manifest.json", "t1_f2000.wav", "t4_f2000.wav"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let echo_a = std::fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(echo_a.contains("root = 9"));
}

#[test]
fn bad_config_file_is_exit_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[session]\nsample_rate = \"fast\"\n").unwrap();
    let r = earload(&[
        "--config",
        p(&cfg),
        "synth",
        "--out",
        p(&tmp.path().join("s")),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn simulate_missing_manifest_is_exit_three() {
    let tmp = TempDir::new().unwrap();
    let r = earload(&[
        "simulate",
        "--session",
        p(tmp.path()),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&r), 3);
    assert!(stderr(&r).contains("manifest.json"));
}

#[test]
fn simulate_malformed_manifest_reports_json_path() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("manifest.json"),
        r#"{"schema_version":1,"participant_id":"x","sample_rate":"fast","probe_amplitude":0.1,"notch_width_hz":200,"segments":[]}"#,
    )
    .unwrap();
    let r = earload(&[
        "simulate",
        "--session",
        p(tmp.path()),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&r), 4);
    assert!(stderr(&r).contains("$.sample_rate"), "{}", stderr(&r));
}

#[test]
fn simulate_artificial_uses_zero_gains() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    ok(&[
        "simulate",
        "--session",
        p(&pl.session()),
        "--out",
        p(tmp.path()),
        "--artificial",
    ]);
    let gt: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("ground_truth.json")).unwrap(),
    )
    .unwrap();
    let gains = gt["model"]["oae_gain_per_load"].as_object().unwrap();
    assert_eq!(gains.len(), 4);
    assert!(gains.values().all(|g| g.as_f64() == Some(0.0)));
    for seg in gt["segments"].as_array().unwrap() {
        assert_eq!(seg["oae_amplitude"].as_f64(), Some(0.0));
    }
}

#[test]
fn cohort_is_reproducible() {
    let pl = pipeline();
    let dirs: Vec<_> = std::fs::read_dir(pl.cohort())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .collect();
    assert_eq!(dirs.len(), 19);
    let tmp = TempDir::new().unwrap();
    ok(&[
        "simulate",
        "--session",
        p(&pl.session()),
        "--out",
        p(tmp.path()),
        "--cohort",
        "19",
        "--seed",
        "7",
    ]);
    for f in [
        "cohort.json",
        "participants.csv",
        "behavior.csv",
        "P05/t3_f2000.wav",
        "P19/ground_truth.json",
    ] {
        assert_eq!(
            std::fs::read(pl.cohort().join(f)).unwrap(),
            std::fs::read(tmp.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

/// Closed-form SED for a zero-phase emission on a unit-reflectance ear:
/// `A^2 |(1 + g_i)^2 - (1 + g_1)^2|` with `A` the delivered probe amplitude.
#[test]
fn extract_noise_free_matches_closed_form() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("r.csv");
    let stdout = ok(&[
        "extract",
        "--session",
        p(&pl.session()),
        "--recordings",
        p(&pl.ear()),
        "--out",
        p(&csv),
        "--verify",
    ]);
    assert!(stdout.contains("max relative SED error"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("f_s=")).count(), 3);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(pl.session().join("manifest.json")).unwrap())
            .unwrap();
    let amp = manifest["probe_amplitude"].as_f64().unwrap();
    let gains = [0.05, 0.08, 0.12, 0.18];
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut checked = 0;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[5].is_empty() {
            continue;
        }
        let task: usize = cols[1].parse().unwrap();
        let f: f64 = cols[2].parse().unwrap();
        let sed: f64 = cols[5].parse().unwrap();
        let gain_of = |t: u64| {
            let seg = manifest["segments"]
                .as_array()
                .unwrap()
                .iter()
                .find(|s| s["task_id"].as_u64() == Some(t) && s["f_s_hz"].as_f64() == Some(f))
                .unwrap();
            10f64.powf(seg["norm_gain_db"].as_f64().unwrap() / 20.0)
        };
        let a_i = amp * gain_of(task as u64);
        let a_1 = amp * gain_of(1);
        let want =
            ((a_i * (1.0 + gains[task - 1])).powi(2) - (a_1 * (1.0 + gains[0])).powi(2)).abs();
        assert!(
            (sed - want).abs() / want < 1e-3,
            "task {task} {f} Hz: {sed} vs {want}"
        );
        checked += 1;
    }
    assert_eq!(checked, 9);
}

#[test]
fn extract_is_byte_identical_across_runs() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    let again = tmp.path().join("again.csv");
    ok(&[
        "extract",
        "--session",
        p(&pl.session()),
        "--recordings",
        p(&pl.cohort()),
        "--out",
        p(&again),
    ]);
    assert_eq!(
        std::fs::read(&again).unwrap(),
        std::fs::read(pl.cohort_results()).unwrap()
    );
}

#[test]
fn extract_missing_baseline_is_exit_three() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    for e in std::fs::read_dir(pl.ear()).unwrap() {
        let path = e.unwrap().path();
        std::fs::copy(&path, tmp.path().join(path.file_name().unwrap())).unwrap();
    }
    std::fs::remove_file(tmp.path().join("t1_f2000.wav")).unwrap();
    let r = earload(&[
        "extract",
        "--session",
        p(&pl.session()),
        "--recordings",
        p(tmp.path()),
        "--out",
        p(&tmp.path().join("r.csv")),
    ]);
    assert_eq!(code(&r), 3);
    assert!(stderr(&r).contains("baseline"), "{}", stderr(&r));
    assert!(!tmp.path().join("r.csv").exists());
}

#[test]
fn extract_verify_fails_on_wrong_ground_truth() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    let r = earload(&[
        "extract",
        "--session",
        p(&pl.session()),
        "--recordings",
        p(&pl.ear()),
        "--out",
        p(&tmp.path().join("r.csv")),
        "--verify",
        p(&pl.cohort().join("P01").join("ground_truth.json")),
    ]);
    assert_eq!(code(&r), 5);
}

#[test]
fn analyze_monotone_cohort_is_significant() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    let stdout = ok(&[
        "analyze",
        "--results",
        p(&pl.cohort_results()),
        "--participants",
        p(&pl.cohort().join("participants.csv")),
        "--behavior",
        p(&pl.cohort().join("behavior.csv")),
        "--out",
        p(tmp.path()),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema_version"].as_u64(), Some(1));
    let pooled = report["load_effect"]
        .as_array()
        .unwrap()
        .iter()
        .find(|l| l["f_s_hz"].is_null())
        .unwrap();
    // All 19 differences positive: one-sided exact p = 2^-19.
    assert_eq!(pooled["p_value"].as_f64(), Some(0.5f64.powi(19)));
    assert!(stdout.contains("load effect pooled"));
    assert!(tmp
        .path()
        .join("plots")
        .join("sed_vs_task_f3000.tsv")
        .is_file());
    assert!(tmp.path().join("config.toml").is_file());

    let r = earload(&[
        "analyze",
        "--results",
        p(&pl.cohort_results()),
        "--participants",
        p(&pl.cohort().join("participants.csv")),
        "--out",
        p(&tmp.path().join("null")),
        "--expect-null",
    ]);
    assert_eq!(code(&r), 5);
    assert!(stderr(&r).contains("expected no load effect"));
}

#[test]
fn analyze_empty_participants_is_exit_four() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("participants.csv");
    std::fs::write(&csv, "participant_id,gender,age\n").unwrap();
    let r = earload(&[
        "analyze",
        "--results",
        p(&pl.cohort_results()),
        "--participants",
        p(&csv),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&r), 4);
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn analyze_schema_violation_names_the_row() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("r.csv");
    let text = std::fs::read_to_string(pl.cohort_results()).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[2] = lines[2].replacen(",1,", ",9,", 1);
    std::fs::write(&csv, lines.join("\n")).unwrap();
    let r = earload(&[
        "analyze",
        "--results",
        p(&csv),
        "--participants",
        p(&pl.cohort().join("participants.csv")),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&r), 4);
    assert!(stderr(&r).contains("row 3"), "{}", stderr(&r));
}

#[test]
fn eeg_one_channel_is_exit_two() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("eeg.csv"),
        "sample_index,Cz\n0,1\n1,2\n2,3\n",
    )
    .unwrap();
    std::fs::write(
        tmp.path().join("markers.json"),
        r#"{"schema_version":1,"sample_rate":250,"markers":[{"label":"a","task_id":1,"start_sample":0,"end_sample":3}]}"#,
    )
    .unwrap();
    let r = earload(&[
        "eeg",
        "--input",
        p(&tmp.path().join("eeg.csv")),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("re-reference"));
}

#[test]
fn eeg_synthetic_manual_rejection_is_logged_and_power_rises() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "eeg",
        "--synthetic",
        "--out",
        p(tmp.path()),
        "--reject",
        "0,3",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eeg_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["rejected_components"], serde_json::json!([0, 3]));
    assert_eq!(report["units"], "kuV^2");
    let totals: Vec<f64> = report["tasks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["total"]["mean"].as_f64().unwrap())
        .collect();
    assert_eq!(totals.len(), 4);
    assert!(totals.windows(2).all(|w| w[1] > w[0]), "{totals:?}");

    let summary = ok(&["report", "--eeg", p(&tmp.path().join("eeg_report.json"))]);
    assert!(summary.contains("rejected ICA components: [0, 3]"));
}

#[test]
fn eeg_markers_must_match_session_tasks() {
    let pl = pipeline();
    let tmp = TempDir::new().unwrap();
    let rows: String = (0..1000)
        .map(|i| format!("{i},{},{}\n", (i as f64).sin(), (i as f64 * 0.3).cos()))
        .collect();
    std::fs::write(
        tmp.path().join("eeg.csv"),
        format!("sample_index,Fz,Cz\n{rows}"),
    )
    .unwrap();
    std::fs::write(
        tmp.path().join("markers.json"),
        r#"{"schema_version":1,"sample_rate":250,"markers":[{"label":"a","task_id":1,"start_sample":0,"end_sample":600}]}"#,
    )
    .unwrap();
    let r = earload(&[
        "eeg",
        "--input",
        p(&tmp.path().join("eeg.csv")),
        "--out",
        p(&tmp.path().join("o")),
        "--manifest",
        p(&pl.session().join("manifest.json")),
    ]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
}

#[test]
fn help_documents_numerical_flags() {
    let cases: [(&str, &[&str]); 4] = [
        (
            "synth",
            &[
                "--frequencies",
                "--rate",
                "--amplitude",
                "--notch-width",
                "--duration",
            ],
        ),
        (
            "simulate",
            &[
                "--gains",
                "--noise-dbfs",
                "--reflectance",
                "--artificial",
                "--cohort",
            ],
        ),
        ("extract", &["--averaging", "--align", "--verify"]),
        (
            "analyze",
            &[
                "--ci",
                "--test",
                "--no-baseline-zero",
                "--max-normalize",
                "--alpha",
            ],
        ),
    ];
    for (cmd, flags) in cases {
        let help = ok(&[cmd, "--help"]);
        for f in flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
        assert!(help.contains("--seed"));
    }
}
