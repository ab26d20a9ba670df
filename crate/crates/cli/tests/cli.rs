use std::path::Path;
use std::process::Command;

use psychfit_cli::config::{ConfigError, PipelineConfig, RegressionConfig};
use psychfit_cli::forms::{score_submission, AnswerKey};
use psychfit_cli::pipeline::{analyze, ctt_stage, run_pipeline, Inputs, PipelineError};
use psychfit_cli::report::{evaluate_criteria, ValidationReport};
use psychfit_core::ingest::{BankItem, Dimension, ItemBank, ResponseMatrix};
use psychfit_core::irt::{ItemParams, ModelKind};
use psychfit_core::regression::BreuschPaganVariant;
use psychfit_core::reliability::ReliabilityReport;
use psychfit_core::simulate::{simulate_regression, simulate_responses, SimSpec};

const BIN: &str = env!("CARGO_BIN_EXE_psychfit");

fn psychfit(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exited normally"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_sim(dir: &Path, n_items: usize, n: usize, seed: u64) -> std::path::PathBuf {
    let data = simulate_responses(&SimSpec::two_pl_ranges(n_items, n, (0.5, 1.5), (-1.5, 1.5), seed));
    let path = dir.join("responses.csv");
    std::fs::write(&path, data.responses.to_csv()).unwrap();
    path
}

fn bank(j: usize) -> ItemBank {
    ItemBank::new(
        (1..=j)
            .map(|i| BankItem {
                id: format!("q{i}"),
                dimension: Dimension::Ethics,
                stem: format!("Stem {i}"),
                options: vec!["alpha".into(), "beta".into(), "gamma".into(), "delta".into()],
                key: ["alpha", "beta", "gamma", "delta"][i % 4].into(),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn help_usage_and_errors_map_to_exit_codes() {
    assert_eq!(psychfit(&["--help"]).0, 0);
    assert_eq!(psychfit(&["--version"]).0, 0);
    assert_eq!(psychfit(&["no-such-command"]).0, 21);
    assert_eq!(psychfit(&["fit", "--responses", "x.csv", "--model", "4pl"]).0, 21);
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.csv");
    let (code, _, err) = psychfit(&["ctt", "--responses", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 20);
    assert!(err.contains("ingest stage failed") && err.contains("missing.csv"), "{err}");
}

#[test]
fn report_exit_code_follows_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let responses = write_sim(tmp.path(), 12, 1500, 5);
    let strict = tmp.path().join("strict");
    let (code, out, _) = psychfit(&[
        "report",
        "--responses",
        responses.to_str().unwrap(),
        "--out",
        strict.to_str().unwrap(),
        "--models",
        "rasch,2pl",
    ]);
    let report: ValidationReport = serde_json::from_str(&std::fs::read_to_string(strict.join("report.json")).unwrap()).unwrap();
    assert_eq!(code, if report.all_pass { 0 } else { 10 }, "{out}");
    assert_eq!(out.matches("PASS ").count() + out.matches("FAIL ").count(), report.criteria.len());

    // Thresholds nothing can meet force exit code 10.
    let cfg = PipelineConfig {
        responses: responses.clone(),
        models: vec![ModelKind::TwoPl],
        output_dir: tmp.path().join("impossible"),
        thresholds: psychfit_cli::Thresholds { reliability: 1.5, ..Default::default() },
        ..Default::default()
    };
    let cfg_path = tmp.path().join("config.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let (code, out, _) = psychfit(&["report", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code, 10);
    assert!(out.contains("FAIL reliability.alpha"), "{out}");

    // Lenient thresholds pass everything.
    let mut lenient = cfg.clone();
    lenient.output_dir = tmp.path().join("lenient");
    lenient.thresholds = psychfit_cli::Thresholds {
        reliability: 0.01,
        q3: 0.99,
        item_fit_alpha: 1e-12,
        ..Default::default()
    };
    lenient.thresholds.unidimensionality.chi2_over_df = 1e6;
    std::fs::write(&cfg_path, serde_json::to_string(&lenient).unwrap()).unwrap();
    let (code, out, _) = psychfit(&["report", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn report_verdicts_rederive_from_json() {
    let tmp = tempfile::tempdir().unwrap();
    let responses = write_sim(tmp.path(), 10, 800, 21);
    let scores = simulate_regression(800, &[("literacy", 0.22), ("domain", 0.32)], 0.8, 4, "score");
    let scores_path = tmp.path().join("scores.csv");
    std::fs::write(&scores_path, scores.to_csv()).unwrap();
    let cfg = PipelineConfig {
        responses,
        scores: Some(scores_path),
        regression: Some(RegressionConfig {
            dv: "score".into(),
            ivs: vec!["literacy".into(), "domain".into()],
            interactions: true,
            raw_dv: false,
            breusch_pagan: BreuschPaganVariant::Koenker,
        }),
        output_dir: tmp.path().join("out"),
        ..Default::default()
    };
    let report = run_pipeline(&cfg).unwrap();
    let text = std::fs::read_to_string(cfg.output_dir.join("report.json")).unwrap();
    let parsed: ValidationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(evaluate_criteria(&parsed), report.criteria);
    assert_eq!(parsed.criteria, report.criteria);
    assert_eq!(report.criteria.len(), 4 + 4 + 1 + 2 + 4);
    let reg = report.regression.as_ref().unwrap();
    assert_eq!(reg.interactions.as_ref().unwrap().f_test.df_num, 1);
    for f in ["regression.json", "pred_vs_obs.svg", "tif.svg", "icc_3pl.svg", "itemfit.csv", "compare.json"] {
        assert!(cfg.output_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn tif_plot_marks_reported_peak() {
    let tmp = tempfile::tempdir().unwrap();
    let responses = write_sim(tmp.path(), 10, 1000, 8);
    let out = tmp.path().join("rel");
    let (code, _, err) = psychfit(&[
        "reliability",
        "--responses",
        responses.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--models",
        "2pl",
    ]);
    assert!(code == 0 || code == 10, "{err}");
    let rel: ReliabilityReport = serde_json::from_str(&std::fs::read_to_string(out.join("reliability.json")).unwrap()).unwrap();
    let svg = std::fs::read_to_string(out.join("tif.svg")).unwrap();
    let marker = svg.lines().find(|l| l.contains("class=\"peak\"")).unwrap();
    let theta: f64 = marker.split("data-theta=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
    assert_eq!(theta, rel.tif_peak_theta);
    assert_eq!(rel.information.points.len(), 161);
}

#[test]
fn planted_low_discrimination_items_are_excluded() {
    let mut items: Vec<ItemParams> = (0..15).map(|k| ItemParams::two_pl(0.9 + 0.07 * k as f64, -1.4 + 0.2 * k as f64)).collect();
    let planted = [2, 7, 11, 16, 19];
    for &p in &planted {
        items.insert(p, ItemParams::two_pl(0.0, 0.0));
    }
    let data = simulate_responses(&SimSpec::fixed(items, 2000, 77));
    let cfg = PipelineConfig::default();
    let (ctt, filtered) = ctt_stage(&data.responses, &cfg).unwrap();
    let expected: Vec<String> = planted.iter().map(|p| format!("i{:02}", p + 1)).collect();
    assert_eq!(ctt.selection.excluded, expected);
    assert_eq!(filtered.n_items(), 15);
    assert!(filtered.item_ids().iter().all(|id| !expected.contains(id)));
}

#[test]
fn empty_model_list_is_rejected() {
    let m = ResponseMatrix::from_rows(&[vec![0, 1, 1], vec![1, 1, 0], vec![1, 0, 1]]).unwrap();
    let cfg = PipelineConfig { models: vec![], ..Default::default() };
    let inputs = Inputs { responses: m, scores: None };
    assert!(matches!(analyze(&inputs, &cfg), Err(PipelineError::Config(ConfigError::NoModels))));
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Config(ConfigError::NoModels))));
}

#[test]
fn forms_are_deterministic_and_keys_rescore() {
    let tmp = tempfile::tempdir().unwrap();
    let bank_path = tmp.path().join("bank.json");
    std::fs::write(&bank_path, bank(20).to_json()).unwrap();
    let run = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        let (code, _, err) = psychfit(&["forms", "--bank", bank_path.to_str().unwrap(), "--n-forms", "3", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        out
    };
    let (a, b, c) = (run("a", "42"), run("b", "42"), run("c", "43"));
    for f in 1..=3 {
        for name in [format!("form_{f:02}.json"), format!("form_{f:02}_key.json")] {
            let x = std::fs::read(a.join(&name)).unwrap();
            assert_eq!(x, std::fs::read(b.join(&name)).unwrap(), "{name}");
            assert_ne!(x, std::fs::read(c.join(&name)).unwrap(), "{name}");
        }
        let key: AnswerKey = serde_json::from_str(&std::fs::read_to_string(a.join(format!("form_{f:02}_key.json"))).unwrap()).unwrap();
        let perfect: Vec<usize> = key.entries.iter().map(|e| e.key_index).collect();
        assert_eq!(score_submission(&key, &perfect).unwrap(), 20);
    }
    assert_ne!(std::fs::read(a.join("form_01.json")).unwrap(), std::fs::read(a.join("form_02.json")).unwrap());
}

#[test]
fn raw_responses_are_scored_against_the_bank() {
    let tmp = tempfile::tempdir().unwrap();
    let b = bank(4);
    let bank_path = tmp.path().join("bank.json");
    std::fs::write(&bank_path, b.to_json()).unwrap();
    let csv = "id,q1,q2,q3,q4\ns1,beta,gamma,delta,alpha\ns2,alpha,alpha,alpha,alpha\ns3,beta,beta,delta,gamma\ns4,alpha,gamma,alpha,alpha\n";
    let responses = tmp.path().join("raw.csv");
    std::fs::write(&responses, csv).unwrap();
    let out = tmp.path().join("ctt");
    let (code, _, err) = psychfit(&[
        "ctt",
        "--responses",
        responses.to_str().unwrap(),
        "--bank",
        bank_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let stats = std::fs::read_to_string(out.join("itemstats.csv")).unwrap();
    let difficulty: Vec<&str> = stats.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(difficulty, ["0.5", "0.5", "0.5", "0.75"]);
}

#[test]
fn simulate_and_regress_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SimSpec::two_pl_ranges(6, 50, (1.0, 1.0), (0.0, 0.0), 0);
    let spec_path = tmp.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        assert_eq!(psychfit(&["simulate", "--spec", spec_path.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]).0, 0);
        std::fs::read(out.join("responses.csv")).unwrap()
    };
    assert_eq!(run("s1"), run("s2"));
    assert!(tmp.path().join("s1/truth.json").exists());

    let scores = simulate_regression(83, &[("literacy", 0.22), ("self_report", -0.159), ("baseline", 0.098), ("domain", 0.322)], 0.8, 2, "task_score");
    let scores_path = tmp.path().join("scores.csv");
    std::fs::write(&scores_path, scores.to_csv()).unwrap();
    let out = tmp.path().join("reg");
    let (code, stdout, err) = psychfit(&[
        "regress",
        "--scores",
        scores_path.to_str().unwrap(),
        "--dv",
        "task_score",
        "--ivs",
        "literacy,self_report,baseline,domain",
        "--interactions",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(code == 0 || code == 10, "{err}");
    assert!(stdout.contains("F(4, 78)"), "{stdout}");
    let reg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("regression.json")).unwrap()).unwrap();
    assert_eq!(reg["interactions"]["f_test"]["df_num"], 11);
    assert_eq!(reg["interactions"]["f_test"]["df_den"], 67);
    assert!(out.join("pred_vs_obs.svg").exists());
}
