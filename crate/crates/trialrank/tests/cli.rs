//! End-to-end tests of the `trialrank` binary: every subcommand, the
//! stage-composition equivalence (search per view + fuse == run), and the
//! 0/2/3 exit-code contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(rel: &str) -> PathBuf {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures")).join(rel)
}

fn trialrank(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_trialrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn trialrank_lib_read(path: &Path) -> Vec<trialrank::ScoredRun> {
    trialrank::retrieval::read_trec_run(path).expect("run file parses")
}

fn expect_success(args: &[&str]) {
    let out = trialrank(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn full_stage_composition_matches_run_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();
    let corpus = path("corpus.jsonl");
    let prefix = path("mini");

    expect_success(&[
        "ingest",
        "--input",
        fixture("mini_corpus").to_str().unwrap(),
        "--output",
        &corpus,
    ]);
    expect_success(&[
        "build-index",
        "--corpus",
        &corpus,
        "--view",
        "all",
        "--out-prefix",
        &prefix,
    ]);
    for view in ["i_comb", "i_comb_star", "i_in", "i_ex", "i_main"] {
        assert!(
            dir.path().join(format!("mini.{view}.idx")).exists(),
            "index file for {view} missing"
        );
    }

    let topics = fixture("topics.tsv");
    let topics = topics.to_str().unwrap();
    let dump = path("qk.jsonl");
    expect_success(&[
        "extract-keywords",
        "--queries",
        topics,
        "--output",
        &dump,
        "--lambda",
        "0.5",
    ]);

    // stage composition: per-view keyword searches fused with TOPSIS
    for view in ["i_in", "i_ex", "i_main"] {
        expect_success(&[
            "search",
            "--index",
            &path(&format!("mini.{view}.idx")),
            "--queries",
            topics,
            "--keywords",
            &dump,
            "--k",
            "1000",
            "--tag",
            "IKR3_TT_MW_k",
            "--output",
            &path(&format!("{view}.trec")),
        ]);
    }
    let fused_path = path("fused.trec");
    expect_success(&[
        "fuse",
        "--run-in",
        &path("i_in.trec"),
        "--run-ex",
        &path("i_ex.trec"),
        "--run-main",
        &path("i_main.trec"),
        "--tag",
        "IKR3_TT_MW_k",
        "--diagnostics",
        &path("diag.jsonl"),
        "--output",
        &fused_path,
    ]);

    // the same configuration through the `run` subcommand
    let run_out = path("r3.trec");
    expect_success(&[
        "run",
        "--config",
        fixture("configs/r3.cfg").to_str().unwrap(),
        "--index-prefix",
        &prefix,
        "--queries",
        topics,
        "--output",
        &run_out,
    ]);
    // run files carry 6-decimal scores, so the composed path fuses rounded
    // BM25 inputs: require identical rankings and near-identical closeness
    let composed = trialrank_lib_read(Path::new(&fused_path));
    let direct = trialrank_lib_read(Path::new(&run_out));
    assert_eq!(composed.len(), direct.len());
    assert!(!composed.is_empty());
    for (a, b) in composed.iter().zip(&direct) {
        assert_eq!(a.query_id, b.query_id);
        assert_eq!(a.entries.len(), b.entries.len());
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            assert_eq!(ea.doc_id, eb.doc_id, "query {} order differs", a.query_id);
            assert!((ea.score - eb.score).abs() < 1e-5);
        }
    }

    // diagnostics dump holds one JSON line per query
    let diag = std::fs::read_to_string(path("diag.jsonl")).unwrap();
    assert_eq!(diag.lines().count(), 3);

    // evaluation table and median comparison on stdout
    let out = trialrank(&[
        "evaluate",
        "--run",
        &run_out,
        "--qrels",
        fixture("mini_qrels.txt").to_str().unwrap(),
        "--k",
        "10",
        "--median",
        fixture("mini_medians.txt").to_str().unwrap(),
        "--report",
        &path("report.json"),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("NDCG@10"), "table header missing:\n{stdout}");
    assert!(stdout.contains("mean"));
    assert!(stdout.contains("improved over median"));

    // a non-default cutoff adds its own mean line
    let out = trialrank(&[
        "evaluate",
        "--run",
        &run_out,
        "--qrels",
        fixture("mini_qrels.txt").to_str().unwrap(),
        "--k",
        "5",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean NDCG@5"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path("report.json")).unwrap()).unwrap();
    assert!(report.get("per_query").is_some());
    assert!(report.get("mean").is_some());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_config = dir.path().join("bad.cfg");
    std::fs::write(&bad_config, "views = i_in, i_ex\nrelevance_model = TT_MW\n").unwrap();
    let out = trialrank(&[
        "run",
        "--config",
        bad_config.to_str().unwrap(),
        "--index-prefix",
        "unused",
        "--queries",
        fixture("topics.tsv").to_str().unwrap(),
        "--output",
        dir.path().join("out.trec").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = trialrank(&[
        "build-index",
        "--corpus",
        "unused.jsonl",
        "--view",
        "i_bogus",
        "--out-prefix",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let out = trialrank(&[
        "evaluate",
        "--run",
        "/nonexistent/run.trec",
        "--qrels",
        fixture("mini_qrels.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let out = trialrank(&[
        "run",
        "--config",
        fixture("configs/r1.cfg").to_str().unwrap(),
        "--index-prefix",
        dir.path().join("missing").to_str().unwrap(),
        "--queries",
        fixture("topics.tsv").to_str().unwrap(),
        "--output",
        dir.path().join("out.trec").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "missing index is a data error");
}
