//! End-to-end checks of the `scidef` binary against small on-disk fixtures.

use std::fs;
use std::path::Path;
use std::process::Command;

fn scidef() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scidef"))
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).unwrap();
}

const GOLD: &str = r#"{"format":"defextra","version":1}
{"paper_id":"alpha","term":"media bias","definition":"Media bias is a tilt in coverage.","type":"explicit","context":"Intro. Media bias is a tilt in coverage. Outro.","domain":"media_bias"}
{"paper_id":"beta","definition":"Slant is a lean.","type":"implicit","context":"Start. Slant leans one way. End.","domain":"other"}
"#;

const PRED: &str = r#"{"format":"scidef-candidates","version":1}
{"paper_id":"alpha","definition":"Media bias is a tilt in coverage.","type":"explicit","provenance":{"locator":{"section":0,"paragraph":0},"strategy":"onestep","chunking":"paragraph","model_name":"m","raw_response_id":0}}
"#;

#[test]
fn score_emits_per_paper_records() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("gold.jsonl"), GOLD);
    write(&dir.path().join("pred.jsonl"), PRED);
    let out_path = dir.path().join("scores.jsonl");

    let output = scidef()
        .args([
            "score",
            "--gold",
            dir.path().join("gold.jsonl").to_str().unwrap(),
            "--pred",
            dir.path().join("pred.jsonl").to_str().unwrap(),
            "--metric",
            "exact",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let scores = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = scores.lines().collect();
    assert_eq!(lines.len(), 3); // header + two papers
    assert!(lines[0].contains("scidef-scores"));
    let alpha: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(alpha["paper_id"], "alpha");
    assert_eq!(alpha["score"], 1.0); // exact match, same type
    let beta: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
    assert_eq!(beta["score"], 0.0); // gold without predictions
}

#[test]
fn bench_metrics_sweeps_a_benchmark_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sick.tsv");
    write(
        &file,
        "pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\n\
         1\tsame text\tsame text\t5.0\tENTAILMENT\n\
         2\tone thing\tanother thing\t1.0\tNEUTRAL\n",
    );
    let curve = dir.path().join("curve.jsonl");

    let output = scidef()
        .args([
            "bench-metrics",
            "--dataset",
            "sick",
            "--file",
            file.to_str().unwrap(),
            "--metric",
            "exact",
            "--gt-threshold",
            "0.9",
            "--step",
            "0.5",
            "--out",
            curve.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("best F1 1.0000"), "stdout: {stdout}");
    let curve = fs::read_to_string(&curve).unwrap();
    assert_eq!(curve.lines().count(), 4); // header + thresholds 0, 0.5, 1
}

#[test]
fn report_from_renders_tables() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.jsonl");
    write(
        &report,
        r#"{"format":"scidef-report","version":1}
{"record":"ranking","cells":["m/onestep/paragraph"]}
{"record":"cell","name":"m/onestep/paragraph","model":"m","strategy":"onestep","chunking":"paragraph","failed":false,"avg_score":0.5,"avg_gt_coverage":0.75,"count_stats":{"mean":2.0,"median":2.0,"min":1,"max":3}}
{"record":"paper","cell":"m/onestep/paragraph","paper_id":"p1","match_g":0.5,"match_p":0.5,"score":0.5,"gt_coverage":0.75,"n_gold":2,"n_pred":2,"failed":false}
"#,
    );

    let output = scidef()
        .args(["report", "--from", report.to_str().unwrap(), "--top", "5"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("best configuration"), "stdout: {stdout}");
    assert!(stdout.contains("m, paragraph"), "stdout: {stdout}");
    assert!(stdout.contains("75.0%"), "stdout: {stdout}");
}

#[test]
fn extract_dumps_chunks_and_fails_cleanly_offline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    write(
        &corpus.join("solo.tei.xml"),
        r#"<TEI xmlns="http://www.tei-c.org/ns/1.0"><teiHeader/><text><body>
          <div><head>S</head><p>Only one sentence here.</p></div>
        </body></text></TEI>"#,
    );
    let chunks = dir.path().join("chunks.jsonl");

    // The endpoint is unreachable: the dump must still be written and the
    // command must exit non-zero after extraction fails everywhere.
    let output = scidef()
        .args([
            "extract",
            "--corpus",
            corpus.to_str().unwrap(),
            "--model",
            "m",
            "--endpoint",
            "http://127.0.0.1:9",
            "--out",
            dir.path().join("cand.jsonl").to_str().unwrap(),
            "--dump-chunks",
            chunks.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let dumped = fs::read_to_string(&chunks).unwrap();
    assert_eq!(dumped.lines().count(), 2); // header + one paragraph chunk
    assert!(dumped.contains("Only one sentence here."));
}

#[test]
fn report_config_runs_offline_grid_with_failed_cell() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    write(
        &corpus.join("alpha.tei.xml"),
        r#"<TEI xmlns="http://www.tei-c.org/ns/1.0"><teiHeader/><text><body>
          <div><head>S</head><p>Media bias is a tilt in coverage.</p></div>
        </body></text></TEI>"#,
    );
    write(&dir.path().join("gold.jsonl"), GOLD);
    write(
        &dir.path().join("split.jsonl"),
        "{\"format\":\"scidef-split\",\"version\":1}\n\
         {\"split\":\"train\",\"papers\":[]}\n\
         {\"split\":\"dev\",\"papers\":[]}\n\
         {\"split\":\"test\",\"papers\":[\"alpha\"]}\n",
    );
    write(
        &dir.path().join("exp.toml"),
        &format!(
            r#"
corpus_dir = "{0}/corpus"
defextra = "{0}/gold.jsonl"
cache_dir = "{0}/cache"
tau = 0.25

[split]
manifest = "{0}/split.jsonl"

[metric]
kind = "exact"

[[cells]]
model = "dead-model"
endpoint = "http://127.0.0.1:9"
strategy = "onestep"
chunking = "paragraph"
"#,
            dir.path().display()
        ),
    );

    let report_path = dir.path().join("report.jsonl");
    let output = scidef()
        .args([
            "report",
            "--config",
            dir.path().join("exp.toml").to_str().unwrap(),
            "--out",
            report_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    // The dead endpoint fails its cell, but the report is still written.
    let report = fs::read_to_string(&report_path).unwrap();
    assert!(report.contains(r#""failed":true"#), "report: {report}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("no ranking"), "stdout: {stdout}");
}
