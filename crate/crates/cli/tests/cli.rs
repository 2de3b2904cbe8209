use std::path::Path;
use std::process::{Command, Output};

use secaudit_core::checklist::ids;
use secaudit_core::reference::reference_observations;
use secaudit_core::report::{emit_json, load_document, AuditDocument, TargetMetadata};
use secaudit_core::{default_checklist, ObservationValue, Source};
use secaudit_testbed::{start_testbed, TestbedConfig};

fn secaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_secaudit"))
        .args(args)
        .env_remove(secaudit_cli::CHECKLIST_ENV)
        .output()
        .unwrap()
}

fn write_reference(dir: &Path, label: &str) -> String {
    let doc = AuditDocument::assemble(
        TargetMetadata { label: label.into(), location: None },
        reference_observations(label).unwrap(),
        Vec::new(),
        &default_checklist(),
        chrono::Utc::now(),
    )
    .unwrap();
    let path = dir.join(format!("{label}.json"));
    std::fs::write(&path, emit_json(&doc)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(secaudit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(secaudit(&["score", "--fail-on", "Catastrophic", "--input", "x"]).status.code(), Some(2));
    assert_eq!(secaudit(&["--help"]).status.code(), Some(0));
}

#[test]
fn checklist_prints_and_validates() {
    let out = secaudit(&["checklist", "--validate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("48 parameters"));

    let dir = tempfile::tempdir().unwrap();
    let printed = secaudit(&["checklist"]);
    let path = dir.path().join("checklist.txt");
    std::fs::write(&path, &printed.stdout).unwrap();
    let via_env = Command::new(env!("CARGO_BIN_EXE_secaudit"))
        .args(["checklist", "--validate"])
        .env(secaudit_cli::CHECKLIST_ENV, &path)
        .output()
        .unwrap();
    assert_eq!(via_env.status.code(), Some(0));

    std::fs::write(&path, "").unwrap();
    let bad = secaudit(&["checklist", "--validate", "--checklist", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn attestations_fill_gaps_and_gate() {
    let dir = tempfile::tempdir().unwrap();
    let grok = write_reference(dir.path(), "Grok");
    let attest = dir.path().join("attest.toml");
    std::fs::write(
        &attest,
        "[[attestation]]\nparameter = \"auth.backup_codes\"\nvalue = \"Yes\"\nnote = \"seen in settings\"\n",
    )
    .unwrap();
    let out_path = dir.path().join("merged.json");
    // The reference column already carries a manual observation for this
    // parameter, so merging another manual one is a duplicate.
    let dup = secaudit(&["score", "--input", &grok, "--attest", attest.to_str().unwrap()]);
    assert_eq!(dup.status.code(), Some(1));

    let only = secaudit(&[
        "score",
        "--attest",
        attest.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--fail-on",
        "medium",
    ]);
    // Everything else is unobserved, so the gate trips.
    assert_eq!(only.status.code(), Some(1));
    let doc = load_document(&std::fs::read_to_string(&out_path).unwrap(), &default_checklist()).unwrap();
    let record = doc.records.iter().find(|r| r.parameter_id == ids::BACKUP_CODES).unwrap();
    let obs = record.observation.as_ref().unwrap();
    assert_eq!((obs.value.clone(), obs.source), (ObservationValue::Yes, Source::Manual));
}

#[test]
fn report_writes_tables_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let inputs: Vec<String> = ["ChatGPT", "DeepSeek", "Claude"].iter().map(|l| write_reference(dir.path(), l)).collect();
    let out_dir = dir.path().join("out");
    let mut args = vec!["report", "--format", "csv", "--out-dir", out_dir.to_str().unwrap()];
    for i in &inputs {
        args.extend(["--input", i.as_str()]);
    }
    let out = secaudit(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let matrix = std::fs::read_to_string(out_dir.join("compliance_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().count(), 49);
    let svgs = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, 6);

    // Tampered documents are refused.
    let text = std::fs::read_to_string(&inputs[0]).unwrap().replacen("\"fulfilled\": 1", "\"fulfilled\": 9", 1);
    std::fs::write(&inputs[0], text).unwrap();
    assert_eq!(secaudit(&["report", "--input", &inputs[0]]).status.code(), Some(1));
}

#[test]
fn analyze_writes_a_document() {
    let dir = tempfile::tempdir().unwrap();
    let code = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/static_corpus/05-plaintext");
    let out = dir.path().join("static.json");
    let status = secaudit(&["analyze", "--code-dir", code.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let doc = load_document(&std::fs::read_to_string(&out).unwrap(), &default_checklist()).unwrap();
    assert!(doc.observations.iter().all(|o| o.source == Source::Static));
    assert_eq!(secaudit(&["analyze", "--code-dir", "/nonexistent/dir"]).status.code(), Some(1));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scan_then_score_against_the_testbed() {
    let handle = start_testbed(TestbedConfig::preset("deepseek").unwrap()).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("target.toml");
    std::fs::write(&target, handle.target_toml()).unwrap();
    let report = dir.path().join("scan.json");
    let (t, r) = (target.to_str().unwrap().to_string(), report.to_str().unwrap().to_string());
    let out = tokio::task::spawn_blocking(move || {
        secaudit(&["scan", "--target", &t, "--out", &r, "--label", "DeepSeek preset"])
    })
    .await
    .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = load_document(&std::fs::read_to_string(&report).unwrap(), &default_checklist()).unwrap();
    // Without --destructive the state-changing parameters are skipped.
    assert_eq!(doc.skipped.len(), 7);
    assert_eq!(doc.risk.count(secaudit_core::RiskLevel::Extreme), 3);
    let gate = secaudit(&["score", "--input", report.to_str().unwrap(), "--fail-on", "extreme"]);
    assert_eq!(gate.status.code(), Some(1));
    handle.shutdown().await;
}
