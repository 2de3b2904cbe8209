use std::fs;
use std::path::{Path, PathBuf};

use secaudit_core::checklist::default_checklist;
use secaudit_core::observation::ObservationValue;
use secaudit_core::static_analyzer::{run_default, CodeCorpus};

fn corpus_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/static_corpus")
}

/// `param=value` checks the value, `param@evidence=N` the evidence count.
fn labels(dir: &Path) -> Vec<(String, String)> {
    fs::read_to_string(dir.join("labels.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.trim().to_string(), v.trim().to_string())
        })
        .collect()
}

#[test]
fn labeled_corpus_agrees_with_every_label() {
    let checklist = default_checklist();
    let mut cases: Vec<_> = fs::read_dir(corpus_root()).unwrap().map(|e| e.unwrap().path()).collect();
    cases.sort();
    assert!(cases.len() >= 12);

    let mut mismatches = Vec::new();
    let mut checked = 0;
    for dir in &cases {
        let corpus = CodeCorpus::from_dir(dir, "php-mysql").unwrap();
        let report = run_default(&corpus, &checklist).unwrap();
        for (key, expected) in labels(dir) {
            checked += 1;
            let name = dir.file_name().unwrap().to_string_lossy().to_string();
            if let Some((param, _)) = key.split_once("@evidence") {
                let n = report.observation(param).map(|o| o.evidence.len()).unwrap_or(0);
                if n.to_string() != expected {
                    mismatches.push(format!("{name}: {param} evidence {n} != {expected}"));
                }
            } else {
                let got = report.value_of(&key).cloned().unwrap_or(ObservationValue::Unknown);
                if got != ObservationValue::from_text(&expected) {
                    mismatches.push(format!("{name}: {key} = {got}, labeled {expected}"));
                }
            }
        }
    }
    assert!(checked >= 40);
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

#[test]
fn evidence_points_into_the_corpus() {
    let checklist = default_checklist();
    for entry in fs::read_dir(corpus_root()).unwrap() {
        let dir = entry.unwrap().path();
        let corpus = CodeCorpus::from_dir(&dir, "php-mysql").unwrap();
        let report = run_default(&corpus, &checklist).unwrap();
        for obs in &report.observations {
            if matches!(obs.value, ObservationValue::Yes | ObservationValue::No) {
                assert!(!obs.evidence.is_empty(), "{}: {}", dir.display(), obs.parameter_id);
            }
            for ev in &obs.evidence {
                let (path, line) = ev.request.rsplit_once(':').unwrap();
                let file = corpus.files().iter().find(|f| f.path == path).expect("evidence path in corpus");
                let line: usize = line.parse().unwrap();
                let text = file.text.lines().nth(line - 1).unwrap();
                assert_eq!(text.trim(), ev.response.trim_end_matches('…').trim());
            }
        }
    }
}

#[test]
fn analysis_is_deterministic() {
    let checklist = default_checklist();
    let dir = corpus_root().join("15-gemini-like");
    let corpus = CodeCorpus::from_dir(&dir, "php-mysql").unwrap();
    let a = run_default(&corpus, &checklist).unwrap();
    let b = run_default(&corpus, &checklist).unwrap();
    assert_eq!(a.observations.len(), b.observations.len());
    assert!(a.observations.iter().zip(&b.observations).all(|(x, y)| x.same_outcome(y)));
}
