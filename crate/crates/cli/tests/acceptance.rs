//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines appear in `cargo test` output without extra flags.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use secaudit_core::checklist::ids::*;
use secaudit_core::checklist::{Category, EvaluationMode, ImpactLevel, LikelihoodLevel};
use secaudit_core::reference::{reference_observations, reference_values, REFERENCE_LABELS};
use secaudit_core::report::{emit_coverage_table, emit_json, parse_document, AuditDocument, TableFormat, TargetMetadata};
use secaudit_core::risk_engine::{coverage_summary, profile_from_values, risk_profile};
use secaudit_core::static_analyzer::{run_default, CodeCorpus};
use secaudit_core::{default_checklist, judge_compliance, risk_level, ObservationValue, RiskLevel, Source};
use secaudit_scanner::{run_group, ProbeGroup, ScanContext, Signatures, TargetConfig};
use secaudit_testbed::{start_testbed, toggle_for, TestbedConfig};

type Outcome = Result<String, String>;

/// Expected likelihood, impact and risk for every checklist row.
const REFERENCE_RISK: [(&str, &str, &str, &str); 48] = [
    (LOCKOUT, "Almost certain", "Significant", "Very High"),
    (CAPTCHA, "Almost Certain", "Significant", "Very High"),
    (LOCKOUT_NOTIFICATION, "Moderate", "Insignificant", "Low"),
    (PASSWORD_COMPLEXITY, "Moderate", "Significant", "Medium"),
    (PASSWORD_EXPIRATION, "Moderate", "Insignificant", "Low"),
    (PASSWORD_REUSE, "Unlikely", "Minor", "Low"),
    (MFA_ENABLED, "Likely", "Major", "Very High"),
    (MFA_TYPE, "Moderate", "Insignificant", "Low"),
    (BACKUP_CODES, "Moderate", "Significant", "Medium"),
    (RATE_LIMIT, "Almost Certain", "Minor", "High"),
    (RATE_LIMIT_RESPONSE, "Unlikely", "Insignificant", "Very Low"),
    (EMAIL_VERIFICATION, "Unlikely", "Insignificant", "Very Low"),
    (PARAMETERIZED_QUERIES, "Likely", "Major", "Very High"),
    (SPECIAL_CHARS_ESCAPED, "Likely", "Major", "Very High"),
    (JS_EXECUTION, "Likely", "Major", "Very High"),
    (HTML_INJECTION, "Moderate", "Major", "High"),
    (POST_ONLY_LOGIN, "Unlikely", "Minor", "Low"),
    (CORS_POLICY, "Unlikely", "Minor", "Low"),
    (CSRF_TOKEN_PRESENT, "Likely", "Major", "Very High"),
    (CSRF_VALIDATION, "Likely", "Major", "Very High"),
    (HPP, "Unlikely", "Minor", "Low"),
    (SESSION_CREATION, "Unlikely", "Insignificant", "Very Low"),
    (COOKIE_SECURE, "Almost Certain", "Major", "Extreme"),
    (COOKIE_HTTPONLY, "Almost Certain", "Major", "Extreme"),
    (COOKIE_SAMESITE, "Almost Certain", "Major", "Extreme"),
    (SESSION_TIMEOUT, "Unlikely", "Minor", "Low"),
    (SESSION_REGENERATED, "Moderate", "Severe", "Very High"),
    (FIXATION_PROTECTION, "Almost Certain", "Major", "Extreme"),
    (SESSION_COOKIE_ONLY, "Moderate", "Severe", "Very High"),
    (HASH_ALGORITHM, "Unlikely", "Severe", "High"),
    (SALTED_HASHES, "Unlikely", "Severe", "High"),
    (REVEALS_USERNAME, "Unlikely", "Insignificant", "Very Low"),
    (REVEALS_PASSWORD_RULES, "Unlikely", "insignificant", "Very Low"),
    (FAILED_LOGIN_LOGGED, "Unlikely", "insignificant", "Very Low"),
    (UNUSUAL_LOGIN_FLAGGED, "Unlikely", "insignificant", "Very Low"),
    (LOGS_SECURE, "Moderate", "Minor", "Medium"),
    (CSP_PRESENT, "Unlikely", "Insignificant", "Very Low"),
    (CSP_BLOCKS_INLINE, "Moderate", "Minor", "Medium"),
    (CSP_BLOCKS_DATA_URI, "Moderate", "Minor", "Medium"),
    (CSP_RESTRICTS_SOURCES, "Moderate", "Minor", "Medium"),
    (X_FRAME_OPTIONS, "Moderate", "Minor", "Medium"),
    (X_CONTENT_TYPE_OPTIONS, "Moderate", "Minor", "Medium"),
    (HSTS_PRESENT, "Moderate", "Minor", "Medium"),
    (HSTS_MAX_AGE, "Unlikely", "Minor", "Low"),
    (REFERRER_POLICY_SET, "Moderate", "Minor", "Medium"),
    (REFERRER_POLICY_STRICT, "Moderate", "Minor", "Medium"),
    (PERMISSIONS_POLICY_PRESENT, "Moderate", "Minor", "Medium"),
    (PERMISSIONS_RESTRICTED, "Moderate", "Minor", "Medium"),
];

/// Expected coverage cells: (category, [Grok, ChatGPT, DeepSeek, Claude, Gemini]).
const REFERENCE_COVERAGE: [(Category, [&str; 5]); 6] = [
    (Category::AuthenticationSecurity, ["3/11", "1/11", "0/11", "0/11", "2/11"]),
    (Category::InputValidation, ["5/10", "5/10", "3/10", "8/10", "3/10"]),
    (Category::SessionSecurity, ["7/8", "7/8", "4/8", "3/8", "8/8"]),
    (Category::SecureStorage, ["2/2", "2/2", "2/2", "0/2", "2/2"]),
    (Category::ErrorHandling, ["3/5", "2/5", "2/5", "2/5", "1/5"]),
    (Category::HttpSecurityHeaders, ["0/12", "0/12", "0/12", "0/12", "0/12"]),
];
const COVERAGE_COLUMNS: [&str; 5] = ["Grok", "ChatGPT", "DeepSeek", "Claude", "Gemini"];

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let detail = f()?;
    let elapsed = start.elapsed();
    if elapsed > limit {
        return Err(format!("{detail}, but took {elapsed:?} (limit {limit:?})"));
    }
    Ok(format!("{detail} in {elapsed:.2?}"))
}

fn risk_matrix() -> Outcome {
    timed(Duration::from_secs(1), || {
        let checklist = default_checklist();
        let mut bad = Vec::new();
        for (id, l, i, r) in REFERENCE_RISK {
            let l: LikelihoodLevel = l.parse().map_err(|e| format!("{e}"))?;
            let i: ImpactLevel = i.parse().map_err(|e| format!("{e}"))?;
            let r: RiskLevel = r.parse().map_err(|e| format!("{e}"))?;
            let spec = checklist.get(id).ok_or(format!("{id} missing"))?;
            if risk_level(l, i) != r || spec.likelihood != l || spec.impact != i || spec.risk != r {
                bad.push(id);
            }
        }
        if bad.is_empty() {
            Ok("48/48 rows match".into())
        } else {
            Err(format!("{} rows differ: {bad:?}", bad.len()))
        }
    })
}

fn coverage_table() -> Outcome {
    timed(Duration::from_secs(1), || {
        let checklist = default_checklist();
        let mut summaries = Vec::new();
        for label in COVERAGE_COLUMNS {
            let profile = profile_from_values(label, reference_values(label).unwrap(), Source::Manual, &checklist)
                .map_err(|e| e.to_string())?;
            summaries.push((label.to_string(), coverage_summary(&profile, &checklist)));
        }
        let mut bad = Vec::new();
        for (category, cells) in REFERENCE_COVERAGE {
            for ((label, summary), expected) in summaries.iter().zip(cells) {
                let got = summary.get(category).to_string();
                if got != expected {
                    bad.push(format!("{label}/{}: {got} != {expected}", category.label()));
                }
            }
        }
        // The rendered table carries the same cells.
        let csv = emit_coverage_table(&summaries, TableFormat::Csv);
        for (category, cells) in REFERENCE_COVERAGE {
            let line = csv.lines().find(|l| l.contains(category.label())).ok_or("category row missing")?;
            let rendered: Vec<&str> = line.split(',').skip(1).map(|c| c.trim_matches('"')).collect();
            if rendered != cells {
                bad.push(format!("rendered {} row {rendered:?}", category.label()));
            }
        }
        if bad.is_empty() {
            Ok("30/30 cells match".into())
        } else {
            Err(bad.join("; "))
        }
    })
}

fn extreme_counts() -> Outcome {
    let checklist = default_checklist();
    let expected = BTreeMap::from([("ChatGPT", 0), ("DeepSeek", 3), ("Claude", 4), ("Gemini", 0), ("Grok", 0)]);
    let mut got = BTreeMap::new();
    for label in REFERENCE_LABELS {
        let profile = profile_from_values(label, reference_values(label).unwrap(), Source::Manual, &checklist)
            .map_err(|e| e.to_string())?;
        got.insert(label, risk_profile(&profile, &checklist).count(RiskLevel::Extreme));
    }
    if got == expected {
        Ok(format!("{got:?}"))
    } else {
        Err(format!("got {got:?}, expected {expected:?}"))
    }
}

fn monotonicity() -> Outcome {
    let mut cells = 0;
    for l in LikelihoodLevel::ALL {
        for i in ImpactLevel::ALL {
            cells += 1;
            let here = risk_level(*l, *i);
            if let Some(up) = LikelihoodLevel::from_ordinal(l.ordinal() + 1) {
                if risk_level(up, *i) < here {
                    return Err(format!("decreases from ({l:?}, {i:?}) to ({up:?}, {i:?})"));
                }
            }
            if let Some(up) = ImpactLevel::from_ordinal(i.ordinal() + 1) {
                if risk_level(*l, up) < here {
                    return Err(format!("decreases from ({l:?}, {i:?}) to ({l:?}, {up:?})"));
                }
            }
        }
    }
    if cells != 25 {
        return Err(format!("visited {cells} cells"));
    }
    Ok("non-decreasing over all 25 cells".into())
}

async fn scan_group(config: TestbedConfig, group: ProbeGroup) -> Result<BTreeMap<String, ObservationValue>, String> {
    let handle = start_testbed(config).await.map_err(|e| e.to_string())?;
    let mut target = TargetConfig::from_toml(&handle.target_toml()).map_err(|e| e.to_string())?;
    target.destructive_allowed = true;
    let ctx = ScanContext::new(target, Signatures::default()).map_err(|e| e.to_string())?;
    let result = async {
        let baseline = ctx.browser().get("/").await?;
        let obs = run_group(group, &ctx, &baseline).await.map_err(|e| e.to_string())?;
        Ok(obs.into_iter().map(|o| (o.parameter_id, o.value)).collect())
    }
    .await;
    handle.shutdown().await;
    result
}

fn toggle_round_trip() -> Outcome {
    let start = Instant::now();
    let checklist = default_checklist();
    let dynamic: Vec<&str> = checklist.by_mode(EvaluationMode::Dynamic).map(|p| p.id.as_str()).collect();
    if dynamic.len() < 25 {
        return Err(format!("only {} dynamic parameters", dynamic.len()));
    }
    // (parameter, base is hardened, toggle set to compliant). Each base is
    // scanned with the toggle in both positions.
    let mut jobs = Vec::new();
    for id in &dynamic {
        for hardened in [true, false] {
            for compliant in [true, false] {
                jobs.push((id.to_string(), hardened, compliant));
            }
        }
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    let results: Vec<_> = runtime.block_on(
        stream::iter(jobs)
            .map(|(id, hardened, compliant)| async move {
                let toggle = toggle_for(&id).ok_or(format!("{id}: no toggle"))?;
                let group = ProbeGroup::for_parameter(&id).ok_or(format!("{id}: no probe"))?;
                let mut config = if hardened { TestbedConfig::default() } else { TestbedConfig::vulnerable() };
                toggle.apply(&mut config, compliant);
                let values = scan_group(config, group).await?;
                let value = values.get(&id).cloned().ok_or(format!("{id}: not observed"))?;
                Ok::<_, String>((id, hardened, compliant, value))
            })
            .buffer_unordered(16)
            .collect(),
    );
    let mut failures = Vec::new();
    let mut verified = 0;
    for r in results {
        let (id, hardened, want, value) = match r {
            Ok(v) => v,
            Err(e) => {
                failures.push(e);
                continue;
            }
        };
        let spec = checklist.get(&id).unwrap();
        let compliant = judge_compliance(spec, &value).map(|c| c.is_compliant()).unwrap_or(false);
        if compliant == want {
            verified += 1;
        } else {
            let base = if hardened { "hardened" } else { "vulnerable" };
            let state = if want { "compliant" } else { "vulnerable" };
            failures.push(format!("{id} on {base} base with toggle {state}: {value:?}"));
        }
    }
    let elapsed = start.elapsed();
    if !failures.is_empty() {
        return Err(format!("{} of {} scans wrong: {}", failures.len(), verified + failures.len(), failures.join("; ")));
    }
    if elapsed > Duration::from_secs(180) {
        return Err(format!("{verified} scans correct but took {elapsed:?} (limit 180s)"));
    }
    Ok(format!("{} parameters flip both ways ({verified} scans) in {elapsed:.1?}", dynamic.len()))
}

fn corpus_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/static_corpus")
}

fn static_corpus() -> Outcome {
    let checklist = default_checklist();
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(corpus_root())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    if dirs.len() < 12 {
        return Err(format!("only {} snippets", dirs.len()));
    }
    let (mut agreed, mut total) = (0, 0);
    let mut bad = Vec::new();
    for dir in &dirs {
        let corpus = CodeCorpus::from_dir(dir, "php-mysql").map_err(|e| e.to_string())?;
        let report = run_default(&corpus, &checklist).map_err(|e| e.to_string())?;
        let labels = std::fs::read_to_string(dir.join("labels.txt")).map_err(|e| e.to_string())?;
        for line in labels.lines().filter(|l| !l.trim().is_empty()) {
            let (key, expected) = line.split_once('=').ok_or("malformed label")?;
            let (key, expected) = (key.trim(), expected.trim());
            if key.contains('@') {
                continue;
            }
            total += 1;
            let got = report.value_of(key).cloned().unwrap_or(ObservationValue::Unknown);
            if got == ObservationValue::from_text(expected) {
                agreed += 1;
            } else {
                bad.push(format!("{}: {key} = {got}, labeled {expected}", dir.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("{agreed}/{total} labels agree across {} snippets", dirs.len()))
    } else {
        Err(bad.join("; "))
    }
}

fn report_round_trip() -> Outcome {
    let config = Config { cases: 100, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let cases = std::cell::Cell::new(0);
    let result = runner.run(&secaudit_core::strategies::audit_document(), |doc| {
        cases.set(cases.get() + 1);
        let first = emit_json(&doc);
        let second = emit_json(&doc);
        proptest::prop_assert_eq!(&first, &second);
        let parsed = parse_document(&first).map_err(|e| proptest::test_runner::TestCaseError::fail(e.to_string()))?;
        proptest::prop_assert_eq!(&parsed, &doc);
        proptest::prop_assert_eq!(emit_json(&parsed), first);
        Ok(())
    });
    let cases = cases.get();
    match result {
        Ok(()) if cases >= 100 => Ok(format!("{cases} randomized documents round-trip byte-stably")),
        Ok(()) => Err(format!("only {cases} cases ran")),
        Err(e) => Err(e.to_string()),
    }
}

fn ci_gate() -> Outcome {
    let checklist = default_checklist();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut got = Vec::new();
    for (label, expected) in [("Claude", 1), ("Grok", 0)] {
        let doc = AuditDocument::assemble(
            TargetMetadata { label: label.into(), location: None },
            reference_observations(label).unwrap(),
            Vec::new(),
            &checklist,
            chrono::Utc::now(),
        )
        .map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{label}.json"));
        std::fs::write(&path, emit_json(&doc)).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_secaudit"))
            .args(["score", "--fail-on", "Extreme", "--input"])
            .arg(&path)
            .env_remove(secaudit_cli::CHECKLIST_ENV)
            .output()
            .map_err(|e| e.to_string())?;
        let code = out.status.code().unwrap_or(-1);
        if code != expected {
            return Err(format!("{label}: exit {code}, expected {expected}"));
        }
        got.push(format!("{label} exits {code}"));
    }
    Ok(got.join(", "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("risk matrix reproduces every reference risk level", risk_matrix),
        ("coverage table reproduces every reference cell", coverage_table),
        ("extreme-risk counts per reference column", extreme_counts),
        ("risk matrix is monotone", monotonicity),
        ("testbed toggles flip every dynamic observation", toggle_round_trip),
        ("static analyzer agrees with the labeled corpus", static_corpus),
        ("report documents round-trip canonically", report_round_trip),
        ("score --fail-on Extreme gates the build", ci_gate),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
