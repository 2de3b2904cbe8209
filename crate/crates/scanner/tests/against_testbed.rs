use std::collections::BTreeMap;

use secaudit_core::checklist::ids::*;
use secaudit_core::checklist::EvaluationMode;
use secaudit_core::reference::{reference_values, REFERENCE_LABELS};
use secaudit_core::risk_engine::judge_compliance;
use secaudit_core::{default_checklist, ObservationValue, ProbeReport};
use secaudit_scanner::{run_scan, ScanContext, ScanError, Signatures, TargetConfig};
use secaudit_testbed::{start_testbed, TestbedConfig, TestbedHandle};

async fn target_for(handle: &TestbedHandle) -> TargetConfig {
    TargetConfig::from_toml(&handle.target_toml()).unwrap()
}

async fn scan(config: TestbedConfig, destructive: bool) -> (ProbeReport, TestbedHandle) {
    let handle = start_testbed(config).await.unwrap();
    let mut target = target_for(&handle).await;
    target.destructive_allowed = destructive;
    let report = run_scan(target, &default_checklist(), 4).await.unwrap();
    (report, handle)
}

fn values(report: &ProbeReport) -> BTreeMap<String, ObservationValue> {
    report.observations.iter().map(|o| (o.parameter_id.clone(), o.value.clone())).collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn hardened_testbed_is_fully_compliant() {
    let (report, handle) = scan(TestbedConfig::default(), true).await;
    let checklist = default_checklist();
    assert!(report.skipped.is_empty(), "{:?}", report.skipped);
    let mut failures = Vec::new();
    for o in &report.observations {
        let spec = checklist.get(&o.parameter_id).unwrap();
        o.validate(spec).unwrap();
        if !judge_compliance(spec, &o.value).unwrap().is_compliant() {
            failures.push(format!("{} = {:?} ({:?})", o.parameter_id, o.value, o.note));
        }
    }
    assert!(failures.is_empty(), "non-compliant on the hardened testbed:\n{}", failures.join("\n"));
    handle.shutdown().await;
}

/// Each preset reproduces its reference column on every dynamic parameter.
/// Duplicate-parameter handling is recorded as not applicable in the
/// reference; the presets pick last-wins, which is equally non-compliant.
#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn presets_match_reference_columns() {
    let checklist = default_checklist();
    let mut mismatches = Vec::new();
    for label in REFERENCE_LABELS {
        let config = TestbedConfig::preset(&label.to_lowercase()).unwrap();
        let (report, handle) = scan(config, true).await;
        let got = values(&report);
        for (id, expected) in reference_values(label).unwrap() {
            let spec = checklist.get(id).unwrap();
            if spec.mode != EvaluationMode::Dynamic {
                continue;
            }
            let actual = got.get(id).cloned().unwrap_or(ObservationValue::Unknown);
            if id == HPP {
                assert_eq!(actual, ObservationValue::categorical("last-wins"), "{label}");
                assert!(!judge_compliance(spec, &expected).unwrap().is_compliant());
                continue;
            }
            if actual != expected {
                mismatches.push(format!("{label}: {id} expected {expected:?}, scanned {actual:?}"));
            }
        }
        handle.shutdown().await;
    }
    assert!(mismatches.is_empty(), "\n{}", mismatches.join("\n"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn non_destructive_scan_skips_state_changing_parameters() {
    let (report, handle) = scan(TestbedConfig::default(), false).await;
    let skipped: Vec<&str> = report.skipped.iter().map(|s| s.parameter_id.as_str()).collect();
    let mut expected = vec![
        LOCKOUT,
        CAPTCHA,
        PASSWORD_COMPLEXITY,
        RATE_LIMIT,
        RATE_LIMIT_RESPONSE,
        EMAIL_VERIFICATION,
        REVEALS_PASSWORD_RULES,
    ];
    let checklist = default_checklist();
    expected.sort_by_key(|id| checklist.position(id));
    assert_eq!(skipped, expected);
    // Nothing was registered.
    let mail = reqwest_get(&format!("{}/__testbed/mail", handle.base_url())).await;
    assert_eq!(mail.trim(), "[]");
    handle.shutdown().await;
}

/// Every dynamic parameter is either observed exactly once or skipped.
#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn every_dynamic_parameter_is_accounted_for() {
    for destructive in [false, true] {
        let (report, handle) = scan(TestbedConfig::vulnerable(), destructive).await;
        let checklist = default_checklist();
        for p in checklist.by_mode(EvaluationMode::Dynamic) {
            let observed = report.observations.iter().filter(|o| o.parameter_id == p.id).count();
            let skipped = report.is_skipped(&p.id);
            assert!(
                (observed == 1 && !skipped) || (observed == 0 && skipped),
                "{}: observed {observed}, skipped {skipped}",
                p.id
            );
        }
        for o in &report.observations {
            o.validate(checklist.get(&o.parameter_id).unwrap()).unwrap();
        }
        handle.shutdown().await;
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn read_only_probes_are_idempotent() {
    use secaudit_scanner::{run_group, ProbeGroup};
    let handle = start_testbed(TestbedConfig::preset("gemini").unwrap()).await.unwrap();
    let ctx = ScanContext::new(target_for(&handle).await, Signatures::default()).unwrap();
    let baseline = ctx.browser().get("/").await.unwrap();
    for g in [ProbeGroup::Headers, ProbeGroup::Cookies, ProbeGroup::LoginMethod, ProbeGroup::Xss, ProbeGroup::Hpp] {
        let a = run_group(g, &ctx, &baseline).await.unwrap();
        let b = run_group(g, &ctx, &baseline).await.unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.parameter_id, y.parameter_id);
            assert_eq!(x.value, y.value, "{}", x.parameter_id);
        }
    }
    handle.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn credentials_never_appear_in_reports() {
    for config in [TestbedConfig::default(), TestbedConfig::vulnerable()] {
        let (report, handle) = scan(config, true).await;
        let target = target_for(&handle).await;
        let json = serde_json::to_string(&report).unwrap();
        for secret in [&target.valid_credentials.1, &target.invalid_credentials.1] {
            assert!(!json.contains(secret.as_str()), "secret leaked into report");
            let encoded: String = url::form_urlencoded::byte_serialize(secret.as_bytes()).collect();
            assert!(!json.contains(&encoded), "encoded secret leaked into report");
        }
        handle.shutdown().await;
    }
}

#[tokio::test]
async fn unreachable_target_is_an_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    let target = TargetConfig::new(
        format!("http://127.0.0.1:{port}").parse().unwrap(),
        ("alice", "pw-123456"),
        "wrong-pw",
        "nobody",
    );
    let err = run_scan(target, &default_checklist(), 2).await.unwrap_err();
    assert!(matches!(err, ScanError::Unreachable { .. }), "{err}");
}

async fn reqwest_get(url: &str) -> String {
    let target = TargetConfig::new(url.parse().unwrap(), ("x", "yyy"), "zzz", "n");
    let ctx = ScanContext::new(target, Signatures::default()).unwrap();
    ctx.browser().get(url).await.unwrap().body
}
