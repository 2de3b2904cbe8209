use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use secaudit_core::checklist::ids::*;
use secaudit_core::{Evidence, Observation, ObservationValue};

use super::dynamic;

const STRICT_REFERRER: [&str; 2] = ["no-referrer", "strict-origin-when-cross-origin"];
const SENSITIVE_FEATURES: [&str; 3] = ["camera", "microphone", "geolocation"];

static MAX_AGE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"(?i)max-age\s*=\s*"?(\d+)"?"#).unwrap());
static FEATURE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)([a-z][a-z0-9-]*)\s*=\s*(\([^)]*\)|\*|self|'self'|"self")"#).unwrap());

/// Directive name → source list, lowercased; the first occurrence of a
/// directive wins.
fn parse_csp(value: &str) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    for directive in value.split(';') {
        let mut tokens = directive.split_whitespace();
        if let Some(name) = tokens.next() {
            out.entry(name.to_ascii_lowercase())
                .or_insert_with(|| tokens.map(|t| t.to_ascii_lowercase()).collect());
        }
    }
    out
}

/// Sources governing scripts: script-src, falling back to default-src.
fn script_sources(csp: &BTreeMap<String, Vec<String>>) -> Option<&Vec<String>> {
    csp.get("script-src").or_else(|| csp.get("default-src"))
}

fn csp_blocks_inline(csp: &BTreeMap<String, Vec<String>>) -> bool {
    script_sources(csp).is_some_and(|src| {
        // Browsers ignore 'unsafe-inline' once a nonce or hash is present.
        let keyed = src
            .iter()
            .any(|s| s.starts_with("'nonce-") || s.starts_with("'sha") || s == "'strict-dynamic'");
        keyed || !src.iter().any(|s| s == "'unsafe-inline'")
    })
}

fn csp_blocks_data(csp: &BTreeMap<String, Vec<String>>) -> bool {
    script_sources(csp).is_some_and(|src| !src.iter().any(|s| s == "data:"))
}

fn csp_restricts_sources(csp: &BTreeMap<String, Vec<String>>) -> bool {
    script_sources(csp).is_some_and(|src| !src.iter().any(|s| matches!(s.as_str(), "*" | "http:" | "https:")))
}

/// Whether camera, microphone and geolocation are each limited to
/// nothing or to the page's own origin.
fn permissions_restricted(value: &str) -> bool {
    let allowlists: BTreeMap<String, String> = FEATURE
        .captures_iter(value)
        .map(|c| (c[1].to_ascii_lowercase(), c[2].to_ascii_lowercase()))
        .collect();
    SENSITIVE_FEATURES.iter().all(|f| {
        allowlists.get(*f).is_some_and(|a| {
            let inner = a.trim_start_matches('(').trim_end_matches(')');
            inner.split_whitespace().all(|t| t.trim_matches(|c| c == '"' || c == '\'') == "self")
        })
    })
}

/// Observations for the twelve security-header parameters, from the
/// headers of one response. `request` describes that response's request
/// and is recorded as evidence.
pub fn check_security_headers(headers: &[(String, String)], request: &str) -> Vec<Observation> {
    let get = |name: &str| {
        headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.trim().to_string())
    };
    let shown = |name: &str, v: &Option<String>| match v {
        Some(v) => format!("{name}: {v}"),
        None => format!("{name}: <absent>"),
    };
    let obs = |id: &str, value: ObservationValue, name: &str, v: &Option<String>| {
        dynamic(id, value).with_all_evidence([Evidence::new(request, shown(name, v))])
    };
    let yes_no = ObservationValue::from_bool;

    let csp_raw = get("content-security-policy");
    let csp = csp_raw.as_deref().map(parse_csp).unwrap_or_default();
    let present = csp_raw.is_some();
    let xfo = get("x-frame-options");
    let xcto = get("x-content-type-options");
    let hsts = get("strict-transport-security");
    let max_age = hsts
        .as_deref()
        .and_then(|v| MAX_AGE.captures(v))
        .and_then(|c| c[1].parse::<u64>().ok())
        .filter(|n| *n > 0);
    let referrer = get("referrer-policy");
    let referrer_effective = referrer.as_deref().and_then(|v| {
        v.split(',')
            .map(|t| t.trim().to_ascii_lowercase())
            .rfind(|t| !t.is_empty())
    });
    let permissions = get("permissions-policy");

    vec![
        obs(CSP_PRESENT, yes_no(present), "Content-Security-Policy", &csp_raw),
        obs(CSP_BLOCKS_INLINE, yes_no(present && csp_blocks_inline(&csp)), "Content-Security-Policy", &csp_raw),
        obs(CSP_BLOCKS_DATA_URI, yes_no(present && csp_blocks_data(&csp)), "Content-Security-Policy", &csp_raw),
        obs(
            CSP_RESTRICTS_SOURCES,
            yes_no(present && csp_restricts_sources(&csp)),
            "Content-Security-Policy",
            &csp_raw,
        ),
        obs(X_FRAME_OPTIONS, yes_no(xfo.as_deref().is_some_and(|v| !v.is_empty())), "X-Frame-Options", &xfo),
        obs(
            X_CONTENT_TYPE_OPTIONS,
            yes_no(xcto.as_deref().is_some_and(|v| v.eq_ignore_ascii_case("nosniff"))),
            "X-Content-Type-Options",
            &xcto,
        ),
        obs(HSTS_PRESENT, yes_no(hsts.is_some()), "Strict-Transport-Security", &hsts),
        obs(
            HSTS_MAX_AGE,
            max_age.map_or(ObservationValue::No, |n| ObservationValue::categorical(n.to_string())),
            "Strict-Transport-Security",
            &hsts,
        ),
        obs(REFERRER_POLICY_SET, yes_no(referrer_effective.is_some()), "Referrer-Policy", &referrer),
        obs(
            REFERRER_POLICY_STRICT,
            yes_no(referrer_effective.as_deref().is_some_and(|v| STRICT_REFERRER.contains(&v))),
            "Referrer-Policy",
            &referrer,
        ),
        obs(PERMISSIONS_POLICY_PRESENT, yes_no(permissions.is_some()), "Permissions-Policy", &permissions),
        obs(
            PERMISSIONS_RESTRICTED,
            yes_no(permissions.as_deref().is_some_and(permissions_restricted)),
            "Permissions-Policy",
            &permissions,
        ),
    ]
}
