//! Reflection, SQL metacharacter, duplicate-parameter and CSRF probes.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::LazyLock;
use std::time::{SystemTime, UNIX_EPOCH};

use regex::Regex;
use reqwest::Method;
use secaudit_core::checklist::ids::*;
use secaudit_core::{Observation, ObservationValue};

use super::auth::{accepted, login, login_as};
use super::{dynamic, unknown};
use crate::http::{Exchange, ScanContext};

static FORM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<form\b([^>]*)>(.*?)</form>").unwrap());
static INPUT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<input\b([^>]*)>").unwrap());
static ATTR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)([a-z_:-]+)\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>]+))"#).unwrap());
static TOKEN_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)csrf|xsrf|anti.?forgery|authenticity|_token|nonce").unwrap());

static COUNTER: AtomicU64 = AtomicU64::new(0);

/// A marker unique within this process, letters and digits only so it
/// survives any encoding unchanged.
pub fn marker(prefix: &str) -> String {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    format!("{prefix}{:x}{n}", nanos & 0xffff_ffff)
}

pub async fn probe_xss(ctx: &ScanContext) -> Vec<Observation> {
    let ids = [JS_EXECUTION, HTML_INJECTION];
    let Some(path) = ctx.target.search_path.clone() else {
        return ids.iter().map(|id| unknown(id, "no reflecting endpoint configured")).collect();
    };
    let field = ctx.target.search_field.clone();
    let m = marker("xss");
    let script = format!("<script>alert(\"{m}\")</script>");
    let tag = format!("<b data-probe=\"{m}\">{m}</b>");
    let mut b = ctx.browser();
    let mut out = Vec::new();
    for (id, payload) in [(JS_EXECUTION, &script), (HTML_INJECTION, &tag)] {
        let obs = match b.get_query(&path, &[(field.as_str(), payload.as_str())]).await {
            Err(e) => unknown(id, e),
            Ok(ex) if ex.status.is_server_error() => {
                unknown(id, "reflecting endpoint returned a server error").with_all_evidence([ex.evidence(ctx)])
            }
            Ok(ex) => {
                let raw = ex.body.contains(payload.as_str());
                let note = if raw {
                    "payload reflected verbatim"
                } else if ex.body.contains(&m) {
                    "marker reflected with markup encoded"
                } else {
                    "marker not reflected"
                };
                dynamic(id, ObservationValue::from_bool(raw))
                    .with_all_evidence([ex.evidence_around(ctx, &m)])
                    .with_note(note)
            }
        };
        out.push(obs);
    }
    out
}

pub async fn probe_hpp(ctx: &ScanContext) -> Vec<Observation> {
    let Some(path) = ctx.target.search_path.clone() else {
        return vec![unknown(HPP, "no reflecting endpoint configured")];
    };
    let field = ctx.target.search_field.clone();
    let (first, last) = (marker("hppfirst"), marker("hpplast"));
    let mut b = ctx.browser();
    let ex = match b.get_query(&path, &[(field.as_str(), first.as_str()), (field.as_str(), last.as_str())]).await {
        Ok(ex) => ex,
        Err(e) => return vec![unknown(HPP, e)],
    };
    let (f, l) = (ex.body.contains(&first), ex.body.contains(&last));
    let behavior = match (f, l) {
        (true, true) => Some("concatenated"),
        (true, false) => Some("first-wins"),
        (false, true) => Some("last-wins"),
        (false, false) if ex.status.is_client_error() => Some("rejected"),
        (false, false) => None,
    };
    let needle = if f { &first } else { &last };
    let ev = ex.evidence_around(ctx, needle);
    vec![match behavior {
        Some(b) => dynamic(HPP, ObservationValue::categorical(b)).with_all_evidence([ev]),
        None => unknown(HPP, "neither value was reflected").with_all_evidence([ev]),
    }]
}

pub async fn probe_sqli(ctx: &ScanContext) -> Vec<Observation> {
    match sqli(ctx).await {
        Ok(o) => vec![o],
        Err(e) => vec![unknown(SPECIAL_CHARS_ESCAPED, e)],
    }
}

async fn sqli(ctx: &ScanContext) -> Result<Observation, String> {
    let t = &ctx.target;
    let sig = &ctx.signatures.sql_errors;
    let mut seen: Vec<Exchange> = Vec::new();
    let leaked = |ex: &Exchange| sig.find(&ex.body).map(str::to_string);

    if let Some(path) = t.search_path.clone() {
        let mut b = ctx.browser();
        for payload in ["'", "\"", "')", "' OR '1'='1"] {
            let ex = b.get_query(&path, &[(t.search_field.as_str(), payload)]).await?;
            if let Some(hit) = leaked(&ex) {
                return Ok(dynamic(SPECIAL_CHARS_ESCAPED, ObservationValue::No)
                    .with_all_evidence([ex.evidence_around(ctx, &hit)])
                    .with_note("database error signature in response"));
            }
            seen.push(ex);
        }
    }

    let wrong = t.invalid_credentials.1.clone();
    let user = t.valid_credentials.0.clone();
    let attempts = [
        ("'".to_string(), wrong.clone()),
        ("' OR '1'='1' -- ".to_string(), wrong.clone()),
        (format!("{user}'-- "), wrong.clone()),
        (format!("{user}'#"), wrong),
    ];
    for (u, p) in attempts {
        let mut b = ctx.browser();
        let l = login_as(&mut b, &u, &p, &[], false).await?;
        let ex = l.submission().clone();
        if let Some(hit) = leaked(&ex) {
            return Ok(dynamic(SPECIAL_CHARS_ESCAPED, ObservationValue::No)
                .with_all_evidence([ex.evidence_around(ctx, &hit)])
                .with_note("database error signature in response"));
        }
        if l.password_accepted {
            return Ok(dynamic(SPECIAL_CHARS_ESCAPED, ObservationValue::No)
                .with_all_evidence([ex.evidence(ctx)])
                .with_note("metacharacter payload changed the authentication outcome"));
        }
        seen.push(ex);
    }
    let evidence = [seen.first(), seen.last()].into_iter().flatten().map(|e| e.evidence(ctx)).collect::<Vec<_>>();
    Ok(dynamic(SPECIAL_CHARS_ESCAPED, ObservationValue::Yes)
        .with_all_evidence(evidence)
        .with_note(format!("{} payloads, no error signature or authentication change", seen.len())))
}

struct HtmlForm {
    action: String,
    method: String,
    fields: Vec<(String, String, String)>,
}

fn attrs(tag: &str) -> Vec<(String, String)> {
    ATTR.captures_iter(tag)
        .map(|c| {
            let v = c.get(2).or(c.get(3)).or(c.get(4)).map_or("", |m| m.as_str());
            (c[1].to_ascii_lowercase(), v.to_string())
        })
        .collect()
}

/// The first POST form on the page.
fn post_form(body: &str) -> Option<HtmlForm> {
    FORM.captures_iter(body).find_map(|c| {
        let form_attrs = attrs(&c[1]);
        let get = |k: &str| form_attrs.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone());
        let method = get("method").unwrap_or_else(|| "get".into()).to_ascii_lowercase();
        if method != "post" {
            return None;
        }
        let fields = INPUT
            .captures_iter(&c[2])
            .filter_map(|i| {
                let a = attrs(&i[1]);
                let get = |k: &str| a.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone());
                Some((get("name")?, get("value").unwrap_or_default(), get("type").unwrap_or_default().to_ascii_lowercase()))
            })
            .collect();
        Some(HtmlForm {
            action: get("action").unwrap_or_default(),
            method,
            fields,
        })
    })
}

pub async fn probe_csrf(ctx: &ScanContext) -> Vec<Observation> {
    let ids = [CSRF_TOKEN_PRESENT, CSRF_VALIDATION];
    match csrf(ctx).await {
        Ok(o) => o,
        Err(e) => ids.iter().map(|id| unknown(id, e.clone())).collect(),
    }
}

async fn csrf(ctx: &ScanContext) -> Result<Vec<Observation>, String> {
    let Some(path) = ctx.target.form_path.clone() else {
        return Err("no state-changing form configured".into());
    };
    let mut b = ctx.browser();
    b.get(&ctx.target.login_path).await?;
    let l = login(&mut b, true).await?;
    if !l.authenticated {
        return Err("login with the valid credentials failed".into());
    }
    let page = b.get(&path).await?;
    let Some(form) = post_form(&page.body) else {
        return Err(format!("no POST form found at {path}"));
    };
    let action = page.url.join(&form.action).map_err(|e| e.to_string())?;
    let token = form
        .fields
        .iter()
        .find(|(name, _, ty)| ty == "hidden" && TOKEN_NAME.is_match(name))
        .map(|(name, value, _)| (name.clone(), value.clone()));
    let Some((token_name, token_value)) = token else {
        return Ok(vec![
            dynamic(CSRF_TOKEN_PRESENT, ObservationValue::No)
                .with_all_evidence([page.evidence_around(ctx, "<form")])
                .with_note(format!("{} form fields, none a hidden token", form.fields.len())),
            dynamic(CSRF_VALIDATION, ObservationValue::NotApplicable).with_note("no token to validate"),
        ]);
    };
    ctx.add_secret(token_value.clone());
    let present = dynamic(CSRF_TOKEN_PRESENT, ObservationValue::Yes)
        .with_all_evidence([page.evidence_around(ctx, &token_name)])
        .with_note(format!("hidden field '{token_name}'"));

    let fields_with = |token: Option<&str>| -> Vec<(String, String)> {
        form.fields
            .iter()
            .filter(|(n, _, _)| *n != token_name || token.is_some())
            .map(|(n, v, _)| {
                if *n == token_name {
                    (n.clone(), token.unwrap_or_default().to_string())
                } else {
                    (n.clone(), v.clone())
                }
            })
            .collect()
    };
    let mutated: String = token_value
        .chars()
        .rev()
        .map(|c| if c.is_ascii_digit() { 'x' } else { c })
        .collect::<String>()
        + "0";
    let method = if form.method == "post" { Method::POST } else { Method::GET };
    let rejected = |ex: &Exchange| ex.status.is_client_error() || (ex.is_redirect() && !accepted(ctx, ex));
    let missing = b.send(method.clone(), action.clone(), &fields_with(None), true).await?;
    let wrong = b.send(method.clone(), action.clone(), &fields_with(Some(&mutated)), true).await?;
    let valid = b.send(method, action, &fields_with(Some(&token_value)), true).await?;
    let evidence = [missing.evidence(ctx), wrong.evidence(ctx), valid.evidence(ctx)];
    let validation = if rejected(&valid) || valid.status.is_server_error() {
        unknown(CSRF_VALIDATION, "the form rejected its own token").with_all_evidence(evidence)
    } else {
        let enforced = rejected(&missing) && rejected(&wrong);
        let note = match (rejected(&missing), rejected(&wrong)) {
            (true, true) => "requests without or with a wrong token were refused",
            (false, _) => "request without the token was accepted",
            (true, false) => "request with a wrong token was accepted",
        };
        dynamic(CSRF_VALIDATION, ObservationValue::from_bool(enforced))
            .with_all_evidence(evidence)
            .with_note(note)
    };
    Ok(vec![present, validation])
}
