//! Session cookie attributes and the session lifecycle around login.

use std::sync::LazyLock;
use std::time::{SystemTime, UNIX_EPOCH};

use regex::Regex;
use secaudit_core::checklist::ids::*;
use secaudit_core::{Evidence, Observation, ObservationValue};

use super::auth::{login, profile_check, session_cookie_name};
use super::{dynamic, unknown};
use crate::http::{mask_cookie, Exchange, ScanContext};
use crate::target::TIMEOUT_ALLOWANCE;

static URL_ATTR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)\b(?:href|action|src)\s*=\s*["']([^"']*)["']"#).unwrap());
static SESSION_PARAM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)[?&;](?:phpsessid|jsessionid|sessid|sid|session_?id|sessionid)=[^&#\s]+").unwrap()
});

/// Observations for session creation and the Secure, HttpOnly and SameSite
/// attributes, from the `Set-Cookie` headers of the response that
/// established the session. Only the first header is examined; callers
/// pass the session cookie's headers.
pub fn check_cookie_flags(set_cookie_headers: &[String], request: &str) -> Vec<Observation> {
    let Some(header) = set_cookie_headers.first() else {
        let ev = Evidence::new(request, "Set-Cookie: <absent>");
        let na = |id: &str| dynamic(id, ObservationValue::NotApplicable).with_note("no session cookie");
        return vec![
            dynamic(SESSION_CREATION, ObservationValue::No).with_all_evidence([ev]),
            na(COOKIE_SECURE),
            na(COOKIE_HTTPONLY),
            na(COOKIE_SAMESITE),
        ];
    };
    let attrs: Vec<String> = header.split(';').skip(1).map(|a| a.trim().to_ascii_lowercase()).collect();
    let has = |name: &str| attrs.iter().any(|a| a == name);
    let samesite = attrs
        .iter()
        .filter_map(|a| a.strip_prefix("samesite="))
        .any(|v| matches!(v.trim(), "strict" | "lax" | "none"));
    let ev = Evidence::new(request, format!("Set-Cookie: {}", mask_cookie(header)));
    let obs = |id: &str, b: bool| dynamic(id, ObservationValue::from_bool(b)).with_all_evidence([ev.clone()]);
    vec![
        obs(SESSION_CREATION, true),
        obs(COOKIE_SECURE, has("secure")),
        obs(COOKIE_HTTPONLY, has("httponly")),
        obs(COOKIE_SAMESITE, samesite),
    ]
}

fn cookie_name_of(header: &str) -> &str {
    header.split_once('=').map_or(header, |(n, _)| n.trim())
}

pub async fn probe_cookies(ctx: &ScanContext) -> Vec<Observation> {
    let ids = [SESSION_CREATION, COOKIE_SECURE, COOKIE_HTTPONLY, COOKIE_SAMESITE];
    let mut b = ctx.browser();
    let exchanges = match async {
        let page = b.get(&ctx.target.login_path).await?;
        let l = login(&mut b, true).await?;
        let mut all = vec![page];
        all.extend(l.chain);
        Ok::<_, String>(all)
    }
    .await
    {
        Ok(e) => e,
        Err(e) => return ids.iter().map(|id| unknown(id, e.clone())).collect(),
    };
    let names: Vec<String> = exchanges
        .iter()
        .flat_map(|e| e.set_cookies())
        .map(|c| cookie_name_of(&c).to_string())
        .filter(|n| !n.is_empty())
        .collect();
    let name = session_cookie_name(ctx, names.iter().map(String::as_str));
    let establishing = name.as_deref().and_then(|name| {
        exchanges.iter().find_map(|e| {
            let headers: Vec<String> = e.set_cookies().into_iter().filter(|c| cookie_name_of(c) == name).collect();
            (!headers.is_empty()).then(|| (e.request.clone(), headers))
        })
    });
    match establishing {
        Some((request, headers)) => check_cookie_flags(&headers, &request),
        None => check_cookie_flags(&[], &exchanges[0].request),
    }
}

fn planted_id() -> String {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    format!("fixprobe{:x}{:x}", nanos, std::process::id())
}

/// URLs a page points at: redirect targets plus href/action/src values.
fn harvested_urls(exchanges: &[&Exchange]) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, ex) in exchanges.iter().enumerate() {
        if let Some(loc) = ex.header("location") {
            out.push((i, loc.to_string()));
        }
        for c in URL_ATTR.captures_iter(&ex.body) {
            out.push((i, c[1].to_string()));
        }
    }
    out
}

pub async fn probe_session_lifecycle(ctx: &ScanContext) -> Vec<Observation> {
    let ids = [SESSION_REGENERATED, FIXATION_PROTECTION, SESSION_COOKIE_ONLY, SESSION_TIMEOUT];
    let t = &ctx.target;
    let mut b = ctx.browser();
    let first = async {
        let page = b.get(&t.login_path).await?;
        let pre_names: Vec<String> = b.cookies().keys().cloned().collect();
        let name = session_cookie_name(ctx, pre_names.iter().map(String::as_str));
        let pre = name.as_deref().and_then(|n| b.cookie(n)).map(str::to_string);
        let l = login(&mut b, true).await?;
        Ok::<_, String>((page, pre, l))
    }
    .await;
    let (page, pre, l) = match first {
        Ok(v) => v,
        Err(e) => return ids.iter().map(|id| unknown(id, e.clone())).collect(),
    };
    if !l.authenticated && l.password_accepted && b.cookies().is_empty() {
        return ids
            .iter()
            .map(|id| dynamic(id, ObservationValue::NotApplicable).with_note("login accepted but no session was established"))
            .collect();
    }
    if !l.authenticated {
        let ev = l.last().evidence(ctx);
        return ids
            .iter()
            .map(|id| unknown(id, "login with the valid credentials failed").with_all_evidence([ev.clone()]))
            .collect();
    }
    let names: Vec<String> = b.cookies().keys().cloned().collect();
    let name = session_cookie_name(ctx, names.iter().map(String::as_str));
    let post = name.as_deref().and_then(|n| b.cookie(n)).map(str::to_string);
    let mut out = Vec::new();

    // Regeneration: the cookie value before and after login.
    let regen_ev = Evidence::new(
        format!("{} then {}", page.request, l.submission().request),
        format!(
            "session cookie before login: {}; after login: {}",
            pre.as_ref().map_or("<none>".into(), |v| format!("<{} chars>", v.len())),
            post.as_ref().map_or("<none>".into(), |v| format!("<{} chars>", v.len())),
        ),
    );
    out.push(match (&pre, &post) {
        (_, None) => dynamic(SESSION_REGENERATED, ObservationValue::NotApplicable).with_note("no session cookie"),
        (None, Some(_)) => dynamic(SESSION_REGENERATED, ObservationValue::Yes)
            .with_all_evidence([regen_ev])
            .with_note("session cookie first issued at login"),
        (Some(a), Some(b)) => {
            let note = if a == b { "identifier unchanged by login" } else { "identifier changed at login" };
            dynamic(SESSION_REGENERATED, ObservationValue::from_bool(a != b))
                .with_all_evidence([regen_ev])
                .with_note(note)
        }
    });

    // Session ids in URLs of pages reached after login.
    let mut pages: Vec<&Exchange> = l.chain.iter().collect();
    pages.extend(l.profile.iter());
    let urls = harvested_urls(&pages);
    let leak = urls.iter().find(|(_, u)| {
        SESSION_PARAM.is_match(u) || post.as_deref().is_some_and(|v| v.len() >= 8 && u.contains(v))
    });
    out.push(match (leak, &post) {
        (Some((i, url)), _) => {
            let ex = pages[*i];
            let shown = SESSION_PARAM.replace_all(url, |c: &regex::Captures| {
                let s = &c[0];
                let cut = s.find('=').map_or(s.len(), |i| i + 1);
                format!("{}<id>", &s[..cut])
            });
            let shown = match post.as_deref() {
                Some(v) if v.len() >= 8 => shown.replace(v, "<id>"),
                _ => shown.into_owned(),
            };
            dynamic(SESSION_COOKIE_ONLY, ObservationValue::No)
                .with_all_evidence([Evidence::new(ex.request.clone(), format!("URL carries session id: {shown}"))])
        }
        (None, None) => dynamic(SESSION_COOKIE_ONLY, ObservationValue::NotApplicable).with_note("no session cookie"),
        (None, Some(_)) => {
            let ex = pages.last().expect("at least one page");
            dynamic(SESSION_COOKIE_ONLY, ObservationValue::Yes)
                .with_all_evidence([Evidence::new(
                    ex.request.clone(),
                    format!("{} URLs harvested from {} post-login responses, none carry the session id", urls.len(), pages.len()),
                )])
        }
    });

    let (fixation, timeout) = futures::join!(fixation(ctx, name.clone()), timeout(ctx, b));
    out.push(fixation);
    out.push(timeout);
    out
}

async fn fixation(ctx: &ScanContext, name: Option<String>) -> Observation {
    let Some(name) = name else {
        return dynamic(FIXATION_PROTECTION, ObservationValue::NotApplicable).with_note("no session cookie");
    };
    if ctx.target.profile_path.is_none() {
        return unknown(FIXATION_PROTECTION, "no profile_path to test the planted session against");
    }
    let planted = planted_id();
    let result = async {
        let mut victim = ctx.browser();
        victim.set_cookie(&name, &planted);
        victim.get(&ctx.target.login_path).await?;
        let l = login(&mut victim, true).await?;
        if !l.authenticated {
            return Err("login with a planted session id failed".to_string());
        }
        let mut attacker = ctx.browser();
        attacker.set_cookie(&name, &planted);
        let (ok, ex) = profile_check(&mut attacker).await?.expect("profile path checked above");
        Ok((ok, ex))
    }
    .await;
    match result {
        Err(e) => unknown(FIXATION_PROTECTION, e),
        Ok((honored, ex)) => {
            let summary = format!(
                "{} (planted id {})",
                ex.summary(ctx),
                if honored { "is authenticated" } else { "is not authenticated" }
            );
            dynamic(FIXATION_PROTECTION, ObservationValue::from_bool(!honored))
                .with_all_evidence([Evidence::new(format!("{} with {name}=<planted>", ex.request), summary)])
        }
    }
}

async fn timeout(ctx: &ScanContext, mut b: crate::http::Browser<'_>) -> Observation {
    let budget = ctx.target.session_timeout_budget();
    if budget > TIMEOUT_ALLOWANCE {
        return unknown(
            SESSION_TIMEOUT,
            format!("timeout budget {budget:?} exceeds the {TIMEOUT_ALLOWANCE:?} allowance"),
        );
    }
    if ctx.target.profile_path.is_none() {
        return unknown(SESSION_TIMEOUT, "no profile_path to re-check the session against");
    }
    tokio::time::sleep(budget).await;
    match profile_check(&mut b).await {
        Ok(Some((still_valid, ex))) => {
            let summary = format!("after {:.1}s idle: {}", budget.as_secs_f64(), ex.summary(ctx));
            dynamic(SESSION_TIMEOUT, ObservationValue::from_bool(!still_valid))
                .with_all_evidence([Evidence::new(ex.request.clone(), summary)])
        }
        Ok(None) => unknown(SESSION_TIMEOUT, "no profile_path"),
        Err(e) => unknown(SESSION_TIMEOUT, e),
    }
}
