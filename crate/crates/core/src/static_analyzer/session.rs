//! Session handling and cookie configuration as seen in source.

use std::sync::OnceLock;

use regex::Regex;

use crate::checklist::ids;
use crate::observation::{Evidence, Observation, ObservationValue, Source};

use super::corpus::CodeCorpus;
use super::rules::{excerpt, RuleSet, MAX_EVIDENCE};

/// How many lines after a successful credential check a regeneration call may
/// appear and still count as part of the login branch.
pub const REGENERATION_WINDOW: usize = 15;

struct Patterns {
    primitive: Regex,
    creation: Regex,
    regenerate: Regex,
    auth_success: Regex,
    secure: Regex,
    httponly: Regex,
    samesite: Regex,
    cookie_params: Regex,
    setcookie: Regex,
    truthy: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        primitive: Regex::new(
            r"\bsession_start\s*\(|\bsession_regenerate_id\s*\(|\$_SESSION\b|\bsession_set_cookie_params\s*\(|\bsetcookie\s*\(",
        )
        .unwrap(),
        creation: Regex::new(r"\bsession_start\s*\(|\$_SESSION\s*\[").unwrap(),
        regenerate: Regex::new(r"\bsession_regenerate_id\s*\(").unwrap(),
        auth_success: Regex::new(
            r#"\bpassword_verify\s*\(|\$_SESSION\s*\[\s*['"](user_id|userid|uid|user|username|logged_in|authenticated|auth)['"]\s*\]\s*=[^=]"#,
        )
        .unwrap(),
        secure: Regex::new(
            r#"(?i)['"]secure['"]\s*=>\s*(true|1)\b|session\.cookie_secure['"]\s*,\s*['"]?(1|true|on)\b"#,
        )
        .unwrap(),
        httponly: Regex::new(
            r#"(?i)['"]httponly['"]\s*=>\s*(true|1)\b|session\.cookie_httponly['"]\s*,\s*['"]?(1|true|on)\b"#,
        )
        .unwrap(),
        samesite: Regex::new(
            r#"(?i)['"]samesite['"]\s*=>\s*['"](strict|lax|none)['"]|session\.cookie_samesite['"]\s*,\s*['"](strict|lax|none)['"]|samesite=(strict|lax|none)\b"#,
        )
        .unwrap(),
        cookie_params: Regex::new(r"\bsession_set_cookie_params\s*\(").unwrap(),
        setcookie: Regex::new(r"\bsetcookie\s*\(").unwrap(),
        truthy: Regex::new(r"(?i)^\s*(true|1)\s*$").unwrap(),
    })
}

/// Top-level comma-separated arguments of the call whose `(` is at `open`.
/// Stops at the end of the line if the call spans several lines.
fn call_args(line: &str, open: usize) -> Vec<String> {
    let mut args = vec![String::new()];
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    for c in line[open..].chars() {
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            args.last_mut().unwrap().push(c);
            continue;
        }
        match c {
            '(' | '[' => {
                depth += 1;
                if depth == 1 {
                    continue;
                }
            }
            ')' | ']' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    break;
                }
            }
            ',' if depth == 1 => {
                args.push(String::new());
                continue;
            }
            '\'' | '"' => quote = Some(c),
            _ => {}
        }
        args.last_mut().unwrap().push(c);
    }
    args.into_iter().map(|a| a.trim().to_string()).collect()
}

/// Positional flag arguments: session_set_cookie_params(lifetime, path,
/// domain, secure, httponly) and setcookie(name, value, expires, path,
/// domain, secure, httponly).
fn positional_flag(line: &str, httponly: bool) -> bool {
    let p = patterns();
    let check = |re: &Regex, base: usize| {
        re.find_iter(line).any(|m| {
            let args = call_args(line, m.end() - 1);
            if args.first().is_some_and(|a| a.starts_with('[')) {
                return false;
            }
            let idx = base + usize::from(httponly);
            args.get(idx).is_some_and(|a| p.truthy.is_match(a))
        })
    };
    check(&p.cookie_params, 3) || check(&p.setcookie, 5)
}

struct Site {
    path: String,
    line: usize,
    text: String,
}

impl Site {
    fn evidence(&self) -> Evidence {
        Evidence::new(format!("{}:{}", self.path, self.line), excerpt(&self.text))
    }
}

fn evidence(sites: &[&Site]) -> Vec<Evidence> {
    sites.iter().take(MAX_EVIDENCE).map(|s| s.evidence()).collect()
}

/// Observations for session creation, regeneration after login, the three
/// cookie flags, and failed-login logging (via the default rules).
pub fn analyze_session_and_logging(corpus: &CodeCorpus) -> Vec<Observation> {
    let mut out = analyze_session(corpus);
    if let Some(obs) = RuleSet::default_rules().evaluate_parameter(corpus, ids::FAILED_LOGIN_LOGGED) {
        out.push(obs);
    }
    out
}

pub(crate) fn analyze_session(corpus: &CodeCorpus) -> Vec<Observation> {
    let p = patterns();
    let mut sites = Vec::new();
    let mut per_file: Vec<Vec<(usize, String)>> = Vec::new();
    for file in corpus.files() {
        let lines = file.code_lines();
        for (n, text) in &lines {
            if p.primitive.is_match(text) || p.auth_success.is_match(text) {
                sites.push(Site {
                    path: file.path.clone(),
                    line: *n,
                    text: text.clone(),
                });
            }
        }
        per_file.push(lines);
    }

    let primitives: Vec<&Site> = sites.iter().filter(|s| p.primitive.is_match(&s.text)).collect();
    let ids_all = [
        ids::SESSION_CREATION,
        ids::SESSION_REGENERATED,
        ids::COOKIE_SECURE,
        ids::COOKIE_HTTPONLY,
        ids::COOKIE_SAMESITE,
    ];
    if primitives.is_empty() {
        return ids_all
            .iter()
            .map(|id| {
                Observation::new(*id, ObservationValue::NotApplicable, Source::Static).with_note("no session handling found")
            })
            .collect();
    }

    let mut out = Vec::new();
    let decided = |id: &str, hits: Vec<&Site>, yes_note: &str, no_note: &str| {
        if hits.is_empty() {
            Observation::new(id, ObservationValue::No, Source::Static)
                .with_all_evidence(evidence(&primitives))
                .with_note(no_note.to_string())
        } else {
            Observation::new(id, ObservationValue::Yes, Source::Static)
                .with_all_evidence(evidence(&hits))
                .with_note(yes_note.to_string())
        }
    };

    let created: Vec<&Site> = sites.iter().filter(|s| p.creation.is_match(&s.text)).collect();
    out.push(decided(ids::SESSION_CREATION, created, "session started", "no server-side session started"));

    // regenerate after a successful credential check in the same file
    let mut regenerated = Vec::new();
    for (fi, file) in corpus.files().iter().enumerate() {
        let lines = &per_file[fi];
        for (i, (_, text)) in lines.iter().enumerate() {
            if !p.regenerate.is_match(text) {
                continue;
            }
            let lo = i.saturating_sub(REGENERATION_WINDOW);
            let hi = (i + 6).min(lines.len());
            if lines[lo..hi].iter().any(|(_, l)| p.auth_success.is_match(l)) {
                if let Some(s) = sites.iter().find(|s| s.path == file.path && s.line == lines[i].0) {
                    regenerated.push(s);
                }
            }
        }
    }
    out.push(decided(
        ids::SESSION_REGENERATED,
        regenerated,
        "session id regenerated in the login branch",
        "no session id regeneration after login",
    ));

    let flag = |re: &Regex, httponly: Option<bool>| -> Vec<Evidence> {
        let mut ev = Vec::new();
        for file in corpus.files() {
            for (n, text) in file.code_lines() {
                let positional = httponly.is_some_and(|h| positional_flag(&text, h));
                if re.is_match(&text) || positional {
                    ev.push(Evidence::new(format!("{}:{n}", file.path), excerpt(&text)));
                }
            }
        }
        ev.truncate(MAX_EVIDENCE);
        ev
    };
    for (id, re, positional, name) in [
        (ids::COOKIE_SECURE, &p.secure, Some(false), "Secure"),
        (ids::COOKIE_HTTPONLY, &p.httponly, Some(true), "HttpOnly"),
        (ids::COOKIE_SAMESITE, &p.samesite, None, "SameSite"),
    ] {
        let ev = flag(re, positional);
        let obs = if ev.is_empty() {
            Observation::new(id, ObservationValue::No, Source::Static)
                .with_all_evidence(evidence(&primitives))
                .with_note(format!("no {name} cookie configuration found"))
        } else {
            Observation::new(id, ObservationValue::Yes, Source::Static)
                .with_all_evidence(ev)
                .with_note(format!("{name} cookie attribute configured"))
        };
        out.push(obs);
    }
    out
}
