//! Probes that change server state: they create accounts, trip rate limits
//! and lock the test account. They only run when the target allows it.

use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use reqwest::Method;
use secaudit_core::checklist::ids::*;
use secaudit_core::{Observation, ObservationValue};

use super::auth::{accepted, login_as};
use super::injection::marker;
use super::{dynamic, unknown};
use crate::http::{Exchange, ScanContext};

/// Candidate passwords in increasing strength. The weakest one the server
/// accepts tells which policy it enforces.
pub const PASSWORD_LADDER: [&str; 4] = ["Ab1!x", "abcdefghijkl", "abcdefgh1234", "Abcdefgh12!@"];

/// Checklist value for the weakest accepted ladder rung.
fn complexity_for(rung: usize) -> ObservationValue {
    match rung {
        0 => ObservationValue::No,
        1 => ObservationValue::categorical("Only Length"),
        2 => ObservationValue::categorical("Length+letters+numbers"),
        _ => ObservationValue::categorical("Full"),
    }
}

static RULE_TEXT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)at least \d+ (characters|chars)|\d+ or more characters|must (contain|include|have)|(an? |one )?(uppercase|lowercase|upper-case|lower-case) (letter|character)|special (character|symbol)|letters and (numbers|digits)|too short",
    )
    .unwrap()
});
static LOCK_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(locked|lockout|temporarily (blocked|disabled|suspended))\b").unwrap());
static TOO_MANY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)too many (requests|attempts)|slow down|rate limit").unwrap());

struct Registered {
    username: String,
    email: String,
    password: &'static str,
}

pub async fn probe_registration(ctx: &ScanContext) -> Vec<Observation> {
    let t = &ctx.target;
    let nonce = marker("secaudit");
    let mut b = ctx.browser();
    let mut rejected: Vec<Exchange> = Vec::new();
    let mut account = None;
    let mut accepted_ex = None;
    for (i, password) in PASSWORD_LADDER.iter().enumerate() {
        let username = format!("{nonce}{i}");
        let email = format!("{username}@example.test");
        let form = [
            (t.username_field.as_str(), username.as_str()),
            (t.email_field.as_str(), email.as_str()),
            (t.password_field.as_str(), *password),
        ];
        let ex = match b.post_form(&t.register_path, &form).await {
            Ok(ex) => ex,
            Err(e) => {
                return [PASSWORD_COMPLEXITY, REVEALS_PASSWORD_RULES, EMAIL_VERIFICATION]
                    .iter()
                    .map(|id| unknown(id, e.clone()))
                    .collect()
            }
        };
        if ex.status.as_u16() < 400 {
            account = Some((i, Registered { username, email, password }));
            accepted_ex = Some(ex);
            break;
        }
        rejected.push(ex);
    }

    let complexity = match (&account, &accepted_ex) {
        (Some((rung, _)), Some(ex)) => dynamic(PASSWORD_COMPLEXITY, complexity_for(*rung))
            .with_all_evidence(rejected.iter().chain([ex]).map(|e| e.evidence(ctx)))
            .with_note(format!("weakest accepted password: rung {rung} of {}", PASSWORD_LADDER.len())),
        _ => unknown(PASSWORD_COMPLEXITY, "registration rejected every candidate password")
            .with_all_evidence(rejected.iter().map(|e| e.evidence(ctx))),
    };

    let revealing = rejected.iter().find_map(|e| RULE_TEXT.find(&e.body).map(|m| (e, m.as_str().to_string())));
    let rules = match (revealing, rejected.first()) {
        (Some((ex, text)), _) => dynamic(REVEALS_PASSWORD_RULES, ObservationValue::Yes)
            .with_all_evidence([ex.evidence_around(ctx, &text)])
            .with_note("rejection message states the password rules"),
        (None, Some(ex)) => dynamic(REVEALS_PASSWORD_RULES, ObservationValue::No)
            .with_all_evidence([ex.evidence(ctx)])
            .with_note(format!("{} rejections without rule text", rejected.len())),
        (None, None) => dynamic(REVEALS_PASSWORD_RULES, ObservationValue::No)
            .with_all_evidence(accepted_ex.iter().map(|e| e.evidence(ctx)))
            .with_note("no password was rejected, so no rules were disclosed"),
    };

    let verification = match account {
        Some((_, acct)) => email_verification(ctx, &acct).await,
        None => unknown(EMAIL_VERIFICATION, "no account could be registered"),
    };
    vec![complexity, rules, verification]
}

async fn email_verification(ctx: &ScanContext, acct: &Registered) -> Observation {
    let Some(sink) = ctx.target.mail_sink_url.clone() else {
        return unknown(EMAIL_VERIFICATION, "no mail sink configured");
    };
    let mut b = ctx.browser();
    let l = match login_as(&mut b, &acct.username, acct.password, &[], false).await {
        Ok(l) => l,
        Err(e) => return unknown(EMAIL_VERIFICATION, e),
    };
    let attempt = l.submission().evidence(ctx);
    if l.password_accepted {
        return dynamic(EMAIL_VERIFICATION, ObservationValue::No)
            .with_all_evidence([attempt])
            .with_note("a freshly registered, unverified account could log in");
    }
    let mail = match b.send(Method::GET, sink, &[], true).await {
        Ok(ex) => ex,
        Err(e) => return unknown(EMAIL_VERIFICATION, format!("mail sink: {e}")),
    };
    if mail.body.contains(&acct.email) {
        dynamic(EMAIL_VERIFICATION, ObservationValue::Yes)
            .with_all_evidence([attempt, mail.evidence_around(ctx, &acct.email)])
            .with_note("login refused until the mailed link is followed")
    } else {
        unknown(EMAIL_VERIFICATION, "login was refused but no verification mail was sent")
            .with_all_evidence([attempt, mail.evidence(ctx)])
    }
}

/// How a response reacts to excess login attempts, if it does at all.
fn throttle_kind(ctx: &ScanContext, ex: &Exchange) -> Option<&'static str> {
    if ctx.signatures.captcha_markers.is_match(&ex.body) {
        Some("CAPTCHA")
    } else if ex.status.as_u16() == 423 || LOCK_TEXT.is_match(&ex.body) {
        Some("Lockout")
    } else if ex.status.as_u16() == 429 || ex.header("retry-after").is_some() || TOO_MANY.is_match(&ex.body) {
        Some("Error Code")
    } else {
        None
    }
}

pub async fn probe_rate_limit(ctx: &ScanContext) -> Vec<Observation> {
    let t = &ctx.target;
    let wrong = t.invalid_credentials.1.clone();
    let mut b = ctx.browser();
    let mut sent: Vec<Exchange> = Vec::new();
    let mut hit = None;
    for i in 0..t.burst_size {
        // Distinct usernames keep per-account lockout out of the picture.
        let user = format!("{}-{i}", t.nonexistent_username);
        let form = vec![
            (t.username_field.clone(), user),
            (t.password_field.clone(), wrong.clone()),
        ];
        let ex = match b.send(Method::POST, t.url(&t.login_path), &form, false).await {
            Ok(ex) => ex,
            Err(e) => return vec![unknown(RATE_LIMIT, e.clone()), unknown(RATE_LIMIT_RESPONSE, e)],
        };
        if let Some(kind) = throttle_kind(ctx, &ex) {
            hit = Some((i + 1, kind, ex));
            break;
        }
        sent.push(ex);
    }
    // Let the window drain before anything else logs in.
    tokio::time::sleep(Duration::from_millis(1100)).await;
    match hit {
        Some((n, kind, ex)) => {
            let ev = ex.evidence(ctx);
            vec![
                dynamic(RATE_LIMIT, ObservationValue::Yes)
                    .with_all_evidence([ev.clone()])
                    .with_note(format!("throttled at request {n} of a {}-request burst", t.burst_size)),
                dynamic(RATE_LIMIT_RESPONSE, ObservationValue::categorical(kind)).with_all_evidence([ev]),
            ]
        }
        None => {
            let ev = sent.last().map(|e| e.evidence(ctx));
            vec![
                dynamic(RATE_LIMIT, ObservationValue::No)
                    .with_all_evidence(ev)
                    .with_note(format!("{} rapid attempts, none throttled", t.burst_size)),
                dynamic(RATE_LIMIT_RESPONSE, ObservationValue::NotApplicable).with_note("no rate limiting observed"),
            ]
        }
    }
}

pub async fn probe_lockout(ctx: &ScanContext) -> Vec<Observation> {
    let t = &ctx.target;
    let (user, pass) = t.valid_credentials.clone();
    let wrong = t.invalid_credentials.1.clone();
    let mut failures: Vec<Exchange> = Vec::new();
    let mut b = ctx.browser();
    for _ in 0..t.max_failed_attempts {
        match login_as(&mut b, &user, &wrong, &[], false).await {
            Ok(l) => failures.push(l.submission().clone()),
            Err(e) => return vec![unknown(LOCKOUT, e.clone()), unknown(CAPTCHA, e)],
        }
    }
    let mut fresh = ctx.browser();
    let after = match login_as(&mut fresh, &user, &pass, &[], false).await {
        Ok(l) => l,
        Err(e) => return vec![unknown(LOCKOUT, e.clone()), unknown(CAPTCHA, e)],
    };
    let after_ex = after.submission().clone();

    let locked_at = failures
        .iter()
        .position(|e| e.status.as_u16() == 423 || LOCK_TEXT.is_match(&e.body));
    let locked_after = !after.password_accepted && (after_ex.status.as_u16() == 423 || LOCK_TEXT.is_match(&after_ex.body));
    let lockout = match locked_at {
        Some(i) => dynamic(LOCKOUT, ObservationValue::Yes)
            .with_all_evidence([failures[i].evidence(ctx), after_ex.evidence(ctx)])
            .with_note(format!("locked after {} failed attempts", i + 1)),
        None if locked_after => dynamic(LOCKOUT, ObservationValue::Yes)
            .with_all_evidence([after_ex.evidence(ctx)])
            .with_note("valid credentials refused after the failed attempts"),
        None => dynamic(LOCKOUT, ObservationValue::No)
            .with_all_evidence(failures.last().map(|e| e.evidence(ctx)).into_iter().chain([after_ex.evidence(ctx)]))
            .with_note(format!("{} failed attempts without a lock", failures.len())),
    };

    let challenged = failures
        .iter()
        .position(|e| ctx.signatures.captcha_markers.is_match(&e.body) && !accepted(ctx, e));
    let captcha = match challenged {
        Some(i) => {
            let ex = &failures[i];
            let needle = ctx.signatures.captcha_markers.find(&ex.body).unwrap_or_default().to_string();
            dynamic(CAPTCHA, ObservationValue::Yes)
                .with_all_evidence([ex.evidence_around(ctx, &needle)])
                .with_note(format!("challenge shown after {} failed attempts", i + 1))
        }
        None => dynamic(CAPTCHA, ObservationValue::No)
            .with_all_evidence(failures.last().map(|e| e.evidence(ctx)))
            .with_note(format!("{} failed attempts without a challenge", failures.len())),
    };
    vec![lockout, captcha]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_maps_to_checklist_values() {
        assert_eq!(complexity_for(0), ObservationValue::No);
        assert_eq!(complexity_for(1), ObservationValue::categorical("Only Length"));
        assert_eq!(complexity_for(3), ObservationValue::categorical("Full"));
    }

    #[test]
    fn rule_text_detection() {
        assert!(RULE_TEXT.is_match("Password must be at least 8 characters long."));
        assert!(RULE_TEXT.is_match("needs an uppercase letter"));
        assert!(!RULE_TEXT.is_match("Registration failed. Please choose a different password."));
    }

    #[test]
    fn lock_wording() {
        assert!(LOCK_TEXT.is_match("This account is temporarily locked"));
        assert!(!LOCK_TEXT.is_match("Invalid username or password."));
    }
}
