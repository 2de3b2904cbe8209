//! Logging in as a browser would, plus the probes built directly on it:
//! login method, MFA and username enumeration.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use secaudit_core::checklist::ids::*;
use secaudit_core::{Evidence, Observation, ObservationValue};
use totp_rs::{Algorithm, Secret, TOTP};

use super::{dynamic, unknown};
use crate::http::{Browser, Exchange, ScanContext};

static OTP_PROMPT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)one[- ]time (pass)?code|verification code|authenticator|two[- ]factor|2fa|\botp\b|security code")
        .unwrap()
});
static SESSIONISH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)sess|sid|token|auth").unwrap());
static EXISTENCE: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"(?i)\bno (such )?(account|user)",
        r"(?i)\b(user(name)?|account|e-?mail) (was )?(not found|does not exist|doesn't exist|is not registered|not registered|unknown)",
        r"(?i)\bunknown (user(name)?|account)",
        r"(?i)\b(incorrect|wrong|invalid) password\b",
        r"(?i)\bpassword (is |was )?(incorrect|wrong|invalid)",
        r"(?i)\bpassword for this (account|user)",
    ]
    .iter()
    .map(|p| Regex::new(p).unwrap())
    .collect()
});

/// Result of walking the login flow.
pub struct Login {
    /// The password submission and every hop after it, MFA included.
    pub chain: Vec<Exchange>,
    /// Second-factor prompt seen after the password step, if any.
    pub challenge: Option<Exchange>,
    /// Whether the second factor was completed.
    pub mfa_completed: bool,
    /// Whether the password step was accepted.
    pub password_accepted: bool,
    /// Whether the session ended up authenticated.
    pub authenticated: bool,
    /// Profile page fetched to confirm authentication.
    pub profile: Option<Exchange>,
}

impl Login {
    pub fn submission(&self) -> &Exchange {
        &self.chain[0]
    }

    pub fn last(&self) -> &Exchange {
        self.chain.last().expect("chain is never empty")
    }
}

pub fn totp_code(secret: &str) -> Option<String> {
    let bytes = Secret::Encoded(secret.trim().to_uppercase()).to_bytes().ok()?;
    TOTP::new_unchecked(Algorithm::SHA1, 6, 1, 30, bytes).generate_current().ok()
}

fn is_login_url(ctx: &ScanContext, ex: &Exchange) -> bool {
    ex.url.path() == ctx.target.login_path
}

fn is_challenge(ctx: &ScanContext, ex: &Exchange) -> bool {
    let at_mfa = ctx.target.mfa_path.as_deref().is_some_and(|p| ex.url.path() == p);
    ex.status.is_success() && (at_mfa || OTP_PROMPT.is_match(&ex.body))
}

/// Whether a password submission was accepted, judged from the response
/// alone: a redirect away from the login page, or a success page that no
/// longer shows the login form.
pub fn accepted(ctx: &ScanContext, ex: &Exchange) -> bool {
    if ex.is_redirect() {
        return ex.location().is_some_and(|l| l.path() != ctx.target.login_path);
    }
    let form_again = ex.body.contains(&format!("name=\"{}\"", ctx.target.password_field));
    ex.status.is_success() && !form_again
}

/// Loads the profile page and reports whether it was served to an
/// authenticated session. `None` when no profile page is configured.
pub async fn profile_check(b: &mut Browser<'_>) -> Result<Option<(bool, Exchange)>, String> {
    let Some(path) = b.ctx.target.profile_path.clone() else {
        return Ok(None);
    };
    let ex = b.get(&path).await?;
    let ok = ex.status.is_success() && !ex.body.contains(&format!("name=\"{}\"", b.ctx.target.password_field));
    Ok(Some((ok, ex)))
}

/// Submits credentials on the login form and follows the flow, answering a
/// TOTP challenge when `complete_mfa` is set and a secret is configured.
pub async fn login_as(
    b: &mut Browser<'_>,
    username: &str,
    password: &str,
    extra: &[(&str, &str)],
    complete_mfa: bool,
) -> Result<Login, String> {
    let ctx = b.ctx;
    let t = &ctx.target;
    let mut form = vec![(t.username_field.as_str(), username), (t.password_field.as_str(), password)];
    form.extend_from_slice(extra);
    let submitted = b.post_form(&t.login_path, &form).await?;
    let mut chain = b.follow(submitted, 5).await?;
    let password_accepted = accepted(ctx, &chain[0]);

    let mut challenge = None;
    let mut mfa_completed = false;
    if password_accepted {
        if let Some(ch) = chain.iter().find(|e| is_challenge(ctx, e)).cloned() {
            if let (true, Some(secret)) = (complete_mfa, t.totp_secret.as_deref()) {
                if let Some(code) = totp_code(secret) {
                    ctx.add_secret(code.clone());
                    let action = ch.url.path().to_string();
                    let answer = b.post_form(&action, &[(t.otp_field.as_str(), code.as_str())]).await?;
                    mfa_completed = accepted(ctx, &answer) && !is_login_url(ctx, &answer);
                    chain.extend(b.follow(answer, 5).await?);
                }
            }
            challenge = Some(ch);
        }
    }

    let mut profile = None;
    let authenticated = match profile_check(b).await? {
        Some((ok, ex)) => {
            profile = Some(ex);
            ok
        }
        None => password_accepted && (challenge.is_none() || mfa_completed),
    };
    Ok(Login {
        chain,
        challenge,
        mfa_completed,
        password_accepted,
        authenticated,
        profile,
    })
}

/// Logs in with the target's valid credentials.
pub async fn login(b: &mut Browser<'_>, complete_mfa: bool) -> Result<Login, String> {
    let (user, pass) = b.ctx.target.valid_credentials.clone();
    login_as(b, &user, &pass, &[], complete_mfa).await
}

/// The session cookie name: configured, or guessed from the names seen.
pub fn session_cookie_name<'n>(ctx: &ScanContext, names: impl IntoIterator<Item = &'n str>) -> Option<String> {
    if let Some(n) = &ctx.target.session_cookie_name {
        return Some(n.clone());
    }
    let names: Vec<&str> = names.into_iter().collect();
    names
        .iter()
        .find(|n| SESSIONISH.is_match(n))
        .or(names.first())
        .map(|n| n.to_string())
}

pub async fn probe_login_method(ctx: &ScanContext) -> Vec<Observation> {
    match login_method(ctx).await {
        Ok(o) => vec![o],
        Err(e) => vec![unknown(POST_ONLY_LOGIN, e)],
    }
}

async fn login_method(ctx: &ScanContext) -> Result<Observation, String> {
    let t = &ctx.target;
    let (user, pass) = t.valid_credentials.clone();
    let mut via_get = ctx.browser();
    via_get.get(&t.login_path).await?;
    let ex = via_get
        .get_query(&t.login_path, &[(t.username_field.as_str(), user.as_str()), (t.password_field.as_str(), pass.as_str())])
        .await?;
    let get_evidence = ex.evidence(ctx);
    let get_accepted = ex.status.as_u16() < 400 && accepted(ctx, &ex);
    if get_accepted {
        return Ok(dynamic(POST_ONLY_LOGIN, ObservationValue::No)
            .with_all_evidence([get_evidence])
            .with_note("credentials in a GET query string were accepted"));
    }
    let mut via_post = ctx.browser();
    via_post.get(&t.login_path).await?;
    let l = login(&mut via_post, false).await?;
    let post_evidence = l.submission().evidence(ctx);
    if l.password_accepted {
        Ok(dynamic(POST_ONLY_LOGIN, ObservationValue::Yes).with_all_evidence([get_evidence, post_evidence]))
    } else {
        Ok(unknown(POST_ONLY_LOGIN, "GET login was refused but the POST login also failed")
            .with_all_evidence([get_evidence, post_evidence]))
    }
}

pub async fn probe_mfa(ctx: &ScanContext) -> Vec<Observation> {
    let mut b = ctx.browser();
    let l = match async {
        b.get(&ctx.target.login_path).await?;
        login(&mut b, true).await
    }
    .await
    {
        Ok(l) => l,
        Err(e) => return vec![unknown(MFA_ENABLED, e.clone()), unknown(MFA_TYPE, e)],
    };
    if !l.password_accepted {
        let reason = "login with the valid credentials failed";
        let ev = l.submission().evidence(ctx);
        return vec![
            unknown(MFA_ENABLED, reason).with_all_evidence([ev.clone()]),
            unknown(MFA_TYPE, reason).with_all_evidence([ev]),
        ];
    }
    let Some(ch) = &l.challenge else {
        let ev = l.last().evidence(ctx);
        return vec![
            dynamic(MFA_ENABLED, ObservationValue::No).with_all_evidence([ev]),
            dynamic(MFA_TYPE, ObservationValue::NotApplicable).with_note("no second factor"),
        ];
    };
    let ev = ch.evidence(ctx);
    let kind = if l.mfa_completed {
        Some("TOTP")
    } else {
        classify_challenge(&ch.body)
    };
    let type_obs = match kind {
        Some(k) => dynamic(MFA_TYPE, ObservationValue::categorical(k)).with_all_evidence([ev.clone()]),
        None => unknown(MFA_TYPE, "second-factor prompt does not identify its type").with_all_evidence([ev.clone()]),
    };
    let mut enabled = dynamic(MFA_ENABLED, ObservationValue::Yes).with_all_evidence([ev]);
    if l.mfa_completed {
        let done = l.last().evidence(ctx);
        enabled = enabled.with_all_evidence([done]);
    }
    vec![enabled, type_obs]
}

fn classify_challenge(body: &str) -> Option<&'static str> {
    let b = body.to_lowercase();
    if b.contains("authenticator") || b.contains("totp") {
        Some("TOTP")
    } else if b.contains("push") || b.contains("approve the sign-in") {
        Some("Push Notification")
    } else if b.contains("sms") || b.contains("text message") || b.contains("sent a code") || b.contains("emailed") {
        Some("OTP")
    } else {
        None
    }
}

/// Response body with volatile parts and the probe's own usernames masked.
pub fn normalize(ctx: &ScanContext, body: &str, names: &[&str]) -> String {
    let mut text = body.to_string();
    for n in names.iter().filter(|n| !n.is_empty()) {
        text = text.replace(n, "<user>");
    }
    let text = ctx.signatures.nonce_patterns.replace_all(&text, "<nonce>");
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn existence_phrases(body: &str) -> BTreeSet<String> {
    EXISTENCE
        .iter()
        .filter_map(|re| re.find(body))
        .map(|m| m.as_str().to_lowercase())
        .collect()
}

pub async fn probe_enumeration(ctx: &ScanContext) -> Vec<Observation> {
    let t = &ctx.target;
    let existing = t.valid_credentials.0.clone();
    let wrong = t.invalid_credentials.1.clone();
    let missing = t.nonexistent_username.clone();
    let attempt = |user: String| {
        let wrong = wrong.clone();
        async move {
            let mut b = ctx.browser();
            b.get(&t.login_path).await?;
            let form = [(t.username_field.as_str(), user.as_str()), (t.password_field.as_str(), wrong.as_str())];
            b.post_form(&t.login_path, &form).await
        }
    };
    let (a, b) = match (attempt(existing.clone()).await, attempt(missing.clone()).await) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return vec![unknown(REVEALS_USERNAME, e)],
    };
    let names = [existing.as_str(), missing.as_str()];
    let (na, nb) = (normalize(ctx, &a.body, &names), normalize(ctx, &b.body, &names));
    let (pa, pb) = (existence_phrases(&na), existence_phrases(&nb));
    let reveals = na != nb && pa != pb;
    let needle = |p: &BTreeSet<String>| p.iter().next().cloned().unwrap_or_default();
    let ev = |ex: &Exchange, p: &BTreeSet<String>| -> Evidence {
        let n = needle(p);
        if n.is_empty() {
            ex.evidence(ctx)
        } else {
            let start = ex.body.to_lowercase().find(&n).unwrap_or(0);
            let original = ex.body.get(start..start + n.len()).unwrap_or(&n).to_string();
            ex.evidence_around(ctx, &original)
        }
    };
    let note = if reveals {
        format!("existing-user response says {pa:?}, unknown-user response says {pb:?}")
    } else if na != nb {
        "responses differ but neither names account existence".into()
    } else {
        "responses are identical after normalization".into()
    };
    vec![dynamic(REVEALS_USERNAME, ObservationValue::from_bool(reveals))
        .with_all_evidence([ev(&a, &pa), ev(&b, &pb)])
        .with_note(note)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn existence_phrases_distinguish_messages() {
        let a = existence_phrases("<p>Incorrect password for this account.</p>");
        let b = existence_phrases("<p>No account found with that username.</p>");
        let generic = existence_phrases("<p>Invalid username or password.</p>");
        assert!(!a.is_empty() && !b.is_empty() && a != b);
        assert!(generic.is_empty());
        assert!(!existence_phrases("User not found").is_empty());
    }

    #[test]
    fn challenge_classification() {
        assert_eq!(classify_challenge("Enter the code from your authenticator app"), Some("TOTP"));
        assert_eq!(classify_challenge("We sent a code by SMS"), Some("OTP"));
        assert_eq!(classify_challenge("Approve the push request on your phone"), Some("Push Notification"));
        assert_eq!(classify_challenge("Enter your code"), None);
    }

    #[test]
    fn totp_codes_are_six_digits() {
        let c = totp_code("ONSWGYLVMRUXILLUMVZXIYTFMQWW65DQ").unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.chars().all(|c| c.is_ascii_digit()));
        assert!(totp_code("not base32 !!").is_none());
    }
}
