//! Probe groups. Each group owns a fixed set of checklist parameters and
//! returns exactly one observation for each of them.

use secaudit_core::checklist::ids::*;
use secaudit_core::{Observation, ObservationValue, Source};

use crate::error::ScanError;
use crate::http::{Exchange, ScanContext};

pub mod auth;
pub mod headers;
pub mod injection;
pub mod mutating;
pub mod session;

pub(crate) fn dynamic(id: &str, value: ObservationValue) -> Observation {
    Observation::new(id, value, Source::Dynamic)
}

pub(crate) fn unknown(id: &str, reason: impl Into<String>) -> Observation {
    dynamic(id, ObservationValue::Unknown).with_note(reason)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProbeGroup {
    Headers,
    Cookies,
    LoginMethod,
    SessionLifecycle,
    Csrf,
    Xss,
    Sqli,
    Hpp,
    Enumeration,
    Mfa,
    Registration,
    RateLimit,
    Lockout,
}

impl ProbeGroup {
    /// Read-only groups first; destructive ones in the order they must run.
    pub const ALL: [ProbeGroup; 13] = [
        ProbeGroup::Headers,
        ProbeGroup::Cookies,
        ProbeGroup::LoginMethod,
        ProbeGroup::SessionLifecycle,
        ProbeGroup::Csrf,
        ProbeGroup::Xss,
        ProbeGroup::Sqli,
        ProbeGroup::Hpp,
        ProbeGroup::Enumeration,
        ProbeGroup::Mfa,
        ProbeGroup::Registration,
        ProbeGroup::RateLimit,
        ProbeGroup::Lockout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeGroup::Headers => "headers",
            ProbeGroup::Cookies => "cookies",
            ProbeGroup::LoginMethod => "login-method",
            ProbeGroup::SessionLifecycle => "session-lifecycle",
            ProbeGroup::Csrf => "csrf",
            ProbeGroup::Xss => "xss",
            ProbeGroup::Sqli => "sqli",
            ProbeGroup::Hpp => "hpp",
            ProbeGroup::Enumeration => "enumeration",
            ProbeGroup::Mfa => "mfa",
            ProbeGroup::Registration => "registration",
            ProbeGroup::RateLimit => "rate-limit",
            ProbeGroup::Lockout => "lockout",
        }
    }

    /// Groups that create accounts, trip limits or lock the test account.
    pub fn is_destructive(self) -> bool {
        matches!(self, ProbeGroup::Registration | ProbeGroup::RateLimit | ProbeGroup::Lockout)
    }

    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            ProbeGroup::Headers => &[
                CSP_PRESENT,
                CSP_BLOCKS_INLINE,
                CSP_BLOCKS_DATA_URI,
                CSP_RESTRICTS_SOURCES,
                X_FRAME_OPTIONS,
                X_CONTENT_TYPE_OPTIONS,
                HSTS_PRESENT,
                HSTS_MAX_AGE,
                REFERRER_POLICY_SET,
                REFERRER_POLICY_STRICT,
                PERMISSIONS_POLICY_PRESENT,
                PERMISSIONS_RESTRICTED,
            ],
            ProbeGroup::Cookies => &[SESSION_CREATION, COOKIE_SECURE, COOKIE_HTTPONLY, COOKIE_SAMESITE],
            ProbeGroup::LoginMethod => &[POST_ONLY_LOGIN],
            ProbeGroup::SessionLifecycle => {
                &[SESSION_REGENERATED, FIXATION_PROTECTION, SESSION_COOKIE_ONLY, SESSION_TIMEOUT]
            }
            ProbeGroup::Csrf => &[CSRF_TOKEN_PRESENT, CSRF_VALIDATION],
            ProbeGroup::Xss => &[JS_EXECUTION, HTML_INJECTION],
            ProbeGroup::Sqli => &[SPECIAL_CHARS_ESCAPED],
            ProbeGroup::Hpp => &[HPP],
            ProbeGroup::Enumeration => &[REVEALS_USERNAME],
            ProbeGroup::Mfa => &[MFA_ENABLED, MFA_TYPE],
            ProbeGroup::Registration => &[PASSWORD_COMPLEXITY, REVEALS_PASSWORD_RULES, EMAIL_VERIFICATION],
            ProbeGroup::RateLimit => &[RATE_LIMIT, RATE_LIMIT_RESPONSE],
            ProbeGroup::Lockout => &[LOCKOUT, CAPTCHA],
        }
    }

    pub fn for_parameter(id: &str) -> Option<ProbeGroup> {
        Self::ALL.into_iter().find(|g| g.parameters().contains(&id))
    }
}

/// Runs one group. `baseline` is the response to the target's base URL,
/// used by the header checks.
pub async fn run_group(
    group: ProbeGroup,
    ctx: &ScanContext,
    baseline: &Exchange,
) -> Result<Vec<Observation>, ScanError> {
    if group.is_destructive() && !ctx.target.destructive_allowed {
        return Err(ScanError::DestructiveNotAllowed(group.name()));
    }
    Ok(match group {
        ProbeGroup::Headers => headers::check_security_headers(&baseline.headers, &baseline.request),
        ProbeGroup::Cookies => session::probe_cookies(ctx).await,
        ProbeGroup::LoginMethod => auth::probe_login_method(ctx).await,
        ProbeGroup::SessionLifecycle => session::probe_session_lifecycle(ctx).await,
        ProbeGroup::Csrf => injection::probe_csrf(ctx).await,
        ProbeGroup::Xss => injection::probe_xss(ctx).await,
        ProbeGroup::Sqli => injection::probe_sqli(ctx).await,
        ProbeGroup::Hpp => injection::probe_hpp(ctx).await,
        ProbeGroup::Enumeration => auth::probe_enumeration(ctx).await,
        ProbeGroup::Mfa => auth::probe_mfa(ctx).await,
        ProbeGroup::Registration => mutating::probe_registration(ctx).await,
        ProbeGroup::RateLimit => mutating::probe_rate_limit(ctx).await,
        ProbeGroup::Lockout => mutating::probe_lockout(ctx).await,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use secaudit_core::checklist::EvaluationMode;
    use secaudit_core::default_checklist;

    use super::*;

    #[test]
    fn groups_partition_the_dynamic_parameters() {
        let checklist = default_checklist();
        let dynamic: BTreeSet<&str> = checklist.by_mode(EvaluationMode::Dynamic).map(|p| p.id.as_str()).collect();
        let mut covered = BTreeSet::new();
        for g in ProbeGroup::ALL {
            for id in g.parameters() {
                assert!(covered.insert(*id), "{id} in two groups");
                assert_eq!(ProbeGroup::for_parameter(id), Some(g));
            }
        }
        assert_eq!(covered, dynamic);
    }

    #[test]
    fn destructive_groups_come_last() {
        let first = ProbeGroup::ALL.iter().position(|g| g.is_destructive()).unwrap();
        assert!(ProbeGroup::ALL[first..].iter().all(|g| g.is_destructive()));
        assert_eq!(ProbeGroup::ALL.len() - first, 3);
    }
}
