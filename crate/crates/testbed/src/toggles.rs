//! Which fixture setting controls which checklist parameter, and how to flip
//! it either way.

use secaudit_core::checklist::ids::*;

use crate::config::{
    CsrfMode, HppBehavior, MfaMode, PasswordPolicy, RateLimitResponse, SqlMode, TestbedConfig, HARDENED_CSP,
    RESTRICTIVE_PERMISSIONS,
};

pub struct ToggleSpec {
    pub parameter_id: &'static str,
    /// Name of the controlling setting, for messages.
    pub toggle: &'static str,
    pub compliant: fn(&mut TestbedConfig),
    pub vulnerable: fn(&mut TestbedConfig),
}

impl ToggleSpec {
    pub fn apply(&self, config: &mut TestbedConfig, compliant: bool) {
        if compliant {
            (self.compliant)(config)
        } else {
            (self.vulnerable)(config)
        }
    }
}

fn sessions_off(c: &mut TestbedConfig) {
    c.sessions_enabled = false;
    c.cookie_secure = false;
    c.cookie_httponly = false;
    c.cookie_samesite = false;
    c.session_timeout_minutes = 0.0;
    c.regenerate_on_login = false;
    c.fixation_protection = false;
    c.session_in_url = false;
    c.csrf = CsrfMode::Off;
    c.mfa = MfaMode::Off;
}

fn rate_limited(c: &mut TestbedConfig) {
    c.rate_limit_per_second = 3;
    c.rate_limit_response = RateLimitResponse::ErrorCode;
}

macro_rules! toggle {
    ($id:expr, $name:literal, |$c:ident| $good:expr, $bad:expr) => {
        ToggleSpec {
            parameter_id: $id,
            toggle: $name,
            compliant: |$c: &mut TestbedConfig| {
                $good;
            },
            vulnerable: |$c: &mut TestbedConfig| {
                $bad;
            },
        }
    };
}

pub static TOGGLE_MAP: &[ToggleSpec] = &[
    toggle!(LOCKOUT, "lockout_threshold", |c| c.lockout_threshold = 5, c.lockout_threshold = 0),
    toggle!(CAPTCHA, "captcha_after_n", |c| c.captcha_after_n = 3, c.captcha_after_n = 0),
    toggle!(
        PASSWORD_COMPLEXITY,
        "password_policy",
        |c| c.password_policy = PasswordPolicy::Full,
        c.password_policy = PasswordPolicy::None
    ),
    toggle!(MFA_ENABLED, "mfa", |c| c.mfa = MfaMode::Totp, c.mfa = MfaMode::Off),
    toggle!(MFA_TYPE, "mfa", |c| c.mfa = MfaMode::Totp, c.mfa = MfaMode::Off),
    toggle!(RATE_LIMIT, "rate_limit_per_second", |c| rate_limited(c), c.rate_limit_per_second = 0),
    toggle!(RATE_LIMIT_RESPONSE, "rate_limit_response", |c| rate_limited(c), c.rate_limit_per_second = 0),
    toggle!(EMAIL_VERIFICATION, "email_verification", |c| c.email_verification = true, c.email_verification = false),
    toggle!(
        SPECIAL_CHARS_ESCAPED,
        "sql_mode",
        |c| c.sql_mode = SqlMode::Parameterized,
        c.sql_mode = SqlMode::Concatenated
    ),
    toggle!(JS_EXECUTION, "output_escaping", |c| c.output_escaping = true, c.output_escaping = false),
    toggle!(HTML_INJECTION, "output_escaping", |c| c.output_escaping = true, c.output_escaping = false),
    toggle!(POST_ONLY_LOGIN, "get_login_enabled", |c| c.get_login_enabled = false, c.get_login_enabled = true),
    toggle!(CSRF_TOKEN_PRESENT, "csrf", |c| c.csrf = CsrfMode::Enforced, c.csrf = CsrfMode::Off),
    toggle!(CSRF_VALIDATION, "csrf", |c| c.csrf = CsrfMode::Enforced, c.csrf = CsrfMode::EmitOnly),
    toggle!(
        HPP,
        "hpp_behavior",
        |c| c.hpp_behavior = HppBehavior::Rejected,
        c.hpp_behavior = HppBehavior::LastWins
    ),
    toggle!(SESSION_CREATION, "sessions_enabled", |c| c.sessions_enabled = true, sessions_off(c)),
    toggle!(COOKIE_SECURE, "cookie_secure", |c| c.cookie_secure = true, c.cookie_secure = false),
    toggle!(COOKIE_HTTPONLY, "cookie_httponly", |c| c.cookie_httponly = true, c.cookie_httponly = false),
    toggle!(COOKIE_SAMESITE, "cookie_samesite", |c| c.cookie_samesite = true, c.cookie_samesite = false),
    toggle!(
        SESSION_TIMEOUT,
        "session_timeout_minutes",
        |c| c.session_timeout_minutes = 0.02,
        c.session_timeout_minutes = 0.0
    ),
    toggle!(
        SESSION_REGENERATED,
        "regenerate_on_login",
        |c| c.regenerate_on_login = true,
        c.regenerate_on_login = false
    ),
    toggle!(
        FIXATION_PROTECTION,
        "fixation_protection",
        |c| c.fixation_protection = true,
        c.fixation_protection = false
    ),
    toggle!(SESSION_COOKIE_ONLY, "session_in_url", |c| c.session_in_url = false, c.session_in_url = true),
    toggle!(
        REVEALS_USERNAME,
        "enumeration_messages",
        |c| c.enumeration_messages = false,
        c.enumeration_messages = true
    ),
    toggle!(REVEALS_PASSWORD_RULES, "reveal_password_rules", |c| c.reveal_password_rules = false, {
        c.reveal_password_rules = true;
        if c.password_policy == PasswordPolicy::None {
            c.password_policy = PasswordPolicy::LengthOnly;
        }
    }),
    toggle!(
        CSP_PRESENT,
        "headers.content_security_policy",
        |c| c.headers.content_security_policy = Some(HARDENED_CSP.into()),
        c.headers.content_security_policy = None
    ),
    toggle!(
        CSP_BLOCKS_INLINE,
        "headers.content_security_policy",
        |c| c.headers.content_security_policy = Some(HARDENED_CSP.into()),
        c.headers.content_security_policy = Some("default-src 'self'; script-src 'self' 'unsafe-inline'".into())
    ),
    toggle!(
        CSP_BLOCKS_DATA_URI,
        "headers.content_security_policy",
        |c| c.headers.content_security_policy = Some(HARDENED_CSP.into()),
        c.headers.content_security_policy = Some("default-src 'self'; script-src 'self' data:".into())
    ),
    toggle!(
        CSP_RESTRICTS_SOURCES,
        "headers.content_security_policy",
        |c| c.headers.content_security_policy = Some(HARDENED_CSP.into()),
        c.headers.content_security_policy = Some("default-src 'self'; script-src *".into())
    ),
    toggle!(
        X_FRAME_OPTIONS,
        "headers.x_frame_options",
        |c| c.headers.x_frame_options = Some("DENY".into()),
        c.headers.x_frame_options = None
    ),
    toggle!(
        X_CONTENT_TYPE_OPTIONS,
        "headers.x_content_type_options",
        |c| c.headers.x_content_type_options = Some("nosniff".into()),
        c.headers.x_content_type_options = None
    ),
    toggle!(
        HSTS_PRESENT,
        "headers.strict_transport_security",
        |c| c.headers.strict_transport_security = Some("max-age=31536000; includeSubDomains".into()),
        c.headers.strict_transport_security = None
    ),
    toggle!(
        HSTS_MAX_AGE,
        "headers.strict_transport_security",
        |c| c.headers.strict_transport_security = Some("max-age=31536000".into()),
        c.headers.strict_transport_security = None
    ),
    toggle!(
        REFERRER_POLICY_SET,
        "headers.referrer_policy",
        |c| c.headers.referrer_policy = Some("no-referrer".into()),
        c.headers.referrer_policy = None
    ),
    toggle!(
        REFERRER_POLICY_STRICT,
        "headers.referrer_policy",
        |c| c.headers.referrer_policy = Some("strict-origin-when-cross-origin".into()),
        c.headers.referrer_policy = Some("unsafe-url".into())
    ),
    toggle!(
        PERMISSIONS_POLICY_PRESENT,
        "headers.permissions_policy",
        |c| c.headers.permissions_policy = Some(RESTRICTIVE_PERMISSIONS.into()),
        c.headers.permissions_policy = None
    ),
    toggle!(
        PERMISSIONS_RESTRICTED,
        "headers.permissions_policy",
        |c| c.headers.permissions_policy = Some(RESTRICTIVE_PERMISSIONS.into()),
        c.headers.permissions_policy = Some("fullscreen=(self), payment=()".into())
    ),
];

pub fn toggle_for(parameter_id: &str) -> Option<&'static ToggleSpec> {
    TOGGLE_MAP.iter().find(|t| t.parameter_id == parameter_id)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use secaudit_core::checklist::{default_checklist, EvaluationMode};

    use super::*;

    #[test]
    fn every_dynamic_parameter_has_exactly_one_toggle() {
        let checklist = default_checklist();
        let dynamic: BTreeSet<&str> = checklist
            .by_mode(EvaluationMode::Dynamic)
            .map(|p| p.id.as_str())
            .collect();
        let mapped: Vec<&str> = TOGGLE_MAP.iter().map(|t| t.parameter_id).collect();
        let unique: BTreeSet<&str> = mapped.iter().copied().collect();
        assert_eq!(mapped.len(), unique.len(), "duplicate toggle rows");
        assert_eq!(unique, dynamic);
    }

    #[test]
    fn flips_keep_presets_valid() {
        for base in [TestbedConfig::hardened(), TestbedConfig::vulnerable()] {
            for spec in TOGGLE_MAP {
                for compliant in [true, false] {
                    let mut cfg = base.clone();
                    spec.apply(&mut cfg, compliant);
                    cfg.validate()
                        .unwrap_or_else(|e| panic!("{} compliant={compliant}: {e}", spec.parameter_id));
                }
            }
        }
    }
}
