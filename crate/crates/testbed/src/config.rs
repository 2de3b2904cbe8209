use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::TestbedError;

/// Shared TOTP secret (base32) used for every account when MFA is on.
pub const TOTP_SECRET: &str = "ONSWGYLVMRUXILLUMVZXIYTFMQWW65DQ";

/// Value of the `captcha_response` form field that the fixture accepts as a
/// solved challenge.
pub const CAPTCHA_PASS: &str = "testbed-pass";

pub const PRESETS: [&str; 7] = ["hardened", "vulnerable", "chatgpt", "deepseek", "claude", "gemini", "grok"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateLimitResponse {
    ErrorCode,
    Captcha,
    Lockout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PasswordPolicy {
    None,
    LengthOnly,
    LengthLettersNumbers,
    Full,
}

impl PasswordPolicy {
    pub fn min_length(self) -> usize {
        match self {
            PasswordPolicy::None => 0,
            PasswordPolicy::LengthOnly | PasswordPolicy::LengthLettersNumbers => 8,
            PasswordPolicy::Full => 12,
        }
    }

    pub fn accepts(self, password: &str) -> bool {
        let len = password.chars().count() >= self.min_length();
        let letters = password.chars().any(|c| c.is_alphabetic());
        let digits = password.chars().any(|c| c.is_ascii_digit());
        let upper = password.chars().any(|c| c.is_uppercase());
        let lower = password.chars().any(|c| c.is_lowercase());
        let symbol = password.chars().any(|c| !c.is_alphanumeric());
        match self {
            PasswordPolicy::None => true,
            PasswordPolicy::LengthOnly => len,
            PasswordPolicy::LengthLettersNumbers => len && letters && digits,
            PasswordPolicy::Full => len && upper && lower && digits && symbol,
        }
    }

    /// Human-readable requirement text, shown only when rules are revealed.
    pub fn describe(self) -> &'static str {
        match self {
            PasswordPolicy::None => "",
            PasswordPolicy::LengthOnly => "Password must be at least 8 characters long.",
            PasswordPolicy::LengthLettersNumbers => {
                "Password must be at least 8 characters long and contain both letters and numbers."
            }
            PasswordPolicy::Full => {
                "Password must be at least 12 characters long and include an uppercase letter, a lowercase letter, a digit and a special character."
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MfaMode {
    Off,
    Totp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsrfMode {
    Off,
    EmitOnly,
    Enforced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqlMode {
    Parameterized,
    Concatenated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HppBehavior {
    FirstWins,
    LastWins,
    Concatenated,
    Rejected,
}

/// Response headers. Together they drive the twelve header parameters: the
/// CSP value alone decides four of them, HSTS two, Referrer-Policy two and
/// Permissions-Policy two.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeaderSet {
    pub content_security_policy: Option<String>,
    pub x_frame_options: Option<String>,
    pub x_content_type_options: Option<String>,
    pub strict_transport_security: Option<String>,
    pub referrer_policy: Option<String>,
    pub permissions_policy: Option<String>,
}

pub const HARDENED_CSP: &str = "default-src 'self'; script-src 'self'; object-src 'none'; base-uri 'self'; frame-ancestors 'none'";
pub const RESTRICTIVE_PERMISSIONS: &str = "camera=(), microphone=(), geolocation=()";

impl HeaderSet {
    pub fn hardened() -> Self {
        HeaderSet {
            content_security_policy: Some(HARDENED_CSP.into()),
            x_frame_options: Some("DENY".into()),
            x_content_type_options: Some("nosniff".into()),
            strict_transport_security: Some("max-age=31536000; includeSubDomains".into()),
            referrer_policy: Some("strict-origin-when-cross-origin".into()),
            permissions_policy: Some(RESTRICTIVE_PERMISSIONS.into()),
        }
    }

    pub fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("content-security-policy", &self.content_security_policy),
            ("x-frame-options", &self.x_frame_options),
            ("x-content-type-options", &self.x_content_type_options),
            ("strict-transport-security", &self.strict_transport_security),
            ("referrer-policy", &self.referrer_policy),
            ("permissions-policy", &self.permissions_policy),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.as_deref().map(|v| (name, v)))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedUser {
    pub username: String,
    pub email: String,
    pub password: String,
}

impl Default for SeedUser {
    fn default() -> Self {
        SeedUser {
            username: "alice".into(),
            email: "alice@example.test".into(),
            password: "Correct-Horse-42!".into(),
        }
    }
}

/// Every security behavior of the fixture. `Default` is the hardened preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestbedConfig {
    /// Failed logins before the account locks; 0 disables lockout.
    pub lockout_threshold: u32,
    pub lockout_seconds: u64,
    /// Failed logins before a CAPTCHA is required; 0 disables it.
    pub captcha_after_n: u32,
    /// Login attempts allowed per second; 0 disables rate limiting.
    pub rate_limit_per_second: u32,
    pub rate_limit_response: RateLimitResponse,
    pub password_policy: PasswordPolicy,
    pub mfa: MfaMode,
    pub email_verification: bool,
    pub sessions_enabled: bool,
    pub cookie_secure: bool,
    pub cookie_httponly: bool,
    pub cookie_samesite: bool,
    /// Idle timeout in minutes (fractions allowed); 0 disables expiry.
    pub session_timeout_minutes: f64,
    pub regenerate_on_login: bool,
    pub fixation_protection: bool,
    pub session_in_url: bool,
    pub csrf: CsrfMode,
    pub output_escaping: bool,
    pub sql_mode: SqlMode,
    pub enumeration_messages: bool,
    pub reveal_password_rules: bool,
    pub get_login_enabled: bool,
    pub hpp_behavior: HppBehavior,
    pub headers: HeaderSet,
    pub failed_login_logging: bool,
    /// 0 picks a free port.
    pub listen_port: u16,
    pub seed_user: SeedUser,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        TestbedConfig {
            lockout_threshold: 5,
            lockout_seconds: 900,
            captcha_after_n: 3,
            rate_limit_per_second: 3,
            rate_limit_response: RateLimitResponse::ErrorCode,
            password_policy: PasswordPolicy::Full,
            mfa: MfaMode::Totp,
            email_verification: true,
            sessions_enabled: true,
            cookie_secure: true,
            cookie_httponly: true,
            cookie_samesite: true,
            session_timeout_minutes: 0.02,
            regenerate_on_login: true,
            fixation_protection: true,
            session_in_url: false,
            csrf: CsrfMode::Enforced,
            output_escaping: true,
            sql_mode: SqlMode::Parameterized,
            enumeration_messages: false,
            reveal_password_rules: false,
            get_login_enabled: false,
            hpp_behavior: HppBehavior::Rejected,
            headers: HeaderSet::hardened(),
            failed_login_logging: true,
            listen_port: 0,
            seed_user: SeedUser::default(),
        }
    }
}

impl TestbedConfig {
    pub fn hardened() -> Self {
        Self::default()
    }

    /// Every protection off, but sessions kept on so session behaviors stay
    /// observable.
    pub fn vulnerable() -> Self {
        TestbedConfig {
            lockout_threshold: 0,
            captcha_after_n: 0,
            rate_limit_per_second: 0,
            password_policy: PasswordPolicy::None,
            mfa: MfaMode::Off,
            email_verification: false,
            cookie_secure: false,
            cookie_httponly: false,
            cookie_samesite: false,
            session_timeout_minutes: 0.0,
            regenerate_on_login: false,
            fixation_protection: false,
            session_in_url: true,
            csrf: CsrfMode::Off,
            output_escaping: false,
            sql_mode: SqlMode::Concatenated,
            enumeration_messages: true,
            reveal_password_rules: true,
            get_login_enabled: true,
            hpp_behavior: HppBehavior::LastWins,
            headers: HeaderSet::default(),
            failed_login_logging: false,
            ..Self::default()
        }
    }

    /// Common shape of the per-assistant presets: typical PHP session
    /// handling with no security headers, prepared statements, POST-only
    /// login and PHP's last-wins duplicate parameter handling.
    fn assistant_baseline() -> Self {
        TestbedConfig {
            lockout_threshold: 0,
            captcha_after_n: 0,
            rate_limit_per_second: 0,
            password_policy: PasswordPolicy::None,
            mfa: MfaMode::Off,
            email_verification: false,
            cookie_secure: true,
            cookie_httponly: true,
            cookie_samesite: true,
            session_timeout_minutes: 0.0,
            regenerate_on_login: true,
            fixation_protection: true,
            session_in_url: false,
            csrf: CsrfMode::Off,
            output_escaping: true,
            sql_mode: SqlMode::Parameterized,
            enumeration_messages: false,
            reveal_password_rules: false,
            get_login_enabled: false,
            hpp_behavior: HppBehavior::LastWins,
            headers: HeaderSet::default(),
            failed_login_logging: false,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self, TestbedError> {
        let base = Self::assistant_baseline;
        let cfg = match name.to_ascii_lowercase().as_str() {
            "hardened" => Self::hardened(),
            "vulnerable" => Self::vulnerable(),
            "chatgpt" => TestbedConfig {
                password_policy: PasswordPolicy::LengthOnly,
                ..base()
            },
            "deepseek" => TestbedConfig {
                cookie_secure: false,
                cookie_httponly: false,
                cookie_samesite: false,
                output_escaping: false,
                ..base()
            },
            "claude" => TestbedConfig {
                email_verification: true,
                csrf: CsrfMode::Enforced,
                cookie_secure: false,
                cookie_httponly: false,
                cookie_samesite: false,
                fixation_protection: false,
                ..base()
            },
            "gemini" => TestbedConfig {
                lockout_threshold: 5,
                password_policy: PasswordPolicy::LengthOnly,
                output_escaping: false,
                session_timeout_minutes: 0.02,
                enumeration_messages: true,
                reveal_password_rules: true,
                failed_login_logging: true,
                ..base()
            },
            "grok" => TestbedConfig {
                password_policy: PasswordPolicy::LengthLettersNumbers,
                rate_limit_per_second: 3,
                rate_limit_response: RateLimitResponse::ErrorCode,
                failed_login_logging: true,
                ..base()
            },
            _ => return Err(TestbedError::UnknownPreset(name.to_string())),
        };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, TestbedError> {
        let cfg: TestbedConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, TestbedError> {
        let text = std::fs::read_to_string(path).map_err(|source| TestbedError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("testbed config serializes")
    }

    /// Rejects combinations the fixture cannot honor.
    pub fn validate(&self) -> Result<(), TestbedError> {
        let bad = |m: &str| Err(TestbedError::InvalidCombination(m.to_string()));
        if !self.sessions_enabled {
            let dependent = [
                (self.cookie_secure, "cookie_secure"),
                (self.cookie_httponly, "cookie_httponly"),
                (self.cookie_samesite, "cookie_samesite"),
                (self.regenerate_on_login, "regenerate_on_login"),
                (self.fixation_protection, "fixation_protection"),
                (self.session_in_url, "session_in_url"),
                (self.session_timeout_minutes > 0.0, "session_timeout_minutes"),
                (self.csrf != CsrfMode::Off, "csrf"),
                (self.mfa != MfaMode::Off, "mfa"),
            ];
            if let Some((_, name)) = dependent.iter().find(|(on, _)| *on) {
                return bad(&format!("{name} requires sessions_enabled"));
            }
        }
        if !self.session_timeout_minutes.is_finite() || self.session_timeout_minutes < 0.0 {
            return bad("session_timeout_minutes must be a non-negative number");
        }
        if self.seed_user.username.is_empty() || self.seed_user.password.is_empty() {
            return bad("seed_user needs a username and password");
        }
        if !self.password_policy.accepts(&self.seed_user.password) {
            return bad("seed_user password does not satisfy password_policy");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            TestbedConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(matches!(TestbedConfig::preset("nope"), Err(TestbedError::UnknownPreset(_))));
    }

    #[test]
    fn preset_examples() {
        assert!(TestbedConfig::preset("gemini").unwrap().lockout_threshold > 0);
        let grok = TestbedConfig::preset("grok").unwrap();
        assert!(grok.rate_limit_per_second > 0);
        assert_eq!(grok.rate_limit_response, RateLimitResponse::ErrorCode);
        let h = TestbedConfig::preset("hardened").unwrap();
        assert!(h.lockout_threshold > 0 && h.captcha_after_n > 0 && h.rate_limit_per_second > 0);
        assert!(h.cookie_secure && h.cookie_httponly && h.cookie_samesite && h.fixation_protection);
        assert_eq!(h.headers.pairs().len(), 6);
    }

    #[test]
    fn sessions_off_rejects_dependent_features() {
        let cfg = TestbedConfig {
            sessions_enabled: false,
            ..TestbedConfig::vulnerable()
        };
        assert!(matches!(cfg.validate(), Err(TestbedError::InvalidCombination(_))));
        let cfg = TestbedConfig {
            sessions_enabled: false,
            session_in_url: false,
            ..TestbedConfig::vulnerable()
        };
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = TestbedConfig::preset("claude").unwrap();
        assert_eq!(TestbedConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = TestbedConfig::from_toml("csrf = \"emit-only\"\n[headers]\nx_frame_options = \"DENY\"\n").unwrap();
        assert_eq!(partial.csrf, CsrfMode::EmitOnly);
        assert_eq!(partial.headers.pairs().len(), 1);
        assert!(TestbedConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn password_policy_ladder() {
        let ladder = ["Ab1!x", "abcdefghijkl", "abcdefgh1234", "Abcdefgh12!@"];
        let accepted = |p: PasswordPolicy| ladder.iter().map(|pw| p.accepts(pw)).collect::<Vec<_>>();
        assert_eq!(accepted(PasswordPolicy::None), [true, true, true, true]);
        assert_eq!(accepted(PasswordPolicy::LengthOnly), [false, true, true, true]);
        assert_eq!(accepted(PasswordPolicy::LengthLettersNumbers), [false, false, true, true]);
        assert_eq!(accepted(PasswordPolicy::Full), [false, false, false, true]);
    }
}
