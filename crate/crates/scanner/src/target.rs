use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::ScanError;

/// Everything the probes need to know about one target application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub base_url: Url,
    #[serde(default = "default_login")]
    pub login_path: String,
    #[serde(default = "default_register")]
    pub register_path: String,
    #[serde(default = "default_logout")]
    pub logout_path: String,
    /// Page that only an authenticated session can view.
    #[serde(default)]
    pub profile_path: Option<String>,
    /// Endpoint reflecting a query parameter; used by the XSS, SQL and
    /// duplicate-parameter probes.
    #[serde(default)]
    pub search_path: Option<String>,
    /// Authenticated state-changing form; used by the CSRF probe.
    #[serde(default)]
    pub form_path: Option<String>,
    #[serde(default)]
    pub mfa_path: Option<String>,
    #[serde(default = "default_username_field")]
    pub username_field: String,
    #[serde(default = "default_password_field")]
    pub password_field: String,
    #[serde(default = "default_email_field")]
    pub email_field: String,
    #[serde(default = "default_otp_field")]
    pub otp_field: String,
    #[serde(default = "default_search_field")]
    pub search_field: String,
    pub valid_credentials: (String, String),
    pub invalid_credentials: (String, String),
    pub nonexistent_username: String,
    #[serde(default = "default_burst")]
    pub burst_size: u32,
    #[serde(default = "default_max_failed")]
    pub max_failed_attempts: u32,
    #[serde(default = "default_timeout_budget")]
    pub session_timeout_budget_secs: f64,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_secs: f64,
    #[serde(default)]
    pub destructive_allowed: bool,
    /// JSON mail capture endpoint for verification emails.
    #[serde(default)]
    pub mail_sink_url: Option<Url>,
    /// Base32 TOTP secret of the test account, when MFA is expected.
    #[serde(default)]
    pub totp_secret: Option<String>,
    #[serde(default)]
    pub session_cookie_name: Option<String>,
}

fn default_login() -> String {
    "/login".into()
}
fn default_register() -> String {
    "/register".into()
}
fn default_logout() -> String {
    "/logout".into()
}
fn default_username_field() -> String {
    "username".into()
}
fn default_password_field() -> String {
    "password".into()
}
fn default_email_field() -> String {
    "email".into()
}
fn default_otp_field() -> String {
    "otp".into()
}
fn default_search_field() -> String {
    "q".into()
}
fn default_burst() -> u32 {
    10
}
fn default_max_failed() -> u32 {
    6
}
fn default_timeout_budget() -> f64 {
    60.0
}
fn default_request_timeout() -> f64 {
    10.0
}

/// Longest idle period the timeout probe is willing to wait.
pub const TIMEOUT_ALLOWANCE: Duration = Duration::from_secs(600);

impl TargetConfig {
    /// A target with default paths and field names.
    pub fn new(base_url: Url, valid: (&str, &str), invalid_password: &str, nonexistent: &str) -> Self {
        TargetConfig {
            base_url,
            login_path: default_login(),
            register_path: default_register(),
            logout_path: default_logout(),
            profile_path: None,
            search_path: None,
            form_path: None,
            mfa_path: None,
            username_field: default_username_field(),
            password_field: default_password_field(),
            email_field: default_email_field(),
            otp_field: default_otp_field(),
            search_field: default_search_field(),
            valid_credentials: (valid.0.into(), valid.1.into()),
            invalid_credentials: (valid.0.into(), invalid_password.into()),
            nonexistent_username: nonexistent.into(),
            burst_size: default_burst(),
            max_failed_attempts: default_max_failed(),
            session_timeout_budget_secs: default_timeout_budget(),
            request_timeout_secs: default_request_timeout(),
            destructive_allowed: false,
            mail_sink_url: None,
            totp_secret: None,
            session_cookie_name: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScanError> {
        let t: TargetConfig = toml::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScanError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScanError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("target serializes")
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |m: String| Err(ScanError::InvalidTarget(m));
        if !matches!(self.base_url.scheme(), "http" | "https") {
            return bad(format!("base_url scheme must be http or https, got '{}'", self.base_url.scheme()));
        }
        if self.base_url.host_str().is_none() {
            return bad("base_url has no host".into());
        }
        if self.burst_size == 0 || self.max_failed_attempts == 0 {
            return bad("burst_size and max_failed_attempts must be positive".into());
        }
        if !(self.session_timeout_budget_secs >= 0.0 && self.session_timeout_budget_secs.is_finite()) {
            return bad("session_timeout_budget_secs must be a non-negative number".into());
        }
        if !(self.request_timeout_secs > 0.0 && self.request_timeout_secs.is_finite()) {
            return bad("request_timeout_secs must be positive".into());
        }
        let paths = [
            Some(&self.login_path),
            Some(&self.register_path),
            Some(&self.logout_path),
            self.profile_path.as_ref(),
            self.search_path.as_ref(),
            self.form_path.as_ref(),
            self.mfa_path.as_ref(),
        ];
        if let Some(p) = paths.into_iter().flatten().find(|p| !p.starts_with('/')) {
            return bad(format!("path '{p}' must start with '/'"));
        }
        if self.valid_credentials.0.is_empty() || self.valid_credentials.1.is_empty() {
            return bad("valid_credentials must name a user and password".into());
        }
        if self.invalid_credentials.1 == self.valid_credentials.1 {
            return bad("invalid_credentials password equals the valid one".into());
        }
        if self.nonexistent_username == self.valid_credentials.0 {
            return bad("nonexistent_username equals the valid username".into());
        }
        Ok(())
    }

    pub fn url(&self, path: &str) -> Url {
        self.base_url.join(path).unwrap_or_else(|_| self.base_url.clone())
    }

    pub fn session_timeout_budget(&self) -> Duration {
        Duration::from_secs_f64(self.session_timeout_budget_secs)
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }

    /// Values that must never appear in evidence.
    pub fn secrets(&self) -> Vec<String> {
        let mut s = vec![self.valid_credentials.1.clone(), self.invalid_credentials.1.clone()];
        s.extend(self.totp_secret.clone());
        s.retain(|v| !v.is_empty());
        s
    }
}
