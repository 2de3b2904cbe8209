//! The 48-parameter security checklist and the likelihood × impact risk matrix.
//!
//! Every parameter carries its likelihood and impact rating; its risk level is
//! always derivable from those two through [`risk_level`], and checklist loading
//! rejects any row whose stored risk disagrees with the derived one.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ChecklistError;

/// Stable identifiers of the default checklist parameters.
pub mod ids {
    pub const LOCKOUT: &str = "auth.lockout";
    pub const CAPTCHA: &str = "auth.captcha";
    pub const LOCKOUT_NOTIFICATION: &str = "auth.lockout_notification";
    pub const PASSWORD_COMPLEXITY: &str = "auth.password_complexity";
    pub const PASSWORD_EXPIRATION: &str = "auth.password_expiration";
    pub const PASSWORD_REUSE: &str = "auth.password_reuse";
    pub const MFA_ENABLED: &str = "auth.mfa_enabled";
    pub const MFA_TYPE: &str = "auth.mfa_type";
    pub const BACKUP_CODES: &str = "auth.backup_codes";
    pub const RATE_LIMIT: &str = "auth.rate_limit";
    pub const RATE_LIMIT_RESPONSE: &str = "auth.rate_limit_response";

    pub const EMAIL_VERIFICATION: &str = "input.email_verification";
    pub const PARAMETERIZED_QUERIES: &str = "input.parameterized_queries";
    pub const SPECIAL_CHARS_ESCAPED: &str = "input.special_chars_escaped";
    pub const JS_EXECUTION: &str = "input.js_execution";
    pub const HTML_INJECTION: &str = "input.html_injection";
    pub const POST_ONLY_LOGIN: &str = "input.post_only_login";
    pub const CORS_POLICY: &str = "input.cors_policy";
    pub const CSRF_TOKEN_PRESENT: &str = "input.csrf_token_present";
    pub const CSRF_VALIDATION: &str = "input.csrf_validation";
    pub const HPP: &str = "input.hpp";

    pub const SESSION_CREATION: &str = "session.creation";
    pub const COOKIE_SECURE: &str = "session.cookie_secure";
    pub const COOKIE_HTTPONLY: &str = "session.cookie_httponly";
    pub const COOKIE_SAMESITE: &str = "session.cookie_samesite";
    pub const SESSION_TIMEOUT: &str = "session.timeout";
    pub const SESSION_REGENERATED: &str = "session.regenerated";
    pub const FIXATION_PROTECTION: &str = "session.fixation_protection";
    pub const SESSION_COOKIE_ONLY: &str = "session.cookie_only";

    pub const HASH_ALGORITHM: &str = "storage.hash_algorithm";
    pub const SALTED_HASHES: &str = "storage.salted_hashes";

    pub const REVEALS_USERNAME: &str = "error.reveals_username";
    pub const REVEALS_PASSWORD_RULES: &str = "error.reveals_password_rules";
    pub const FAILED_LOGIN_LOGGED: &str = "error.failed_login_logged";
    pub const UNUSUAL_LOGIN_FLAGGED: &str = "error.unusual_login_flagged";
    pub const LOGS_SECURE: &str = "error.logs_secure";

    pub const CSP_PRESENT: &str = "headers.csp_present";
    pub const CSP_BLOCKS_INLINE: &str = "headers.csp_blocks_inline";
    pub const CSP_BLOCKS_DATA_URI: &str = "headers.csp_blocks_data_uri";
    pub const CSP_RESTRICTS_SOURCES: &str = "headers.csp_restricts_sources";
    pub const X_FRAME_OPTIONS: &str = "headers.x_frame_options";
    pub const X_CONTENT_TYPE_OPTIONS: &str = "headers.x_content_type_options";
    pub const HSTS_PRESENT: &str = "headers.hsts_present";
    pub const HSTS_MAX_AGE: &str = "headers.hsts_max_age";
    pub const REFERRER_POLICY_SET: &str = "headers.referrer_policy_set";
    pub const REFERRER_POLICY_STRICT: &str = "headers.referrer_policy_strict";
    pub const PERMISSIONS_POLICY_PRESENT: &str = "headers.permissions_policy_present";
    pub const PERMISSIONS_RESTRICTED: &str = "headers.permissions_restricted";
}

pub const DEFAULT_CHECKLIST_VERSION: &str = "1.0";

/// Normalizes a level or category spelling: drops spaces, dashes and
/// underscores and lowercases the rest, so "Almost certain",
/// "AlmostCertain" and "almost_certain" all compare equal.
fn fold(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

macro_rules! ordinal_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $what:literal, [$( $variant:ident = $ord:literal, $label:literal ),+ $(,)?]
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $( $variant = $ord ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$( $name::$variant ),+];

            pub fn ordinal(self) -> u8 {
                self as u8
            }

            pub fn from_ordinal(ordinal: u8) -> Option<Self> {
                match ordinal {
                    $( $ord => Some($name::$variant), )+
                    _ => None,
                }
            }

            /// Human-readable label, e.g. "Almost Certain".
            pub fn label(self) -> &'static str {
                match self {
                    $( $name::$variant => $label, )+
                }
            }

            /// Identifier spelling used in files, e.g. "AlmostCertain".
            pub fn ident(self) -> &'static str {
                match self {
                    $( $name::$variant => stringify!($variant), )+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = ChecklistError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let folded = fold(s);
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| fold(v.ident()) == folded)
                    .ok_or_else(|| ChecklistError::UnknownValue {
                        what: $what,
                        value: s.to_string(),
                    })
            }
        }
    };
}

ordinal_enum!(
    /// How probable exploitation of a missing control is.
    LikelihoodLevel, "likelihood", [
        Rare = 1, "Rare",
        Unlikely = 2, "Unlikely",
        Moderate = 3, "Moderate",
        Likely = 4, "Likely",
        AlmostCertain = 5, "Almost Certain",
    ]
);

ordinal_enum!(
    /// How damaging exploitation of a missing control is.
    ImpactLevel, "impact", [
        Insignificant = 1, "Insignificant",
        Minor = 2, "Minor",
        Significant = 3, "Significant",
        Major = 4, "Major",
        Severe = 5, "Severe",
    ]
);

ordinal_enum!(
    /// Six-step risk classification, ordered by rank.
    RiskLevel, "risk level", [
        VeryLow = 1, "Very Low",
        Low = 2, "Low",
        Medium = 3, "Medium",
        High = 4, "High",
        VeryHigh = 5, "Very High",
        Extreme = 6, "Extreme",
    ]
);

impl RiskLevel {
    pub fn rank(self) -> u8 {
        self.ordinal()
    }
}

/// Maps a likelihood/impact pair onto a risk level.
///
/// The two ordinals are multiplied and the product is bucketed:
/// `≤2` Very Low, `3..=5` Low, `6..=9` Medium, `10..=12` High,
/// `13..=19` Very High, `≥20` Extreme.
pub fn risk_level(likelihood: LikelihoodLevel, impact: ImpactLevel) -> RiskLevel {
    match likelihood.ordinal() * impact.ordinal() {
        0..=2 => RiskLevel::VeryLow,
        3..=5 => RiskLevel::Low,
        6..=9 => RiskLevel::Medium,
        10..=12 => RiskLevel::High,
        13..=19 => RiskLevel::VeryHigh,
        _ => RiskLevel::Extreme,
    }
}

/// The six broad security domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    AuthenticationSecurity,
    InputValidation,
    SessionSecurity,
    SecureStorage,
    ErrorHandling,
    HttpSecurityHeaders,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::AuthenticationSecurity,
        Category::InputValidation,
        Category::SessionSecurity,
        Category::SecureStorage,
        Category::ErrorHandling,
        Category::HttpSecurityHeaders,
    ];

    pub fn expected_parameter_count(self) -> usize {
        match self {
            Category::AuthenticationSecurity => 11,
            Category::InputValidation => 10,
            Category::SessionSecurity => 8,
            Category::SecureStorage => 2,
            Category::ErrorHandling => 5,
            Category::HttpSecurityHeaders => 12,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::AuthenticationSecurity => "Authentication Security",
            Category::InputValidation => "Input Validation & Protection Against Injection Attacks",
            Category::SessionSecurity => "Session Security",
            Category::SecureStorage => "Secure Storage",
            Category::ErrorHandling => "Error Handling & Information Disclosure",
            Category::HttpSecurityHeaders => "HTTP Security Headers",
        }
    }

    pub fn ident(self) -> &'static str {
        match self {
            Category::AuthenticationSecurity => "AuthenticationSecurity",
            Category::InputValidation => "InputValidation",
            Category::SessionSecurity => "SessionSecurity",
            Category::SecureStorage => "SecureStorage",
            Category::ErrorHandling => "ErrorHandling",
            Category::HttpSecurityHeaders => "HttpSecurityHeaders",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Category {
    type Err = ChecklistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = fold(s);
        Category::ALL
            .iter()
            .copied()
            .find(|c| fold(c.ident()) == folded || fold(c.label()) == folded)
            .ok_or_else(|| ChecklistError::UnknownValue {
                what: "category",
                value: s.to_string(),
            })
    }
}

/// Which observation counts as the secure outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    DesiredYes,
    /// Vulnerability-phrased rows: observing "Yes" means the weakness exists.
    DesiredNo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParameterKind {
    Boolean,
    Categorical,
}

/// How a parameter is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvaluationMode {
    /// Black-box HTTP probe.
    Dynamic,
    /// Source pattern analysis.
    Static,
    /// Human attestation.
    Manual,
}

macro_rules! simple_from_str {
    ($ty:ty, $what:literal, [$($variant:ident),+]) => {
        impl $ty {
            pub fn ident(self) -> &'static str {
                match self {
                    $( Self::$variant => stringify!($variant), )+
                }
            }
        }

        impl FromStr for $ty {
            type Err = ChecklistError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let folded = fold(s);
                $(
                    if folded == fold(stringify!($variant)) {
                        return Ok(Self::$variant);
                    }
                )+
                Err(ChecklistError::UnknownValue { what: $what, value: s.to_string() })
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.ident())
            }
        }
    };
}

simple_from_str!(Polarity, "polarity", [DesiredYes, DesiredNo]);
simple_from_str!(ParameterKind, "kind", [Boolean, Categorical]);
simple_from_str!(EvaluationMode, "mode", [Dynamic, Static, Manual]);

/// One checklist row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub id: String,
    pub category: Category,
    pub subcategory: String,
    pub name: String,
    pub likelihood: LikelihoodLevel,
    pub impact: ImpactLevel,
    pub risk: RiskLevel,
    pub polarity: Polarity,
    pub kind: ParameterKind,
    /// For categorical rows, the observations that count as fulfilled.
    /// Empty means any decided value other than "No" is accepted.
    pub accepted_values: Vec<String>,
    pub mode: EvaluationMode,
}

impl ParameterSpec {
    /// True when `value` is one of this row's accepted categorical values.
    /// Comparison ignores case and whitespace ("Length+ letters + numbers"
    /// matches "Length+letters+numbers").
    pub fn accepts(&self, value: &str) -> bool {
        if self.accepted_values.is_empty() {
            return true;
        }
        let key = squash(value);
        self.accepted_values.iter().any(|v| squash(v) == key)
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checklist {
    pub version: String,
    pub parameters: Vec<ParameterSpec>,
}

impl Checklist {
    /// Builds a checklist and checks every invariant.
    pub fn new(version: impl Into<String>, parameters: Vec<ParameterSpec>) -> Result<Self, ChecklistError> {
        let checklist = Checklist {
            version: version.into(),
            parameters,
        };
        checklist.validate()?;
        Ok(checklist)
    }

    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ParameterSpec> {
        self.parameters.iter().find(|p| p.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.id == id)
    }

    pub fn by_mode(&self, mode: EvaluationMode) -> impl Iterator<Item = &ParameterSpec> {
        self.parameters.iter().filter(move |p| p.mode == mode)
    }

    pub fn by_category(&self, category: Category) -> impl Iterator<Item = &ParameterSpec> {
        self.parameters.iter().filter(move |p| p.category == category)
    }

    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        for p in &self.parameters {
            *counts.entry(p.category).or_default() += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<(), ChecklistError> {
        if self.parameters.is_empty() {
            return Err(ChecklistError::Empty);
        }
        let mut seen = HashSet::new();
        for p in &self.parameters {
            if p.id.is_empty() {
                return Err(ChecklistError::Invalid(format!("parameter '{}' has an empty id", p.name)));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(ChecklistError::DuplicateId(p.id.clone()));
            }
            let derived = risk_level(p.likelihood, p.impact);
            if derived != p.risk {
                return Err(ChecklistError::RiskMismatch {
                    id: p.id.clone(),
                    stored: p.risk,
                    derived,
                });
            }
            if p.kind == ParameterKind::Boolean && !p.accepted_values.is_empty() {
                return Err(ChecklistError::Invalid(format!(
                    "boolean parameter '{}' lists accepted values",
                    p.id
                )));
            }
        }
        for (category, found) in self.category_counts() {
            let expected = category.expected_parameter_count();
            if found != expected {
                return Err(ChecklistError::CategoryCount { category, expected, found });
            }
        }
        Ok(())
    }

    /// Serializes to the line-oriented checklist format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# Security checklist\n");
        out.push_str(&format!("# version: {}\n", self.version));
        out.push_str("# id|category|subcategory|name|likelihood|impact|risk|mode|polarity|kind|accepted_values\n");
        for p in &self.parameters {
            out.push_str(&format!(
                "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}\n",
                p.id,
                p.category.ident(),
                p.subcategory,
                p.name,
                p.likelihood.ident(),
                p.impact.ident(),
                p.risk.ident(),
                p.mode.ident(),
                p.polarity.ident(),
                p.kind.ident(),
                p.accepted_values.join(","),
            ));
        }
        out
    }
}

/// Parses and validates a checklist document.
///
/// Rows carry either ten fields (risk derived) or eleven (risk stored after
/// impact, then checked against the matrix). A `# version: X` comment sets
/// the version; other `#` lines and blank lines are ignored.
pub fn load_checklist(source: &str) -> Result<Checklist, ChecklistError> {
    let mut version = None;
    let mut parameters = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("version:") {
                version = Some(v.trim().to_string());
            }
            continue;
        }
        parameters.push(parse_row(line).map_err(|message| ChecklistError::Parse { line: line_no, message })?);
    }
    if parameters.is_empty() {
        return Err(ChecklistError::Parse {
            line: 0,
            message: "document contains no parameter rows".into(),
        });
    }
    Checklist::new(version.unwrap_or_else(|| DEFAULT_CHECKLIST_VERSION.to_string()), parameters)
}

fn parse_row(line: &str) -> Result<ParameterSpec, String> {
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    let (stored_risk, rest) = match fields.len() {
        10 => (None, [&fields[..6], &fields[6..]].concat()),
        11 => (Some(fields[6]), [&fields[..6], &fields[7..]].concat()),
        n => return Err(format!("expected 10 or 11 '|'-separated fields, found {n}")),
    };
    let err = |e: ChecklistError| e.to_string();
    let likelihood: LikelihoodLevel = rest[4].parse().map_err(err)?;
    let impact: ImpactLevel = rest[5].parse().map_err(err)?;
    let risk = match stored_risk {
        Some(r) => r.parse().map_err(err)?,
        None => risk_level(likelihood, impact),
    };
    let accepted_values = rest[9]
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if rest[0].is_empty() {
        return Err("empty id".into());
    }
    Ok(ParameterSpec {
        id: rest[0].to_string(),
        category: rest[1].parse().map_err(err)?,
        subcategory: rest[2].to_string(),
        name: rest[3].to_string(),
        likelihood,
        impact,
        risk,
        mode: rest[6].parse().map_err(err)?,
        polarity: rest[7].parse().map_err(err)?,
        kind: rest[8].parse().map_err(err)?,
        accepted_values,
    })
}

struct Row {
    id: &'static str,
    category: Category,
    subcategory: &'static str,
    name: &'static str,
    likelihood: LikelihoodLevel,
    impact: ImpactLevel,
    risk: RiskLevel,
    mode: EvaluationMode,
    polarity: Polarity,
    accepted: &'static [&'static str],
    categorical: bool,
}

#[allow(clippy::too_many_arguments)]
const fn row(
    id: &'static str,
    category: Category,
    subcategory: &'static str,
    name: &'static str,
    likelihood: LikelihoodLevel,
    impact: ImpactLevel,
    risk: RiskLevel,
    mode: EvaluationMode,
) -> Row {
    Row {
        id,
        category,
        subcategory,
        name,
        likelihood,
        impact,
        risk,
        mode,
        polarity: Polarity::DesiredYes,
        accepted: &[],
        categorical: false,
    }
}

impl Row {
    const fn desired_no(mut self) -> Self {
        self.polarity = Polarity::DesiredNo;
        self
    }

    const fn categorical(mut self, accepted: &'static [&'static str]) -> Self {
        self.categorical = true;
        self.accepted = accepted;
        self
    }
}

use Category as C;
use EvaluationMode::{Dynamic, Manual, Static};
use ImpactLevel as I;
use LikelihoodLevel as L;
use RiskLevel as R;

/// Rows in table order. Risk values are the printed ones; the matrix must agree.
const DEFAULT_ROWS: [Row; 48] = [
    // Authentication Security
    row(ids::LOCKOUT, C::AuthenticationSecurity, "Brute Force Protection", "Lockout after max failed login attempts", L::AlmostCertain, I::Significant, R::VeryHigh, Dynamic),
    row(ids::CAPTCHA, C::AuthenticationSecurity, "Brute Force Protection", "CAPTCHA triggered after failed attempts", L::AlmostCertain, I::Significant, R::VeryHigh, Dynamic),
    row(ids::LOCKOUT_NOTIFICATION, C::AuthenticationSecurity, "Brute Force Protection", "Account lockout notification sent", L::Moderate, I::Insignificant, R::Low, Manual),
    row(ids::PASSWORD_COMPLEXITY, C::AuthenticationSecurity, "Password Policy", "Password complexity (Uppercase, Lowercase, Numbers, Symbols, Length)", L::Moderate, I::Significant, R::Medium, Dynamic)
        .categorical(&["Only Length", "Length+letters+numbers", "Full"]),
    row(ids::PASSWORD_EXPIRATION, C::AuthenticationSecurity, "Password Policy", "Password expiration", L::Moderate, I::Insignificant, R::Low, Manual),
    row(ids::PASSWORD_REUSE, C::AuthenticationSecurity, "Password Policy", "Password reuse restriction (last N passwords disallowed)", L::Unlikely, I::Minor, R::Low, Manual),
    row(ids::MFA_ENABLED, C::AuthenticationSecurity, "MFA", "MFA Enabled", L::Likely, I::Major, R::VeryHigh, Dynamic),
    row(ids::MFA_TYPE, C::AuthenticationSecurity, "MFA", "Type of MFA (TOTP, OTP, Push Notification)", L::Moderate, I::Insignificant, R::Low, Dynamic)
        .categorical(&["TOTP", "OTP", "Push Notification"]),
    row(ids::BACKUP_CODES, C::AuthenticationSecurity, "MFA", "Backup codes available", L::Moderate, I::Significant, R::Medium, Manual),
    row(ids::RATE_LIMIT, C::AuthenticationSecurity, "Rate Limiting", "Max login attempts per second/IP", L::AlmostCertain, I::Minor, R::High, Dynamic),
    row(ids::RATE_LIMIT_RESPONSE, C::AuthenticationSecurity, "Rate Limiting", "Response after rate limit exceeded (Error code, CAPTCHA, Lockout)", L::Unlikely, I::Insignificant, R::VeryLow, Dynamic)
        .categorical(&["Error Code", "CAPTCHA", "Lockout"]),
    // Input Validation & Protection Against Injection Attacks
    row(ids::EMAIL_VERIFICATION, C::InputValidation, "Email Validation", "Email Verification", L::Unlikely, I::Insignificant, R::VeryLow, Dynamic),
    row(ids::PARAMETERIZED_QUERIES, C::InputValidation, "SQL Injection Protection", "Parameterized Queries Used", L::Likely, I::Major, R::VeryHigh, Static),
    row(ids::SPECIAL_CHARS_ESCAPED, C::InputValidation, "SQL Injection Protection", "Special characters properly escaped", L::Likely, I::Major, R::VeryHigh, Dynamic),
    row(ids::JS_EXECUTION, C::InputValidation, "XSS Protection", "JavaScript execution inside input fields", L::Likely, I::Major, R::VeryHigh, Dynamic)
        .desired_no(),
    row(ids::HTML_INJECTION, C::InputValidation, "XSS Protection", "HTML tag injection possible (<script>alert(1)</script>)", L::Moderate, I::Major, R::High, Dynamic)
        .desired_no(),
    row(ids::POST_ONLY_LOGIN, C::InputValidation, "XSS Protection", "Login API uses the POST method only", L::Unlikely, I::Minor, R::Low, Dynamic),
    row(ids::CORS_POLICY, C::InputValidation, "XSS Protection", "CORS policy configured properly", L::Unlikely, I::Minor, R::Low, Manual),
    row(ids::CSRF_TOKEN_PRESENT, C::InputValidation, "XSS Protection", "CSRF token present in requests", L::Likely, I::Major, R::VeryHigh, Dynamic),
    row(ids::CSRF_VALIDATION, C::InputValidation, "XSS Protection", "CSRF token validation enforced", L::Likely, I::Major, R::VeryHigh, Dynamic),
    row(ids::HPP, C::InputValidation, "HPP Protection", "Handling of multiple identical parameters (e.g., ?user=admin&user=guest)", L::Unlikely, I::Minor, R::Low, Dynamic)
        .categorical(&["first-wins", "rejected"]),
    // Session Security
    row(ids::SESSION_CREATION, C::SessionSecurity, "Secure Cookies", "Session creation enabled", L::Unlikely, I::Insignificant, R::VeryLow, Dynamic),
    row(ids::COOKIE_SECURE, C::SessionSecurity, "Secure Cookies", "Session cookie has a Secure flag", L::AlmostCertain, I::Major, R::Extreme, Dynamic),
    row(ids::COOKIE_HTTPONLY, C::SessionSecurity, "Secure Cookies", "Session cookie has a HttpOnly flag", L::AlmostCertain, I::Major, R::Extreme, Dynamic),
    row(ids::COOKIE_SAMESITE, C::SessionSecurity, "Secure Cookies", "Session cookie has SameSite flag", L::AlmostCertain, I::Major, R::Extreme, Dynamic),
    row(ids::SESSION_TIMEOUT, C::SessionSecurity, "Session Expiry", "Session timeout duration (minutes)", L::Unlikely, I::Minor, R::Low, Dynamic),
    row(ids::SESSION_REGENERATED, C::SessionSecurity, "Session Hijacking Protection", "Session ID regenerated after login", L::Moderate, I::Severe, R::VeryHigh, Dynamic),
    row(ids::FIXATION_PROTECTION, C::SessionSecurity, "Session Hijacking Protection", "Session Fixation Protection", L::AlmostCertain, I::Major, R::Extreme, Dynamic),
    row(ids::SESSION_COOKIE_ONLY, C::SessionSecurity, "Session Hijacking Protection", "Session ID stored only in cookies, not in URLs", L::Moderate, I::Severe, R::VeryHigh, Dynamic),
    // Secure Storage
    row(ids::HASH_ALGORITHM, C::SecureStorage, "Password Hashing", "Hashing Algorithm Used (bcrypt, Argon2, PBKDF2, NA)", L::Unlikely, I::Severe, R::High, Static)
        .categorical(&["bcrypt", "Argon2", "PBKDF2"]),
    row(ids::SALTED_HASHES, C::SecureStorage, "Password Hashing", "Salted hashes used", L::Unlikely, I::Severe, R::High, Static),
    // Error Handling & Information Disclosure
    row(ids::REVEALS_USERNAME, C::ErrorHandling, "Generic Error Messages", "Does the error message reveal if the username exists?", L::Unlikely, I::Insignificant, R::VeryLow, Dynamic)
        .desired_no(),
    row(ids::REVEALS_PASSWORD_RULES, C::ErrorHandling, "Generic Error Messages", "Does the error message reveal password complexity rules?", L::Unlikely, I::Insignificant, R::VeryLow, Dynamic)
        .desired_no(),
    row(ids::FAILED_LOGIN_LOGGED, C::ErrorHandling, "Logging & Monitoring", "Failed login attempts logged", L::Unlikely, I::Insignificant, R::VeryLow, Static),
    row(ids::UNUSUAL_LOGIN_FLAGGED, C::ErrorHandling, "Logging & Monitoring", "Unusual login attempts flagged", L::Unlikely, I::Insignificant, R::VeryLow, Manual),
    row(ids::LOGS_SECURE, C::ErrorHandling, "Logging & Monitoring", "Logs stored securely", L::Moderate, I::Minor, R::Medium, Manual),
    // HTTP Security Headers
    row(ids::CSP_PRESENT, C::HttpSecurityHeaders, "CSP Protection", "CSP header present", L::Unlikely, I::Insignificant, R::VeryLow, Dynamic),
    row(ids::CSP_BLOCKS_INLINE, C::HttpSecurityHeaders, "CSP Protection", "CSP policy blocks inline scripts", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::CSP_BLOCKS_DATA_URI, C::HttpSecurityHeaders, "CSP Protection", "CSP blocks data URIs for scripts", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::CSP_RESTRICTS_SOURCES, C::HttpSecurityHeaders, "CSP Protection", "CSP restricts external script sources", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::X_FRAME_OPTIONS, C::HttpSecurityHeaders, "Clickjacking Protection", "X-Frame-Options set", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::X_CONTENT_TYPE_OPTIONS, C::HttpSecurityHeaders, "MIME Type Sniffing Protection", "X-Content-Type-Options set to nosniff", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::HSTS_PRESENT, C::HttpSecurityHeaders, "HSTS", "Strict-Transport-Security header present", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::HSTS_MAX_AGE, C::HttpSecurityHeaders, "HSTS", "HSTS max-age value (seconds)", L::Unlikely, I::Minor, R::Low, Dynamic)
        .categorical(&[]),
    row(ids::REFERRER_POLICY_SET, C::HttpSecurityHeaders, "Referrer Policy Protection", "Referrer-Policy header set", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::REFERRER_POLICY_STRICT, C::HttpSecurityHeaders, "Referrer Policy Protection", "Referrer-Policy set to \"no-referrer\" or \"strict-origin-when-cross-origin\"", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::PERMISSIONS_POLICY_PRESENT, C::HttpSecurityHeaders, "Feature Policy & Permissions Policy", "Permissions-Policy header present", L::Moderate, I::Minor, R::Medium, Dynamic),
    row(ids::PERMISSIONS_RESTRICTED, C::HttpSecurityHeaders, "Feature Policy & Permissions Policy", "Restrictions on camera, microphone, geolocation access set", L::Moderate, I::Minor, R::Medium, Dynamic),
];

/// The built-in 48-row checklist.
pub fn default_checklist() -> Checklist {
    let parameters = DEFAULT_ROWS
        .iter()
        .map(|r| ParameterSpec {
            id: r.id.to_string(),
            category: r.category,
            subcategory: r.subcategory.to_string(),
            name: r.name.to_string(),
            likelihood: r.likelihood,
            impact: r.impact,
            risk: r.risk,
            polarity: r.polarity,
            kind: if r.categorical { ParameterKind::Categorical } else { ParameterKind::Boolean },
            accepted_values: r.accepted.iter().map(|s| s.to_string()).collect(),
            mode: r.mode,
        })
        .collect();
    Checklist {
        version: DEFAULT_CHECKLIST_VERSION.to_string(),
        parameters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_level_examples() {
        assert_eq!(risk_level(L::AlmostCertain, I::Major), R::Extreme);
        assert_eq!(risk_level(L::Unlikely, I::Insignificant), R::VeryLow);
        assert_eq!(risk_level(L::Moderate, I::Significant), R::Medium);
        assert_eq!(risk_level(L::Rare, I::Severe), R::Low);
    }

    #[test]
    fn ordinals_are_bijective() {
        let l: Vec<u8> = L::ALL.iter().map(|v| v.ordinal()).collect();
        let i: Vec<u8> = I::ALL.iter().map(|v| v.ordinal()).collect();
        let r: Vec<u8> = R::ALL.iter().map(|v| v.rank()).collect();
        assert_eq!(l, vec![1, 2, 3, 4, 5]);
        assert_eq!(i, vec![1, 2, 3, 4, 5]);
        assert_eq!(r, vec![1, 2, 3, 4, 5, 6]);
        for n in 1..=5 {
            assert_eq!(L::from_ordinal(n).unwrap().ordinal(), n);
        }
        assert!(L::from_ordinal(0).is_none());
    }

    #[test]
    fn risk_level_is_monotone_and_symmetric_in_ordinals() {
        for &l in L::ALL {
            for &i in I::ALL {
                let here = risk_level(l, i);
                if let Some(l2) = L::from_ordinal(l.ordinal() + 1) {
                    assert!(risk_level(l2, i) >= here);
                }
                if let Some(i2) = I::from_ordinal(i.ordinal() + 1) {
                    assert!(risk_level(l, i2) >= here);
                }
                let swapped = risk_level(
                    L::from_ordinal(i.ordinal()).unwrap(),
                    I::from_ordinal(l.ordinal()).unwrap(),
                );
                assert_eq!(swapped, here);
            }
        }
    }

    #[test]
    fn default_checklist_is_valid() {
        let c = default_checklist();
        assert_eq!(c.len(), 48);
        c.validate().unwrap();
        let extreme: Vec<_> = c.parameters.iter().filter(|p| p.risk == R::Extreme).map(|p| p.id.as_str()).collect();
        assert_eq!(
            extreme,
            vec![ids::COOKIE_SECURE, ids::COOKIE_HTTPONLY, ids::COOKIE_SAMESITE, ids::FIXATION_PROTECTION]
        );
    }

    #[test]
    fn named_rows() {
        let c = default_checklist();
        let mfa = c.parameters.iter().find(|p| p.name == "MFA Enabled").unwrap();
        assert_eq!((mfa.likelihood, mfa.impact, mfa.risk), (L::Likely, I::Major, R::VeryHigh));
        let fix = c.parameters.iter().find(|p| p.name == "Session Fixation Protection").unwrap();
        assert_eq!((fix.likelihood, fix.impact, fix.risk), (L::AlmostCertain, I::Major, R::Extreme));
    }

    #[test]
    fn desired_no_rows() {
        let c = default_checklist();
        let mut ids_no: Vec<_> = c.parameters.iter().filter(|p| p.polarity == Polarity::DesiredNo).map(|p| p.id.as_str()).collect();
        ids_no.sort();
        assert_eq!(
            ids_no,
            vec![ids::REVEALS_PASSWORD_RULES, ids::REVEALS_USERNAME, ids::HTML_INJECTION, ids::JS_EXECUTION]
        );
    }

    #[test]
    fn round_trip_text() {
        let c = default_checklist();
        assert_eq!(load_checklist(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn ten_field_rows_derive_risk() {
        let text = default_checklist()
            .to_text()
            .lines()
            .map(|l| {
                if l.starts_with('#') {
                    l.to_string()
                } else {
                    let mut f: Vec<&str> = l.split('|').collect();
                    f.remove(6);
                    f.join("|")
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(load_checklist(&text).unwrap(), default_checklist());
    }

    #[test]
    fn stored_risk_must_match_matrix() {
        let text = default_checklist().to_text().replace(
            "auth.password_expiration|AuthenticationSecurity|Password Policy|Password expiration|Moderate|Insignificant|Low|",
            "auth.password_expiration|AuthenticationSecurity|Password Policy|Password expiration|Moderate|Insignificant|High|",
        );
        match load_checklist(&text) {
            Err(ChecklistError::RiskMismatch { stored, derived, .. }) => {
                assert_eq!(stored, R::High);
                assert_eq!(derived, R::Low);
            }
            other => panic!("expected risk mismatch, got {other:?}"),
        }
    }

    #[test]
    fn empty_document_is_a_parse_error() {
        assert!(matches!(load_checklist(""), Err(ChecklistError::Parse { .. })));
        assert!(matches!(load_checklist("# only a comment\n"), Err(ChecklistError::Parse { .. })));
    }

    #[test]
    fn malformed_row_reports_line() {
        let mut text = default_checklist().to_text();
        text.push_str("broken|row\n");
        match load_checklist(&text) {
            Err(ChecklistError::Parse { line, .. }) => assert_eq!(line, 52),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_counts_rejected() {
        let mut c = default_checklist();
        c.parameters[1].id = c.parameters[0].id.clone();
        assert!(matches!(c.validate(), Err(ChecklistError::DuplicateId(_))));

        let mut c = default_checklist();
        c.parameters.pop();
        assert!(matches!(
            c.validate(),
            Err(ChecklistError::CategoryCount { category: Category::HttpSecurityHeaders, expected: 12, found: 11 })
        ));
    }

    #[test]
    fn level_parsing_is_lenient() {
        assert_eq!("Almost certain".parse::<L>().unwrap(), L::AlmostCertain);
        assert_eq!("insignificant".parse::<I>().unwrap(), I::Insignificant);
        assert_eq!("Very High".parse::<R>().unwrap(), R::VeryHigh);
        assert_eq!("HTTP Security Headers".parse::<Category>().unwrap(), Category::HttpSecurityHeaders);
        assert!("Catastrophic".parse::<I>().is_err());
    }

    #[test]
    fn accepted_values_ignore_spacing() {
        let c = default_checklist();
        let p = c.get(ids::PASSWORD_COMPLEXITY).unwrap();
        assert!(p.accepts("Length+ letters + numbers"));
        assert!(p.accepts("only length"));
        assert!(!p.accepts("Symbols only"));
    }
}
