//! A minimal browser: one cookie jar per logical client, no automatic
//! redirects, retry on throttling, and evidence summaries with secrets
//! masked.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use reqwest::header::{COOKIE, LOCATION, RETRY_AFTER, SET_COOKIE};
use reqwest::{Client, Method, StatusCode};
use secaudit_core::Evidence;
use url::Url;

use crate::error::ScanError;
use crate::signatures::Signatures;
use crate::target::TargetConfig;

pub const REDACTED: &str = "[REDACTED]";
const MAX_ATTEMPTS: usize = 8;
const EXCERPT_CHARS: usize = 240;

/// Shared state of one scan: target, signature lists, HTTP client and the
/// set of strings to mask in evidence.
pub struct ScanContext {
    pub target: TargetConfig,
    pub signatures: Signatures,
    client: Client,
    secrets: Mutex<Vec<String>>,
}

impl ScanContext {
    pub fn new(target: TargetConfig, signatures: Signatures) -> Result<Self, ScanError> {
        target.validate()?;
        let client = Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(target.request_timeout())
            .build()
            .map_err(|e| ScanError::Client(e.to_string()))?;
        let ctx = ScanContext {
            signatures,
            client,
            secrets: Mutex::new(Vec::new()),
            target,
        };
        for s in ctx.target.secrets() {
            ctx.add_secret(s);
        }
        Ok(ctx)
    }

    /// Registers another value that must not appear in evidence.
    pub fn add_secret(&self, secret: impl Into<String>) {
        let secret = secret.into();
        if secret.len() < 3 {
            return;
        }
        let encoded: String = url::form_urlencoded::byte_serialize(secret.as_bytes()).collect();
        let mut s = self.secrets.lock().unwrap_or_else(|p| p.into_inner());
        for v in [secret, encoded] {
            if !s.contains(&v) {
                s.push(v);
            }
        }
        // Longest first so a secret containing another is masked whole.
        s.sort_by_key(|v| std::cmp::Reverse(v.len()));
    }

    pub fn redact(&self, text: &str) -> String {
        let secrets = self.secrets.lock().unwrap_or_else(|p| p.into_inner());
        secrets.iter().fold(text.to_string(), |acc, s| acc.replace(s.as_str(), REDACTED))
    }

    pub fn browser(&self) -> Browser<'_> {
        Browser {
            ctx: self,
            jar: BTreeMap::new(),
        }
    }

    fn is_sensitive_field(&self, name: &str) -> bool {
        name == self.target.password_field || name == self.target.otp_field
    }
}

/// One request and its response.
#[derive(Debug, Clone)]
pub struct Exchange {
    /// Redacted one-line description of the request.
    pub request: String,
    pub url: Url,
    pub status: StatusCode,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Exchange {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn header_all(&self, name: &str) -> Vec<&str> {
        self.headers
            .iter()
            .filter(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn set_cookies(&self) -> Vec<String> {
        self.header_all(SET_COOKIE.as_str()).into_iter().map(str::to_string).collect()
    }

    pub fn location(&self) -> Option<Url> {
        self.header(LOCATION.as_str()).and_then(|l| self.url.join(l).ok())
    }

    pub fn is_redirect(&self) -> bool {
        self.status.is_redirection() && self.location().is_some()
    }

    /// Status plus a whitespace-collapsed excerpt of the page body.
    pub fn summary(&self, ctx: &ScanContext) -> String {
        let start = self.body.find("<body").unwrap_or(0);
        self.summary_at(ctx, start)
    }

    /// Like [`Exchange::summary`] but with the excerpt centered on `needle`.
    pub fn summary_around(&self, ctx: &ScanContext, needle: &str) -> String {
        match self.body.find(needle) {
            Some(i) => {
                let mut start = i.saturating_sub(60);
                while !self.body.is_char_boundary(start) {
                    start -= 1;
                }
                self.summary_at(ctx, start)
            }
            None => self.summary(ctx),
        }
    }

    fn summary_at(&self, ctx: &ScanContext, start: usize) -> String {
        let text: String = self.body[start..].split_whitespace().collect::<Vec<_>>().join(" ");
        let mut excerpt: String = text.chars().take(EXCERPT_CHARS).collect();
        if text.chars().count() > EXCERPT_CHARS {
            excerpt.push('…');
        }
        let mut s = format!("{} {}", self.status.as_u16(), self.status.canonical_reason().unwrap_or(""));
        if let Some(loc) = self.header(LOCATION.as_str()) {
            s.push_str(&format!(" -> {loc}"));
        }
        if !excerpt.is_empty() {
            s.push_str(": ");
            s.push_str(&excerpt);
        }
        ctx.redact(&s)
    }

    pub fn evidence(&self, ctx: &ScanContext) -> Evidence {
        Evidence::new(self.request.clone(), self.summary(ctx))
    }

    pub fn evidence_around(&self, ctx: &ScanContext, needle: &str) -> Evidence {
        Evidence::new(self.request.clone(), self.summary_around(ctx, needle))
    }
}

/// A client with its own cookie jar.
pub struct Browser<'a> {
    pub ctx: &'a ScanContext,
    jar: BTreeMap<String, String>,
}

impl<'a> Browser<'a> {
    pub fn set_cookie(&mut self, name: &str, value: &str) {
        self.jar.insert(name.to_string(), value.to_string());
    }

    pub fn cookie(&self, name: &str) -> Option<&str> {
        self.jar.get(name).map(String::as_str)
    }

    pub fn cookies(&self) -> &BTreeMap<String, String> {
        &self.jar
    }

    /// Resolves a configured path or a followed absolute URL.
    pub fn resolve(&self, path_or_url: &str) -> Url {
        Url::parse(path_or_url).unwrap_or_else(|_| self.ctx.target.url(path_or_url))
    }

    pub async fn get(&mut self, path: &str) -> Result<Exchange, String> {
        let url = self.resolve(path);
        self.send(Method::GET, url, &[], true).await
    }

    /// GET with query pairs appended in order; duplicates are kept.
    pub async fn get_query(&mut self, path: &str, pairs: &[(&str, &str)]) -> Result<Exchange, String> {
        let mut url = self.resolve(path);
        {
            let mut q = url.query_pairs_mut();
            for (k, v) in pairs {
                q.append_pair(k, v);
            }
        }
        self.send(Method::GET, url, &[], true).await
    }

    pub async fn post_form(&mut self, path: &str, form: &[(&str, &str)]) -> Result<Exchange, String> {
        let url = self.resolve(path);
        let form: Vec<(String, String)> = form.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self.send(Method::POST, url, &form, true).await
    }

    /// Follows redirects from `first` (GET only), returning every hop
    /// including `first`.
    pub async fn follow(&mut self, first: Exchange, max_hops: usize) -> Result<Vec<Exchange>, String> {
        let mut chain = vec![first];
        while chain.len() <= max_hops {
            let Some(next) = chain.last().filter(|e| e.is_redirect()).and_then(|e| e.location()) else {
                break;
            };
            let ex = self.send(Method::GET, next, &[], true).await?;
            chain.push(ex);
        }
        Ok(chain)
    }

    pub async fn send(
        &mut self,
        method: Method,
        url: Url,
        form: &[(String, String)],
        retry_when_throttled: bool,
    ) -> Result<Exchange, String> {
        let ctx = self.ctx;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut req = ctx.client.request(method.clone(), url.clone());
            if !self.jar.is_empty() {
                let cookie = self.jar.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("; ");
                req = req.header(COOKIE, cookie);
            }
            if method == Method::POST {
                req = req.form(form);
            }
            let response = req.send().await.map_err(|e| format!("{method} {}: {e}", url.path()))?;
            let status = response.status();
            let headers: Vec<(String, String)> = response
                .headers()
                .iter()
                .map(|(k, v)| (k.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
                .collect();
            let body = response.text().await.unwrap_or_default();
            let ex = Exchange {
                request: self.describe(&method, &url, form),
                url: url.clone(),
                status,
                headers,
                body,
            };
            for c in ex.set_cookies() {
                self.absorb(&c);
            }
            let wait = throttle_delay(&ex);
            match wait {
                Some(wait) if retry_when_throttled && attempt < MAX_ATTEMPTS => tokio::time::sleep(wait).await,
                _ => return Ok(ex),
            }
        }
    }

    fn describe(&self, method: &Method, url: &Url, form: &[(String, String)]) -> String {
        let mut s = format!("{method} {}", url.path());
        if url.query().is_some() {
            let pairs: Vec<String> = url
                .query_pairs()
                .map(|(k, v)| {
                    if self.ctx.is_sensitive_field(&k) {
                        format!("{k}={REDACTED}")
                    } else {
                        format!("{k}={v}")
                    }
                })
                .collect();
            s.push('?');
            s.push_str(&pairs.join("&"));
        }
        if !form.is_empty() {
            let fields: Vec<String> = form
                .iter()
                .map(|(k, v)| {
                    if self.ctx.is_sensitive_field(k) {
                        format!("{k}={REDACTED}")
                    } else {
                        format!("{k}={v}")
                    }
                })
                .collect();
            s.push(' ');
            s.push_str(&fields.join("&"));
        }
        self.ctx.redact(&s)
    }

    fn absorb(&mut self, set_cookie: &str) {
        let Some((name, rest)) = set_cookie.split_once('=') else {
            return;
        };
        let name = name.trim().to_string();
        let mut parts = rest.split(';');
        let value = parts.next().unwrap_or("").trim().to_string();
        let expired = parts.any(|a| {
            let a = a.trim().to_ascii_lowercase();
            a == "max-age=0" || a.starts_with("max-age=-")
        });
        if expired || value.is_empty() {
            self.jar.remove(&name);
        } else {
            self.jar.insert(name, value);
        }
    }
}

/// How long to back off when a response signals throttling.
fn throttle_delay(ex: &Exchange) -> Option<Duration> {
    let after = ex.header(RETRY_AFTER.as_str());
    if ex.status != StatusCode::TOO_MANY_REQUESTS && after.is_none() {
        return None;
    }
    let secs = after.and_then(|v| v.trim().parse::<f64>().ok()).unwrap_or(1.0).clamp(0.0, 5.0);
    Some(Duration::from_secs_f64(secs) + Duration::from_millis(50))
}

/// Cookie `name=value; attrs` with the value replaced by its length, so
/// evidence stays stable across runs and never carries a live session id.
pub fn mask_cookie(set_cookie: &str) -> String {
    match set_cookie.split_once('=') {
        Some((name, rest)) => {
            let (value, attrs) = rest.split_once(';').map_or((rest, ""), |(v, a)| (v, a));
            let attrs = if attrs.is_empty() { String::new() } else { format!(";{attrs}") };
            format!("{name}=<{} chars>{attrs}", value.trim().len())
        }
        None => set_cookie.to_string(),
    }
}
