use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::{RawQuery, State};
use axum::http::header::{HeaderName, HeaderValue, CONTENT_TYPE, COOKIE, LOCATION, RETRY_AFTER, SET_COOKIE};
use axum::http::{HeaderMap, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use rand::distr::{Alphanumeric, SampleString};
use serde::{Deserialize, Serialize};
use totp_rs::{Algorithm, Secret, TOTP};

use crate::config::{
    CsrfMode, HppBehavior, MfaMode, RateLimitResponse, SqlMode, TestbedConfig, CAPTCHA_PASS, TOTP_SECRET,
};
use crate::sql::{self, LoginQuery};

pub const SESSION_COOKIE: &str = "SESSID";
pub const MAIL_PATH: &str = "/__testbed/mail";
pub const RESET_PATH: &str = "/__testbed/reset";
pub const LOGS_PATH: &str = "/__testbed/logs";

const PRODUCTS: [&str; 6] = ["Desk Lamp", "Office Chair", "Standing Desk", "Monitor Arm", "Desk Mat", "Bookshelf"];

/// A message captured instead of being sent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MailSinkEntry {
    pub recipient: String,
    pub subject: String,
    pub body: String,
    pub captured_at: DateTime<Utc>,
}

struct User {
    password: String,
    email: String,
    verified: bool,
}

struct Session {
    user: Option<String>,
    pending_mfa: Option<String>,
    csrf: String,
    last_seen: Instant,
}

#[derive(Default)]
struct Attempts {
    failures: u32,
    locked_until: Option<Instant>,
}

struct Inner {
    users: HashMap<String, User>,
    // Session ids map to records so that an id kept alive after
    // regeneration shares the authenticated record.
    ids: HashMap<String, u64>,
    records: HashMap<u64, Session>,
    next_record: u64,
    attempts: HashMap<String, Attempts>,
    verify_tokens: HashMap<String, String>,
    mail: Vec<MailSinkEntry>,
    logs: Vec<String>,
    window: (Instant, u32),
}

impl Inner {
    fn new(config: &TestbedConfig) -> Self {
        let seed = &config.seed_user;
        let mut users = HashMap::new();
        users.insert(
            seed.username.clone(),
            User {
                password: seed.password.clone(),
                email: seed.email.clone(),
                verified: true,
            },
        );
        Inner {
            users,
            ids: HashMap::new(),
            records: HashMap::new(),
            next_record: 0,
            attempts: HashMap::new(),
            verify_tokens: HashMap::new(),
            mail: Vec::new(),
            logs: Vec::new(),
            window: (Instant::now(), 0),
        }
    }

    fn drop_record(&mut self, record: u64) {
        self.records.remove(&record);
        self.ids.retain(|_, r| *r != record);
    }
}

pub(crate) struct App {
    config: TestbedConfig,
    inner: Mutex<Inner>,
    totp: TOTP,
}

impl App {
    pub(crate) fn new(config: TestbedConfig) -> Self {
        let secret = Secret::Encoded(TOTP_SECRET.into()).to_bytes().expect("valid base32 secret");
        let totp = TOTP::new(Algorithm::SHA1, 6, 1, 30, secret).expect("valid TOTP parameters");
        let inner = Mutex::new(Inner::new(&config));
        App { config, inner, totp }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub(crate) fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/", get(home))
        .route("/login", get(login_get).post(login_post))
        .route("/mfa", get(mfa_get).post(mfa_post))
        .route("/logout", get(logout).post(logout))
        .route("/register", get(register_get).post(register_post))
        .route("/verify", get(verify))
        .route("/profile", get(profile))
        .route("/form", get(form_get).post(form_post))
        .route("/search", get(search))
        .route(MAIL_PATH, get(mail))
        .route(LOGS_PATH, get(logs))
        .route(RESET_PATH, post(reset))
        .layer(axum::middleware::map_response_with_state(app.clone(), security_headers))
        .with_state(app)
}

async fn security_headers(State(app): State<Arc<App>>, mut response: Response) -> Response {
    for (name, value) in app.config.headers.pairs() {
        if let Ok(value) = HeaderValue::from_str(value) {
            response.headers_mut().insert(HeaderName::from_static(name), value);
        }
    }
    response
}

// ---------------------------------------------------------------- helpers

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn random_token(len: usize) -> String {
    Alphanumeric.sample_string(&mut rand::rng(), len)
}

fn page(title: &str, body: &str) -> String {
    format!("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title></head>\n<body>\n<h1>{title}</h1>\n{body}\n</body></html>\n")
}

fn form_pairs(text: &str) -> Vec<(String, String)> {
    form_urlencoded::parse(text.as_bytes()).into_owned().collect()
}

fn first<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn presented_id(app: &App, headers: &HeaderMap, query: &[(String, String)]) -> Option<String> {
    let from_cookie = headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == SESSION_COOKIE)
        .map(|(_, v)| v.to_string());
    from_cookie.or_else(|| {
        app.config
            .session_in_url
            .then(|| first(query, SESSION_COOKIE).map(str::to_string))
            .flatten()
    })
}

/// Per-request view of the session: which id the client is using, its
/// record, and whether a cookie must be (re)issued.
struct Ctx {
    id: Option<String>,
    record: Option<u64>,
    set_cookie: bool,
}

impl Ctx {
    fn user(&self, inner: &Inner) -> Option<String> {
        self.record.and_then(|r| inner.records.get(&r)).and_then(|s| s.user.clone())
    }

    fn session<'a>(&self, inner: &'a mut Inner) -> Option<&'a mut Session> {
        self.record.and_then(|r| inner.records.get_mut(&r))
    }
}

fn valid_id(id: &str) -> bool {
    (8..=128).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn resolve(app: &App, inner: &mut Inner, presented: Option<String>) -> Ctx {
    let cfg = &app.config;
    if !cfg.sessions_enabled {
        return Ctx {
            id: None,
            record: None,
            set_cookie: false,
        };
    }
    let now = Instant::now();
    let timeout = (cfg.session_timeout_minutes > 0.0).then(|| Duration::from_secs_f64(cfg.session_timeout_minutes * 60.0));
    if let Some(id) = presented.as_deref() {
        if let Some(&record) = inner.ids.get(id) {
            let session = inner.records.get_mut(&record).expect("id points at a record");
            if timeout.is_none_or(|t| now.duration_since(session.last_seen) <= t) {
                session.last_seen = now;
                return Ctx {
                    id: Some(id.to_string()),
                    record: Some(record),
                    set_cookie: false,
                };
            }
            inner.drop_record(record);
        }
    }
    let record = inner.next_record;
    inner.next_record += 1;
    inner.records.insert(
        record,
        Session {
            user: None,
            pending_mfa: None,
            csrf: random_token(32),
            last_seen: now,
        },
    );
    // Without fixation protection an unknown id offered by the client is
    // adopted as is.
    let (id, set_cookie) = match presented {
        Some(id) if !cfg.fixation_protection && valid_id(&id) => (id, false),
        _ => (random_token(32), true),
    };
    inner.ids.insert(id.clone(), record);
    Ctx {
        id: Some(id),
        record: Some(record),
        set_cookie,
    }
}

fn cookie_header(cfg: &TestbedConfig, id: &str) -> String {
    let mut c = format!("{SESSION_COOKIE}={id}; Path=/");
    if cfg.cookie_secure {
        c.push_str("; Secure");
    }
    if cfg.cookie_httponly {
        c.push_str("; HttpOnly");
    }
    if cfg.cookie_samesite {
        c.push_str("; SameSite=Strict");
    }
    c
}

/// Appends the session id to a local URL when sessions travel in URLs.
fn link(cfg: &TestbedConfig, ctx: &Ctx, path: &str) -> String {
    match (&ctx.id, cfg.session_in_url) {
        (Some(id), true) => {
            let sep = if path.contains('?') { '&' } else { '?' };
            format!("{path}{sep}{SESSION_COOKIE}={id}")
        }
        _ => path.to_string(),
    }
}

struct Reply {
    status: StatusCode,
    headers: Vec<(HeaderName, String)>,
    body: String,
    content_type: &'static str,
}

impl Reply {
    fn html(status: StatusCode, body: String) -> Self {
        Reply {
            status,
            headers: Vec::new(),
            body,
            content_type: "text/html; charset=utf-8",
        }
    }

    fn redirect(location: String) -> Self {
        let mut r = Reply::html(StatusCode::SEE_OTHER, String::new());
        r.headers.push((LOCATION, location));
        r
    }

    fn header(mut self, name: HeaderName, value: impl Into<String>) -> Self {
        self.headers.push((name, value.into()));
        self
    }

    fn finish(mut self, app: &App, ctx: &Ctx) -> Response {
        if ctx.set_cookie {
            if let Some(id) = &ctx.id {
                self.headers.push((SET_COOKIE, cookie_header(&app.config, id)));
            }
        }
        self.finish_plain()
    }

    fn finish_plain(self) -> Response {
        let mut response = (self.status, self.body).into_response();
        let h = response.headers_mut();
        h.insert(CONTENT_TYPE, HeaderValue::from_static(self.content_type));
        for (name, value) in self.headers {
            if let Ok(v) = HeaderValue::from_str(&value) {
                h.append(name, v);
            }
        }
        response
    }
}

fn login_form(app: &App, ctx: &Ctx, message: Option<&str>, captcha: bool) -> String {
    let mut body = String::new();
    if let Some(m) = message {
        body.push_str(&format!("<p class=\"error\">{}</p>\n", escape(m)));
    }
    body.push_str(&format!("<form method=\"post\" action=\"{}\">\n", link(&app.config, ctx, "/login")));
    body.push_str("<label>Username <input type=\"text\" name=\"username\"></label>\n");
    body.push_str("<label>Password <input type=\"password\" name=\"password\"></label>\n");
    if captcha {
        body.push_str("<div class=\"g-recaptcha\" data-sitekey=\"testbed\"></div>\n");
        body.push_str("<input type=\"text\" name=\"captcha_response\" placeholder=\"CAPTCHA\">\n");
    }
    body.push_str("<button type=\"submit\">Log in</button>\n</form>\n<p><a href=\"/register\">Create an account</a></p>");
    page("Log in", &body)
}

// ---------------------------------------------------------------- handlers

async fn home(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
    drop(inner);
    let cfg = &app.config;
    let body = format!(
        "<ul>\n<li><a href=\"{}\">Log in</a></li>\n<li><a href=\"/register\">Register</a></li>\n<li><a href=\"{}\">Search products</a></li>\n</ul>",
        link(cfg, &ctx, "/login"),
        link(cfg, &ctx, "/search")
    );
    Reply::html(StatusCode::OK, page("Testbed", &body)).finish(&app, &ctx)
}

async fn login_get(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let has_credentials = first(&query, "username").is_some() || first(&query, "password").is_some();
    if has_credentials && !app.config.get_login_enabled {
        let mut inner = app.lock();
        let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
        drop(inner);
        return Reply::html(StatusCode::METHOD_NOT_ALLOWED, page("Method not allowed", "<p>Use POST to log in.</p>"))
            .header(axum::http::header::ALLOW, "POST")
            .finish(&app, &ctx);
    }
    if has_credentials {
        return login(&app, &headers, &query, &query, Method::GET);
    }
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
    drop(inner);
    Reply::html(StatusCode::OK, login_form(&app, &ctx, None, false)).finish(&app, &ctx)
}

async fn login_post(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery, body: String) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    login(&app, &headers, &query, &form_pairs(&body), Method::POST)
}

enum Credentials {
    Valid(String),
    UnknownUser,
    WrongPassword,
    SqlError(String),
}

fn check_credentials(cfg: &TestbedConfig, inner: &Inner, username: &str, password: &str) -> Credentials {
    let lookup = |name: &str, pw: Option<&str>| match inner.users.get(name) {
        None => Credentials::UnknownUser,
        Some(u) if pw.is_none_or(|p| p == u.password) => Credentials::Valid(name.to_string()),
        Some(_) => Credentials::WrongPassword,
    };
    match cfg.sql_mode {
        SqlMode::Parameterized => lookup(username, Some(password)),
        SqlMode::Concatenated => match sql::login_query(username, password) {
            Err(e) => Credentials::SqlError(e.0),
            Ok(LoginQuery::AnyRow) => Credentials::Valid(cfg.seed_user.username.clone()),
            Ok(LoginQuery::Lookup { username, password }) => lookup(&username, password.as_deref()),
        },
    }
}

fn login(app: &App, headers: &HeaderMap, query: &[(String, String)], params: &[(String, String)], method: Method) -> Response {
    let cfg = &app.config;
    let mut inner = app.lock();
    let ctx = resolve(app, &mut inner, presented_id(app, headers, query));
    let username = first(params, "username").unwrap_or("").to_string();
    let password = first(params, "password").unwrap_or("").to_string();
    let now = Instant::now();

    if cfg.rate_limit_per_second > 0 {
        let (started, count) = &mut inner.window;
        if now.duration_since(*started) >= Duration::from_secs(1) {
            *started = now;
            *count = 0;
        }
        *count += 1;
        if *count > cfg.rate_limit_per_second {
            drop(inner);
            let reply = match cfg.rate_limit_response {
                RateLimitResponse::ErrorCode => {
                    Reply::html(StatusCode::TOO_MANY_REQUESTS, page("Too many requests", "<p>Slow down.</p>"))
                }
                RateLimitResponse::Captcha => Reply::html(
                    StatusCode::UNAUTHORIZED,
                    login_form(app, &ctx, Some("Too many attempts. Please solve the CAPTCHA."), true),
                ),
                RateLimitResponse::Lockout => Reply::html(
                    StatusCode::LOCKED,
                    page("Locked", "<p>Too many attempts. Login is temporarily locked.</p>"),
                ),
            };
            return reply.header(RETRY_AFTER, "1").finish(app, &ctx);
        }
    }

    let key = username.to_lowercase();
    let attempts = inner.attempts.entry(key.clone()).or_default();
    if let Some(until) = attempts.locked_until {
        if now < until {
            drop(inner);
            return Reply::html(
                StatusCode::LOCKED,
                page("Account locked", "<p>This account is temporarily locked after too many failed attempts.</p>"),
            )
            .finish(app, &ctx);
        }
        *attempts = Attempts::default();
    }

    let captcha_required = cfg.captcha_after_n > 0 && attempts.failures >= cfg.captcha_after_n;
    let captcha_ok = !captcha_required || first(params, "captcha_response") == Some(CAPTCHA_PASS);
    let outcome = if captcha_ok {
        check_credentials(cfg, &inner, &username, &password)
    } else {
        Credentials::WrongPassword
    };

    let user = match outcome {
        Credentials::SqlError(message) => {
            drop(inner);
            let body = page("Database error", &format!("<p>{}</p>", escape(&message)));
            return Reply::html(StatusCode::INTERNAL_SERVER_ERROR, body).finish(app, &ctx);
        }
        Credentials::Valid(user) => user,
        failure => {
            let attempts = inner.attempts.entry(key).or_default();
            attempts.failures += 1;
            let locked = cfg.lockout_threshold > 0 && attempts.failures >= cfg.lockout_threshold;
            if locked {
                attempts.locked_until = Some(now + Duration::from_secs(cfg.lockout_seconds));
            }
            let captcha_next = cfg.captcha_after_n > 0 && attempts.failures >= cfg.captcha_after_n;
            if cfg.failed_login_logging {
                let line = format!("{} failed login for '{}' via {method}", Utc::now().to_rfc3339(), username);
                inner.logs.push(line);
            }
            drop(inner);
            if locked {
                return Reply::html(
                    StatusCode::LOCKED,
                    page("Account locked", "<p>This account is temporarily locked after too many failed attempts.</p>"),
                )
                .finish(app, &ctx);
            }
            let message = if !captcha_ok {
                "Please complete the CAPTCHA."
            } else if !cfg.enumeration_messages {
                "Invalid username or password."
            } else if matches!(failure, Credentials::UnknownUser) {
                "No account found with that username."
            } else {
                "Incorrect password for this account."
            };
            let body = login_form(app, &ctx, Some(message), captcha_next);
            return Reply::html(StatusCode::UNAUTHORIZED, body).finish(app, &ctx);
        }
    };

    if !inner.users.get(&user).is_none_or(|u| u.verified) {
        drop(inner);
        let body = page("Verify your email", "<p>Please verify your email address before logging in.</p>");
        return Reply::html(StatusCode::FORBIDDEN, body).finish(app, &ctx);
    }
    inner.attempts.remove(&key);

    let Some(record) = ctx.record else {
        drop(inner);
        let body = page("Welcome", &format!("<p>Welcome, {}.</p>", escape(&user)));
        return Reply::html(StatusCode::OK, body).finish(app, &ctx);
    };

    let mut ctx = ctx;
    if cfg.regenerate_on_login {
        let fresh = random_token(32);
        if cfg.fixation_protection {
            if let Some(old) = &ctx.id {
                inner.ids.remove(old);
            }
        }
        inner.ids.insert(fresh.clone(), record);
        ctx.id = Some(fresh);
        ctx.set_cookie = true;
    }
    let session = ctx.session(&mut inner).expect("record exists");
    let next = if cfg.mfa == MfaMode::Totp {
        session.user = None;
        session.pending_mfa = Some(user);
        "/mfa"
    } else {
        session.user = Some(user);
        session.pending_mfa = None;
        "/profile"
    };
    drop(inner);
    Reply::redirect(link(cfg, &ctx, next)).finish(app, &ctx)
}

async fn mfa_get(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
    let pending = ctx.session(&mut inner).and_then(|s| s.pending_mfa.clone());
    drop(inner);
    if pending.is_none() {
        return Reply::redirect(link(&app.config, &ctx, "/login")).finish(&app, &ctx);
    }
    Reply::html(StatusCode::OK, mfa_page(&app, &ctx, None)).finish(&app, &ctx)
}

fn mfa_page(app: &App, ctx: &Ctx, error: Option<&str>) -> String {
    let mut body = String::new();
    if let Some(e) = error {
        body.push_str(&format!("<p class=\"error\">{e}</p>\n"));
    }
    body.push_str("<p>Two-factor authentication: enter the 6-digit verification code from your authenticator app (TOTP).</p>\n");
    body.push_str(&format!(
        "<form method=\"post\" action=\"{}\">\n<input type=\"text\" name=\"otp\" inputmode=\"numeric\" autocomplete=\"one-time-code\">\n<button type=\"submit\">Verify</button>\n</form>",
        link(&app.config, ctx, "/mfa")
    ));
    page("Verification code", &body)
}

async fn mfa_post(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery, body: String) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let params = form_pairs(&body);
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
    let code = first(&params, "otp").unwrap_or("").trim().to_string();
    let valid = app.totp.check_current(&code).unwrap_or(false);
    let Some(session) = ctx.session(&mut inner).filter(|s| s.pending_mfa.is_some()) else {
        drop(inner);
        return Reply::redirect(link(&app.config, &ctx, "/login")).finish(&app, &ctx);
    };
    if !valid {
        drop(inner);
        return Reply::html(StatusCode::UNAUTHORIZED, mfa_page(&app, &ctx, Some("Invalid verification code."))).finish(&app, &ctx);
    }
    session.user = session.pending_mfa.take();
    drop(inner);
    Reply::redirect(link(&app.config, &ctx, "/profile")).finish(&app, &ctx)
}

async fn logout(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let mut inner = app.lock();
    if let Some(id) = presented_id(&app, &headers, &query) {
        if let Some(&record) = inner.ids.get(&id) {
            inner.drop_record(record);
        }
    }
    drop(inner);
    let ctx = Ctx {
        id: None,
        record: None,
        set_cookie: false,
    };
    Reply::redirect("/login".into())
        .header(SET_COOKIE, format!("{SESSION_COOKIE}=; Path=/; Max-Age=0"))
        .finish(&app, &ctx)
}

fn register_form(message: Option<&str>) -> String {
    let mut body = String::new();
    if let Some(m) = message {
        body.push_str(&format!("<p class=\"error\">{}</p>\n", escape(m)));
    }
    body.push_str("<form method=\"post\" action=\"/register\">\n<label>Username <input type=\"text\" name=\"username\"></label>\n<label>Email <input type=\"email\" name=\"email\"></label>\n<label>Password <input type=\"password\" name=\"password\"></label>\n<button type=\"submit\">Register</button>\n</form>");
    page("Register", &body)
}

async fn register_get() -> Response {
    Reply::html(StatusCode::OK, register_form(None)).finish_plain()
}

async fn register_post(State(app): State<Arc<App>>, body: String) -> Response {
    let cfg = &app.config;
    let params = form_pairs(&body);
    let username = first(&params, "username").unwrap_or("").trim().to_string();
    let email = first(&params, "email").unwrap_or("").trim().to_string();
    let password = first(&params, "password").unwrap_or("").to_string();
    if username.is_empty() || password.is_empty() || !email.contains('@') {
        return Reply::html(StatusCode::BAD_REQUEST, register_form(Some("Username, email and password are required.")))
            .finish_plain();
    }
    if !cfg.password_policy.accepts(&password) {
        let message = if cfg.reveal_password_rules {
            cfg.password_policy.describe()
        } else {
            "Registration failed. Please choose a different password."
        };
        return Reply::html(StatusCode::UNPROCESSABLE_ENTITY, register_form(Some(message))).finish_plain();
    }
    let mut inner = app.lock();
    if inner.users.contains_key(&username) {
        drop(inner);
        return Reply::html(StatusCode::CONFLICT, register_form(Some("That username is taken."))).finish_plain();
    }
    inner.users.insert(
        username.clone(),
        User {
            password,
            email: email.clone(),
            verified: !cfg.email_verification,
        },
    );
    let message = if cfg.email_verification {
        let token = random_token(40);
        inner.verify_tokens.insert(token.clone(), username.clone());
        inner.mail.push(MailSinkEntry {
            recipient: email,
            subject: "Verify your email address".into(),
            body: format!("Hello {username},\n\nConfirm your address by visiting /verify?token={token}\n"),
            captured_at: Utc::now(),
        });
        "Registration successful. Check your email to verify your account before logging in."
    } else {
        "Registration successful. You can now log in."
    };
    drop(inner);
    Reply::html(StatusCode::CREATED, page("Registered", &format!("<p>{message}</p>"))).finish_plain()
}

async fn verify(State(app): State<Arc<App>>, RawQuery(q): RawQuery) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let mut inner = app.lock();
    let user = first(&query, "token").and_then(|t| inner.verify_tokens.remove(t));
    let reply = match user.and_then(|u| inner.users.get_mut(&u)) {
        Some(u) => {
            u.verified = true;
            Reply::html(StatusCode::OK, page("Verified", "<p>Your email address is verified. You can now log in.</p>"))
        }
        None => Reply::html(StatusCode::BAD_REQUEST, page("Invalid link", "<p>That verification link is not valid.</p>")),
    };
    drop(inner);
    reply.finish_plain()
}

async fn profile(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let cfg = &app.config;
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
    let user = ctx.user(&inner);
    let email = user.as_ref().and_then(|u| inner.users.get(u)).map(|u| u.email.clone());
    drop(inner);
    let Some(user) = user else {
        return Reply::redirect(link(cfg, &ctx, "/login")).finish(&app, &ctx);
    };
    let shown = |s: &str| if cfg.output_escaping { escape(s) } else { s.to_string() };
    let body = format!(
        "<p>Welcome, {}.</p>\n<p>Email: {}</p>\n<ul>\n<li><a href=\"{}\">Edit profile</a></li>\n<li><a href=\"{}\">Search products</a></li>\n<li><a href=\"{}\">Log out</a></li>\n</ul>",
        shown(&user),
        shown(email.as_deref().unwrap_or("")),
        link(cfg, &ctx, "/form"),
        link(cfg, &ctx, "/search"),
        link(cfg, &ctx, "/logout"),
    );
    Reply::html(StatusCode::OK, page("Profile", &body)).finish(&app, &ctx)
}

async fn form_get(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let cfg = &app.config;
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
    let session = ctx.session(&mut inner).filter(|s| s.user.is_some()).map(|s| s.csrf.clone());
    drop(inner);
    let Some(token) = session else {
        return Reply::redirect(link(cfg, &ctx, "/login")).finish(&app, &ctx);
    };
    let hidden = if cfg.csrf == CsrfMode::Off {
        String::new()
    } else {
        format!("<input type=\"hidden\" name=\"csrf_token\" value=\"{token}\">\n")
    };
    let body = format!(
        "<form method=\"post\" action=\"{}\">\n{hidden}<label>Display name <input type=\"text\" name=\"display_name\" value=\"Alice\"></label>\n<button type=\"submit\">Save</button>\n</form>",
        link(cfg, &ctx, "/form")
    );
    Reply::html(StatusCode::OK, page("Edit profile", &body)).finish(&app, &ctx)
}

async fn form_post(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery, body: String) -> Response {
    let query = form_pairs(q.as_deref().unwrap_or(""));
    let params = form_pairs(&body);
    let cfg = &app.config;
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &query));
    let session = ctx.session(&mut inner).filter(|s| s.user.is_some()).map(|s| s.csrf.clone());
    drop(inner);
    let Some(token) = session else {
        return Reply::redirect(link(cfg, &ctx, "/login")).finish(&app, &ctx);
    };
    if cfg.csrf == CsrfMode::Enforced && first(&params, "csrf_token") != Some(token.as_str()) {
        return Reply::html(StatusCode::FORBIDDEN, page("Forbidden", "<p>Invalid CSRF token.</p>")).finish(&app, &ctx);
    }
    Reply::html(StatusCode::OK, page("Saved", "<p>Profile updated.</p>")).finish(&app, &ctx)
}

async fn search(State(app): State<Arc<App>>, headers: HeaderMap, RawQuery(q): RawQuery) -> Response {
    let raw = form_pairs(q.as_deref().unwrap_or(""));
    let cfg = &app.config;
    let mut inner = app.lock();
    let ctx = resolve(&app, &mut inner, presented_id(&app, &headers, &raw));
    drop(inner);
    let values: Vec<&str> = raw.iter().filter(|(k, _)| k == "q").map(|(_, v)| v.as_str()).collect();
    let term = match (values.len(), cfg.hpp_behavior) {
        (0, _) => None,
        (1, _) => Some(values[0].to_string()),
        (_, HppBehavior::FirstWins) => Some(values[0].to_string()),
        (_, HppBehavior::LastWins) => values.last().map(|v| v.to_string()),
        (_, HppBehavior::Concatenated) => Some(values.join(",")),
        (_, HppBehavior::Rejected) => {
            return Reply::html(StatusCode::BAD_REQUEST, page("Bad request", "<p>Duplicate parameters are not allowed.</p>"))
                .finish(&app, &ctx);
        }
    };
    let form = "<form method=\"get\" action=\"/search\"><input type=\"text\" name=\"q\"><button type=\"submit\">Search</button></form>";
    let Some(term) = term else {
        return Reply::html(StatusCode::OK, page("Search", form)).finish(&app, &ctx);
    };
    let rows = match cfg.sql_mode {
        SqlMode::Parameterized => Ok(PRODUCTS
            .iter()
            .filter(|p| p.to_lowercase().contains(&term.to_lowercase()))
            .map(|p| p.to_string())
            .collect::<Vec<_>>()),
        SqlMode::Concatenated => sql::search_query(&term, &PRODUCTS),
    };
    let rows = match rows {
        Ok(rows) => rows,
        Err(e) => {
            let body = page("Database error", &format!("<p>{}</p>", escape(&e.0)));
            return Reply::html(StatusCode::INTERNAL_SERVER_ERROR, body).finish(&app, &ctx);
        }
    };
    let shown = if cfg.output_escaping { escape(&term) } else { term.clone() };
    let items: String = rows.iter().map(|r| format!("<li>{}</li>\n", escape(r))).collect();
    let body = format!("{form}\n<p>Results for: {shown}</p>\n<ul>\n{items}</ul>");
    Reply::html(StatusCode::OK, page("Search", &body)).finish(&app, &ctx)
}

async fn mail(State(app): State<Arc<App>>) -> Json<Vec<MailSinkEntry>> {
    Json(app.lock().mail.clone())
}

async fn logs(State(app): State<Arc<App>>) -> Response {
    let text = app.lock().logs.join("\n");
    let mut r = (StatusCode::OK, text).into_response();
    r.headers_mut().insert(CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"));
    r
}

async fn reset(State(app): State<Arc<App>>) -> StatusCode {
    *app.lock() = Inner::new(&app.config);
    StatusCode::NO_CONTENT
}
