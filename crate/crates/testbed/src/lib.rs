//! A small web application whose security behaviors can each be switched
//! between a compliant and a vulnerable setting. It exists so that every
//! black-box probe can be exercised end to end in both directions.
//!
//! ```no_run
//! # async fn demo() -> Result<(), secaudit_testbed::TestbedError> {
//! let handle = secaudit_testbed::start_testbed(secaudit_testbed::TestbedConfig::preset("grok")?).await?;
//! println!("serving on {}", handle.base_url());
//! handle.shutdown().await;
//! # Ok(()) }
//! ```

pub mod config;
mod error;
mod server;
pub mod sql;
pub mod toggles;

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use config::{
    CsrfMode, HeaderSet, HppBehavior, MfaMode, PasswordPolicy, RateLimitResponse, SeedUser, SqlMode, TestbedConfig,
    CAPTCHA_PASS, PRESETS, TOTP_SECRET,
};
pub use error::TestbedError;
pub use server::{MailSinkEntry, LOGS_PATH, MAIL_PATH, RESET_PATH, SESSION_COOKIE};
pub use toggles::{toggle_for, ToggleSpec, TOGGLE_MAP};

/// A running fixture server. Dropping the handle without calling
/// [`TestbedHandle::shutdown`] leaves the server running until the runtime
/// stops.
pub struct TestbedHandle {
    addr: SocketAddr,
    config: TestbedConfig,
    stop: oneshot::Sender<()>,
    task: JoinHandle<()>,
}

impl TestbedHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn config(&self) -> &TestbedConfig {
        &self.config
    }

    /// A scan target description for this server, in the scanner's TOML
    /// target format.
    pub fn target_toml(&self) -> String {
        let seed = &self.config.seed_user;
        let base = self.base_url();
        format!(
            r#"base_url = "{base}"
login_path = "/login"
register_path = "/register"
logout_path = "/logout"
profile_path = "/profile"
search_path = "/search"
form_path = "/form"
mfa_path = "/mfa"
username_field = "username"
password_field = "password"
email_field = "email"
otp_field = "otp"
search_field = "q"
valid_credentials = ["{user}", "{pass}"]
invalid_credentials = ["{user}", "definitely-not-the-password"]
nonexistent_username = "nobody-{nonce}"
session_cookie_name = "{cookie}"
totp_secret = "{totp}"
mail_sink_url = "{base}{mail}"
session_timeout_budget_secs = {budget:.1}
"#,
            user = seed.username,
            pass = seed.password,
            nonce = self.addr.port(),
            cookie = SESSION_COOKIE,
            totp = TOTP_SECRET,
            mail = MAIL_PATH,
            budget = (self.config.session_timeout_minutes * 60.0 + 1.5).max(3.0),
        )
    }

    pub async fn shutdown(self) {
        let _ = self.stop.send(());
        let _ = self.task.await;
    }

    /// Resolves when the server stops on its own, which only happens on an
    /// I/O failure.
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

/// Validates `config`, binds `127.0.0.1:<listen_port>` and serves in the
/// background on the current tokio runtime.
pub async fn start_testbed(config: TestbedConfig) -> Result<TestbedHandle, TestbedError> {
    config.validate()?;
    let bind = SocketAddr::from(([127, 0, 0, 1], config.listen_port));
    let listener = TcpListener::bind(bind).await.map_err(|source| TestbedError::Bind {
        addr: bind.to_string(),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| TestbedError::Bind {
        addr: bind.to_string(),
        source,
    })?;
    let app = server::router(Arc::new(server::App::new(config.clone())));
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await;
    });
    Ok(TestbedHandle {
        addr,
        config,
        stop,
        task,
    })
}
