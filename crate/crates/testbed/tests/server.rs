use reqwest::redirect::Policy;
use reqwest::{Client, StatusCode};
use secaudit_testbed::{start_testbed, TestbedConfig, TestbedError, MAIL_PATH, RESET_PATH};

fn client() -> Client {
    Client::builder().redirect(Policy::none()).build().unwrap()
}

async fn post_login(c: &Client, base: &str, user: &str, pass: &str) -> reqwest::Response {
    c.post(format!("{base}/login"))
        .form(&[("username", user), ("password", pass)])
        .send()
        .await
        .unwrap()
}

#[tokio::test]
async fn reset_clears_users_and_lockout_counters() {
    let cfg = TestbedConfig {
        lockout_threshold: 2,
        ..TestbedConfig::vulnerable()
    };
    let tb = start_testbed(cfg).await.unwrap();
    let base = tb.base_url();
    let c = client();

    let r = c
        .post(format!("{base}/register"))
        .form(&[("username", "bob"), ("email", "bob@example.test"), ("password", "pw")])
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    assert_eq!(post_login(&c, &base, "bob", "pw").await.status(), StatusCode::SEE_OTHER);

    post_login(&c, &base, "alice", "wrong").await;
    assert_eq!(post_login(&c, &base, "alice", "wrong").await.status(), StatusCode::LOCKED);
    assert_eq!(post_login(&c, &base, "alice", "Correct-Horse-42!").await.status(), StatusCode::LOCKED);

    let r = c.post(format!("{base}{RESET_PATH}")).send().await.unwrap();
    assert!(r.status().is_success());
    assert_eq!(post_login(&c, &base, "alice", "Correct-Horse-42!").await.status(), StatusCode::SEE_OTHER);
    assert_eq!(post_login(&c, &base, "bob", "pw").await.status(), StatusCode::UNAUTHORIZED);
    tb.shutdown().await;
}

#[tokio::test]
async fn verification_mail_is_captured() {
    let cfg = TestbedConfig {
        email_verification: true,
        ..TestbedConfig::vulnerable()
    };
    let tb = start_testbed(cfg).await.unwrap();
    let base = tb.base_url();
    let c = client();
    c.post(format!("{base}/register"))
        .form(&[("username", "carol"), ("email", "carol@example.test"), ("password", "pw")])
        .send()
        .await
        .unwrap();
    assert_eq!(post_login(&c, &base, "carol", "pw").await.status(), StatusCode::FORBIDDEN);

    let mail: Vec<serde_json::Value> = c.get(format!("{base}{MAIL_PATH}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(mail.len(), 1);
    assert_eq!(mail[0]["recipient"], "carol@example.test");
    let body = mail[0]["body"].as_str().unwrap();
    let link = &body[body.find("/verify?").unwrap()..].trim();
    assert!(c.get(format!("{base}{link}")).send().await.unwrap().status().is_success());
    assert_eq!(post_login(&c, &base, "carol", "pw").await.status(), StatusCode::SEE_OTHER);
    tb.shutdown().await;
}

#[tokio::test]
async fn headers_follow_config() {
    let tb = start_testbed(TestbedConfig::hardened()).await.unwrap();
    let r = client().get(tb.base_url()).send().await.unwrap();
    assert_eq!(r.headers()["x-frame-options"], "DENY");
    assert_eq!(r.headers()["x-content-type-options"], "nosniff");
    assert!(r.headers()["content-security-policy"].to_str().unwrap().contains("script-src 'self'"));
    tb.shutdown().await;

    let tb = start_testbed(TestbedConfig::vulnerable()).await.unwrap();
    let r = client().get(tb.base_url()).send().await.unwrap();
    assert!(r.headers().get("content-security-policy").is_none());
    tb.shutdown().await;
}

#[tokio::test]
async fn get_login_obeys_toggle() {
    for (enabled, expected) in [(false, StatusCode::METHOD_NOT_ALLOWED), (true, StatusCode::SEE_OTHER)] {
        let cfg = TestbedConfig {
            get_login_enabled: enabled,
            ..TestbedConfig::vulnerable()
        };
        let tb = start_testbed(cfg).await.unwrap();
        let r = client()
            .get(format!("{}/login?username=alice&password=Correct-Horse-42!", tb.base_url()))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), expected);
        tb.shutdown().await;
    }
}

#[tokio::test]
async fn concatenated_sql_leaks_errors() {
    let tb = start_testbed(TestbedConfig::vulnerable()).await.unwrap();
    let c = client();
    let r = c.get(format!("{}/search?q=%27", tb.base_url())).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::INTERNAL_SERVER_ERROR);
    assert!(r.text().await.unwrap().contains("SQL syntax"));
    let r = post_login(&c, &tb.base_url(), "' OR '1'='1' -- ", "x").await;
    assert_eq!(r.status(), StatusCode::SEE_OTHER);
    tb.shutdown().await;
}

#[tokio::test]
async fn startup_errors() {
    let bad = TestbedConfig {
        sessions_enabled: false,
        ..TestbedConfig::hardened()
    };
    assert!(matches!(start_testbed(bad).await, Err(TestbedError::InvalidCombination(_))));

    let tb = start_testbed(TestbedConfig::hardened()).await.unwrap();
    let taken = TestbedConfig {
        listen_port: tb.addr().port(),
        ..TestbedConfig::hardened()
    };
    assert!(matches!(start_testbed(taken).await, Err(TestbedError::Bind { .. })));
    tb.shutdown().await;
}
