#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;
use std::sync::Arc;
use std::time::Duration;

use gvss_daemon::clock::Clock;
use gvss_daemon::service::{Credential, TOKEN_HEADER};
use gvss_daemon::{Config, Daemon, DaemonOptions};
use serde_json::Value;
use tempfile::TempDir;

pub const USER: &str = "owner";
pub const PASSWORD: &str = "correct horse";

/// A scratch directory holding a config file, a sensor file and a session cache.
pub struct Env {
    pub dir: TempDir,
    pub config_path: PathBuf,
    pub sensor_file: PathBuf,
    pub session_file: PathBuf,
}

pub struct EnvBuilder {
    cadence_ms: u64,
    width: u32,
    height: u32,
    notifier: Option<String>,
    sensor: Option<String>,
}

impl Default for EnvBuilder {
    fn default() -> Self {
        Self {
            cadence_ms: 1000,
            width: 640,
            height: 480,
            notifier: None,
            sensor: None,
        }
    }
}

impl EnvBuilder {
    pub fn cadence_ms(mut self, ms: u64) -> Self {
        self.cadence_ms = ms;
        self
    }

    pub fn camera_size(mut self, w: u32, h: u32) -> Self {
        self.width = w;
        self.height = h;
        self
    }

    /// Replaces the `[notifier]` section body.
    pub fn notifier(mut self, body: &str) -> Self {
        self.notifier = Some(body.to_string());
        self
    }

    /// Replaces the `[sensor]` section body.
    pub fn sensor(mut self, body: &str) -> Self {
        self.sensor = Some(body.to_string());
        self
    }

    pub fn build(self) -> Env {
        let dir = tempfile::tempdir().unwrap();
        let sensor_file = dir.path().join("beam.txt");
        std::fs::write(&sensor_file, "CLEAR\n").unwrap();
        let stored = Credential::hashed(USER, PASSWORD).stored();
        let notifier = self
            .notifier
            .unwrap_or_else(|| "transport = file\npath = notifications.log\nrecipient = owner".into());
        let sensor = self
            .sensor
            .unwrap_or_else(|| "kind = file\npath = beam.txt\npoll_interval_ms = 100\ndebounce_count = 2".into());
        let text = format!(
            "[server]\nport = 0\naudit_log = audit.log\n\n\
             [sensor]\n{sensor}\n\n\
             [storage]\nsnapshot_dir = snapshots\n\n\
             [notifier]\n{notifier}\n\n\
             [users]\n{USER} = {stored}\n\n\
             [camera cam0]\nname = Front door\nkind = synthetic\nwidth = {}\nheight = {}\ncadence_ms = {}\n",
            self.width, self.height, self.cadence_ms
        );
        let config_path = dir.path().join("gvss.conf");
        std::fs::write(&config_path, text).unwrap();
        Env {
            session_file: dir.path().join("session"),
            config_path,
            sensor_file,
            dir,
        }
    }
}

impl Env {
    pub fn new() -> Self {
        EnvBuilder::default().build()
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config(&self) -> Config {
        Config::load(&self.config_path).unwrap()
    }

    pub fn write_beam(&self, token: &str) {
        std::fs::write(&self.sensor_file, format!("{token}\n")).unwrap();
    }

    pub async fn start(&self) -> Daemon {
        self.start_with(DaemonOptions::default()).await
    }

    pub async fn start_with(&self, options: DaemonOptions) -> Daemon {
        Daemon::start(self.config(), options).await.unwrap()
    }

    pub async fn start_with_clock(&self, clock: Arc<dyn Clock>) -> Daemon {
        self.start_with(DaemonOptions {
            clock,
            ..DaemonOptions::default()
        })
        .await
    }

    /// Runs the `gvss` binary with this environment's session file.
    pub async fn gvss(&self, server: &str, args: &[&str]) -> Output {
        tokio::process::Command::new(env!("CARGO_BIN_EXE_gvss"))
            .arg("--server")
            .arg(server)
            .args(args)
            .env("GVSS_SESSION_FILE", &self.session_file)
            .env_remove("GVSS_SERVER")
            .env_remove("GVSS_CONFIG")
            .env_remove("GVSS_PASSWORD")
            .output()
            .await
            .unwrap()
    }

    pub async fn gvss_login(&self, server: &str) -> Output {
        let out = self
            .gvss(server, &["login", "--username", USER, "--password", PASSWORD])
            .await;
        assert!(out.status.success(), "login failed: {}", stderr(&out));
        out
    }
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", stdout(out)))
}

pub fn http() -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(Duration::from_secs(20))
        .build()
        .unwrap()
}

pub async fn login(client: &reqwest::Client, base: &str) -> String {
    let resp = client
        .post(format!("{base}/login"))
        .json(&serde_json::json!({ "username": USER, "password": PASSWORD }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    let doc: Value = resp.json().await.unwrap();
    doc["token"].as_str().unwrap().to_string()
}

pub async fn get_state(client: &reqwest::Client, base: &str, token: &str) -> Value {
    client
        .get(format!("{base}/state"))
        .header(TOKEN_HEADER, token)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}

/// Polls `check` every 10 ms until it holds or `limit` passes.
pub async fn wait_until<F, Fut>(limit: Duration, mut check: F) -> bool
where
    F: FnMut() -> Fut,
    Fut: std::future::Future<Output = bool>,
{
    let deadline = tokio::time::Instant::now() + limit;
    loop {
        if check().await {
            return true;
        }
        if tokio::time::Instant::now() >= deadline {
            return false;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
}

/// Waits until the first camera has published a frame.
pub async fn first_frame(daemon: &Daemon) {
    let cams = Arc::clone(&daemon.state().cameras);
    assert!(
        wait_until(Duration::from_secs(5), || {
            let cams = Arc::clone(&cams);
            async move { cams.first().latest().is_some() }
        })
        .await,
        "camera never produced a frame"
    );
}

/// Width and height from a JPEG's start-of-frame segment.
pub fn jpeg_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    let mut i = 2;
    while i + 9 < bytes.len() {
        if bytes[i] != 0xFF {
            return None;
        }
        let marker = bytes[i + 1];
        let len = u16::from_be_bytes([bytes[i + 2], bytes[i + 3]]) as usize;
        if matches!(marker, 0xC0..=0xC3) {
            let h = u16::from_be_bytes([bytes[i + 5], bytes[i + 6]]) as u32;
            let w = u16::from_be_bytes([bytes[i + 7], bytes[i + 8]]) as u32;
            return Some((w, h));
        }
        i += 2 + len;
    }
    None
}
