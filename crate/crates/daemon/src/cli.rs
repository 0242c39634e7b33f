//! `gvss` command line: `serve` runs the daemon, the other verbs are a
//! scripted HTTP client for the same API.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use reqwest::{Method, StatusCode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Config, DEFAULT_PORT};
use crate::daemon::{Daemon, DaemonOptions, StartError};
use crate::sensor::BeamSourceKind;
use crate::service::{auth::Credential, SEQUENCE_HEADER, TOKEN_HEADER};

pub mod exit {
    pub const OK: u8 = 0;
    pub const CLIENT_ERROR: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const PORT_IN_USE: u8 = 3;
    pub const NO_BREACH: u8 = 4;
    pub const SERVER_ERROR: u8 = 5;
    pub const NETWORK: u8 = 6;
}

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:8686";
const SESSION_FILE_ENV: &str = "GVSS_SESSION_FILE";
const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Parser)]
#[command(name = "gvss", version, about = "Tripwire surveillance daemon and client")]
pub struct Cli {
    /// Base URL of a running daemon.
    #[arg(long, global = true, env = "GVSS_SERVER")]
    pub server: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the daemon until SIGINT or SIGTERM.
    Serve {
        #[arg(long, env = "GVSS_CONFIG")]
        config: PathBuf,
        /// Overrides `[server] port` (default 8686).
        #[arg(long)]
        port: Option<u16>,
        /// Overrides `[server] bind` (default 127.0.0.1).
        #[arg(long)]
        bind: Option<IpAddr>,
        #[arg(long, default_value = "info")]
        log_level: String,
    },
    /// Log in and cache the session token.
    Login {
        #[arg(long)]
        username: String,
        #[arg(long, env = "GVSS_PASSWORD", hide_env_values = true)]
        password: String,
    },
    /// List cameras.
    Cameras,
    /// Fetch one rendered frame.
    Frame {
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Save, list, fetch or delete snapshots.
    #[command(subcommand)]
    Snapshot(SnapshotCommand),
    /// Release the input lock (`POST /control?Type=Kill`).
    Kill {
        /// Value sent as the `Type` parameter.
        #[arg(long = "type", default_value = "Kill")]
        kind: String,
    },
    /// Print the intrusion state document.
    State,
    Arm,
    Disarm,
    /// Write OBSTRUCTED into the configured sensor file and wait for the breach.
    SimulateBreach {
        #[arg(long, env = "GVSS_CONFIG")]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        timeout_secs: u64,
    },
    /// Print a `[users]` entry value for a password (read from stdin if omitted).
    HashPassword {
        #[arg(long)]
        password: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SnapshotCommand {
    Save {
        #[command(flatten)]
        render: RenderArgs,
    },
    List,
    Get {
        id: String,
        #[arg(long)]
        out: PathBuf,
    },
    Delete {
        id: String,
    },
}

/// Mirrors the `/frame` query parameters.
#[derive(Debug, Clone, Default, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub cam: Option<String>,
    #[arg(long)]
    pub w: Option<u32>,
    #[arg(long)]
    pub h: Option<u32>,
    #[arg(long)]
    pub constrain: Option<bool>,
    /// jpeg, png24, png8 or pnggray
    #[arg(long)]
    pub enc: Option<String>,
    #[arg(long)]
    pub time: Option<bool>,
    /// 1 (small) to 3 (large)
    #[arg(long)]
    pub font: Option<u8>,
    /// normal or high
    #[arg(long)]
    pub res: Option<String>,
}

impl RenderArgs {
    fn query(&self) -> Vec<(&'static str, String)> {
        let mut q = Vec::new();
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v {
                q.push((k, v));
            }
        };
        push("cam", self.cam.clone());
        push("w", self.w.map(|v| v.to_string()));
        push("h", self.h.map(|v| v.to_string()));
        push("constrain", self.constrain.map(|v| v.to_string()));
        push("enc", self.enc.clone());
        push("time", self.time.map(|v| v.to_string()));
        push("font", self.font.map(|v| v.to_string()));
        push("res", self.res.clone());
        q
    }
}

/// A failed verb: exit code plus the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

#[derive(Debug, Serialize, Deserialize)]
struct SessionFile {
    server: String,
    token: String,
}

pub fn session_file_path() -> PathBuf {
    if let Some(p) = std::env::var_os(SESSION_FILE_ENV) {
        return PathBuf::from(p);
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    home.join(".gvss-session")
}

fn write_session(path: &Path, session: &SessionFile) -> std::io::Result<()> {
    let mut opts = std::fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
        opts.mode(0o600);
        let mut f = opts.open(path)?;
        // an existing file keeps its old mode on open
        f.set_permissions(std::fs::Permissions::from_mode(0o600))?;
        f.write_all(serde_json::to_string(session)?.as_bytes())?;
        return Ok(());
    }
    #[allow(unreachable_code)]
    {
        let mut f = opts.open(path)?;
        f.write_all(serde_json::to_string(session)?.as_bytes())
    }
}

fn read_token() -> Option<String> {
    let text = std::fs::read_to_string(session_file_path()).ok()?;
    serde_json::from_str::<SessionFile>(&text).ok().map(|s| s.token)
}

struct Client {
    base: String,
    http: reqwest::Client,
    token: Option<String>,
}

impl Client {
    fn new(server: &str) -> Self {
        Self {
            base: server.trim_end_matches('/').to_string(),
            http: reqwest::Client::builder()
                .timeout(REQUEST_TIMEOUT)
                .build()
                .expect("HTTP client without TLS configuration"),
            token: read_token(),
        }
    }

    async fn send(
        &self,
        method: Method,
        path: &str,
        query: &[(&str, String)],
        json: Option<Value>,
    ) -> Result<reqwest::Response, Failure> {
        let mut req = self.http.request(method, format!("{}{path}", self.base)).query(query);
        if let Some(token) = &self.token {
            req = req.header(TOKEN_HEADER, token);
        }
        if let Some(body) = json {
            req = req.json(&body);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| Failure::new(exit::NETWORK, format!("cannot reach {}: {e}", self.base)))?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let body = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<Value>(&body)
            .ok()
            .and_then(|v| v.get("error").and_then(Value::as_str).map(String::from))
            .unwrap_or(body);
        let code = if status.is_server_error() {
            exit::SERVER_ERROR
        } else {
            exit::CLIENT_ERROR
        };
        Err(Failure::new(code, format!("HTTP {}: {message}", status.as_u16())))
    }

    async fn json(&self, method: Method, path: &str, query: &[(&str, String)]) -> Result<Value, Failure> {
        let resp = self.send(method, path, query, None).await?;
        if resp.status() == StatusCode::NO_CONTENT {
            return Ok(Value::Null);
        }
        resp.json()
            .await
            .map_err(|e| Failure::new(exit::NETWORK, format!("bad response body: {e}")))
    }

    /// Fetches image bytes into `out` and describes what was written.
    async fn download(&self, path: &str, query: &[(&str, String)], out: &Path) -> Result<Value, Failure> {
        let resp = self.send(Method::GET, path, query, None).await?;
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(String::from)
        };
        let content_type = header("content-type");
        let sequence = header(SEQUENCE_HEADER).and_then(|s| s.parse::<u64>().ok());
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| Failure::new(exit::NETWORK, format!("reading body: {e}")))?;
        std::fs::write(out, &bytes)
            .map_err(|e| Failure::new(exit::USAGE, format!("cannot write {}: {e}", out.display())))?;
        Ok(serde_json::json!({
            "path": out,
            "bytes": bytes.len(),
            "content_type": content_type,
            "sequence": sequence,
        }))
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

/// Runs one verb and returns the process exit code.
pub async fn run(cli: Cli) -> u8 {
    let server = cli.server.clone();
    let outcome = match cli.command {
        Command::Serve {
            config,
            port,
            bind,
            log_level,
        } => serve(&config, port, bind, &log_level).await,
        Command::SimulateBreach { config, timeout_secs } => {
            simulate_breach(&config, server, Duration::from_secs(timeout_secs)).await
        }
        Command::HashPassword { password } => hash_password(password),
        verb => {
            let client = Client::new(server.as_deref().unwrap_or(DEFAULT_SERVER));
            client_verb(&client, verb).await
        }
    };
    match outcome {
        Ok(()) => exit::OK,
        Err(f) => {
            eprintln!("gvss: {}", f.message);
            f.code
        }
    }
}

async fn client_verb(client: &Client, verb: Command) -> Outcome {
    let doc = match verb {
        Command::Login { username, password } => {
            let resp = client
                .send(
                    Method::POST,
                    "/login",
                    &[],
                    Some(serde_json::json!({ "username": username, "password": password })),
                )
                .await?;
            let doc: Value = resp
                .json()
                .await
                .map_err(|e| Failure::new(exit::NETWORK, format!("bad login response: {e}")))?;
            let token = doc["token"].as_str().unwrap_or_default().to_string();
            let path = session_file_path();
            write_session(
                &path,
                &SessionFile {
                    server: client.base.clone(),
                    token,
                },
            )
            .map_err(|e| Failure::new(exit::USAGE, format!("cannot write {}: {e}", path.display())))?;
            doc
        }
        Command::Cameras => client.json(Method::GET, "/cameras", &[]).await?,
        Command::State => client.json(Method::GET, "/state", &[]).await?,
        Command::Arm => client.json(Method::POST, "/arm", &[]).await?,
        Command::Disarm => client.json(Method::POST, "/disarm", &[]).await?,
        Command::Kill { kind } => client.json(Method::POST, "/control", &[("Type", kind)]).await?,
        Command::Frame { render, out } => client.download("/frame", &render.query(), &out).await?,
        Command::Snapshot(SnapshotCommand::Save { render }) => {
            client.json(Method::POST, "/snapshots", &render.query()).await?
        }
        Command::Snapshot(SnapshotCommand::List) => client.json(Method::GET, "/snapshots", &[]).await?,
        Command::Snapshot(SnapshotCommand::Get { id, out }) => {
            client.download(&format!("/snapshots/{id}"), &[], &out).await?
        }
        Command::Snapshot(SnapshotCommand::Delete { id }) => {
            client.json(Method::DELETE, &format!("/snapshots/{id}"), &[]).await?;
            serde_json::json!({ "deleted": id })
        }
        Command::Serve { .. } | Command::SimulateBreach { .. } | Command::HashPassword { .. } => {
            unreachable!("handled in run")
        }
    };
    print_json(&doc);
    Ok(())
}

fn load_config(path: &Path) -> Result<Config, Failure> {
    Config::load(path).map_err(|e| Failure::new(exit::USAGE, e.to_string()))
}

async fn serve(path: &Path, port: Option<u16>, bind: Option<IpAddr>, log_level: &str) -> Outcome {
    let filter = tracing_subscriber::EnvFilter::try_new(log_level)
        .map_err(|e| Failure::new(exit::USAGE, format!("bad --log-level: {e}")))?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();

    let mut config = load_config(path)?;
    if let Some(port) = port {
        config.server.port = port;
    }
    if let Some(bind) = bind {
        config.server.bind = bind;
    }
    let camera_ids: Vec<_> = config.cameras.iter().map(|c| c.id.clone()).collect();
    let daemon = Daemon::start(config, DaemonOptions::default())
        .await
        .map_err(|e| match e {
            StartError::Bind { .. } => Failure::new(exit::PORT_IN_USE, e.to_string()),
            other => Failure::new(exit::USAGE, other.to_string()),
        })?;
    println!("gvss listening on {} cameras: {}", daemon.url(), camera_ids.join(", "));
    let _ = std::io::stdout().flush();

    wait_for_signal().await;
    tracing::info!("shutting down");
    daemon.shutdown().await;
    Ok(())
}

async fn wait_for_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        if let Ok(mut term) = signal(SignalKind::terminate()) {
            tokio::select! {
                _ = term.recv() => {}
                _ = tokio::signal::ctrl_c() => {}
            }
            return;
        }
    }
    let _ = tokio::signal::ctrl_c().await;
}

fn mode_of(state: &Value) -> &str {
    state["mode"].as_str().unwrap_or("")
}

async fn simulate_breach(path: &Path, server: Option<String>, timeout: Duration) -> Outcome {
    let config = load_config(path)?;
    let BeamSourceKind::SimulatedFile(sensor_file) = &config.sensor.kind else {
        return Err(Failure::new(
            exit::USAGE,
            "simulate-breach needs `[sensor] kind = file`; this daemon reads another beam source",
        ));
    };
    let server = server.unwrap_or_else(|| {
        let host = if config.server.bind.is_unspecified() {
            IpAddr::from([127, 0, 0, 1])
        } else {
            config.server.bind
        };
        let port = if config.server.port == 0 { DEFAULT_PORT } else { config.server.port };
        format!("http://{}", SocketAddr::new(host, port))
    });
    let client = Client::new(&server);
    let before = client.json(Method::GET, "/state", &[]).await?;
    let before_episode = before["episode_id"].as_u64().unwrap_or(0);

    std::fs::write(sensor_file, "OBSTRUCTED\n")
        .map_err(|e| Failure::new(exit::USAGE, format!("cannot write {}: {e}", sensor_file.display())))?;
    // one debounce window before the first look
    tokio::time::sleep(config.sensor.poll_interval * config.sensor.debounce_count).await;

    let deadline = tokio::time::Instant::now() + timeout;
    loop {
        let state = client.json(Method::GET, "/state", &[]).await?;
        let breached = matches!(mode_of(&state), "Breached" | "LockedStreaming")
            && state["episode_id"].as_u64().unwrap_or(0) > before_episode;
        if breached {
            print_json(&state);
            return Ok(());
        }
        if tokio::time::Instant::now() >= deadline {
            return Err(Failure::new(
                exit::NO_BREACH,
                format!("no breach within {timeout:?}; mode is {}", mode_of(&state)),
            ));
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

fn hash_password(password: Option<String>) -> Outcome {
    let password = match password {
        Some(p) => p,
        None => {
            let mut line = String::new();
            std::io::stdin()
                .read_line(&mut line)
                .map_err(|e| Failure::new(exit::USAGE, format!("reading password: {e}")))?;
            line.trim_end_matches(['\r', '\n']).to_string()
        }
    };
    if password.is_empty() {
        return Err(Failure::new(exit::USAGE, "empty password"));
    }
    println!("{}", Credential::hashed("", &password).stored());
    Ok(())
}
