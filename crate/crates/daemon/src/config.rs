//! Daemon configuration: a line-oriented `key = value` file split into
//! `[section]` blocks, with one `[camera <id>]` block per camera.
//!
//! ```text
//! [server]
//! port = 8686
//! audit_log = audit.log
//!
//! [sensor]
//! kind = file
//! path = beam.txt
//!
//! [storage]
//! snapshot_dir = snapshots
//!
//! [users]
//! owner = 0a1b...:9f8e...
//!
//! [camera cam0]
//! kind = synthetic
//! width = 640
//! height = 480
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::HashSet;
use std::fmt;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use gvss_core::BeamStatus;
use thiserror::Error;

use crate::camera::{CameraConfig, CameraKind, DEFAULT_CADENCE};
use crate::notify::TransportConfig;
use crate::sensor::{BeamSourceConfig, BeamSourceKind};
use crate::service::auth::{Credential, SESSION_TTL};

pub const DEFAULT_PORT: u16 = 8686;

#[derive(Debug, Error, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub audit_log: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub session_ttl: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::from([127, 0, 0, 1]),
            port: DEFAULT_PORT,
            audit_log: None,
            ui_dir: None,
            session_ttl: SESSION_TTL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NotifierConfig {
    pub recipient: String,
    pub transport: TransportConfig,
    /// Camera named in breach messages; defaults to the first camera.
    pub camera: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LockConfig {
    pub lock_command: Option<Vec<String>>,
    pub unlock_command: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub server: ServerConfig,
    pub sensor: BeamSourceConfig,
    pub snapshot_dir: PathBuf,
    pub notifier: NotifierConfig,
    pub lock: LockConfig,
    pub users: Vec<Credential>,
    pub cameras: Vec<CameraConfig>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let sections = tokenize(text)?;
        let mut seen = HashSet::new();
        for s in &sections {
            let key = (s.name.clone(), s.arg.clone());
            if !seen.insert(key) {
                return Err(ConfigError::at(s.line, format!("duplicate section [{}]", s.title())));
            }
        }
        let find = |name: &str| sections.iter().find(|s| s.name == name && s.arg.is_none());
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };

        let mut server = ServerConfig::default();
        if let Some(s) = find("server") {
            s.check_keys(&["bind", "port", "audit_log", "ui_dir", "session_ttl_secs"])?;
            if let Some(e) = s.get("bind") {
                server.bind = e.parse("an IP address")?;
            }
            if let Some(e) = s.get("port") {
                server.port = e.parse("a port number")?;
            }
            server.audit_log = s.get("audit_log").map(|e| resolve(&e.value));
            server.ui_dir = s.get("ui_dir").map(|e| resolve(&e.value));
            if let Some(e) = s.get("session_ttl_secs") {
                server.session_ttl = Duration::from_secs(e.parse("a number of seconds")?);
            }
        }

        let sensor = {
            let s = find("sensor").ok_or_else(|| ConfigError::general("missing section [sensor]"))?;
            s.check_keys(&["kind", "path", "script", "poll_interval_ms", "debounce_count"])?;
            let kind_entry = s.require("kind")?;
            let kind = match kind_entry.value.as_str() {
                "file" => BeamSourceKind::SimulatedFile(resolve(&s.require("path")?.value)),
                "stdin" => BeamSourceKind::StandardInputFeed,
                "scripted" => {
                    let e = s.require("script")?;
                    let readings = e
                        .value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|t| !t.is_empty())
                        .map(BeamStatus::from_str)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|err| ConfigError::at(e.line, err.to_string()))?;
                    BeamSourceKind::ScriptedSequence(readings)
                }
                other => {
                    return Err(ConfigError::at(
                        kind_entry.line,
                        format!("unknown sensor kind `{other}` (expected file, stdin or scripted)"),
                    ))
                }
            };
            let mut cfg = BeamSourceConfig::new(kind);
            if let Some(e) = s.get("poll_interval_ms") {
                cfg.poll_interval = Duration::from_millis(e.parse("milliseconds")?);
            }
            if let Some(e) = s.get("debounce_count") {
                cfg.debounce_count = e.parse("a positive integer")?;
            }
            cfg.validate().map_err(|err| ConfigError::at(s.line, err.to_string()))?;
            cfg
        };

        let snapshot_dir = {
            let s = find("storage").ok_or_else(|| {
                ConfigError::general("missing section [storage] with key `snapshot_dir`")
            })?;
            s.check_keys(&["snapshot_dir"])?;
            resolve(&s.require("snapshot_dir")?.value)
        };

        let mut cameras = Vec::new();
        for s in sections.iter().filter(|s| s.name == "camera") {
            let id = s
                .arg
                .clone()
                .ok_or_else(|| ConfigError::at(s.line, "camera section needs an id: [camera <id>]"))?;
            s.check_keys(&["name", "kind", "width", "height", "path", "cadence_ms"])?;
            let kind_entry = s.require("kind")?;
            let kind = match kind_entry.value.as_str() {
                "synthetic" => CameraKind::SyntheticPattern {
                    width: s.require("width")?.parse("a width in pixels")?,
                    height: s.require("height")?.parse("a height in pixels")?,
                },
                "files" => CameraKind::FileSequence {
                    dir: resolve(&s.require("path")?.value),
                },
                other => {
                    return Err(ConfigError::at(
                        kind_entry.line,
                        format!("unknown camera kind `{other}` (expected synthetic or files)"),
                    ))
                }
            };
            if let CameraKind::SyntheticPattern { width, height } = kind {
                if width == 0 || height == 0 {
                    return Err(ConfigError::at(s.line, "camera dimensions must be at least 1x1"));
                }
            }
            let cadence = match s.get("cadence_ms") {
                Some(e) => {
                    let ms: u64 = e.parse("milliseconds")?;
                    if ms == 0 {
                        return Err(ConfigError::at(e.line, "cadence_ms must be positive"));
                    }
                    Duration::from_millis(ms)
                }
                None => DEFAULT_CADENCE,
            };
            cameras.push(CameraConfig {
                name: s.get("name").map_or_else(|| id.clone(), |e| e.value.clone()),
                id,
                kind,
                cadence,
            });
        }
        if cameras.is_empty() {
            return Err(ConfigError::general("no cameras configured (add a [camera <id>] section)"));
        }

        let notifier = match find("notifier") {
            None => NotifierConfig {
                recipient: "owner".into(),
                transport: TransportConfig::Stdout,
                camera: None,
            },
            Some(s) => {
                s.check_keys(&["transport", "recipient", "path", "url", "camera"])?;
                let transport = match s.get("transport").map(|e| (e.value.as_str(), e.line)) {
                    None | Some(("stdout", _)) => TransportConfig::Stdout,
                    Some(("file", _)) => TransportConfig::File(resolve(&s.require("path")?.value)),
                    Some(("webhook", _)) => TransportConfig::Webhook(s.require("url")?.value.clone()),
                    Some((other, line)) => {
                        return Err(ConfigError::at(
                            line,
                            format!("unknown transport `{other}` (expected file, webhook or stdout)"),
                        ))
                    }
                };
                let camera = s.get("camera").map(|e| e.value.clone());
                if let (Some(cam), Some(e)) = (&camera, s.get("camera")) {
                    if !cameras.iter().any(|c| &c.id == cam) {
                        return Err(ConfigError::at(e.line, format!("unknown camera `{cam}`")));
                    }
                }
                NotifierConfig {
                    recipient: s.get("recipient").map_or_else(|| "owner".into(), |e| e.value.clone()),
                    transport,
                    camera,
                }
            }
        };

        let mut lock = LockConfig::default();
        if let Some(s) = find("lock") {
            s.check_keys(&["lock_command", "unlock_command"])?;
            let argv = |v: &str| v.split_whitespace().map(String::from).collect::<Vec<_>>();
            lock.lock_command = s.get("lock_command").map(|e| argv(&e.value)).filter(|v| !v.is_empty());
            lock.unlock_command = s.get("unlock_command").map(|e| argv(&e.value)).filter(|v| !v.is_empty());
        }

        let users = match find("users") {
            None => Vec::new(),
            Some(s) => s
                .entries
                .iter()
                .map(|e| {
                    Credential::from_stored(&e.key, &e.value).map_err(|err| ConfigError::at(e.line, err))
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        if users.is_empty() {
            return Err(ConfigError::general("no users configured (add entries to [users])"));
        }

        if let Some(s) = sections.iter().find(|s| {
            !matches!(
                (s.name.as_str(), s.arg.is_some()),
                ("server" | "sensor" | "storage" | "notifier" | "lock" | "users", false) | ("camera", true)
            )
        }) {
            return Err(ConfigError::at(s.line, format!("unknown section [{}]", s.title())));
        }

        Ok(Config {
            server,
            sensor,
            snapshot_dir,
            notifier,
            lock,
            users,
            cameras,
        })
    }

    /// Camera named in breach notifications.
    pub fn breach_camera(&self) -> &str {
        self.notifier
            .camera
            .as_deref()
            .unwrap_or(&self.cameras[0].id)
    }
}

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

impl Entry {
    fn parse<T: FromStr>(&self, what: &str) -> Result<T, ConfigError> {
        self.value.parse().map_err(|_| {
            ConfigError::at(self.line, format!("`{}` must be {what}, got `{}`", self.key, self.value))
        })
    }
}

#[derive(Debug)]
struct Section {
    name: String,
    arg: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn title(&self) -> String {
        match &self.arg {
            Some(arg) => format!("{} {arg}", self.name),
            None => self.name.clone(),
        }
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn require(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.get(key).ok_or_else(|| {
            ConfigError::at(self.line, format!("missing key `{key}` in [{}]", self.title()))
        })
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(ConfigError::at(
                e.line,
                format!("unknown key `{}` in [{}]", e.key, self.title()),
            )),
            None => Ok(()),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?;
            let mut parts = header.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| ConfigError::at(line, "empty section header"))?
                .to_string();
            let arg = parts.next().map(String::from);
            if parts.next().is_some() {
                return Err(ConfigError::at(line, "section header takes at most one argument"));
            }
            sections.push(Section {
                name,
                arg,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{trimmed}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::at(line, "empty key"));
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| ConfigError::at(line, "key outside of any [section]"))?;
        if section.get(key).is_some() {
            return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}
