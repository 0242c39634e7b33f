//! Breach notifications over a pluggable, SMS-shaped transport.

use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::clock::iso8601;

pub const MAX_BODY_CHARS: usize = 160;
const WEBHOOK_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MessageError {
    #[error("notification body is empty")]
    EmptyBody,
    #[error("notification body is {0} characters, limit is {MAX_BODY_CHARS}")]
    BodyTooLong(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotificationMessage {
    recipient: String,
    body: String,
    episode_id: u64,
    created_at: DateTime<Utc>,
}

impl NotificationMessage {
    pub fn new(
        recipient: impl Into<String>,
        body: impl Into<String>,
        episode_id: u64,
        created_at: DateTime<Utc>,
    ) -> Result<Self, MessageError> {
        let body = body.into();
        let chars = body.chars().count();
        if chars == 0 {
            return Err(MessageError::EmptyBody);
        }
        if chars > MAX_BODY_CHARS {
            return Err(MessageError::BodyTooLong(chars));
        }
        Ok(Self {
            recipient: recipient.into(),
            body,
            episode_id,
            created_at,
        })
    }

    pub fn recipient(&self) -> &str {
        &self.recipient
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn episode_id(&self) -> u64 {
        self.episode_id
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
}

/// `INTRUSION ep=<id> cam=<camera> at=<ISO-8601>`, truncating the camera id
/// with `…` when the body would exceed the length cap.
pub fn format_breach_message(
    recipient: &str,
    episode_id: u64,
    camera_id: &str,
    time: DateTime<Utc>,
) -> NotificationMessage {
    let at = iso8601(time);
    let render = |cam: &str| format!("INTRUSION ep={episode_id} cam={cam} at={at}");
    let mut body = render(camera_id);
    let overflow = body.chars().count().saturating_sub(MAX_BODY_CHARS);
    if overflow > 0 {
        let keep = camera_id.chars().count().saturating_sub(overflow + 1);
        let cam: String = camera_id.chars().take(keep).chain(['…']).collect();
        body = render(&cam);
    }
    NotificationMessage::new(recipient, body, episode_id, time)
        .expect("breach body is non-empty and capped")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeliveryStatus {
    Sent,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryReceipt {
    pub receipt_id: String,
    pub transport: String,
    pub status: DeliveryStatus,
    pub detail: String,
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct TransportFailure(pub String);

#[async_trait]
pub trait Transport: Send + Sync {
    fn name(&self) -> &'static str;
    /// One delivery attempt; returns a short success detail.
    async fn deliver(&self, message: &NotificationMessage) -> Result<String, TransportFailure>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportConfig {
    File(PathBuf),
    Webhook(String),
    Stdout,
}

impl TransportConfig {
    pub fn build(&self) -> Box<dyn Transport> {
        match self {
            TransportConfig::File(path) => Box::new(FileTransport { path: path.clone() }),
            TransportConfig::Webhook(url) => Box::new(WebhookTransport::new(url.clone())),
            TransportConfig::Stdout => Box::new(StdoutTransport),
        }
    }
}

fn message_line(m: &NotificationMessage) -> String {
    format!(
        "{} episode_id={} recipient={} body={}",
        iso8601(m.created_at),
        m.episode_id,
        m.recipient,
        m.body
    )
}

/// Appends one line per message.
pub struct FileTransport {
    pub path: PathBuf,
}

#[async_trait]
impl Transport for FileTransport {
    fn name(&self) -> &'static str {
        "file"
    }

    async fn deliver(&self, message: &NotificationMessage) -> Result<String, TransportFailure> {
        let line = message_line(message);
        let path = self.path.clone();
        tokio::task::spawn_blocking(move || {
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)?;
            writeln!(f, "{line}")?;
            f.sync_data()
        })
        .await
        .map_err(|e| TransportFailure(e.to_string()))?
        .map_err(|e| TransportFailure(format!("{}: {e}", self.path.display())))?;
        Ok(format!("appended to {}", self.path.display()))
    }
}

/// POSTs `recipient=..&body=..` to an SMS-gateway style URL; 2xx is success.
pub struct WebhookTransport {
    url: String,
    client: reqwest::Client,
}

impl WebhookTransport {
    pub fn new(url: String) -> Self {
        let client = reqwest::Client::builder()
            .timeout(WEBHOOK_TIMEOUT)
            .build()
            .expect("HTTP client without TLS configuration");
        Self { url, client }
    }
}

#[async_trait]
impl Transport for WebhookTransport {
    fn name(&self) -> &'static str {
        "webhook"
    }

    async fn deliver(&self, message: &NotificationMessage) -> Result<String, TransportFailure> {
        let resp = self
            .client
            .post(&self.url)
            .form(&[("recipient", message.recipient()), ("body", message.body())])
            .send()
            .await
            .map_err(|e| TransportFailure(format!("webhook request failed: {e}")))?;
        let status = resp.status();
        if status.is_success() {
            Ok(format!("HTTP {}", status.as_u16()))
        } else {
            Err(TransportFailure(format!("webhook answered HTTP {}", status.as_u16())))
        }
    }
}

pub struct StdoutTransport;

#[async_trait]
impl Transport for StdoutTransport {
    fn name(&self) -> &'static str {
        "stdout"
    }

    async fn deliver(&self, message: &NotificationMessage) -> Result<String, TransportFailure> {
        println!("{}", message_line(message));
        Ok("printed".into())
    }
}

/// Wraps a transport and issues receipts. Never retries.
pub struct Notifier {
    transport: Box<dyn Transport>,
    next_receipt: AtomicU64,
}

impl Notifier {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            next_receipt: AtomicU64::new(1),
        }
    }

    pub async fn notify(&self, message: &NotificationMessage) -> DeliveryReceipt {
        let n = self.next_receipt.fetch_add(1, Ordering::Relaxed);
        let receipt_id = format!("rcpt-{n:06}");
        let (status, detail) = match self.transport.deliver(message).await {
            Ok(detail) => (DeliveryStatus::Sent, detail),
            Err(TransportFailure(detail)) => (DeliveryStatus::Failed, detail),
        };
        DeliveryReceipt {
            receipt_id,
            transport: self.transport.name().to_string(),
            status,
            detail,
        }
    }
}
