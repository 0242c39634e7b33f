//! Append-only audit trail: `<ISO-8601> <EVENT> <episode_id> <detail>`.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::clock::{iso8601, Clock};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditEvent {
    Arm,
    Disarm,
    Breach,
    Lock,
    Unlock,
    NotifyOk,
    NotifyFail,
    Health,
}

impl AuditEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditEvent::Arm => "ARM",
            AuditEvent::Disarm => "DISARM",
            AuditEvent::Breach => "BREACH",
            AuditEvent::Lock => "LOCK",
            AuditEvent::Unlock => "UNLOCK",
            AuditEvent::NotifyOk => "NOTIFY_OK",
            AuditEvent::NotifyFail => "NOTIFY_FAIL",
            AuditEvent::Health => "HEALTH",
        }
    }
}

impl fmt::Display for AuditEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

struct Sinks {
    file: Option<File>,
    lines: Vec<String>,
}

/// Cloneable handle; every clone writes to the same trail. Lines are kept in
/// memory as well as appended to the optional file.
#[derive(Clone)]
pub struct AuditLog {
    sinks: Arc<Mutex<Sinks>>,
    clock: Arc<dyn Clock>,
}

impl AuditLog {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            sinks: Arc::new(Mutex::new(Sinks {
                file: None,
                lines: Vec::new(),
            })),
            clock,
        }
    }

    pub fn with_file(path: &Path, clock: Arc<dyn Clock>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            sinks: Arc::new(Mutex::new(Sinks {
                file: Some(file),
                lines: Vec::new(),
            })),
            clock,
        })
    }

    pub fn record(&self, event: AuditEvent, episode_id: u64, detail: impl fmt::Display) {
        let detail = detail.to_string().replace(['\n', '\r'], " ");
        let line = format!("{} {} {} {}", iso8601(self.clock.now()), event, episode_id, detail);
        tracing::info!(target: "gvss::audit", "{line}");
        let mut sinks = self.sinks.lock().unwrap();
        if let Some(file) = sinks.file.as_mut() {
            if let Err(e) = writeln!(file, "{line}") {
                tracing::error!("audit log write failed: {e}");
            }
        }
        sinks.lines.push(line);
    }

    pub fn lines(&self) -> Vec<String> {
        self.sinks.lock().unwrap().lines.clone()
    }

    /// Lines whose event field equals `event`.
    pub fn count(&self, event: AuditEvent) -> usize {
        self.sinks
            .lock()
            .unwrap()
            .lines
            .iter()
            .filter(|l| l.split(' ').nth(1) == Some(event.as_str()))
            .count()
    }

    pub fn flush(&self) {
        if let Some(file) = self.sinks.lock().unwrap().file.as_mut() {
            let _ = file.sync_data();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use chrono::TimeZone;

    #[test]
    fn line_format() {
        let clock = Arc::new(ManualClock::new(chrono::Utc.with_ymd_and_hms(2009, 1, 1, 0, 0, 0).unwrap()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.log");
        let log = AuditLog::with_file(&path, clock).unwrap();
        log.record(AuditEvent::Lock, 3, "engaged");
        log.record(AuditEvent::NotifyFail, 3, "multi\nline");
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "2009-01-01T00:00:00Z LOCK 3 engaged\n2009-01-01T00:00:00Z NOTIFY_FAIL 3 multi line\n"
        );
        assert_eq!(log.count(AuditEvent::Lock), 1);
        assert_eq!(log.count(AuditEvent::Unlock), 0);
    }
}
