//! Beam sources and the polling loop that debounces them.

use std::collections::VecDeque;
use std::io::BufRead;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use gvss_core::{BeamReading, BeamStatus, BeamTransition, Debouncer};
use thiserror::Error;
use tokio::sync::mpsc;
use tokio::time::{Instant, MissedTickBehavior};

pub const MIN_POLL_INTERVAL: Duration = Duration::from_millis(10);
pub const DEFAULT_POLL_INTERVAL: Duration = Duration::from_millis(100);
pub const DEFAULT_DEBOUNCE_COUNT: u32 = 2;
/// Consecutive read failures before the loop reports degraded health.
pub const FAILURES_BEFORE_DEGRADED: u32 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SensorError {
    #[error("beam source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("poll interval must be at least {MIN_POLL_INTERVAL:?}")]
    PollTooFast,
    #[error("debounce count must be at least 1")]
    ZeroDebounce,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BeamSourceKind {
    /// Text file whose first token is `CLEAR` or `OBSTRUCTED`, re-read every poll.
    SimulatedFile(PathBuf),
    /// One token per line on standard input.
    StandardInputFeed,
    /// Fixed list of readings, one per poll; the last one repeats.
    ScriptedSequence(Vec<BeamStatus>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamSourceConfig {
    pub kind: BeamSourceKind,
    pub poll_interval: Duration,
    pub debounce_count: u32,
}

impl BeamSourceConfig {
    pub fn new(kind: BeamSourceKind) -> Self {
        Self {
            kind,
            poll_interval: DEFAULT_POLL_INTERVAL,
            debounce_count: DEFAULT_DEBOUNCE_COUNT,
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if self.poll_interval < MIN_POLL_INTERVAL {
            return Err(SensorError::PollTooFast);
        }
        if self.debounce_count == 0 {
            return Err(SensorError::ZeroDebounce);
        }
        Ok(())
    }

    pub fn open(&self) -> Box<dyn BeamSource> {
        match &self.kind {
            BeamSourceKind::SimulatedFile(path) => Box::new(FileSource::new(path.clone())),
            BeamSourceKind::StandardInputFeed => Box::new(LineFeedSource::stdin()),
            BeamSourceKind::ScriptedSequence(seq) => Box::new(ScriptedSource::new(seq.clone())),
        }
    }
}

/// A tripwire. Implementations must not block for longer than a poll interval.
pub trait BeamSource: Send {
    fn check_status(&mut self) -> Result<BeamReading, SensorError>;
}

fn elapsed_ms(origin: Instant) -> u64 {
    origin.elapsed().as_millis() as u64
}

fn parse_token(text: &str) -> Result<BeamStatus, SensorError> {
    let token = text
        .split_whitespace()
        .next()
        .ok_or_else(|| SensorError::SourceUnavailable("empty reading".into()))?;
    token
        .parse()
        .map_err(|e: gvss_core::beam::UnknownToken| SensorError::SourceUnavailable(e.to_string()))
}

pub struct FileSource {
    path: PathBuf,
    origin: Instant,
}

impl FileSource {
    pub fn new(path: PathBuf) -> Self {
        Self {
            path,
            origin: Instant::now(),
        }
    }
}

impl BeamSource for FileSource {
    fn check_status(&mut self) -> Result<BeamReading, SensorError> {
        let text = std::fs::read_to_string(&self.path).map_err(|e| {
            SensorError::SourceUnavailable(format!("{}: {e}", self.path.display()))
        })?;
        Ok(BeamReading {
            status: parse_token(&text)?,
            observed_at_ms: elapsed_ms(self.origin),
        })
    }
}

#[derive(Default)]
struct Feed {
    queue: VecDeque<Result<BeamStatus, SensorError>>,
    closed: bool,
}

/// Readings pushed line by line from a reader thread. Each poll consumes one
/// queued line; with nothing queued the previous status repeats.
pub struct LineFeedSource {
    feed: Arc<Mutex<Feed>>,
    last: BeamStatus,
    origin: Instant,
}

impl LineFeedSource {
    pub fn stdin() -> Self {
        Self::from_reader(std::io::stdin())
    }

    pub fn from_reader<R: std::io::Read + Send + 'static>(reader: R) -> Self {
        let feed = Arc::new(Mutex::new(Feed::default()));
        let writer = Arc::clone(&feed);
        std::thread::spawn(move || {
            for line in std::io::BufReader::new(reader).lines() {
                let item = match line {
                    Ok(l) if l.trim().is_empty() => continue,
                    Ok(l) => parse_token(&l),
                    Err(e) => Err(SensorError::SourceUnavailable(e.to_string())),
                };
                writer.lock().unwrap().queue.push_back(item);
            }
            writer.lock().unwrap().closed = true;
        });
        Self {
            feed,
            last: BeamStatus::Clear,
            origin: Instant::now(),
        }
    }
}

impl BeamSource for LineFeedSource {
    fn check_status(&mut self) -> Result<BeamReading, SensorError> {
        let mut feed = self.feed.lock().unwrap();
        let status = match feed.queue.pop_front() {
            Some(item) => item?,
            None if feed.closed => {
                return Err(SensorError::SourceUnavailable("feed closed".into()))
            }
            None => self.last,
        };
        self.last = status;
        Ok(BeamReading {
            status,
            observed_at_ms: elapsed_ms(self.origin),
        })
    }
}

pub struct ScriptedSource {
    script: Vec<Result<BeamStatus, SensorError>>,
    next: usize,
    origin: Instant,
}

impl ScriptedSource {
    pub fn new(readings: Vec<BeamStatus>) -> Self {
        Self::with_failures(readings.into_iter().map(Ok).collect())
    }

    /// Scripts that include read failures, for health tests.
    pub fn with_failures(script: Vec<Result<BeamStatus, SensorError>>) -> Self {
        Self {
            script,
            next: 0,
            origin: Instant::now(),
        }
    }
}

impl BeamSource for ScriptedSource {
    fn check_status(&mut self) -> Result<BeamReading, SensorError> {
        let item = match self.script.get(self.next) {
            Some(item) => item.clone(),
            None => self
                .script
                .last()
                .cloned()
                .unwrap_or(Ok(BeamStatus::Clear)),
        };
        self.next += 1;
        Ok(BeamReading {
            status: item?,
            observed_at_ms: elapsed_ms(self.origin),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SensorEvent {
    Transition(BeamTransition),
    HealthDegraded(String),
    /// First good reading, and every recovery after a degradation.
    Healthy,
}

/// Polls `source` until the receiving side of `sink` goes away.
pub async fn poll_loop(
    mut source: Box<dyn BeamSource>,
    config: BeamSourceConfig,
    sink: mpsc::Sender<SensorEvent>,
) {
    let mut debouncer =
        Debouncer::new(config.debounce_count).expect("config validated before polling");
    let mut ticker = tokio::time::interval(config.poll_interval);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut failures = 0u32;
    // None until the first reading of any kind
    let mut degraded: Option<bool> = None;

    loop {
        ticker.tick().await;
        let event = match source.check_status() {
            Ok(reading) => {
                failures = 0;
                if degraded != Some(false) {
                    degraded = Some(false);
                    if sink.send(SensorEvent::Healthy).await.is_err() {
                        return;
                    }
                }
                debouncer.feed(reading).map(SensorEvent::Transition)
            }
            Err(e) => {
                failures += 1;
                tracing::debug!("beam read failed ({failures} in a row): {e}");
                if failures == FAILURES_BEFORE_DEGRADED {
                    degraded = Some(true);
                    Some(SensorEvent::HealthDegraded(e.to_string()))
                } else {
                    None
                }
            }
        };
        if let Some(event) = event {
            if sink.send(event).await.is_err() {
                return;
            }
        }
    }
}
