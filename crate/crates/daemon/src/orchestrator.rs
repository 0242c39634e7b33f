//! Intrusion state machine.
//!
//! ```text
//!   Disarmed <--operator--> Armed --obstruction--> Breached --lock confirmed--> LockedStreaming
//!                             ^                        |                              |
//!                             +------------- unlock ---+------------------------------+
//! ```
//!
//! All mutations go through one mutex-guarded owner. On a breach the lock
//! guard engages immediately, the notification is dispatched on its own
//! task, and the machine moves on to `LockedStreaming` once the lock hook
//! has run. The notification may still be in flight at that point.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use gvss_core::{BeamStatus, BeamTransition};
use serde::Serialize;
use thiserror::Error;
use tokio::task::JoinHandle;

use crate::audit::{AuditEvent, AuditLog};
use crate::clock::Clock;
use crate::notify::{format_breach_message, DeliveryReceipt, DeliveryStatus, Notifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    Disarmed,
    Armed,
    Breached,
    LockedStreaming,
}

impl Mode {
    pub fn is_locked(self) -> bool {
        matches!(self, Mode::Breached | Mode::LockedStreaming)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BeamHealth {
    Unknown,
    Ok,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntrusionState {
    pub mode: Mode,
    pub episode_id: u64,
    pub entered_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BreachActions {
    pub lock_engaged: bool,
    pub notification_receipt: Option<String>,
    pub stream_enabled: bool,
}

/// Everything `/state` reports, taken under one lock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateSnapshot {
    pub mode: Mode,
    pub episode_id: u64,
    pub entered_at: DateTime<Utc>,
    pub lock_engaged: bool,
    pub stream_enabled: bool,
    pub notification_receipt: Option<String>,
    pub beam_health: BeamHealth,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrchestratorError {
    #[error("not locked (mode is {0:?})")]
    NotLocked(Mode),
    #[error("cannot go from {from:?} to {to:?}")]
    IllegalTransition { from: Mode, to: Mode },
}

/// Platform side of the lock: whatever actually freezes keyboard and mouse.
#[async_trait]
pub trait LockHook: Send + Sync {
    async fn engage(&self) -> Result<(), String>;
    async fn release(&self) -> Result<(), String>;
}

/// Runs configured argument vectors, no shell involved.
pub struct CommandHook {
    pub lock_command: Option<Vec<String>>,
    pub unlock_command: Option<Vec<String>>,
}

async fn run_argv(argv: &Option<Vec<String>>) -> Result<(), String> {
    let Some(argv) = argv else { return Ok(()) };
    let (program, args) = argv.split_first().ok_or("empty command")?;
    let status = tokio::time::timeout(
        std::time::Duration::from_secs(10),
        tokio::process::Command::new(program).args(args).status(),
    )
    .await
    .map_err(|_| format!("`{program}` timed out"))?
    .map_err(|e| format!("`{program}`: {e}"))?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("`{program}` exited with {status}"))
    }
}

#[async_trait]
impl LockHook for CommandHook {
    async fn engage(&self) -> Result<(), String> {
        run_argv(&self.lock_command).await
    }

    async fn release(&self) -> Result<(), String> {
        run_argv(&self.unlock_command).await
    }
}

/// Proof that the input lock is held for an episode.
#[derive(Debug, PartialEq, Eq)]
pub struct LockGuard {
    episode_id: u64,
}

/// Process-wide input lock flag with audit trail.
pub struct InputLock {
    active: AtomicBool,
    audit: AuditLog,
}

impl InputLock {
    pub fn new(audit: AuditLog) -> Self {
        Self {
            active: AtomicBool::new(false),
            audit,
        }
    }

    /// Engages the lock. Returns `None` when it is already held.
    pub fn lock_input(&self, episode_id: u64) -> Option<LockGuard> {
        if self.active.swap(true, Ordering::SeqCst) {
            return None;
        }
        self.audit.record(AuditEvent::Lock, episode_id, "input locked");
        Some(LockGuard { episode_id })
    }

    pub fn release(&self, guard: LockGuard, detail: &str) {
        self.active.store(false, Ordering::SeqCst);
        self.audit.record(AuditEvent::Unlock, guard.episode_id, detail);
    }

    pub fn is_active(&self) -> bool {
        self.active.load(Ordering::SeqCst)
    }
}

struct Inner {
    state: IntrusionState,
    actions: BreachActions,
    guard: Option<LockGuard>,
    health: BeamHealth,
    notifications_dispatched: u64,
    pending: Vec<JoinHandle<()>>,
}

pub struct Orchestrator {
    inner: Mutex<Inner>,
    lock: InputLock,
    hook: Option<Arc<dyn LockHook>>,
    notifier: Arc<Notifier>,
    recipient: String,
    camera_id: String,
    audit: AuditLog,
    clock: Arc<dyn Clock>,
}

pub struct OrchestratorConfig {
    pub recipient: String,
    pub camera_id: String,
}

impl Orchestrator {
    /// Starts in `Armed`: monitoring begins as soon as the daemon is up.
    pub fn new(
        config: OrchestratorConfig,
        notifier: Arc<Notifier>,
        hook: Option<Arc<dyn LockHook>>,
        audit: AuditLog,
        clock: Arc<dyn Clock>,
    ) -> Arc<Self> {
        let now = clock.now();
        audit.record(AuditEvent::Arm, 0, "startup");
        Arc::new(Self {
            inner: Mutex::new(Inner {
                state: IntrusionState {
                    mode: Mode::Armed,
                    episode_id: 0,
                    entered_at: now,
                },
                actions: BreachActions::default(),
                guard: None,
                health: BeamHealth::Unknown,
                notifications_dispatched: 0,
                pending: Vec::new(),
            }),
            lock: InputLock::new(audit.clone()),
            hook,
            notifier,
            recipient: config.recipient,
            camera_id: config.camera_id,
            audit,
            clock,
        })
    }

    pub fn state(&self) -> IntrusionState {
        self.inner.lock().unwrap().state.clone()
    }

    pub fn actions(&self) -> BreachActions {
        self.inner.lock().unwrap().actions.clone()
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let inner = self.inner.lock().unwrap();
        StateSnapshot {
            mode: inner.state.mode,
            episode_id: inner.state.episode_id,
            entered_at: inner.state.entered_at,
            // the guard, not the action record: it is already held while Breached
            lock_engaged: inner.guard.is_some(),
            stream_enabled: inner.actions.stream_enabled,
            notification_receipt: inner.actions.notification_receipt.clone(),
            beam_health: inner.health,
        }
    }

    pub fn lock_active(&self) -> bool {
        self.lock.is_active()
    }

    pub fn notifications_dispatched(&self) -> u64 {
        self.inner.lock().unwrap().notifications_dispatched
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    fn enter(&self, inner: &mut Inner, mode: Mode) {
        inner.state.mode = mode;
        inner.state.entered_at = self.clock.now();
    }

    /// Reacts to a debounced beam transition and returns the resulting state.
    pub async fn handle_transition(self: &Arc<Self>, transition: BeamTransition) -> IntrusionState {
        if transition.to != BeamStatus::Obstructed {
            return self.state();
        }
        let episode = {
            let mut inner = self.inner.lock().unwrap();
            match inner.state.mode {
                Mode::Disarmed => {
                    self.audit.record(
                        AuditEvent::Health,
                        inner.state.episode_id,
                        "obstruction ignored while disarmed",
                    );
                    return inner.state.clone();
                }
                Mode::Breached | Mode::LockedStreaming => return inner.state.clone(),
                Mode::Armed => {}
            }
            inner.state.episode_id += 1;
            let episode = inner.state.episode_id;
            self.enter(&mut inner, Mode::Breached);
            inner.actions = BreachActions::default();
            self.audit.record(AuditEvent::Breach, episode, format!("camera={}", self.camera_id));
            inner.guard = self.lock.lock_input(episode);
            inner.notifications_dispatched += 1;
            let task = tokio::spawn(Arc::clone(self).dispatch_notification(episode));
            inner.pending.push(task);
            episode
        };

        let hook_result = match &self.hook {
            Some(hook) => hook.engage().await,
            None => Ok(()),
        };
        if let Err(e) = hook_result {
            self.audit.record(AuditEvent::Health, episode, format!("lock hook failed: {e}"));
        }

        let mut inner = self.inner.lock().unwrap();
        // An unlock may have landed while the hook ran; then there is nothing to promote.
        if inner.state.mode == Mode::Breached && inner.state.episode_id == episode {
            inner.actions.lock_engaged = true;
            inner.actions.stream_enabled = true;
            self.enter(&mut inner, Mode::LockedStreaming);
        }
        inner.state.clone()
    }

    async fn dispatch_notification(self: Arc<Self>, episode: u64) {
        let message =
            format_breach_message(&self.recipient, episode, &self.camera_id, self.clock.now());
        let receipt: DeliveryReceipt = self.notifier.notify(&message).await;
        let (event, outcome) = match receipt.status {
            DeliveryStatus::Sent => (AuditEvent::NotifyOk, "sent"),
            DeliveryStatus::Failed => (AuditEvent::NotifyFail, "failed"),
        };
        self.audit.record(
            event,
            episode,
            format!(
                "receipt={} transport={} {outcome}: {}",
                receipt.receipt_id, receipt.transport, receipt.detail
            ),
        );
        let mut inner = self.inner.lock().unwrap();
        if inner.state.episode_id == episode && inner.state.mode.is_locked() {
            inner.actions.notification_receipt = Some(receipt.receipt_id);
        }
    }

    /// Operator kill: releases the lock and re-arms.
    pub fn unlock(&self, actor: &str, reason: &str) -> Result<IntrusionState, OrchestratorError> {
        let state = {
            let mut inner = self.inner.lock().unwrap();
            if !inner.state.mode.is_locked() {
                return Err(OrchestratorError::NotLocked(inner.state.mode));
            }
            if let Some(guard) = inner.guard.take() {
                self.lock
                    .release(guard, &format!("actor={actor} reason={reason}"));
            }
            inner.actions.lock_engaged = false;
            inner.actions.stream_enabled = false;
            self.enter(&mut inner, Mode::Armed);
            inner.state.clone()
        };
        if let Some(hook) = self.hook.clone() {
            let audit = self.audit.clone();
            let episode = state.episode_id;
            tokio::spawn(async move {
                if let Err(e) = hook.release().await {
                    audit.record(AuditEvent::Health, episode, format!("unlock hook failed: {e}"));
                }
            });
        }
        Ok(state)
    }

    pub fn arm(&self, actor: &str) -> Result<IntrusionState, OrchestratorError> {
        self.operator_switch(Mode::Disarmed, Mode::Armed, AuditEvent::Arm, actor)
    }

    pub fn disarm(&self, actor: &str) -> Result<IntrusionState, OrchestratorError> {
        self.operator_switch(Mode::Armed, Mode::Disarmed, AuditEvent::Disarm, actor)
    }

    fn operator_switch(
        &self,
        from: Mode,
        to: Mode,
        event: AuditEvent,
        actor: &str,
    ) -> Result<IntrusionState, OrchestratorError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.state.mode != from {
            return Err(OrchestratorError::IllegalTransition {
                from: inner.state.mode,
                to,
            });
        }
        self.enter(&mut inner, to);
        self.audit
            .record(event, inner.state.episode_id, format!("actor={actor}"));
        Ok(inner.state.clone())
    }

    pub fn set_beam_health(&self, health: BeamHealth, detail: &str) {
        let mut inner = self.inner.lock().unwrap();
        if inner.health != health {
            inner.health = health;
            self.audit.record(
                AuditEvent::Health,
                inner.state.episode_id,
                format!("beam {health:?}: {detail}"),
            );
        }
    }

    /// Waits for every dispatched notification to finish.
    pub async fn flush_notifications(&self) {
        let pending = std::mem::take(&mut self.inner.lock().unwrap().pending);
        for task in pending {
            let _ = task.await;
        }
    }

    /// Shutdown path: releases a held lock through the hook and syncs the audit log.
    pub async fn shutdown(&self) {
        self.flush_notifications().await;
        let guard = self.inner.lock().unwrap().guard.take();
        if let Some(guard) = guard {
            let episode = guard.episode_id;
            self.lock.release(guard, "actor=daemon reason=shutdown");
            if let Some(hook) = &self.hook {
                if let Err(e) = hook.release().await {
                    self.audit
                        .record(AuditEvent::Health, episode, format!("unlock hook failed: {e}"));
                }
            }
        }
        self.audit.flush();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SystemClock;
    use crate::notify::{Transport, TransportFailure};
    use crate::notify::NotificationMessage;
    use std::sync::atomic::AtomicUsize;
    use tokio::sync::Notify;

    struct CountingTransport {
        calls: Arc<AtomicUsize>,
        fail: bool,
    }

    #[async_trait]
    impl Transport for CountingTransport {
        fn name(&self) -> &'static str {
            "counting"
        }
        async fn deliver(&self, _: &NotificationMessage) -> Result<String, TransportFailure> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail {
                Err(TransportFailure("gateway down".into()))
            } else {
                Ok("ok".into())
            }
        }
    }

    fn build(fail: bool, hook: Option<Arc<dyn LockHook>>) -> (Arc<Orchestrator>, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let clock: Arc<dyn Clock> = Arc::new(SystemClock);
        let notifier = Arc::new(Notifier::new(Box::new(CountingTransport {
            calls: Arc::clone(&calls),
            fail,
        })));
        let orch = Orchestrator::new(
            OrchestratorConfig {
                recipient: "owner".into(),
                camera_id: "cam0".into(),
            },
            notifier,
            hook,
            AuditLog::in_memory(Arc::clone(&clock)),
            clock,
        );
        (orch, calls)
    }

    fn obstructed() -> BeamTransition {
        BeamTransition {
            from: BeamStatus::Clear,
            to: BeamStatus::Obstructed,
            observed_at_ms: 0,
        }
    }

    fn cleared() -> BeamTransition {
        BeamTransition {
            from: BeamStatus::Obstructed,
            to: BeamStatus::Clear,
            observed_at_ms: 0,
        }
    }

    #[tokio::test]
    async fn armed_breach_locks_and_notifies_once() {
        let (orch, calls) = build(false, None);
        let state = orch.handle_transition(obstructed()).await;
        assert_eq!(state.mode, Mode::LockedStreaming);
        assert_eq!(state.episode_id, 1);
        orch.flush_notifications().await;
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        let actions = orch.actions();
        assert!(actions.lock_engaged && actions.stream_enabled);
        assert_eq!(actions.notification_receipt.as_deref(), Some("rcpt-000001"));
        assert!(orch.lock_active());
        assert_eq!(orch.audit().count(AuditEvent::NotifyOk), 1);
        assert_eq!(orch.audit().count(AuditEvent::Lock), 1);
    }

    #[tokio::test]
    async fn repeated_obstruction_is_absorbed() {
        let (orch, calls) = build(false, None);
        orch.handle_transition(obstructed()).await;
        orch.handle_transition(cleared()).await;
        let state = orch.handle_transition(obstructed()).await;
        assert_eq!((state.mode, state.episode_id), (Mode::LockedStreaming, 1));
        orch.flush_notifications().await;
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn disarmed_ignores_obstruction_with_audit_entry() {
        let (orch, calls) = build(false, None);
        orch.disarm("owner").unwrap();
        let before = orch.audit().count(AuditEvent::Health);
        let state = orch.handle_transition(obstructed()).await;
        assert_eq!((state.mode, state.episode_id), (Mode::Disarmed, 0));
        assert_eq!(calls.load(Ordering::SeqCst), 0);
        assert_eq!(orch.audit().count(AuditEvent::Health), before + 1);
    }

    #[tokio::test]
    async fn unlock_rearms_and_releases() {
        let (orch, _) = build(false, None);
        orch.handle_transition(obstructed()).await;
        let state = orch.unlock("owner", "Kill").unwrap();
        assert_eq!(state.mode, Mode::Armed);
        assert!(!orch.lock_active());
        let unlock_line = orch.audit().lines().into_iter().find(|l| l.contains(" UNLOCK ")).unwrap();
        assert!(unlock_line.ends_with("UNLOCK 1 actor=owner reason=Kill"), "{unlock_line}");
        // next breach is a new episode
        let state = orch.handle_transition(obstructed()).await;
        assert_eq!(state.episode_id, 2);
    }

    #[tokio::test]
    async fn unlock_while_armed_is_rejected() {
        let (orch, _) = build(false, None);
        let before = orch.state();
        assert_eq!(orch.unlock("owner", "Kill"), Err(OrchestratorError::NotLocked(Mode::Armed)));
        assert_eq!(orch.state(), before);
    }

    #[tokio::test]
    async fn failing_notifier_does_not_block_lockdown() {
        let (orch, calls) = build(true, None);
        let state = orch.handle_transition(obstructed()).await;
        orch.flush_notifications().await;
        assert_eq!(state.mode, Mode::LockedStreaming);
        let actions = orch.actions();
        assert!(actions.lock_engaged && actions.stream_enabled);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(orch.audit().count(AuditEvent::NotifyFail), 1);
    }

    #[test]
    fn lock_input_is_idempotent() {
        let clock: Arc<dyn Clock> = Arc::new(SystemClock);
        let audit = AuditLog::in_memory(clock);
        let lock = InputLock::new(audit.clone());
        let guard = lock.lock_input(1).expect("first lock");
        assert!(lock.lock_input(1).is_none());
        assert_eq!(audit.count(AuditEvent::Lock), 1);
        assert!(lock.is_active());
        lock.release(guard, "test");
        assert!(!lock.is_active());
        assert_eq!(audit.count(AuditEvent::Unlock), 1);
    }

    /// Hook that parks until the test lets it go.
    struct GateHook {
        entered: Notify,
        proceed: Notify,
    }

    #[async_trait]
    impl LockHook for GateHook {
        async fn engage(&self) -> Result<(), String> {
            self.entered.notify_one();
            self.proceed.notified().await;
            Ok(())
        }
        async fn release(&self) -> Result<(), String> {
            Ok(())
        }
    }

    #[tokio::test]
    async fn unlock_during_breach_cancels_promotion() {
        let gate = Arc::new(GateHook {
            entered: Notify::new(),
            proceed: Notify::new(),
        });
        let (orch, calls) = build(false, Some(gate.clone() as Arc<dyn LockHook>));
        let handler = tokio::spawn({
            let orch = Arc::clone(&orch);
            async move { orch.handle_transition(obstructed()).await }
        });
        gate.entered.notified().await;
        assert_eq!(orch.state().mode, Mode::Breached);
        assert!(orch.lock_active());

        let state = orch.unlock("owner", "Kill").unwrap();
        assert_eq!(state.mode, Mode::Armed);
        gate.proceed.notify_one();

        let final_state = handler.await.unwrap();
        assert_eq!(final_state.mode, Mode::Armed);
        assert!(!orch.lock_active());
        assert!(!orch.actions().stream_enabled);
        orch.flush_notifications().await;
        assert_eq!(calls.load(Ordering::SeqCst), 1, "the episode still got its one notification");
    }

    #[tokio::test]
    async fn failing_hook_is_logged_not_fatal() {
        let hook = CommandHook {
            lock_command: Some(vec!["/nonexistent/gvss-lock".into()]),
            unlock_command: None,
        };
        let (orch, _) = build(false, Some(Arc::new(hook)));
        let state = orch.handle_transition(obstructed()).await;
        assert_eq!(state.mode, Mode::LockedStreaming);
        assert!(orch.audit().lines().iter().any(|l| l.contains("lock hook failed")));
    }

    #[tokio::test]
    async fn arm_disarm_legality() {
        let (orch, _) = build(false, None);
        assert!(orch.arm("owner").is_err());
        assert_eq!(orch.disarm("owner").unwrap().mode, Mode::Disarmed);
        assert!(orch.disarm("owner").is_err());
        assert_eq!(orch.arm("owner").unwrap().mode, Mode::Armed);
        orch.handle_transition(obstructed()).await;
        assert!(orch.disarm("owner").is_err(), "cannot disarm while locked");
    }
}
