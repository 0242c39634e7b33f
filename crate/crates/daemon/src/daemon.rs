//! Wires configuration into running tasks: sensor loop, cameras, orchestrator, HTTP.

use std::net::SocketAddr;
use std::sync::Arc;

use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::audit::AuditLog;
use crate::camera::{CameraError, CameraSet};
use crate::clock::{Clock, SystemClock};
use crate::config::Config;
use crate::notify::{Notifier, Transport};
use crate::orchestrator::{BeamHealth, CommandHook, LockHook, Orchestrator, OrchestratorConfig};
use crate::sensor::{poll_loop, SensorEvent};
use crate::service::{self, AppState, Authenticator, SessionStore};
use crate::store::{SnapshotStore, StoreError};

#[derive(Debug, Error)]
pub enum StartError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("audit log {path}: {source}")]
    AuditLog {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("snapshot store: {0}")]
    Store(#[from] StoreError),
}

/// Test and embedding seams. `Default` gives the production wiring.
pub struct DaemonOptions {
    pub clock: Arc<dyn Clock>,
    /// Replaces the configured notification transport.
    pub transport: Option<Box<dyn Transport>>,
    /// Replaces the configured lock commands.
    pub hook: Option<Arc<dyn LockHook>>,
}

impl Default for DaemonOptions {
    fn default() -> Self {
        Self {
            clock: Arc::new(SystemClock),
            transport: None,
            hook: None,
        }
    }
}

pub struct Daemon {
    addr: SocketAddr,
    state: AppState,
    tasks: Vec<JoinHandle<()>>,
    server: JoinHandle<()>,
    stop: Option<oneshot::Sender<()>>,
}

impl Daemon {
    /// Starts every subsystem and begins serving. Port 0 picks a free port.
    pub async fn start(config: Config, options: DaemonOptions) -> Result<Self, StartError> {
        let clock = options.clock;
        let addr = SocketAddr::new(config.server.bind, config.server.port);
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| StartError::Bind { addr, source })?;
        let addr = listener.local_addr().map_err(|source| StartError::Bind { addr, source })?;

        let audit = match &config.server.audit_log {
            Some(path) => AuditLog::with_file(path, Arc::clone(&clock)).map_err(|source| {
                StartError::AuditLog {
                    path: path.clone(),
                    source,
                }
            })?,
            None => AuditLog::in_memory(Arc::clone(&clock)),
        };
        let store = Arc::new(SnapshotStore::open(&config.snapshot_dir)?);
        let cameras = Arc::new(CameraSet::open(&config.cameras)?);

        let transport = options
            .transport
            .unwrap_or_else(|| config.notifier.transport.build());
        let hook = options.hook.or_else(|| {
            let lock = &config.lock;
            (lock.lock_command.is_some() || lock.unlock_command.is_some()).then(|| {
                Arc::new(CommandHook {
                    lock_command: lock.lock_command.clone(),
                    unlock_command: lock.unlock_command.clone(),
                }) as Arc<dyn LockHook>
            })
        });
        let orchestrator = Orchestrator::new(
            OrchestratorConfig {
                recipient: config.notifier.recipient.clone(),
                camera_id: config.breach_camera().to_string(),
            },
            Arc::new(Notifier::new(transport)),
            hook,
            audit,
            Arc::clone(&clock),
        );

        let mut tasks = cameras.spawn_all(Arc::clone(&clock));
        let (tx, mut rx) = mpsc::channel(64);
        tasks.push(tokio::spawn(poll_loop(config.sensor.open(), config.sensor.clone(), tx)));
        let orch = Arc::clone(&orchestrator);
        tasks.push(tokio::spawn(async move {
            while let Some(event) = rx.recv().await {
                match event {
                    SensorEvent::Transition(t) => {
                        tracing::info!(from = ?t.from, to = ?t.to, "beam transition");
                        orch.handle_transition(t).await;
                    }
                    SensorEvent::HealthDegraded(reason) => {
                        tracing::warn!("beam health degraded: {reason}");
                        orch.set_beam_health(BeamHealth::Degraded, &reason);
                    }
                    SensorEvent::Healthy => orch.set_beam_health(BeamHealth::Ok, "readings ok"),
                }
            }
        }));

        let state = AppState::new(
            orchestrator,
            cameras,
            store,
            SessionStore::new(config.server.session_ttl, Arc::clone(&clock)),
            Authenticator::new(config.users.clone()),
            clock,
        );
        let app = service::router(state.clone(), config.server.ui_dir.clone());
        let (stop, stopped) = oneshot::channel::<()>();
        let server = tokio::spawn(async move {
            let result = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stopped.await;
                })
                .await;
            if let Err(e) = result {
                tracing::error!("http server: {e}");
            }
        });

        Ok(Self {
            addr,
            state,
            tasks,
            server,
            stop: Some(stop),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    pub fn orchestrator(&self) -> &Arc<Orchestrator> {
        &self.state.orchestrator
    }

    /// Stops serving, halts background loops, releases any held lock and
    /// syncs the audit log.
    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        for task in &self.tasks {
            task.abort();
        }
        let _ = (&mut self.server).await;
        self.state.orchestrator.shutdown().await;
    }
}
