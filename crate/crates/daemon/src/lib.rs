//! Tripwire surveillance daemon: beam polling, lockdown, breach
//! notification, camera capture and an authenticated HTTP API.

pub mod audit;
pub mod camera;
pub mod cli;
pub mod clock;
pub mod config;
pub mod daemon;
pub mod notify;
pub mod orchestrator;
pub mod sensor;
pub mod service;
pub mod store;

pub use config::Config;
pub use daemon::{Daemon, DaemonOptions, StartError};
