//! Pure building blocks of the gvss surveillance daemon.
//!
//! Everything in this crate is free of I/O and clocks so it can be shared
//! between the daemon, the command-line client and the browser demo:
//!
//! * [`frame`]: raw RGB frames and the deterministic synthetic test pattern.
//! * [`pipeline`]: scaling, timestamp overlay, encoding and size estimates.
//! * [`beam`]: tripwire readings and the debounce rule that turns them into
//!   transitions.

pub mod beam;
pub mod frame;
pub mod pipeline;

pub use beam::{debounce_trace, BeamReading, BeamStatus, BeamTransition, DebounceError, Debouncer};
pub use frame::{synthetic_frame, Frame, FrameError};
pub use pipeline::{
    approximate_image_size, encode, overlay_timestamp, render, scale, EncodedImage, Encoding,
    FontSize, RenderSettings, SettingsError, TargetSize,
};
