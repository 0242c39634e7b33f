//! Tripwire readings and the debounce rule.
//!
//! A [`Debouncer`] accepts a state change only after `required` consecutive
//! readings agree with each other and disagree with the last accepted state.
//! The accepted state starts as [`BeamStatus::Clear`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BeamStatus {
    Clear,
    Obstructed,
}

impl BeamStatus {
    pub fn token(self) -> &'static str {
        match self {
            BeamStatus::Clear => "CLEAR",
            BeamStatus::Obstructed => "OBSTRUCTED",
        }
    }
}

impl fmt::Display for BeamStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unrecognised beam token {0:?} (expected CLEAR or OBSTRUCTED)")]
pub struct UnknownToken(pub String);

impl FromStr for BeamStatus {
    type Err = UnknownToken;

    /// Case-sensitive: only `CLEAR` and `OBSTRUCTED` are accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CLEAR" => Ok(BeamStatus::Clear),
            "OBSTRUCTED" => Ok(BeamStatus::Obstructed),
            other => Err(UnknownToken(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamReading {
    pub status: BeamStatus,
    /// Monotonic milliseconds, non-decreasing per source.
    pub observed_at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BeamTransition {
    pub from: BeamStatus,
    pub to: BeamStatus,
    pub observed_at_ms: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DebounceError {
    #[error("debounce count must be at least 1")]
    ZeroCount,
}

#[derive(Debug, Clone)]
pub struct Debouncer {
    required: u32,
    accepted: BeamStatus,
    run: u32,
}

impl Debouncer {
    pub fn new(required: u32) -> Result<Self, DebounceError> {
        if required == 0 {
            return Err(DebounceError::ZeroCount);
        }
        Ok(Self {
            required,
            accepted: BeamStatus::Clear,
            run: 0,
        })
    }

    pub fn accepted(&self) -> BeamStatus {
        self.accepted
    }

    pub fn required(&self) -> u32 {
        self.required
    }

    /// Feeds one reading; returns the transition if this reading completes a
    /// run of `required` disagreeing readings.
    pub fn feed(&mut self, reading: BeamReading) -> Option<BeamTransition> {
        if reading.status == self.accepted {
            self.run = 0;
            return None;
        }
        // Only two states exist, so every disagreeing reading extends the run.
        self.run += 1;
        if self.run < self.required {
            return None;
        }
        let from = self.accepted;
        self.accepted = reading.status;
        self.run = 0;
        Some(BeamTransition {
            from,
            to: reading.status,
            observed_at_ms: reading.observed_at_ms,
        })
    }
}

/// Runs a whole sequence through a fresh debouncer and returns
/// `(reading index, new state)` for every accepted transition.
pub fn debounce_trace(
    required: u32,
    statuses: &[BeamStatus],
) -> Result<Vec<(usize, BeamStatus)>, DebounceError> {
    let mut debouncer = Debouncer::new(required)?;
    Ok(statuses
        .iter()
        .enumerate()
        .filter_map(|(i, &status)| {
            debouncer
                .feed(BeamReading {
                    status,
                    observed_at_ms: i as u64,
                })
                .map(|t| (i, t.to))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use BeamStatus::{Clear as C, Obstructed as O};

    #[test]
    fn two_obstructed_after_clear_emit_once() {
        assert_eq!(debounce_trace(2, &[C, C, O, O]).unwrap(), vec![(3, O)]);
    }

    #[test]
    fn flicker_is_suppressed() {
        assert!(debounce_trace(2, &[C, O, C, O, C]).unwrap().is_empty());
    }

    #[test]
    fn steady_clear_emits_nothing() {
        assert!(debounce_trace(2, &[C; 50]).unwrap().is_empty());
    }

    #[test]
    fn count_one_triggers_on_single_reading() {
        assert_eq!(
            debounce_trace(1, &[C, O, O, C]).unwrap(),
            vec![(1, O), (3, C)]
        );
    }

    #[test]
    fn zero_count_rejected() {
        assert_eq!(Debouncer::new(0).unwrap_err(), DebounceError::ZeroCount);
    }

    #[test]
    fn tokens_are_case_sensitive() {
        assert_eq!("CLEAR".parse::<BeamStatus>().unwrap(), C);
        assert_eq!("OBSTRUCTED".parse::<BeamStatus>().unwrap(), O);
        assert!("obstructed".parse::<BeamStatus>().is_err());
    }
}
