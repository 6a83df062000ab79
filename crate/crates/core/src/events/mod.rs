//! Event records, the plain-text event file format, and event synthesis from
//! brightness frames via the ideal sensor model.

mod generate;
mod io;
pub mod synthetic;

pub use generate::{generate_events, FrameSequence};
pub use io::{read_events, read_events_from, write_events, write_events_to};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::site::Site;

/// Brightness-change sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u32,
    pub y: u32,
    /// Microseconds.
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u32, y: u32, t: u64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }

    pub fn site(&self) -> Site {
        Site::new(self.x as i32, self.y as i32)
    }
}

/// A validated, time-ordered event sequence from a sensor of fixed resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    width: usize,
    height: usize,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates bounds and timestamp order.
    pub fn new(width: usize, height: usize, events: Vec<Event>) -> Result<Self, EventsError> {
        if width == 0 || height == 0 {
            return Err(EventsError::EmptySensor);
        }
        let mut last_t = 0;
        for (index, e) in events.iter().enumerate() {
            if e.x as usize >= width || e.y as usize >= height {
                return Err(EventsError::OutOfBounds { index, x: e.x, y: e.y });
            }
            if e.t < last_t {
                return Err(EventsError::NonMonotone { index, t: e.t, previous: last_t });
            }
            last_t = e.t;
        }
        Ok(Self { width, height, events })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

#[derive(Debug, Error)]
pub enum EventsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("record {index}: malformed record {line:?}")]
    MalformedRecord { index: usize, line: String },
    #[error("record {index}: event at ({x}, {y}) is outside the sensor")]
    OutOfBounds { index: usize, x: u32, y: u32 },
    #[error("record {index}: timestamp {t} precedes {previous}")]
    NonMonotone { index: usize, t: u64, previous: u64 },
    #[error("sensor resolution must be non-zero")]
    EmptySensor,
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {frame}: non-positive intensity {value} at ({x}, {y})")]
    NonPositiveIntensity { frame: usize, x: usize, y: usize, value: f64 },
    #[error("frame {frame}: timestamp {t} does not increase")]
    NonIncreasingTimestamp { frame: usize, t: u64 },
    #[error("frame {frame}: expected {expected} pixels, got {got}")]
    FrameShape { frame: usize, expected: usize, got: usize },
}
