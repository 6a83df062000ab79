//! Sparse recursive event representations (event histogram, event queue) and the
//! sliding window that keeps them current one event at a time.

mod snapshot;
mod window;

pub use snapshot::{read_snapshot, write_snapshot, Snapshot};
pub use window::{SiteUpdate, SlidingWindowState, SparseUpdate};

use std::collections::VecDeque;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::Event;
use crate::site::Site;

/// Events kept per pixel by the event queue.
pub const QUEUE_DEPTH: usize = 15;
/// Window size used unless configured otherwise.
pub const DEFAULT_WINDOW: usize = 25_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprKind {
    Histogram,
    Queue,
}

impl ReprKind {
    pub fn channels(self) -> usize {
        match self {
            ReprKind::Histogram => 2,
            ReprKind::Queue => 2 * QUEUE_DEPTH,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReprKind::Histogram => "histogram",
            ReprKind::Queue => "queue",
        }
    }
}

impl FromStr for ReprKind {
    type Err = ReprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "histogram" => Ok(ReprKind::Histogram),
            "queue" => Ok(ReprKind::Queue),
            other => Err(ReprError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReprError {
    #[error("unknown representation kind {0:?}")]
    UnknownKind(String),
    #[error("event {index} at {site} is outside the {width}x{height} grid")]
    OutOfBounds { index: usize, site: Site, width: usize, height: usize },
    #[error("event {index}: timestamp {t} precedes last buffered timestamp {last}")]
    TimestampRegression { index: usize, t: u64, last: u64 },
    #[error("window size must be positive")]
    EmptyWindow,
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense `height x width x channels` grid of event features, row-major `(y, x, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    kind: ReprKind,
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Representation {
    pub fn zeros(kind: ReprKind, width: usize, height: usize) -> Self {
        Self { kind, width, height, values: vec![0.0; width * height * kind.channels()] }
    }

    pub fn kind(&self) -> ReprKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.kind.channels()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Feature vector at an in-bounds site.
    pub fn at(&self, site: Site) -> &[f32] {
        let c = self.channels();
        let i = site.linear(self.width) * c;
        &self.values[i..i + c]
    }

    pub(crate) fn at_mut(&mut self, site: Site) -> &mut [f32] {
        let c = self.channels();
        let i = site.linear(self.width) * c;
        &mut self.values[i..i + c]
    }

    pub fn is_active(&self, site: Site) -> bool {
        self.at(site).iter().any(|&v| v != 0.0)
    }

    /// Sites with a non-zero feature vector, in row-major order.
    pub fn active_sites(&self) -> Vec<Site> {
        let mut out = Vec::new();
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let s = Site::new(x, y);
                if self.is_active(s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Same grid with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Builds a representation from explicit values; used by tests and snapshot loading.
    pub fn from_values(kind: ReprKind, width: usize, height: usize, values: Vec<f32>) -> Result<Self, ReprError> {
        if values.len() != width * height * kind.channels() {
            return Err(ReprError::Snapshot(format!(
                "expected {} values, got {}",
                width * height * kind.channels(),
                values.len()
            )));
        }
        Ok(Self { kind, width, height, values })
    }
}

/// Batch construction from an ordered event list (oldest first).
pub fn build(kind: ReprKind, events: &[Event], width: usize, height: usize) -> Result<Representation, ReprError> {
    let mut rep = Representation::zeros(kind, width, height);
    for (index, e) in events.iter().enumerate() {
        let site = e.site();
        if !site.in_bounds(width, height) {
            return Err(ReprError::OutOfBounds { index, site, width, height });
        }
    }
    match kind {
        ReprKind::Histogram => {
            for e in events {
                rep.at_mut(e.site())[histogram_channel(e)] += 1.0;
            }
        }
        ReprKind::Queue => {
            let mut queues: Vec<VecDeque<Event>> = vec![VecDeque::new(); width * height];
            for e in events {
                let q = &mut queues[e.site().linear(width)];
                q.push_front(*e);
                q.truncate(QUEUE_DEPTH);
            }
            for (i, q) in queues.iter().enumerate() {
                if !q.is_empty() {
                    let site = Site::new((i % width) as i32, (i / width) as i32);
                    encode_queue(q, rep.at_mut(site));
                }
            }
        }
    }
    Ok(rep)
}

pub(crate) fn histogram_channel(e: &Event) -> usize {
    match e.p {
        crate::events::Polarity::Positive => 0,
        crate::events::Polarity::Negative => 1,
    }
}

/// Writes one pixel's queue (newest first) into its 30 channels: ages in
/// `[0, 1]` relative to the pixel's newest event and scaled by the pixel's own
/// time span, then polarities as `+-1`. Empty slots stay zero.
pub(crate) fn encode_queue(queue: &VecDeque<Event>, out: &mut [f32]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let Some(newest) = queue.front() else { return };
    let oldest = queue.back().expect("non-empty");
    let span = (newest.t - oldest.t) as f64;
    for (slot, e) in queue.iter().enumerate() {
        out[slot] = if span > 0.0 { ((newest.t - e.t) as f64 / span) as f32 } else { 0.0 };
        out[QUEUE_DEPTH + slot] = e.p.sign() as f32;
    }
}
