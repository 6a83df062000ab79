use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use super::{build, encode_queue, histogram_channel, ReprError, ReprKind, Representation, QUEUE_DEPTH};
use crate::events::Event;
use crate::site::Site;

/// Net change at one input site.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteUpdate {
    pub site: Site,
    /// Per-channel increments; `old + delta` reproduces `values` exactly in f64.
    pub delta: Vec<f64>,
    /// Post-update feature vector.
    pub values: Vec<f32>,
}

/// Sparse increments produced by pushing events into a [`SlidingWindowState`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseUpdate {
    pub sites: Vec<SiteUpdate>,
    pub newly_active: Vec<Site>,
    pub newly_inactive: Vec<Site>,
}

impl SparseUpdate {
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
struct PixelQueue {
    /// Window events at this pixel, including ones no longer shown.
    in_window: usize,
    recent: VecDeque<Event>,
}

/// The last `window` events and the representation built from exactly those.
#[derive(Clone, Debug)]
pub struct SlidingWindowState {
    window: usize,
    buffer: VecDeque<Event>,
    rep: Representation,
    queues: Vec<PixelQueue>,
}

impl SlidingWindowState {
    pub fn new(kind: ReprKind, width: usize, height: usize, window: usize) -> Result<Self, ReprError> {
        if window == 0 {
            return Err(ReprError::EmptyWindow);
        }
        let queues = match kind {
            ReprKind::Queue => vec![PixelQueue::default(); width * height],
            ReprKind::Histogram => Vec::new(),
        };
        Ok(Self {
            window,
            buffer: VecDeque::with_capacity(window.min(1 << 16)),
            rep: Representation::zeros(kind, width, height),
            queues,
        })
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn buffered(&self) -> impl ExactSizeIterator<Item = &Event> + '_ {
        self.buffer.iter()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Batch rebuild of the buffered events; always equal to [`Self::representation`].
    pub fn rebuild(&self) -> Representation {
        let events: Vec<Event> = self.buffer.iter().copied().collect();
        build(self.rep.kind(), &events, self.rep.width(), self.rep.height()).expect("buffered events are in bounds")
    }

    pub fn push_event(&mut self, e: Event) -> Result<SparseUpdate, ReprError> {
        self.push_batch(std::slice::from_ref(&e))
    }

    /// Pushes events in order and returns the coalesced net change.
    ///
    /// Events are validated before any state changes, so an error leaves the
    /// window untouched.
    pub fn push_batch(&mut self, events: &[Event]) -> Result<SparseUpdate, ReprError> {
        let (w, h) = (self.rep.width(), self.rep.height());
        let mut last = self.buffer.back().map_or(0, |e| e.t);
        for (index, e) in events.iter().enumerate() {
            let site = e.site();
            if !site.in_bounds(w, h) {
                return Err(ReprError::OutOfBounds { index, site, width: w, height: h });
            }
            if e.t < last {
                return Err(ReprError::TimestampRegression { index, t: e.t, last });
            }
            last = e.t;
        }

        // pre-batch feature vectors of every touched pixel, in first-touch order
        let mut before: FxHashMap<Site, usize> = FxHashMap::default();
        let mut touched: Vec<(Site, Vec<f32>)> = Vec::new();
        let mut remember = |rep: &Representation, site: Site| {
            before.entry(site).or_insert_with(|| {
                touched.push((site, rep.at(site).to_vec()));
                touched.len() - 1
            });
        };

        for &e in events {
            remember(&self.rep, e.site());
            self.insert(e);
            self.buffer.push_back(e);
            if self.buffer.len() > self.window {
                let old = self.buffer.pop_front().expect("non-empty");
                remember(&self.rep, old.site());
                self.evict(old);
            }
        }

        touched.sort_by_key(|(s, _)| *s);
        let mut update = SparseUpdate::default();
        for (site, old) in touched {
            let new = self.rep.at(site);
            if new == old.as_slice() {
                continue;
            }
            let was = old.iter().any(|&v| v != 0.0);
            let is = new.iter().any(|&v| v != 0.0);
            if !was && is {
                update.newly_active.push(site);
            } else if was && !is {
                update.newly_inactive.push(site);
            }
            update.sites.push(SiteUpdate {
                site,
                delta: new.iter().zip(&old).map(|(&n, &o)| n as f64 - o as f64).collect(),
                values: new.to_vec(),
            });
        }
        Ok(update)
    }

    fn insert(&mut self, e: Event) {
        let site = e.site();
        match self.rep.kind() {
            ReprKind::Histogram => self.rep.at_mut(site)[histogram_channel(&e)] += 1.0,
            ReprKind::Queue => {
                let q = &mut self.queues[site.linear(self.rep.width())];
                q.in_window += 1;
                q.recent.push_front(e);
                q.recent.truncate(QUEUE_DEPTH);
                encode_queue(&q.recent, self.rep.at_mut(site));
            }
        }
    }

    fn evict(&mut self, e: Event) {
        let site = e.site();
        match self.rep.kind() {
            ReprKind::Histogram => self.rep.at_mut(site)[histogram_channel(&e)] -= 1.0,
            ReprKind::Queue => {
                let q = &mut self.queues[site.linear(self.rep.width())];
                // the evicted event is this pixel's oldest; it is only displayed
                // while the pixel holds at most QUEUE_DEPTH window events
                if q.in_window <= QUEUE_DEPTH {
                    let dropped = q.recent.pop_back();
                    debug_assert_eq!(dropped, Some(e));
                }
                q.in_window -= 1;
                encode_queue(&q.recent, self.rep.at_mut(site));
            }
        }
    }
}
