use super::{Event, EventStream, EventsError, Polarity};

/// Brightness frames sampled at strictly increasing timestamps (microseconds).
/// Each frame is row-major, `width * height` positive intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<f64>>,
    pub timestamps: Vec<u64>,
}

impl FrameSequence {
    pub fn new(width: usize, height: usize, frames: Vec<Vec<f64>>, timestamps: Vec<u64>) -> Result<Self, EventsError> {
        let seq = Self { width, height, frames, timestamps };
        seq.validate()?;
        Ok(seq)
    }

    fn validate(&self) -> Result<(), EventsError> {
        if self.width == 0 || self.height == 0 {
            return Err(EventsError::EmptySensor);
        }
        if self.frames.len() != self.timestamps.len() {
            return Err(EventsError::FrameShape {
                frame: self.frames.len().min(self.timestamps.len()),
                expected: self.frames.len(),
                got: self.timestamps.len(),
            });
        }
        let n = self.width * self.height;
        for (frame, data) in self.frames.iter().enumerate() {
            if data.len() != n {
                return Err(EventsError::FrameShape { frame, expected: n, got: data.len() });
            }
            if let Some(i) = data.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(EventsError::NonPositiveIntensity {
                    frame,
                    x: i % self.width,
                    y: i / self.width,
                    value: data[i],
                });
            }
        }
        for (frame, w) in self.timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(EventsError::NonIncreasingTimestamp { frame: frame + 1, t: w[1] });
            }
        }
        Ok(())
    }
}

// Absorbs rounding when the log-brightness change is an exact multiple of the threshold.
const CROSSING_SLACK: f64 = 1e-9;

/// Ideal event sensor: each pixel keeps a reference log-brightness and fires one
/// event per threshold crossing, advancing the reference by `p * threshold`.
///
/// All crossings between two frames are stamped with the later frame's time.
/// Output is ordered by `t`, ties by `(y, x, p)`.
pub fn generate_events(seq: &FrameSequence, threshold: f64) -> Result<EventStream, EventsError> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(EventsError::BadThreshold(threshold));
    }
    seq.validate()?;
    if seq.frames.len() < 2 {
        return Err(EventsError::TooFewFrames(seq.frames.len()));
    }

    let base: Vec<f64> = seq.frames[0].iter().map(|v| v.ln()).collect();
    // reference = base + level * threshold; integer levels keep the reference drift-free
    let mut level = vec![0i64; base.len()];
    let mut events = Vec::new();

    for (frame, t) in seq.frames.iter().zip(&seq.timestamps).skip(1) {
        for (i, &v) in frame.iter().enumerate() {
            let log_i = v.ln();
            let (x, y) = ((i % seq.width) as u32, (i / seq.width) as u32);
            loop {
                let diff = log_i - (base[i] + level[i] as f64 * threshold);
                if diff.abs() < threshold * (1.0 - CROSSING_SLACK) {
                    break;
                }
                let p = if diff > 0.0 { Polarity::Positive } else { Polarity::Negative };
                level[i] += p.sign() as i64;
                events.push(Event::new(x, y, *t, p));
            }
        }
    }
    events.sort_by_key(|e| (e.t, e.y, e.x, e.p));
    EventStream::new(seq.width, seq.height, events)
}
