//! Synthetic brightness sequences and edge-like event streams for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Event, EventStream, FrameSequence, Polarity};

/// Frame interval used by the synthetic sequences, in microseconds.
pub const FRAME_DT_US: u64 = 1000;

/// Every pixel brightens exponentially, faster towards the right edge.
pub fn ramp(width: usize, height: usize, num_frames: usize) -> FrameSequence {
    let frames = (0..num_frames)
        .map(|f| {
            (0..width * height)
                .map(|i| {
                    let x = (i % width) as f64 / width as f64;
                    (0.05 * f as f64 * (1.0 + x)).exp()
                })
                .collect()
        })
        .collect();
    sequence(width, height, frames)
}

/// A bright disk sliding diagonally over a dark background; events fire along its contour.
pub fn moving_disk(width: usize, height: usize, num_frames: usize) -> FrameSequence {
    let radius = width.min(height) as f64 * 0.25;
    let frames = (0..num_frames)
        .map(|f| {
            let s = f as f64 / num_frames.max(2) as f64;
            let cx = radius + s * (width as f64 - 2.0 * radius);
            let cy = radius + s * (height as f64 - 2.0 * radius);
            render(width, height, |x, y| {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                smoothstep(radius - d)
            })
        })
        .collect();
    sequence(width, height, frames)
}

/// A vertical bright bar sweeping left to right.
pub fn moving_bar(width: usize, height: usize, num_frames: usize) -> FrameSequence {
    let half = (width as f64 * 0.08).max(1.0);
    let frames = (0..num_frames)
        .map(|f| {
            let cx = f as f64 / num_frames.max(2) as f64 * width as f64;
            render(width, height, |x, _| smoothstep(half - (x - cx).abs()))
        })
        .collect();
    sequence(width, height, frames)
}

/// Looks up a named sequence (`ramp`, `disk`, `bar`).
pub fn by_name(name: &str, width: usize, height: usize, num_frames: usize) -> Option<FrameSequence> {
    match name {
        "ramp" => Some(ramp(width, height, num_frames)),
        "disk" => Some(moving_disk(width, height, num_frames)),
        "bar" => Some(moving_bar(width, height, num_frames)),
        _ => None,
    }
}

fn smoothstep(v: f64) -> f64 {
    // 0.1 background, 1.0 foreground, ~1 pixel ramp
    0.1 + 0.9 / (1.0 + (-2.0 * v).exp())
}

fn render(width: usize, height: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            out.push(f(x as f64 + 0.5, y as f64 + 0.5));
        }
    }
    out
}

fn sequence(width: usize, height: usize, frames: Vec<Vec<f64>>) -> FrameSequence {
    let ts = (0..frames.len() as u64).map(|f| f * FRAME_DT_US).collect();
    FrameSequence::new(width, height, frames, ts).expect("synthetic frames are valid")
}

/// Parameters for [`contour_stream`].
#[derive(Clone, Debug)]
pub struct ContourParams {
    pub width: usize,
    pub height: usize,
    pub num_events: usize,
    /// Contour radius as a fraction of the shorter sensor side.
    pub radius: f64,
    /// Pixels travelled by the contour centre per event.
    pub speed: f64,
    /// Fraction of events placed uniformly at random.
    pub noise: f64,
    pub seed: u64,
}

impl ContourParams {
    pub fn new(width: usize, height: usize, num_events: usize, seed: u64) -> Self {
        Self { width, height, num_events, radius: 0.3, speed: 0.01, noise: 0.02, seed }
    }
}

/// Edge-like stream: a circle contour drifting on a Lissajous path, with events
/// sampled on the contour (leading half positive, trailing half negative) plus
/// sparse uniform noise. Timestamps advance by 1-3 microseconds per event.
pub fn contour_stream(p: &ContourParams) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (w, h) = (p.width as f64, p.height as f64);
    let radius = (w.min(h) * p.radius).max(1.0);
    let mut t = 0u64;
    let mut phase = 0.0f64;
    let mut events = Vec::with_capacity(p.num_events);
    let amp_x = (w / 2.0 - radius - 1.0).max(0.0);
    let amp_y = (h / 2.0 - radius - 1.0).max(0.0);
    let centre = |ph: f64| (w / 2.0 + amp_x * ph.sin(), h / 2.0 + amp_y * (0.7 * ph).sin());
    while events.len() < p.num_events {
        t += rng.gen_range(1..=3);
        let (x, y, pol) = if rng.gen::<f64>() < p.noise {
            let pol = if rng.gen() { Polarity::Positive } else { Polarity::Negative };
            (rng.gen_range(0.0..w), rng.gen_range(0.0..h), pol)
        } else {
            let (cx, cy) = centre(phase);
            let (nx, ny) = centre(phase + 1e-3);
            let (vx, vy) = (nx - cx, ny - cy);
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let (ux, uy) = (a.cos(), a.sin());
            let pol = if ux * vx + uy * vy >= 0.0 { Polarity::Positive } else { Polarity::Negative };
            (cx + radius * ux, cy + radius * uy, pol)
        };
        phase += p.speed / radius.max(1.0);
        let (xi, yi) = (x.floor(), y.floor());
        if xi < 0.0 || yi < 0.0 || xi >= w || yi >= h {
            continue;
        }
        events.push(Event::new(xi as u32, yi as u32, t, pol));
    }
    EventStream::new(p.width, p.height, events).expect("synthetic events are valid")
}

/// Uniform random events, for stress tests without spatial structure.
pub fn uniform_stream(width: usize, height: usize, num_events: usize, seed: u64) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0;
    let events = (0..num_events)
        .map(|_| {
            t += rng.gen_range(0..3);
            let p = if rng.gen() { Polarity::Positive } else { Polarity::Negative };
            Event::new(rng.gen_range(0..width as u32), rng.gen_range(0..height as u32), t, p)
        })
        .collect();
    EventStream::new(width, height, events).expect("synthetic events are valid")
}
