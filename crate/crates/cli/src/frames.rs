//! Frame sequences from image directories or the built-in generators.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use async_sparse::events::synthetic::{self, FRAME_DT_US};
use async_sparse::events::FrameSequence;

const EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// `synthetic:<name>` or a directory of images read in file-name order.
///
/// Grey levels `v` map to intensity `(v + 1) / 256` so the log stays finite.
/// Timestamps come from `timestamps.txt` (one microsecond value per line) when
/// present, otherwise frames are 1 ms apart.
pub fn load(source: &str, width: usize, height: usize, num_frames: usize) -> Result<FrameSequence> {
    if let Some(name) = source.strip_prefix("synthetic:") {
        return synthetic::by_name(name, width, height, num_frames)
            .with_context(|| format!("unknown synthetic sequence {name:?} (expected ramp, disk or bar)"));
    }
    let dir = Path::new(source);
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading frame directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().and_then(|e| e.to_str()).is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    if paths.len() < 2 {
        bail!("{} holds {} frames, need at least 2", dir.display(), paths.len());
    }
    let mut frames = Vec::with_capacity(paths.len());
    let (mut w, mut h) = (0, 0);
    for p in &paths {
        let img = image::open(p).with_context(|| format!("decoding {}", p.display()))?.into_luma8();
        if frames.is_empty() {
            (w, h) = (img.width() as usize, img.height() as usize);
        } else if (img.width() as usize, img.height() as usize) != (w, h) {
            bail!("{} is {}x{}, expected {w}x{h}", p.display(), img.width(), img.height());
        }
        frames.push(img.pixels().map(|px| (px.0[0] as f64 + 1.0) / 256.0).collect());
    }
    let ts_path = dir.join("timestamps.txt");
    let timestamps = if ts_path.exists() {
        let text = fs::read_to_string(&ts_path)?;
        let ts: Vec<u64> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<u64>().with_context(|| format!("bad timestamp {l:?}")))
            .collect::<Result<_>>()?;
        if ts.len() != frames.len() {
            bail!("timestamps.txt has {} entries for {} frames", ts.len(), frames.len());
        }
        ts
    } else {
        (0..frames.len() as u64).map(|i| i * FRAME_DT_US).collect()
    };
    Ok(FrameSequence::new(w, h, frames, timestamps)?)
}
