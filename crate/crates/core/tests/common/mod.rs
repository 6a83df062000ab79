#![allow(dead_code)]

use std::sync::Arc;

use async_sparse::engine::{init_state, NetworkState};
use async_sparse::events::synthetic::{contour_stream, uniform_stream, ContourParams};
use async_sparse::model::{random_model, ArchitectureTemplate};
use async_sparse::sparse::sparse_forward;
use async_sparse::{EventStream, NetworkSpec, Real, ReprKind, SlidingWindowState};

pub fn random_net<T: Real>(seed: u64, width: usize, height: usize, repr: ReprKind, window: usize) -> NetworkSpec<T> {
    let t = ArchitectureTemplate::random(seed, width, height, repr).with_window(window);
    random_model(seed, &t).unwrap().cast()
}

pub fn stream(seed: u64, width: usize, height: usize, n: usize) -> EventStream {
    if seed % 2 == 0 {
        contour_stream(&ContourParams::new(width, height, n, seed))
    } else {
        uniform_stream(width, height, n, seed)
    }
}

/// Feeds `events` one at a time (or in batches) and checks every retained layer
/// against a fresh synchronous pass after each update. Returns the number of
/// updates checked.
pub fn check_stream<T: Real>(
    net: NetworkSpec<T>,
    events: &EventStream,
    warmup: usize,
    batch: usize,
    rel: f64,
    abs: f64,
) -> Result<usize, String> {
    let net = Arc::new(net);
    let mut window = SlidingWindowState::new(net.repr, net.input_width, net.input_height, net.window).unwrap();
    let (head, tail) = events.events().split_at(warmup.min(events.len()));
    window.push_batch(head).unwrap();
    let mut state: NetworkState<T> = init_state(net.clone(), window.representation()).unwrap();
    let mut checked = 0;
    for chunk in tail.chunks(batch) {
        let update = window.push_batch(chunk).unwrap();
        state.process_event(&update).map_err(|e| format!("update {checked}: {e}"))?;
        let fwd = sparse_forward(&net, window.representation()).unwrap();
        state.compare(&fwd, rel, abs).map_err(|e| format!("after update {checked}: {e}"))?;
        checked += 1;
    }
    Ok(checked)
}
