mod common;

use std::sync::Arc;

use async_sparse::analysis::{flops_sparse_conv, Mode};
use async_sparse::engine::init_state;
use async_sparse::network::{Layer, LayerKind};
use async_sparse::sparse::sparse_forward;
use async_sparse::{ReprKind, SlidingWindowState};

use common::{check_stream, random_net, stream};

#[test]
fn histogram_matches_sync_per_event_f64() {
    for seed in 0..6 {
        let net = random_net::<f64>(seed, 16, 16, ReprKind::Histogram, 200);
        let events = stream(seed, 16, 16, 600);
        check_stream(net, &events, 100, 1, 1e-9, 1e-9).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn queue_matches_sync_per_event_f64() {
    for seed in 10..16 {
        let net = random_net::<f64>(seed, 16, 16, ReprKind::Queue, 150);
        let events = stream(seed, 16, 16, 500);
        check_stream(net, &events, 50, 1, 1e-9, 1e-9).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn matches_sync_per_event_f32() {
    for seed in 20..24 {
        let net = random_net::<f32>(seed, 16, 16, ReprKind::Histogram, 200);
        let events = stream(seed, 16, 16, 500);
        check_stream(net, &events, 100, 1, 1e-4, 1e-4).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn batched_updates_match_sync() {
    for seed in 30..34 {
        let net = random_net::<f64>(seed, 16, 16, ReprKind::Queue, 300);
        let events = stream(seed, 16, 16, 1200);
        check_stream(net, &events, 100, 37, 1e-9, 1e-9).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn starts_from_empty_window() {
    let net = random_net::<f64>(40, 16, 16, ReprKind::Histogram, 50);
    let events = stream(40, 16, 16, 300);
    assert_eq!(check_stream(net, &events, 0, 1, 1e-9, 1e-9).unwrap(), 300);
}

#[test]
fn async_rules_are_subset_of_sync() {
    let net = Arc::new(random_net::<f64>(3, 16, 16, ReprKind::Histogram, 200));
    let events = stream(2, 16, 16, 400);
    let mut window = SlidingWindowState::new(net.repr, 16, 16, 200).unwrap();
    window.push_batch(&events.events()[..200]).unwrap();
    let mut state = init_state(net.clone(), window.representation()).unwrap();
    for e in &events.events()[200..] {
        let u = window.push_event(*e).unwrap();
        state.process_event(&u).unwrap();
        let sync = sparse_forward(&net, window.representation()).unwrap();
        for (a, s) in state.last_trace().iter().zip(&sync.trace) {
            assert_eq!(a.mode, Some(Mode::Async));
            if a.kind == Some(LayerKind::Conv) {
                assert!(a.n_rules <= s.n_rules, "layer {}: {} > {}", a.layer, a.n_rules, s.n_rules);
                let Layer::Conv(c) = &net.layers[a.layer] else { unreachable!() };
                assert_eq!(a.counted, flops_sparse_conv(a.n_rules, c.c_in, c.c_out));
            }
            assert!(a.counted <= s.counted, "layer {}: async {} > sync {}", a.layer, a.counted, s.counted);
        }
    }
}

#[test]
fn resync_preserves_state() {
    let net = Arc::new(random_net::<f64>(5, 16, 16, ReprKind::Queue, 100));
    let events = stream(5, 16, 16, 300);
    let mut window = SlidingWindowState::new(net.repr, 16, 16, 100).unwrap();
    let mut state = init_state(net.clone(), window.representation()).unwrap();
    for e in events.events() {
        let u = window.push_event(*e).unwrap();
        state.process_event(&u).unwrap();
    }
    let before = state.output().to_vec();
    state.resync().unwrap();
    for (a, b) in before.iter().zip(state.output()) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn rejects_inconsistent_update() {
    let net = Arc::new(random_net::<f64>(6, 16, 16, ReprKind::Histogram, 100));
    let events = stream(6, 16, 16, 20);
    let mut window = SlidingWindowState::new(net.repr, 16, 16, 100).unwrap();
    let mut state = init_state(net.clone(), window.representation()).unwrap();
    let mut u = window.push_event(events.events()[0]).unwrap();
    u.sites[0].delta[0] += 1.0;
    assert!(state.process_event(&u).is_err());
}

#[test]
fn streams_exercise_activity_changes() {
    let net = Arc::new(random_net::<f64>(7, 16, 16, ReprKind::Histogram, 60));
    let events = stream(8, 16, 16, 600);
    let mut window = SlidingWindowState::new(net.repr, 16, 16, 60).unwrap();
    let mut state = init_state(net.clone(), window.representation()).unwrap();
    state.set_recording(true);
    let (mut na, mut ni, mut rules) = (0, 0, 0);
    for e in events.events() {
        let u = window.push_event(*e).unwrap();
        na += u.newly_active.len();
        ni += u.newly_inactive.len();
        state.process_event(&u).unwrap();
        rules += state.last_fronts().iter().map(|f| f.rules.len()).sum::<usize>();
    }
    assert!(na > 50 && ni > 50 && rules > 0, "na {na} ni {ni} rules {rules}");
    assert!(state.output().iter().any(|v| *v != 0.0));
}
