mod common;

use async_sparse::network::{Activation, ConvLayer};
use async_sparse::sparse::{build_rulebook, dense_conv, dense_forward, sparse_forward, ssc_forward, DenseMap, DenseSemantics, SparseFeatureMap};
use async_sparse::{ReprKind, Representation, SlidingWindowState, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_net, stream};

fn random_layer(rng: &mut ChaCha8Rng, c_in: usize) -> ConvLayer<f64> {
    let kernel = [1, 3, 5][rng.gen_range(0..3)];
    let c_out = rng.gen_range(1..6);
    ConvLayer {
        kernel,
        c_in,
        c_out,
        weights: (0..kernel * kernel * c_in * c_out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        bias: (0..c_out).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        activation: if rng.gen() { Activation::Relu } else { Activation::Identity },
    }
}

fn random_input(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Representation {
    let c = 2;
    let density = rng.gen_range(0.02..0.6);
    let mut values = vec![0.0f32; w * h * c];
    for px in values.chunks_mut(c) {
        if rng.gen_bool(density) {
            for v in px.iter_mut() {
                *v = rng.gen_range(-3.0..3.0);
            }
        }
    }
    Representation::from_values(ReprKind::Histogram, w, h, values).unwrap()
}

#[test]
fn ssc_matches_dense_at_active_sites() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..300 {
        let (w, h) = (rng.gen_range(3..20), rng.gen_range(3..20));
        let rep = random_input(&mut rng, w, h);
        let layer = random_layer(&mut rng, 2);
        let input = SparseFeatureMap::<f64>::from_representation(&rep);
        let rb = build_rulebook(&rep.active_sites(), layer.kernel, w, h);
        let mut ops = 0;
        let sparse = ssc_forward(&input, &layer, &rb, &mut ops).unwrap();
        let dense = dense_conv(&DenseMap::from_representation(&rep, DenseSemantics::Standard), &layer, &mut ops).unwrap();
        assert_eq!(sparse.len(), rep.active_sites().len());
        for &s in sparse.sites() {
            let a = sparse.act_at(s).unwrap();
            let b = dense.at(s.x as usize, s.y as usize);
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0), "case {case} at {s}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn inactive_outputs_stay_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rep = random_input(&mut rng, 10, 10);
    let layer = random_layer(&mut rng, 2);
    let rb = build_rulebook(&rep.active_sites(), layer.kernel, 10, 10);
    let out = ssc_forward(&SparseFeatureMap::<f64>::from_representation(&rep), &layer, &rb, &mut 0).unwrap();
    for y in 0..10 {
        for x in 0..10 {
            let s = Site::new(x, y);
            assert_eq!(out.contains(s), rep.is_active(s));
        }
    }
}

#[test]
fn network_matches_masked_dense() {
    for seed in 0..10 {
        let net = random_net::<f64>(seed, 16, 16, ReprKind::Queue, 300);
        let events = stream(seed, 16, 16, 300);
        let mut win = SlidingWindowState::new(net.repr, 16, 16, 300).unwrap();
        win.push_batch(events.events()).unwrap();
        let rep = win.representation();
        let sparse = sparse_forward(&net, rep).unwrap();
        let dense = dense_forward(&net, rep, DenseSemantics::Submanifold).unwrap();
        for (n, (s, d)) in sparse.maps.iter().zip(&dense.maps).enumerate() {
            for y in 0..d.height {
                for x in 0..d.width {
                    let site = Site::new(x as i32, y as i32);
                    assert_eq!(s.contains(site), d.is_active(x, y), "seed {seed} layer {n} at {site}");
                    let zero = vec![0.0; d.channels];
                    let a = s.act_at(site).unwrap_or(&zero);
                    for (p, q) in a.iter().zip(d.at(x, y)) {
                        assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0), "seed {seed} layer {n} at {site}: {p} vs {q}");
                    }
                }
            }
        }
        for (a, b) in sparse.output.iter().zip(&dense.output) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}

#[test]
fn first_layer_matches_standard_dense() {
    for seed in 0..5 {
        let net = random_net::<f64>(seed, 16, 16, ReprKind::Histogram, 200);
        let events = stream(seed, 16, 16, 200);
        let mut win = SlidingWindowState::new(net.repr, 16, 16, 200).unwrap();
        win.push_batch(events.events()).unwrap();
        let rep = win.representation();
        let sparse = sparse_forward(&net, rep).unwrap();
        let dense = dense_forward(&net, rep, DenseSemantics::Standard).unwrap();
        let (s, d) = (&sparse.maps[0], &dense.maps[0]);
        for &site in s.sites() {
            for (p, q) in s.act_at(site).unwrap().iter().zip(d.at(site.x as usize, site.y as usize)) {
                assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0));
            }
        }
    }
}
