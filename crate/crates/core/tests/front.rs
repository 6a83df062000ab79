use async_sparse::engine::{propagate_direct, UpdateFront};
use async_sparse::Site;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

/// Random scene: active set, newly active subset, newly inactive set and the
/// changed sites that seed the front.
fn scene(rng: &mut ChaCha8Rng) -> (usize, FxHashSet<Site>, FxHashSet<Site>, FxHashSet<Site>, Vec<Site>) {
    let side = rng.gen_range(4..20);
    let density = rng.gen_range(0.05..0.9);
    let mut active = FxHashSet::default();
    let mut ni = FxHashSet::default();
    for y in 0..side as i32 {
        for x in 0..side as i32 {
            let s = Site::new(x, y);
            if rng.gen_bool(density) {
                active.insert(s);
            } else if rng.gen_bool(0.05) {
                ni.insert(s);
            }
        }
    }
    let na: FxHashSet<Site> = active.iter().copied().filter(|_| rng.gen_bool(0.05)).collect();
    let mut changed: Vec<Site> = na.iter().chain(&ni).copied().collect();
    let pool: Vec<Site> = active.iter().copied().collect();
    for _ in 0..rng.gen_range(0..4) {
        if !pool.is_empty() {
            changed.push(pool[rng.gen_range(0..pool.len())]);
        }
    }
    if changed.is_empty() {
        changed.push(Site::new(rng.gen_range(0..side as i32), rng.gen_range(0..side as i32)));
    }
    changed.sort_unstable();
    changed.dedup();
    (side, active, na, ni, changed)
}

#[test]
fn frontier_equals_direct_on_random_fronts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..2000 {
        let (_, active, na, ni, changed) = scene(&mut rng);
        let is_active = |s: Site| active.contains(&s);
        let mut front = UpdateFront::new(&changed, is_active, na.clone(), ni.clone());
        let mut field = front.receptive_field();
        assert!(field.iter().all(|s| active.contains(s) || ni.contains(s)));
        for step in 0..rng.gen_range(1..5) {
            let k = [1, 3, 3, 5][rng.gen_range(0..4)];
            front.propagate(k, is_active);
            let (next, rules) = propagate_direct(&field, k, is_active, &na, &ni);
            let mut got = front.rules().to_vec();
            got.sort_unstable();
            assert_eq!(front.receptive_field(), next, "case {case} step {step}: field");
            assert_eq!(got, rules, "case {case} step {step}: rules");
            field = next;
        }
    }
}

#[test]
fn field_grows_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let (_, active, na, ni, changed) = scene(&mut rng);
        let mut front = UpdateFront::new(&changed, |s| active.contains(&s), na, ni);
        let mut prev = front.receptive_field();
        for _ in 0..4 {
            front.propagate(3, |s| active.contains(&s));
            let cur = front.receptive_field();
            assert!(prev.iter().all(|s| cur.binary_search(s).is_ok()));
            prev = cur;
        }
    }
}
