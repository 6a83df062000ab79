use crate::network::{ConvLayer, FcLayer};
use crate::real::Real;
use crate::representation::Representation;
use crate::site::Site;

use super::{Rulebook, SparseError, SparseFeatureMap};

/// Pixels whose channel vector is not all zero.
pub fn compute_active_sites(rep: &Representation) -> Vec<Site> {
    rep.active_sites()
}

/// One rule's contribution: `acc += W_tap^T (new - old)`.
///
/// Costs `c_in` subtractions plus a multiply and an add per `(c_in, c_out)`
/// pair, i.e. `c_in * (2 c_out + 1)` operations; the return value is that count.
#[inline]
pub(crate) fn apply_rule<T: Real>(tap: &[T], c_out: usize, new: &[T], old: &[T], acc: &mut [T]) -> u64 {
    let c_in = new.len();
    for ci in 0..c_in {
        let d = new[ci] - old[ci];
        let w = &tap[ci * c_out..(ci + 1) * c_out];
        for (a, &wv) in acc.iter_mut().zip(w) {
            *a = *a + wv * d;
        }
    }
    (c_in * (2 * c_out + 1)) as u64
}

/// A rule applied from the all-zero state: `acc += W_tap^T new`. Rounds exactly
/// like [`apply_rule`] with a zero `old` and is counted the same way.
#[inline]
pub(crate) fn apply_fresh<T: Real>(tap: &[T], c_out: usize, new: &[T], acc: &mut [T]) -> u64 {
    for (ci, &d) in new.iter().enumerate() {
        let w = &tap[ci * c_out..(ci + 1) * c_out];
        for (a, &wv) in acc.iter_mut().zip(w) {
            *a = *a + wv * d;
        }
    }
    (new.len() * (2 * c_out + 1)) as u64
}

/// Submanifold sparse convolution: outputs exist exactly at the input's active
/// sites, each the bias plus the weighted sum over its rules.
///
/// Each rule is applied as an increment from the all-zero state, which is the
/// same kernel the asynchronous engine uses. `ops` receives the operation count.
pub fn ssc_forward<T: Real>(
    input: &SparseFeatureMap<T>,
    layer: &ConvLayer<T>,
    rb: &Rulebook,
    ops: &mut u64,
) -> Result<SparseFeatureMap<T>, SparseError> {
    if input.channels() != layer.c_in {
        return Err(SparseError::ChannelMismatch { expected: layer.c_in, got: input.channels() });
    }
    if rb.kernel() != layer.kernel {
        return Err(SparseError::KernelMismatch { rulebook: rb.kernel(), layer: layer.kernel });
    }
    let mut out = SparseFeatureMap::with_capacity(input.width(), input.height(), layer.c_out, input.len());
    let mut acc = vec![T::zero(); layer.c_out];
    let mut act = vec![T::zero(); layer.c_out];
    for &j in input.sites() {
        acc.copy_from_slice(&layer.bias);
        for tap in rb.taps(j) {
            let i = j.offset(rb.offsets()[tap]);
            let Some(ri) = input.row(i) else {
                return Err(SparseError::StaleRulebook { input: i, output: j });
            };
            *ops += apply_fresh(layer.tap(tap), layer.c_out, input.act_row(ri), &mut acc);
        }
        for (a, &p) in act.iter_mut().zip(&acc) {
            *a = layer.activation.apply(p);
        }
        out.insert(j, &acc, &act);
    }
    Ok(out)
}

/// Max pooling over active sites only; an output is active iff its window holds
/// an active input. `ops` receives `N_a * c * k^2` comparisons.
pub fn sparse_maxpool<T: Real>(input: &SparseFeatureMap<T>, k: usize, ops: &mut u64) -> SparseFeatureMap<T> {
    let c = input.channels();
    let mut out = SparseFeatureMap::new(input.width() / k, input.height() / k, c);
    let mut windows: Vec<Site> = input.sites().iter().map(|s| s.pooled(k)).collect();
    windows.sort_unstable();
    windows.dedup();
    let mut best = vec![T::zero(); c];
    for w in windows {
        pool_window(input, w, k, &mut best);
        out.insert(w, &best, &best);
    }
    *ops += (out.len() * c * k * k) as u64;
    out
}

/// Max over the active inputs of window `w`. Returns false if none is active.
pub(crate) fn pool_window<T: Real>(input: &SparseFeatureMap<T>, w: Site, k: usize, best: &mut [T]) -> bool {
    let mut any = false;
    let k = k as i32;
    for dy in 0..k {
        for dx in 0..k {
            let s = Site::new(w.x * k + dx, w.y * k + dy);
            if let Some(v) = input.act_at(s) {
                if any {
                    for (b, &x) in best.iter_mut().zip(v) {
                        *b = b.max(x);
                    }
                } else {
                    best.copy_from_slice(v);
                    any = true;
                }
            }
        }
    }
    if !any {
        best.iter_mut().for_each(|b| *b = T::zero());
    }
    any
}

/// Elementwise ReLU at active sites; the active set is unchanged.
pub fn relu_forward<T: Real>(input: &SparseFeatureMap<T>, ops: &mut u64) -> SparseFeatureMap<T> {
    let c = input.channels();
    let mut out = SparseFeatureMap::with_capacity(input.width(), input.height(), c, input.len());
    let mut act = vec![T::zero(); c];
    for &site in input.sites() {
        let pre = input.act_at(site).expect("active");
        for (a, &p) in act.iter_mut().zip(pre) {
            *a = p.max(T::zero());
        }
        out.insert(site, pre, &act);
    }
    *ops += (out.len() * c) as u64;
    out
}

/// Flattens `(y, x, c)` with zeros at inactive sites.
pub fn flatten<T: Real>(input: &SparseFeatureMap<T>) -> Vec<T> {
    input.to_dense()
}

/// `W * flatten(input) + b`; costs `2 c_in c_out` operations.
pub fn fc_forward<T: Real>(input: &SparseFeatureMap<T>, layer: &FcLayer<T>, ops: &mut u64) -> Result<Vec<T>, SparseError> {
    let x = flatten(input);
    if x.len() != layer.c_in {
        return Err(SparseError::ChannelMismatch { expected: layer.c_in, got: x.len() });
    }
    Ok(fc_dense(&x, layer, ops))
}

pub(crate) fn fc_dense<T: Real>(x: &[T], layer: &FcLayer<T>, ops: &mut u64) -> Vec<T> {
    let out = (0..layer.c_out)
        .map(|o| {
            let row = &layer.weights[o * layer.c_in..(o + 1) * layer.c_in];
            row.iter().zip(x).fold(layer.bias[o], |acc, (&w, &v)| acc + w * v)
        })
        .collect();
    *ops += (2 * layer.c_in * layer.c_out) as u64;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;
    use crate::sparse::build_rulebook;

    fn conv(k: usize, c_in: usize, c_out: usize, w: f64, b: f64, act: Activation) -> ConvLayer<f64> {
        ConvLayer {
            kernel: k,
            c_in,
            c_out,
            weights: vec![w; k * k * c_in * c_out],
            bias: vec![b; c_out],
            activation: act,
        }
    }

    fn map_of(sites: &[(Site, Vec<f64>)], w: usize, h: usize, c: usize) -> SparseFeatureMap<f64> {
        let mut m = SparseFeatureMap::new(w, h, c);
        for (s, v) in sites {
            m.insert(*s, v, v);
        }
        m
    }

    #[test]
    fn single_site_ones_kernel() {
        let s = Site::new(2, 2);
        let m = map_of(&[(s, vec![1.0])], 5, 5, 1);
        let rb = build_rulebook(&[s], 3, 5, 5);
        let mut ops = 0;
        let out = ssc_forward(&m, &conv(3, 1, 1, 1.0, 0.0, Activation::Identity), &rb, &mut ops).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.act_at(s), Some(&[1.0][..]));
        assert_eq!(ops, 3); // N_r=1, c_in=1, c_out=1
    }

    #[test]
    fn zero_weights_bias_only_at_active_sites() {
        let sites = [Site::new(0, 0), Site::new(3, 1)];
        let m = map_of(&[(sites[0], vec![2.0, 1.0]), (sites[1], vec![-1.0, 4.0])], 4, 4, 2);
        let rb = build_rulebook(&sites, 3, 4, 4);
        for beta in [0.7, -0.7] {
            let out = ssc_forward(&m, &conv(3, 2, 3, 0.0, beta, Activation::Relu), &rb, &mut 0).unwrap();
            assert_eq!(out.sorted_sites(), sites.to_vec());
            for s in sites {
                assert!(out.act_at(s).unwrap().iter().all(|&v| v == f64::max(beta, 0.0)));
            }
            assert_eq!(out.act_at(Site::new(1, 1)), None);
        }
    }

    #[test]
    fn channel_mismatch() {
        let m = map_of(&[(Site::new(0, 0), vec![1.0])], 2, 2, 1);
        let rb = build_rulebook(&[Site::new(0, 0)], 3, 2, 2);
        let err = ssc_forward(&m, &conv(3, 2, 1, 1.0, 0.0, Activation::Identity), &rb, &mut 0);
        assert!(matches!(err, Err(SparseError::ChannelMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn pooling_over_active_sites_only() {
        let m = map_of(
            &[(Site::new(0, 0), vec![-3.0]), (Site::new(1, 1), vec![-1.0]), (Site::new(2, 0), vec![5.0])],
            4,
            2,
            1,
        );
        let mut ops = 0;
        let out = sparse_maxpool(&m, 2, &mut ops);
        assert_eq!((out.width(), out.height()), (2, 1));
        assert_eq!(out.act_at(Site::new(0, 0)), Some(&[-1.0][..]));
        assert_eq!(out.act_at(Site::new(1, 0)), Some(&[5.0][..]));
        assert_eq!(ops, 2 * 4);

        let empty = sparse_maxpool(&map_of(&[], 4, 4, 1), 2, &mut 0);
        assert!(empty.is_empty());
    }

    #[test]
    fn fc_zero_input_gives_bias() {
        let layer = FcLayer { c_in: 8, c_out: 2, weights: vec![0.3; 16], bias: vec![1.5, -2.0] };
        let m = map_of(&[], 2, 2, 2);
        let mut ops = 0;
        assert_eq!(fc_forward(&m, &layer, &mut ops).unwrap(), vec![1.5, -2.0]);
        assert_eq!(ops, 32);
    }

    #[test]
    fn fc_identity_copies_site_features() {
        let n = 2 * 2 * 3;
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 1.0;
        }
        let layer = FcLayer { c_in: n, c_out: n, weights, bias: vec![0.0; n] };
        let m = map_of(&[(Site::new(1, 1), vec![7.0, 8.0, 9.0])], 2, 2, 3);
        let out = fc_forward(&m, &layer, &mut 0).unwrap();
        let mut expect = vec![0.0; n];
        expect[9..12].copy_from_slice(&[7.0, 8.0, 9.0]);
        assert_eq!(out, expect);
        let bad = FcLayer { c_in: 5, c_out: 1, weights: vec![0.0; 5], bias: vec![0.0] };
        assert!(fc_forward(&m, &bad, &mut 0).is_err());
    }
}
