//! Textbook dense inference, used as an oracle and as the "standard convolution"
//! comparison mode.

use crate::analysis::{LayerTrace, Mode};
use crate::network::{ConvLayer, Layer, NetworkSpec};
use crate::real::Real;
use crate::representation::Representation;
use crate::site::offsets;

use super::{fc_dense, SparseError};

/// How the dense engine treats inactive sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenseSemantics {
    /// Regular same-padded convolution and max pooling over every value.
    Standard,
    /// Dense arithmetic, but outputs at inactive sites are forced to zero and
    /// pooling only looks at active inputs. Mirrors the sparse engine exactly.
    Submanifold,
}

/// Dense `(y, x, c)` grid with an optional active mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMap<T> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pre: Vec<T>,
    pub act: Vec<T>,
    pub mask: Option<Vec<bool>>,
}

impl<T: Real> DenseMap<T> {
    pub fn from_representation(rep: &Representation, semantics: DenseSemantics) -> Self {
        let act: Vec<T> = rep.values().iter().map(|&v| T::from_f32(v)).collect();
        let mask = match semantics {
            DenseSemantics::Standard => None,
            DenseSemantics::Submanifold => {
                let c = rep.channels();
                Some(act.chunks(c).map(|px| px.iter().any(|v| *v != T::zero())).collect())
            }
        };
        Self { width: rep.width(), height: rep.height(), channels: rep.channels(), pre: act.clone(), act, mask }
    }

    pub fn at(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.act[i..i + self.channels]
    }

    pub fn pre_at(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.pre[i..i + self.channels]
    }

    pub fn is_active(&self, x: usize, y: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[y * self.width + x])
    }
}

/// Same-padded dense convolution; counts `H W c_out (2 k^2 c_in - 1)` operations
/// (the bias add is not counted). Padding taps are multiplied like any other.
pub fn dense_conv<T: Real>(input: &DenseMap<T>, layer: &ConvLayer<T>, ops: &mut u64) -> Result<DenseMap<T>, SparseError> {
    if input.channels != layer.c_in {
        return Err(SparseError::ChannelMismatch { expected: layer.c_in, got: input.channels });
    }
    let (w, h, c_in, c_out) = (input.width, input.height, layer.c_in, layer.c_out);
    let offs = offsets(layer.kernel);
    let mut pre = vec![T::zero(); w * h * c_out];
    let mut act = vec![T::zero(); w * h * c_out];
    let mut acc = vec![T::zero(); c_out];
    let zeros = vec![T::zero(); c_in];
    let mut count = 0u64;
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            // accumulate from the bias in tap order, like the sparse kernels, so both
            // paths round identically; the first product still counts as no add
            acc.copy_from_slice(&layer.bias);
            let mut first = true;
            for (tap, off) in offs.iter().enumerate() {
                let (sx, sy) = (x + off.dx, y + off.dy);
                let v = if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                    input.at(sx as usize, sy as usize)
                } else {
                    &zeros[..]
                };
                let wt = layer.tap(tap);
                for ci in 0..c_in {
                    let row = &wt[ci * c_out..(ci + 1) * c_out];
                    for (a, &wv) in acc.iter_mut().zip(row) {
                        *a = *a + wv * v[ci];
                    }
                    count += if first { c_out as u64 } else { 2 * c_out as u64 };
                    first = false;
                }
            }
            let i = (y as usize * w + x as usize) * c_out;
            let active = input.is_active(x as usize, y as usize);
            for co in 0..c_out {
                if active {
                    let p = acc[co];
                    pre[i + co] = p;
                    act[i + co] = layer.activation.apply(p);
                }
            }
        }
    }
    *ops += count;
    Ok(DenseMap { width: w, height: h, channels: c_out, pre, act, mask: input.mask.clone() })
}

fn dense_pool<T: Real>(input: &DenseMap<T>, k: usize, ops: &mut u64) -> DenseMap<T> {
    let (w, h, c) = (input.width / k, input.height / k, input.channels);
    let mut act = vec![T::zero(); w * h * c];
    let mut mask = input.mask.as_ref().map(|_| vec![false; w * h]);
    for y in 0..h {
        for x in 0..w {
            let out = &mut act[(y * w + x) * c..(y * w + x + 1) * c];
            let mut any = false;
            for dy in 0..k {
                for dx in 0..k {
                    let (sx, sy) = (x * k + dx, y * k + dy);
                    if !input.is_active(sx, sy) {
                        continue;
                    }
                    let v = input.at(sx, sy);
                    if any {
                        for (o, &vv) in out.iter_mut().zip(v) {
                            *o = o.max(vv);
                        }
                    } else {
                        out.copy_from_slice(v);
                        any = true;
                    }
                }
            }
            if let Some(m) = mask.as_mut() {
                m[y * w + x] = any;
            }
        }
    }
    *ops += (w * h * c * k * k) as u64;
    DenseMap { width: w, height: h, channels: c, pre: act.clone(), act, mask }
}

fn dense_relu<T: Real>(input: &DenseMap<T>, ops: &mut u64) -> DenseMap<T> {
    let act = input.act.iter().map(|v| v.max(T::zero())).collect();
    *ops += input.act.len() as u64;
    DenseMap { pre: input.act.clone(), act, ..input.clone() }
}

#[derive(Clone, Debug)]
pub struct DenseForward<T> {
    pub input: DenseMap<T>,
    pub maps: Vec<DenseMap<T>>,
    pub output: Vec<T>,
    pub trace: Vec<LayerTrace>,
}

pub fn dense_forward<T: Real>(
    net: &NetworkSpec<T>,
    rep: &Representation,
    semantics: DenseSemantics,
) -> Result<DenseForward<T>, SparseError> {
    net.validate()?;
    net.check_input(rep.width(), rep.height(), rep.channels())?;
    let input = DenseMap::from_representation(rep, semantics);
    let mut maps: Vec<DenseMap<T>> = Vec::new();
    let mut trace = Vec::new();
    let mut output = Vec::new();
    for (n, layer) in net.layers.iter().enumerate() {
        let cur = maps.last().unwrap_or(&input);
        let mut t = LayerTrace::new(n, layer.kind(), Mode::Dense);
        t.w_out = cur.width;
        t.h_out = cur.height;
        t.c_in = cur.channels;
        t.c_out = cur.channels;
        match layer {
            Layer::Conv(conv) => {
                let out = dense_conv(cur, conv, &mut t.counted)?;
                t.c_out = conv.c_out;
                t.k = conv.kernel;
                maps.push(out);
            }
            Layer::MaxPool { kernel } => {
                let out = dense_pool(cur, *kernel, &mut t.counted);
                t.w_out = out.width;
                t.h_out = out.height;
                t.k = *kernel;
                maps.push(out);
            }
            Layer::Relu => {
                let out = dense_relu(cur, &mut t.counted);
                maps.push(out);
            }
            Layer::Fc(fc) => {
                if cur.act.len() != fc.c_in {
                    return Err(SparseError::ChannelMismatch { expected: fc.c_in, got: cur.act.len() });
                }
                output = fc_dense(&cur.act, fc, &mut t.counted);
                t.w_out = 1;
                t.h_out = 1;
                t.c_in = fc.c_in;
                t.c_out = fc.c_out;
            }
        }
        trace.push(t);
    }
    Ok(DenseForward { input, maps, output, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;
    use crate::representation::ReprKind;

    #[test]
    fn one_pixel_input_uses_centre_weight() {
        let rep = Representation::from_values(ReprKind::Histogram, 1, 1, vec![2.0, 3.0]).unwrap();
        let mut input = DenseMap::<f64>::from_representation(&rep, DenseSemantics::Standard);
        input.channels = 2;
        let weights: Vec<f64> = (0..9 * 2).map(|i| i as f64).collect();
        let layer = ConvLayer { kernel: 3, c_in: 2, c_out: 1, weights, bias: vec![0.5], activation: Activation::Identity };
        let mut ops = 0;
        let out = dense_conv(&input, &layer, &mut ops).unwrap();
        // centre tap 4 holds weights 8 (c_in 0) and 9 (c_in 1)
        assert_eq!(out.at(0, 0), &[8.0 * 2.0 + 9.0 * 3.0 + 0.5]);
        assert_eq!(ops, 2 * 9 * 2 - 1);
    }
}
