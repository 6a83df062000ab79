use crate::analysis::{LayerTrace, Mode};
use crate::network::{Layer, NetworkSpec};
use crate::real::Real;
use crate::representation::Representation;

use super::{fc_forward, relu_forward, sparse_maxpool, ssc_forward, Rulebook, SparseError, SparseFeatureMap};

/// Every intermediate map of a synchronous sparse pass.
#[derive(Clone, Debug)]
pub struct SparseForward<T> {
    pub input: SparseFeatureMap<T>,
    /// Output of each layer before the head; `maps[i]` belongs to layer `i`.
    pub maps: Vec<SparseFeatureMap<T>>,
    pub output: Vec<T>,
    pub trace: Vec<LayerTrace>,
}

pub fn sparse_forward<T: Real>(net: &NetworkSpec<T>, rep: &Representation) -> Result<SparseForward<T>, SparseError> {
    net.check_input(rep.width(), rep.height(), rep.channels())?;
    sparse_forward_map(net, SparseFeatureMap::from_representation(rep))
}

/// Synchronous pass from an already sparse input. Rulebooks are built once per
/// resolution (and kernel size) and reused by every convolution at that resolution.
pub fn sparse_forward_map<T: Real>(net: &NetworkSpec<T>, input: SparseFeatureMap<T>) -> Result<SparseForward<T>, SparseError> {
    net.validate()?;
    let mut maps: Vec<SparseFeatureMap<T>> = Vec::with_capacity(net.layers.len());
    let mut trace = Vec::with_capacity(net.layers.len());
    let mut rulebooks: Vec<Rulebook> = Vec::new();
    let mut output = Vec::new();

    for (n, layer) in net.layers.iter().enumerate() {
        let cur = maps.last().unwrap_or(&input);
        let mut t = LayerTrace::new(n, layer.kind(), Mode::Sparse);
        t.w_out = cur.width();
        t.h_out = cur.height();
        t.c_in = cur.channels();
        t.c_out = cur.channels();
        match layer {
            Layer::Conv(conv) => {
                let idx = match rulebooks.iter().position(|rb| rb.kernel() == conv.kernel) {
                    Some(i) => i,
                    None => {
                        let rb = Rulebook::build(cur.sites().iter().copied(), |s| cur.contains(s), conv.kernel);
                        rulebooks.push(rb);
                        rulebooks.len() - 1
                    }
                };
                let rb = &rulebooks[idx];
                let out = ssc_forward(cur, conv, rb, &mut t.counted)?;
                t.c_out = conv.c_out;
                t.k = conv.kernel;
                t.n_rules = rb.len() as u64;
                maps.push(out);
            }
            Layer::MaxPool { kernel } => {
                let out = sparse_maxpool(cur, *kernel, &mut t.counted);
                t.w_out = out.width();
                t.h_out = out.height();
                t.k = *kernel;
                t.n_active = out.len() as u64;
                rulebooks.clear();
                maps.push(out);
            }
            Layer::Relu => {
                let out = relu_forward(cur, &mut t.counted);
                t.n_active = out.len() as u64;
                maps.push(out);
            }
            Layer::Fc(fc) => {
                output = fc_forward(cur, fc, &mut t.counted)?;
                t.w_out = 1;
                t.h_out = 1;
                t.c_in = fc.c_in;
                t.c_out = fc.c_out;
            }
        }
        trace.push(t);
    }
    Ok(SparseForward { input, maps, output, trace })
}
