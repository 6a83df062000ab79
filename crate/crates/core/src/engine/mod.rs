//! Asynchronous inference: a retained network state that absorbs sparse input
//! increments event by event and stays equal to a from-scratch sparse pass.

mod front;

pub use front::{propagate_direct, Rule, UpdateFront};

use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::analysis::{flops_fc, flops_fc_incremental, LayerTrace, Mode};
use crate::network::{ConvLayer, FcLayer, Layer, NetworkError, NetworkSpec};
use crate::real::{close, Real};
use crate::representation::{Representation, SparseUpdate};
use crate::site::Site;
use crate::sparse::{apply_fresh, apply_rule, fc_dense, pool_window, sparse_forward_map, Rulebook, SparseError, SparseFeatureMap, SparseForward};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("update at {site}: {reason}")]
    InconsistentUpdate { site: Site, reason: String },
    #[error("layer {layer}: no previous value cached for {site}")]
    MissingPrevious { layer: usize, site: Site },
    #[error("layer {layer}: rule output {site} is not an active site")]
    MissingOutput { layer: usize, site: Site },
}

/// Pre-update activations of the sites a layer is about to change.
#[derive(Clone, Debug, Default)]
struct Previous<T> {
    sites: Vec<Site>,
    index: FxHashMap<Site, usize>,
    values: Vec<T>,
    channels: usize,
}

impl<T: Real> Previous<T> {
    /// Snapshots `map` at `sites` (sorted, unique).
    fn capture(map: &SparseFeatureMap<T>, sites: Vec<Site>) -> Self {
        let c = map.channels();
        let mut values = vec![T::zero(); sites.len() * c];
        let mut index = FxHashMap::default();
        index.reserve(sites.len());
        for (n, &s) in sites.iter().enumerate() {
            map.act_or_zero(s, &mut values[n * c..(n + 1) * c]);
            index.insert(s, n);
        }
        Self { sites, index, values, channels: c }
    }

    fn get(&self, site: Site) -> Option<&[T]> {
        let c = self.channels;
        self.index.get(&site).map(|&n| &self.values[n * c..(n + 1) * c])
    }
}

/// Snapshot of one layer's propagation, kept when recording is enabled.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontRecord {
    pub layer: usize,
    /// Receptive field after this layer.
    pub field: Vec<Site>,
    pub rules: Vec<Rule>,
    pub stage_entry: Vec<Site>,
    pub newly_active: Vec<Site>,
    pub newly_inactive: Vec<Site>,
}

#[derive(Clone, Debug)]
struct Stage {
    /// Synchronous rulebooks of this resolution, one per kernel size in use.
    rulebooks: Vec<Rulebook>,
}

impl Stage {
    fn rulebook(&self, kernel: usize) -> &Rulebook {
        self.rulebooks.iter().find(|rb| rb.kernel() == kernel).expect("rulebook built for every kernel in the stage")
    }
}

/// Retained activations of every layer plus the synchronous rulebooks.
#[derive(Clone, Debug)]
pub struct NetworkState<T> {
    net: Arc<NetworkSpec<T>>,
    input: SparseFeatureMap<T>,
    maps: Vec<SparseFeatureMap<T>>,
    output: Vec<T>,
    stages: Vec<Stage>,
    /// Stage index of every layer's input.
    layer_stage: Vec<usize>,
    trace: Vec<LayerTrace>,
    record: bool,
    fronts: Vec<FrontRecord>,
}

/// Builds the state with one synchronous sparse pass over `rep`.
pub fn init_state<T: Real>(net: Arc<NetworkSpec<T>>, rep: &Representation) -> Result<NetworkState<T>, EngineError> {
    net.check_input(rep.width(), rep.height(), rep.channels())?;
    NetworkState::from_input(net, SparseFeatureMap::from_representation(rep))
}

impl<T: Real> NetworkState<T> {
    pub fn from_input(net: Arc<NetworkSpec<T>>, input: SparseFeatureMap<T>) -> Result<Self, EngineError> {
        let fwd = sparse_forward_map(&net, input)?;
        let mut layer_stage = Vec::with_capacity(net.layers.len());
        let mut stages = Vec::new();
        let mut stage = 0;
        let mut kernels: Vec<usize> = Vec::new();
        for (n, layer) in net.layers.iter().enumerate() {
            layer_stage.push(stage);
            match layer {
                Layer::Conv(c) if !kernels.contains(&c.kernel) => kernels.push(c.kernel),
                Layer::MaxPool { .. } => {
                    let map = if n == 0 { &fwd.input } else { &fwd.maps[n - 1] };
                    stages.push(build_stage(map, &kernels));
                    kernels.clear();
                    stage += 1;
                }
                _ => {}
            }
        }
        let last = match net.layers.len() {
            0 | 1 => &fwd.input,
            n => &fwd.maps[n - 2],
        };
        stages.push(build_stage(last, &kernels));
        let SparseForward { input, maps, output, trace } = fwd;
        Ok(Self { net, input, maps, output, stages, layer_stage, trace, record: false, fronts: Vec::new() })
    }

    pub fn network(&self) -> &Arc<NetworkSpec<T>> {
        &self.net
    }

    pub fn output(&self) -> &[T] {
        &self.output
    }

    pub fn input(&self) -> &SparseFeatureMap<T> {
        &self.input
    }

    /// Retained map of layer `n` (every layer but the head).
    pub fn map(&self, n: usize) -> &SparseFeatureMap<T> {
        &self.maps[n]
    }

    pub fn maps(&self) -> &[SparseFeatureMap<T>] {
        &self.maps
    }

    /// Synchronous rulebook of the stage feeding layer `n`, for kernel size `kernel`.
    pub fn rulebook(&self, layer: usize, kernel: usize) -> Option<&Rulebook> {
        self.stages[self.layer_stage[layer]].rulebooks.iter().find(|rb| rb.kernel() == kernel)
    }

    /// Per-layer work of the most recent update (or of the initial pass).
    pub fn last_trace(&self) -> &[LayerTrace] {
        &self.trace
    }

    /// Keep per-layer receptive fields and rulebooks of every update.
    pub fn set_recording(&mut self, on: bool) {
        self.record = on;
        self.fronts.clear();
    }

    pub fn last_fronts(&self) -> &[FrontRecord] {
        &self.fronts
    }

    /// Discards accumulated rounding by recomputing everything from the input layer.
    pub fn resync(&mut self) -> Result<(), EngineError> {
        let rebuilt = Self::from_input(self.net.clone(), self.input.clone())?;
        let record = self.record;
        *self = rebuilt;
        self.record = record;
        Ok(())
    }

    /// Compares every retained layer and the output against a synchronous pass.
    pub fn compare(&self, fwd: &SparseForward<T>, rel: f64, abs: f64) -> Result<(), String> {
        self.input.compare(&fwd.input, rel, abs).map_err(|e| format!("input: {e}"))?;
        for (n, (a, b)) in self.maps.iter().zip(&fwd.maps).enumerate() {
            a.compare(b, rel, abs).map_err(|e| format!("layer {n}: {e}"))?;
        }
        for (c, (a, b)) in self.output.iter().zip(&fwd.output).enumerate() {
            if !close(a.as_f64(), b.as_f64(), rel, abs) {
                return Err(format!("output {c}: {a} vs {b}"));
            }
        }
        Ok(())
    }

    /// Applies one sparse input update layer by layer and returns the new output.
    ///
    /// The input layer absorbs the update and fixes the new active set first; each
    /// convolution then grows the receptive field and incremental rulebook from the
    /// previous layer's, updates surviving sites by their rule increments,
    /// recomputes newly active sites in full and clears newly inactive ones.
    pub fn process_event(&mut self, update: &SparseUpdate) -> Result<&[T], EngineError> {
        let (mut prev, na, ni) = self.apply_input(update)?;
        self.fronts.clear();
        let mut trace = Vec::with_capacity(self.net.layers.len());
        let net = self.net.clone();
        patch_stage(&mut self.stages[0], &self.input, &na, &ni);
        let mut entry = prev.sites.clone();
        let mut front = UpdateFront::new(&prev.sites, |s| self.input.contains(s), na, ni);
        let mut radius = 0usize;

        for (n, layer) in net.layers.iter().enumerate() {
            let mut t = LayerTrace::new(n, layer.kind(), Mode::Async);
            let (inputs, outputs) = self.maps.split_at_mut(n);
            let inp: &SparseFeatureMap<T> = if n == 0 { &self.input } else { &inputs[n - 1] };
            t.w_out = inp.width();
            t.h_out = inp.height();
            t.c_in = inp.channels();
            t.c_out = inp.channels();
            match layer {
                Layer::Conv(conv) => {
                    let out = &mut outputs[0];
                    radius += conv.kernel / 2;
                    front.propagate(conv.kernel, |s| inp.contains(s));
                    let rb = self.stages[self.layer_stage[n]].rulebook(conv.kernel);
                    prev = update_conv_layer(n, conv, inp, out, &front, &prev, rb, &mut t)?;
                    t.n_patch = count_patch(inp, front.newly_inactive(), &entry, radius);
                    if self.record {
                        self.fronts.push(record(n, &front, &prev.sites, &entry));
                    }
                }
                Layer::Relu => {
                    let out = &mut outputs[0];
                    let p = Previous::capture(out, prev.sites.clone());
                    let c = inp.channels();
                    let mut act = vec![T::zero(); c];
                    for &s in &prev.sites {
                        match inp.act_at(s) {
                            Some(v) => {
                                for (a, &x) in act.iter_mut().zip(v) {
                                    *a = x.max(T::zero());
                                }
                                out.insert(s, v, &act);
                                t.n_active += 1;
                            }
                            None => {
                                out.remove(s);
                            }
                        }
                    }
                    t.counted += t.n_active * c as u64;
                    prev = p;
                }
                Layer::MaxPool { kernel } => {
                    let out = &mut outputs[0];
                    let (p, pna, pni) = update_pool_layer(inp, out, *kernel, &prev, &mut t);
                    let stage = self.layer_stage[n] + 1;
                    patch_stage(&mut self.stages[stage], out, &pna, &pni);
                    entry = p.sites.clone();
                    front = UpdateFront::new(&p.sites, |s| out.contains(s), pna, pni);
                    radius = 0;
                    prev = p;
                }
                Layer::Fc(fc) => {
                    update_fc(inp, fc, &prev, &mut self.output, &mut t);
                }
            }
            trace.push(t);
        }
        self.trace = trace;
        Ok(&self.output)
    }

    /// Writes the update into the input layer; returns the previous values of the
    /// touched sites and the newly active / inactive sets.
    fn apply_input(&mut self, update: &SparseUpdate) -> Result<(Previous<T>, FxHashSet<Site>, FxHashSet<Site>), EngineError> {
        let (w, h, c) = (self.input.width(), self.input.height(), self.input.channels());
        let mut sites: Vec<Site> = Vec::with_capacity(update.sites.len());
        for su in &update.sites {
            if !su.site.in_bounds(w, h) {
                return Err(EngineError::InconsistentUpdate { site: su.site, reason: "outside the input grid".into() });
            }
            if su.values.len() != c || su.delta.len() != c {
                return Err(EngineError::InconsistentUpdate {
                    site: su.site,
                    reason: format!("expected {c} channels, got {}/{}", su.values.len(), su.delta.len()),
                });
            }
            sites.push(su.site);
        }
        sites.sort_unstable();
        if sites.windows(2).any(|p| p[0] == p[1]) {
            let dup = sites.windows(2).find(|p| p[0] == p[1]).unwrap()[0];
            return Err(EngineError::InconsistentUpdate { site: dup, reason: "listed twice".into() });
        }
        let prev = Previous::capture(&self.input, sites);
        for su in &update.sites {
            let old = prev.get(su.site).expect("captured");
            for ch in 0..c {
                let expect = old[ch].as_f64() + su.delta[ch];
                if !close(expect, su.values[ch] as f64, 1e-6, 1e-6) {
                    return Err(EngineError::InconsistentUpdate {
                        site: su.site,
                        reason: format!("channel {ch}: retained {} + delta {} != {}", old[ch], su.delta[ch], su.values[ch]),
                    });
                }
            }
        }

        let mut na = FxHashSet::default();
        let mut ni = FxHashSet::default();
        let mut row = vec![T::zero(); c];
        for su in &update.sites {
            let was = self.input.contains(su.site);
            if su.values.iter().all(|&v| v == 0.0) {
                if was {
                    self.input.remove(su.site);
                    ni.insert(su.site);
                }
            } else {
                for (r, &v) in row.iter_mut().zip(&su.values) {
                    *r = T::from_f32(v);
                }
                self.input.insert(su.site, &row, &row);
                if !was {
                    na.insert(su.site);
                }
            }
        }
        let listed_na: FxHashSet<Site> = update.newly_active.iter().copied().collect();
        let listed_ni: FxHashSet<Site> = update.newly_inactive.iter().copied().collect();
        if listed_na != na || listed_ni != ni {
            let site = na.symmetric_difference(&listed_na).chain(ni.symmetric_difference(&listed_ni)).next().copied();
            return Err(EngineError::InconsistentUpdate {
                site: site.unwrap_or(Site::new(0, 0)),
                reason: "activity change disagrees with the retained input".into(),
            });
        }
        Ok((prev, na, ni))
    }
}

fn build_stage<T: Real>(map: &SparseFeatureMap<T>, kernels: &[usize]) -> Stage {
    let sites = map.sorted_sites();
    Stage {
        rulebooks: kernels.iter().map(|&k| Rulebook::build(sites.iter().copied(), |s| map.contains(s), k)).collect(),
    }
}

/// Rulebook set algebra for activity changes: drop every rule of a deactivated
/// site, then add every rule of an activated one against the new active set.
fn patch_stage<T: Real>(stage: &mut Stage, active: &SparseFeatureMap<T>, na: &FxHashSet<Site>, ni: &FxHashSet<Site>) {
    let mut ni: Vec<Site> = ni.iter().copied().collect();
    let mut na: Vec<Site> = na.iter().copied().collect();
    ni.sort_unstable();
    na.sort_unstable();
    for rb in &mut stage.rulebooks {
        for &s in &ni {
            rb.deactivate(s);
        }
        for &s in &na {
            rb.activate(s, |x| active.contains(x));
        }
    }
}

fn record(layer: usize, front: &UpdateFront, field: &[Site], entry: &[Site]) -> FrontRecord {
    let mut na: Vec<Site> = front.newly_active().iter().copied().collect();
    let mut ni: Vec<Site> = front.newly_inactive().iter().copied().collect();
    na.sort_unstable();
    ni.sort_unstable();
    FrontRecord {
        layer,
        field: field.to_vec(),
        rules: front.rules().to_vec(),
        stage_entry: entry.to_vec(),
        newly_active: na,
        newly_inactive: ni,
    }
}

/// Active (or just deactivated) sites within `radius` of the stage entry front.
fn count_patch<T: Real>(active: &SparseFeatureMap<T>, ni: &FxHashSet<Site>, entry: &[Site], radius: usize) -> u64 {
    let r = radius as i32;
    let mut seen: FxHashSet<Site> = FxHashSet::default();
    for &c in entry {
        for y in c.y - r..=c.y + r {
            for x in c.x - r..=c.x + r {
                let s = Site::new(x, y);
                if active.contains(s) || ni.contains(&s) {
                    seen.insert(s);
                }
            }
        }
    }
    seen.len() as u64
}

/// Incremental convolution update for one layer. Returns the pre-update output
/// values over the new receptive field, which the next layer consumes.
#[allow(clippy::too_many_arguments)]
fn update_conv_layer<T: Real>(
    layer: usize,
    conv: &ConvLayer<T>,
    inp: &SparseFeatureMap<T>,
    out: &mut SparseFeatureMap<T>,
    front: &UpdateFront,
    prev_in: &Previous<T>,
    rb: &Rulebook,
    t: &mut LayerTrace,
) -> Result<Previous<T>, EngineError> {
    let field = front.receptive_field();
    let prev_out = Previous::capture(out, field);
    let zeros_in = vec![T::zero(); conv.c_in];
    let zeros_out = vec![T::zero(); conv.c_out];

    for &s in front.newly_inactive() {
        out.remove(s);
    }

    // Surviving sites take their rule increments, unless evaluating the site
    // afresh from the synchronous rulebook needs fewer rules.
    let mut order: Vec<usize> = (0..front.rules().len()).collect();
    order.sort_unstable_by_key(|&n| front.rules()[n].output);
    let mut acc = vec![T::zero(); conv.c_out];
    let mut fresh: Vec<Site> = front.newly_active().iter().copied().collect();
    for group in order.chunk_by(|&a, &b| front.rules()[a].output == front.rules()[b].output) {
        let j = front.rules()[group[0]].output;
        let row = out.row(j).ok_or(EngineError::MissingOutput { layer, site: j })?;
        if rb.fan_in(j) < group.len() {
            fresh.push(j);
            continue;
        }
        for &n in group {
            let r = front.rules()[n];
            let old = prev_in.get(r.input).ok_or(EngineError::MissingPrevious { layer, site: r.input })?;
            let new = inp.act_at(r.input).unwrap_or(&zeros_in);
            t.counted += apply_rule(conv.tap(r.tap), conv.c_out, new, old, out.pre_row_mut(row));
            t.n_rules += 1;
        }
    }

    // newly active and re-evaluated sites: full sum over the rulebook
    fresh.sort_unstable();
    for u in fresh {
        acc.copy_from_slice(&conv.bias);
        for tap in rb.taps(u) {
            let i = u.offset(rb.offsets()[tap]);
            let new = inp.act_at(i).ok_or(EngineError::MissingPrevious { layer, site: i })?;
            t.counted += apply_fresh(conv.tap(tap), conv.c_out, new, &mut acc);
            t.n_rules_recompute += 1;
        }
        out.insert(u, &acc, &zeros_out);
    }
    t.n_rules += t.n_rules_recompute;

    for &s in &prev_out.sites {
        if let Some(row) = out.row(s) {
            let (pre, act) = out.rows_mut(row);
            for (a, &p) in act.iter_mut().zip(pre.iter()) {
                *a = conv.activation.apply(p);
            }
        }
    }
    t.c_out = conv.c_out;
    t.k = conv.kernel;
    Ok(prev_out)
}

/// Recomputes every pooling window touched by the input front. Returns the
/// pre-update values of the windows that changed, plus the pooled activity changes.
fn update_pool_layer<T: Real>(
    inp: &SparseFeatureMap<T>,
    out: &mut SparseFeatureMap<T>,
    k: usize,
    prev_in: &Previous<T>,
    t: &mut LayerTrace,
) -> (Previous<T>, FxHashSet<Site>, FxHashSet<Site>) {
    let mut windows: Vec<Site> = prev_in.sites.iter().map(|s| s.pooled(k)).collect();
    windows.sort_unstable();
    windows.dedup();
    let c = inp.channels();
    let mut best = vec![T::zero(); c];
    let mut changed = Vec::new();
    let mut old_vals = Vec::new();
    let mut na = FxHashSet::default();
    let mut ni = FxHashSet::default();
    for w in windows {
        let any = pool_window(inp, w, k, &mut best);
        let old = out.act_at(w);
        match (old, any) {
            (None, false) => {}
            (Some(o), true) if o == best.as_slice() => t.n_active += 1,
            (old, _) => {
                changed.push(w);
                match old {
                    Some(o) => old_vals.extend_from_slice(o),
                    None => old_vals.extend(std::iter::repeat_n(T::zero(), c)),
                }
                if any {
                    t.n_active += 1;
                    if old.is_none() {
                        na.insert(w);
                    }
                    out.insert(w, &best, &best);
                } else {
                    ni.insert(w);
                    out.remove(w);
                }
            }
        }
    }
    t.counted += t.n_active * (c * k * k) as u64;
    t.w_out = out.width();
    t.h_out = out.height();
    t.k = k;
    let index = changed.iter().enumerate().map(|(n, &s)| (s, n)).collect();
    (Previous { sites: changed, index, values: old_vals, channels: c }, na, ni)
}

/// Adds `W[:, j] * (new - old)` for every changed flattened slot `j`, or
/// recomputes the head outright when that would be cheaper.
fn update_fc<T: Real>(inp: &SparseFeatureMap<T>, fc: &FcLayer<T>, prev: &Previous<T>, output: &mut [T], t: &mut LayerTrace) {
    let c = inp.channels();
    let mut deltas: Vec<(usize, T)> = Vec::new();
    let zeros = vec![T::zero(); c];
    for &s in &prev.sites {
        let old = prev.get(s).expect("captured");
        let new = inp.act_at(s).unwrap_or(&zeros);
        let base = s.linear(inp.width()) * c;
        for ch in 0..c {
            if new[ch] != old[ch] {
                deltas.push((base + ch, new[ch] - old[ch]));
            }
        }
    }
    t.w_out = 1;
    t.h_out = 1;
    t.c_in = fc.c_in;
    t.c_out = fc.c_out;
    let changed = deltas.len() as u64;
    if flops_fc_incremental(changed, fc.c_out) > flops_fc(fc.c_in, fc.c_out) {
        let x = inp.to_dense();
        let fresh = fc_dense(&x, fc, &mut t.counted);
        output.copy_from_slice(&fresh);
        t.full_recompute = true;
        t.n_active = fc.c_in as u64;
        return;
    }
    for &(j, d) in &deltas {
        for (o, out) in output.iter_mut().enumerate() {
            *out = *out + fc.weights[o * fc.c_in + j] * d;
        }
    }
    t.n_active = changed;
    t.counted += flops_fc_incremental(changed, fc.c_out);
}
