use std::io::Write;

use serde::{Deserialize, Serialize};

use super::flops::*;
use super::{AnalysisError, LayerTrace, Mode};
use crate::network::{Layer, LayerKind, NetworkSpec};
use crate::real::Real;

/// One layer of a FLOP ledger: measured counts next to the closed-form value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub layer: usize,
    pub kind: LayerKind,
    pub mode: Mode,
    pub h_out: usize,
    pub w_out: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub n_rules: u64,
    pub n_active: u64,
    pub counted: u64,
    pub analytic: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopLedger {
    pub mode: Mode,
    /// Number of traces summed into this ledger.
    pub runs: u64,
    pub rows: Vec<LedgerRow>,
}

impl FlopLedger {
    pub fn total_counted(&self) -> u64 {
        self.rows.iter().map(|r| r.counted).sum()
    }

    pub fn total_analytic(&self) -> u64 {
        self.rows.iter().map(|r| r.analytic).sum()
    }

    /// First layer whose counter disagrees with its formula, if any.
    pub fn first_mismatch(&self) -> Option<&LedgerRow> {
        self.rows.iter().find(|r| r.counted != r.analytic)
    }

    /// Adds another run of the same network and mode, layer by layer.
    pub fn accumulate(&mut self, other: &FlopLedger) -> Result<(), AnalysisError> {
        if other.mode != self.mode || other.rows.len() != self.rows.len() {
            return Err(AnalysisError::LedgerMismatch);
        }
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.n_rules += b.n_rules;
            a.n_active += b.n_active;
            a.counted += b.counted;
            a.analytic += b.analytic;
        }
        self.runs += other.runs;
        Ok(())
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), AnalysisError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}

/// Applies the per-layer formulas to a trace's measured quantities.
pub fn ledger_for_run<T: Real>(net: &NetworkSpec<T>, trace: &[LayerTrace]) -> Result<FlopLedger, AnalysisError> {
    if trace.len() != net.layers.len() {
        return Err(AnalysisError::IncompleteTrace { expected: net.layers.len(), got: trace.len() });
    }
    let mut mode = None;
    let mut rows = Vec::with_capacity(trace.len());
    for (n, (layer, t)) in net.layers.iter().zip(trace).enumerate() {
        let (Some(kind), Some(m)) = (t.kind, t.mode) else {
            return Err(AnalysisError::IncompleteLayer(n));
        };
        if kind != layer.kind() || t.layer != n {
            return Err(AnalysisError::IncompleteLayer(n));
        }
        if *mode.get_or_insert(m) != m {
            return Err(AnalysisError::LedgerMismatch);
        }
        rows.push(LedgerRow {
            layer: n,
            kind,
            mode: m,
            h_out: t.h_out,
            w_out: t.w_out,
            c_in: t.c_in,
            c_out: t.c_out,
            k: t.k,
            n_rules: t.n_rules,
            n_active: t.n_active,
            counted: t.counted,
            analytic: analytic(kind, m, t),
        });
    }
    Ok(FlopLedger { mode: mode.unwrap_or(Mode::Dense), runs: 1, rows })
}

fn analytic(kind: LayerKind, mode: Mode, t: &LayerTrace) -> u64 {
    match (kind, mode) {
        (LayerKind::Conv, Mode::Dense) => flops_dense_conv(t.h_out, t.w_out, t.c_in, t.c_out, t.k),
        (LayerKind::Conv, _) => flops_sparse_conv(t.n_rules, t.c_in, t.c_out),
        (LayerKind::MaxPool, Mode::Dense) => flops_dense_pool(t.h_out, t.w_out, t.c_out, t.k),
        (LayerKind::MaxPool, _) => flops_sparse_pool(t.n_active, t.c_out, t.k),
        (LayerKind::Relu, Mode::Dense) => flops_dense_relu(t.h_out, t.w_out, t.c_in),
        (LayerKind::Relu, _) => flops_sparse_relu(t.n_active, t.c_in),
        (LayerKind::Fc, Mode::Async) if !t.full_recompute => flops_fc_incremental(t.n_active, t.c_out),
        (LayerKind::Fc, _) => flops_fc(t.c_in, t.c_out),
    }
}

/// Closed-form dense ledger from layer shapes alone, without running inference.
/// `counted` mirrors `analytic` here.
pub fn analytic_dense_ledger<T: Real>(net: &NetworkSpec<T>) -> Result<FlopLedger, AnalysisError> {
    let shapes = net.shapes()?;
    let mut prev = net.input_shape();
    let mut rows = Vec::new();
    for (n, (layer, s)) in net.layers.iter().zip(&shapes).enumerate() {
        let mut t = LayerTrace::new(n, layer.kind(), Mode::Dense);
        t.h_out = s.height;
        t.w_out = s.width;
        t.c_in = prev.channels;
        t.c_out = s.channels;
        t.k = match layer {
            Layer::Conv(c) => c.kernel,
            Layer::MaxPool { kernel } => *kernel,
            _ => 0,
        };
        if let Layer::Fc(fc) = layer {
            t.c_in = fc.c_in;
        }
        let a = analytic(layer.kind(), Mode::Dense, &t);
        rows.push(LedgerRow {
            layer: n,
            kind: layer.kind(),
            mode: Mode::Dense,
            h_out: t.h_out,
            w_out: t.w_out,
            c_in: t.c_in,
            c_out: t.c_out,
            k: t.k,
            n_rules: 0,
            n_active: 0,
            counted: a,
            analytic: a,
        });
        prev = *s;
    }
    Ok(FlopLedger { mode: Mode::Dense, runs: 1, rows })
}
