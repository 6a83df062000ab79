use serde::{Deserialize, Serialize};

use crate::network::LayerKind;

/// Which engine produced a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dense,
    Sparse,
    Async,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dense => "dense",
            Mode::Sparse => "sparse",
            Mode::Async => "async",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(Mode::Dense),
            "sparse" => Ok(Mode::Sparse),
            "async" => Ok(Mode::Async),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Measured work of one layer in one forward pass or event update.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub layer: usize,
    pub kind: Option<LayerKind>,
    pub mode: Option<Mode>,
    pub h_out: usize,
    pub w_out: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    /// Conv: rules evaluated. In async mode this is the incremental rules applied
    /// plus the rules used to evaluate sites afresh.
    pub n_rules: u64,
    /// Async conv: the part of `n_rules` spent evaluating newly active sites, and
    /// sites where that was cheaper than their increments, from scratch.
    pub n_rules_recompute: u64,
    /// Pool/ReLU: active output sites processed. Async FC: changed input slots.
    pub n_active: u64,
    /// Async conv: active sites within the growth patch around the update.
    pub n_patch: u64,
    /// Async FC fell back to a full matrix-vector product.
    pub full_recompute: bool,
    /// Arithmetic operations counted by the instrumented kernels.
    pub counted: u64,
}

impl LayerTrace {
    pub fn new(layer: usize, kind: LayerKind, mode: Mode) -> Self {
        Self { layer, kind: Some(kind), mode: Some(mode), ..Default::default() }
    }
}
