//! Sparse feature maps, rulebooks, the synchronous submanifold-sparse layer
//! set, and a dense reference engine used as the equivalence oracle.

mod dense;
mod feature_map;
mod forward;
mod layers;
mod rulebook;

pub use dense::{dense_conv, dense_forward, DenseForward, DenseMap, DenseSemantics};
pub use feature_map::SparseFeatureMap;
pub use forward::{sparse_forward, sparse_forward_map, SparseForward};
pub use layers::{compute_active_sites, fc_forward, flatten, relu_forward, sparse_maxpool, ssc_forward};
pub(crate) use layers::{apply_fresh, apply_rule, fc_dense, pool_window};
pub use rulebook::{build_rulebook, Rulebook};

use thiserror::Error;

use crate::network::NetworkError;
use crate::site::Site;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("expected {expected} input channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("rulebook kernel {rulebook} does not match layer kernel {layer}")]
    KernelMismatch { rulebook: usize, layer: usize },
    #[error("rule ({input} -> {output}) refers to an inactive site")]
    StaleRulebook { input: Site, output: Site },
    #[error(transparent)]
    Network(#[from] NetworkError),
}
