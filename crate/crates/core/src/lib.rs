//! Event-camera inference with submanifold sparse convolutions and an
//! asynchronous, per-event update engine.
//!
//! Events become sparse recursive representations ([`representation`]), which
//! feed a synchronous sparse forward pass ([`sparse`]) or a retained
//! [`engine::NetworkState`] that absorbs each event's increment. [`analysis`]
//! counts FLOPs and estimates the fractal dimension of active sets.

pub mod analysis;
pub mod engine;
pub mod events;
pub mod model;
pub mod network;
pub mod real;
pub mod representation;
pub mod site;
pub mod sparse;

pub use engine::{init_state, EngineError, NetworkState};
pub use events::{Event, EventStream, Polarity};
pub use network::{Activation, ConvLayer, FcLayer, Layer, NetworkSpec};
pub use real::Real;
pub use representation::{ReprKind, Representation, SlidingWindowState, SparseUpdate};
pub use site::Site;
