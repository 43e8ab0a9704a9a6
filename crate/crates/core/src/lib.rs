//! Capsule networks as connected directed acyclic graphs.
//!
//! A [`CapsuleGraph`](graph::CapsuleGraph) joins input nodes and capsule nodes
//! with tensor-weighting edges. Each capsule computes
//! `Y = cap(Σ W ⊗ Y_src + B)`; [`forward`] evaluates that model in
//! topological order and [`backprop`] runs reverse-mode differentiation over
//! any such DAG. [`trainer`] wraps both in a seeded SGD loop.
//!
//! [`generation`] builds scalar networks from the rules of variable, neuron,
//! growth and convergence, derives a replayable rule sequence for any
//! connected DAG, and enumerates small structure families. [`models`] holds
//! the MLP and CNN capsule paths and the fixture graphs.
//!
//! The `examples/` directory has one runnable program per capability and the
//! `capsnet` binary exposes the same operations on JSON and CSV files.

pub mod backprop;
pub mod cli;
pub mod error;
pub mod forward;
pub mod generation;
pub mod graph;
pub mod models;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{CapsuleFn, CapsuleGraph, NodeId, WeightingOp};
pub use tensor::Tensor;
