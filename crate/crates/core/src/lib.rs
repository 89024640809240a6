//! Spanning-tree topology learning over 2-D landmark sets.
//!
//! Edge weights over the complete landmark graph are searched with a particle
//! swarm. Each candidate weight vector induces a minimum spanning tree, the tree
//! is flattened into a backtracking (Euler tour) traversal, and a two-stream
//! attention-LSTM classifier (landmark coordinates + local image patches) is
//! trained on that token order. The classifier's focal losses score the
//! candidate.
//!
//! Module map:
//! - [`graph`]: complete graph indexing, Prim's MST, traversal, DOT export
//! - [`embedding`]: patch extraction, patch encoders, per-token stream inputs
//! - [`neural`]: peephole LSTM, attention, fusion, focal loss, ADAM, gradient checks
//! - [`topology`]: swarm search over edge weights and the topology objective
//! - [`pipeline`]: training, prediction, metrics, ablations, random-tree benchmark
//! - [`data`]: CSV loaders, synthetic planted-topology generator, splits
//! - [`cli`]: the `facetopo` command line

pub mod cli;
pub mod data;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod neural;
pub mod pipeline;
pub mod seed;
pub mod topology;

pub use error::{Error, Result};
