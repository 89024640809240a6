//! Complete landmark graphs, minimum spanning trees and their traversal.
//!
//! Every value here is immutable after construction; all operations are pure.

mod dot;
mod landmarks;
mod mst;
mod traversal;

pub use dot::tree_to_dot;
pub use landmarks::{medoid_root, Landmark, LandmarkSet};
pub use mst::{edge_count, edge_index, edge_pair, prim_mst, EdgeWeightVector, SpanningTree};
pub use traversal::{preorder_traverse, TraversalSequence};
