//! Topology search: particle swarm optimization over complete-graph edge
//! weights, scored by briefly training the streams on each induced tree.

mod objective;
mod pso;
mod search;

pub use objective::{evaluate_objective, random_tree, random_weights, Evaluator, ObjectiveReport};
pub use pso::{pso_step, BatchObjective, Particle, Swarm, SwarmConfig};
pub use search::{optimize_topology, optimize_with, HistoryRecord, TopologyHistory, TopologyResult, SNAPSHOT_ITERATIONS};
