//! Exact inference on discrete Bayesian networks.
//!
//! The pipeline is the classical one: moralize the DAG, triangulate with a
//! min-fill heuristic, build a clique tree, and calibrate it with a
//! two-pass message schedule. The same machinery serves double duty as the
//! production posterior engine and as the complexity instrument behind the
//! clique-cost benchmark.

pub mod clique_tree;
pub mod factor;
pub mod grid_model;
pub mod network;
pub mod triangulate;

pub use clique_tree::{propagate, CliqueTree};
pub use factor::Factor;
pub use grid_model::{build_evidence_network, build_grid_network, GridModelConfig, GridNetwork, Structure};
pub use network::{DiscreteNetwork, InferenceError, NodeId, UGraph};
pub use triangulate::{largest_clique_cost, triangulate, Triangulation};
