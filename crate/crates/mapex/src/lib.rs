//! Belief-driven exploration of grid-corridor worlds.
//!
//! The crate models an indoor environment as a grid of corridors and
//! junctions, maintains a posterior over a bounded set of candidate maps
//! (plus an explicit "none of the above" state), and uses expected-cost
//! comparisons to trade task execution against exploration. An exact
//! discrete Bayesian-network engine (moralize, triangulate, clique-tree
//! propagation) backs both the posterior computation and a clique-cost
//! benchmark; a hierarchy of coarsened decision grids and a family of
//! navigation-under-ignorance methods round out the control stack.

pub mod belief;
pub mod benchmark;
pub mod decision;
pub mod episode;
pub mod explorer;
pub mod grid;
pub mod hierarchy;
pub mod inference;
pub mod scenario;
pub mod sensing;
pub mod world;

pub use belief::{BeliefState, HypothesisSet};
pub use decision::{PathChoice, SensingProposal, TaskSpec};
pub use episode::{run_episode, EpisodeLog};
pub use explorer::{EdgeKnowledge, EdgeState, NavigationMethod};
pub use scenario::Scenario;
pub use grid::{Direction, DirectionSet, EdgeId, EdgeSet, GridEdge, GridSpec, Intersection};
pub use sensing::{Detector, Evidence, Feature, NoiseModel, SensorReading, Wedge};
pub use world::{JunctionClass, JunctionType, MapHypothesis, PathLength};
