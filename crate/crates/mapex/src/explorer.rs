//! Navigation with incomplete edge knowledge.
//!
//! Edges the robot has confirmed weigh 1, edges it has ruled out weigh 0,
//! and unknown edges weigh `(m+1)/(|H|+1)` where `m` counts the hypothesis
//! maps containing the edge. A path's value is the product of its edge
//! weights; the weighted-path method steps along the highest-value path
//! (shortest breaks ties) and folds whatever the attempt revealed back
//! into the map, repeating until the destination is reached or no path
//! with positive value remains.

use rand::Rng;

use crate::belief::{BeliefError, BeliefState};
use crate::decision::TaskSpec;
use crate::grid::{Direction, EdgeId, GridSpec, Intersection};
use crate::sensing::Evidence;
use crate::world::{sample_map_constrained, EdgeConstraints, MapHypothesis};

/// What the robot knows about one grid edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeState {
    KnownPresent,
    KnownAbsent,
    Unknown,
}

/// Edge statuses the robot has accumulated, indexed by canonical edge id.
#[derive(Debug, Clone)]
pub struct EdgeKnowledge {
    grid: GridSpec,
    states: Vec<EdgeState>,
}

impl EdgeKnowledge {
    pub fn unknown(grid: GridSpec) -> EdgeKnowledge {
        EdgeKnowledge { grid, states: vec![EdgeState::Unknown; grid.edge_count()] }
    }

    /// Derive knowledge from a belief's evidence log: traversal outcomes
    /// always count; sensor readings count only under a noiseless channel,
    /// where an opening reading is a certain corridor statement.
    pub fn from_belief(belief: &BeliefState) -> EdgeKnowledge {
        let grid = belief.grid();
        let mut k = EdgeKnowledge::unknown(grid);
        let noiseless = belief.noise().is_noiseless();
        for item in belief.evidence() {
            match item {
                Evidence::Edge { from, direction, present, .. } => {
                    if let Some(id) = grid.edge_id(*from, *direction) {
                        k.set(id, *present);
                    }
                }
                Evidence::Sensor(r) if noiseless
                    && r.detector.feature == crate::sensing::Feature::Opening => {
                        if let Some(d) = r.detector.wedge.cardinal_direction() {
                            if let Some(id) = grid.edge_id(r.location, d) {
                                k.set(id, r.result);
                            }
                        }
                    }
                _ => {}
            }
        }
        k
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn state(&self, id: EdgeId) -> EdgeState {
        self.states[id.0]
    }

    pub fn set(&mut self, id: EdgeId, present: bool) {
        self.states[id.0] = if present { EdgeState::KnownPresent } else { EdgeState::KnownAbsent };
    }

    pub fn known_count(&self) -> usize {
        self.states.iter().filter(|s| !matches!(s, EdgeState::Unknown)).count()
    }
}

/// The navigation-under-ignorance methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavigationMethod {
    /// Highest-value path by the `(m+1)/(|H|+1)` weighting.
    WeightedPath,
    /// Shortest path treating unknown edges as traversable.
    ShortestIgnoringUnknown,
    /// Weighted path with known territory down-weighted to 0.5.
    AvoidKnown,
    /// Uniform choice among locally available corridors.
    RandomWalk,
}

impl NavigationMethod {
    pub const ALL: [NavigationMethod; 4] = [
        NavigationMethod::WeightedPath,
        NavigationMethod::ShortestIgnoringUnknown,
        NavigationMethod::AvoidKnown,
        NavigationMethod::RandomWalk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NavigationMethod::WeightedPath => "weighted_path",
            NavigationMethod::ShortestIgnoringUnknown => "shortest_ignoring_unknown",
            NavigationMethod::AvoidKnown => "avoid_known",
            NavigationMethod::RandomWalk => "random_walk",
        }
    }

    pub fn from_name(s: &str) -> Option<NavigationMethod> {
        NavigationMethod::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// `(m+1)/(|H|+1)` for unknown edges, 1 and 0 for known ones.
pub fn edge_weight(
    edge: EdgeId,
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
) -> f64 {
    match knowledge.state(edge) {
        EdgeState::KnownPresent => 1.0,
        EdgeState::KnownAbsent => 0.0,
        EdgeState::Unknown => {
            let m = hypotheses.maps().iter().filter(|map| map.has_edge(edge)).count();
            (m + 1) as f64 / (hypotheses.len() + 1) as f64
        }
    }
}

/// How a path search weighs edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Weighting {
    Method(NavigationMethod),
    /// Only edges confirmed present participate.
    KnownOnly,
}

fn weight_of(
    weighting: Weighting,
    edge: EdgeId,
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
) -> f64 {
    match weighting {
        Weighting::KnownOnly => match knowledge.state(edge) {
            EdgeState::KnownPresent => 1.0,
            _ => 0.0,
        },
        Weighting::Method(NavigationMethod::WeightedPath) => edge_weight(edge, knowledge, hypotheses),
        Weighting::Method(NavigationMethod::ShortestIgnoringUnknown) => {
            match knowledge.state(edge) {
                EdgeState::KnownAbsent => 0.0,
                _ => 1.0,
            }
        }
        Weighting::Method(NavigationMethod::AvoidKnown) => match knowledge.state(edge) {
            EdgeState::KnownPresent => 0.5,
            EdgeState::KnownAbsent => 0.0,
            EdgeState::Unknown => edge_weight(edge, knowledge, hypotheses),
        },
        Weighting::Method(NavigationMethod::RandomWalk) => {
            unreachable!("random walk does not weigh paths")
        }
    }
}

/// Product of edge weights along a contiguous path; the empty path has
/// value 1.
pub fn path_value(
    path: &[EdgeId],
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
) -> f64 {
    path.iter().map(|e| edge_weight(*e, knowledge, hypotheses)).product()
}

/// No positive-value route exists under current knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocked;

/// A chosen first step: the edge leaving `from` toward `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub from: Intersection,
    pub direction: Direction,
    pub to: Intersection,
    pub edge: EdgeId,
}

/// First edge of the highest-value simple path `position -> goal`; ties go
/// to the shorter path, then to the lexicographically smallest node
/// sequence in `(y, x)` order.
pub fn best_step(
    position: Intersection,
    goal: Intersection,
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
) -> Result<Step, Blocked> {
    let path = best_path(
        Weighting::Method(NavigationMethod::WeightedPath),
        position,
        goal,
        knowledge,
        hypotheses,
    )?;
    Ok(step_from_path(knowledge.grid(), &path))
}

/// Full node path for a method's path search (not random walk).
pub fn method_path(
    method: NavigationMethod,
    position: Intersection,
    goal: Intersection,
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
) -> Result<Vec<Intersection>, Blocked> {
    debug_assert_ne!(method, NavigationMethod::RandomWalk);
    best_path(Weighting::Method(method), position, goal, knowledge, hypotheses)
}

/// Shortest route using only edges confirmed present, if any.
pub fn known_path(
    position: Intersection,
    goal: Intersection,
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
) -> Option<Vec<Intersection>> {
    best_path(Weighting::KnownOnly, position, goal, knowledge, hypotheses).ok()
}

/// The first step along a node path.
pub fn step_from_path(grid: GridSpec, path: &[Intersection]) -> Step {
    debug_assert!(path.len() >= 2);
    let position = path[0];
    let first = path[1];
    let direction = Direction::ALL
        .into_iter()
        .find(|d| grid.neighbor(position, *d) == Some(first))
        .expect("consecutive path nodes are neighbors");
    let edge = grid.edge_id(position, direction).unwrap();
    Step { from: position, direction, to: first, edge }
}

fn best_path(
    weighting: Weighting,
    position: Intersection,
    goal: Intersection,
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
) -> Result<Vec<Intersection>, Blocked> {
    debug_assert_ne!(position, goal);
    let grid = knowledge.grid();
    let n = grid.intersection_count();

    // Dijkstra on -ln(weight) with (cost, length, path) lexicographic
    // relaxation; zero-weight edges are pruned outright. Paths are short
    // at desk scale, so carrying them for the lexicographic tie is cheap.
    #[derive(Clone)]
    struct Label {
        cost: f64,
        len: u32,
        path: Vec<Intersection>,
    }
    let better = |a: &Label, b: &Label| -> bool {
        if a.cost < b.cost - 1e-12 {
            return true;
        }
        if a.cost > b.cost + 1e-12 {
            return false;
        }
        match a.len.cmp(&b.len) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => a.path < b.path,
        }
    };

    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    labels[grid.intersection_index(position)] =
        Some(Label { cost: 0.0, len: 0, path: vec![position] });
    loop {
        let mut current: Option<usize> = None;
        for i in 0..n {
            if done[i] || labels[i].is_none() {
                continue;
            }
            match current {
                None => current = Some(i),
                Some(c) => {
                    if better(labels[i].as_ref().unwrap(), labels[c].as_ref().unwrap()) {
                        current = Some(i);
                    }
                }
            }
        }
        let Some(ci) = current else { break };
        done[ci] = true;
        let label = labels[ci].clone().unwrap();
        let p = *label.path.last().unwrap();
        if p == goal {
            return Ok(label.path);
        }
        for d in Direction::ALL {
            let Some(id) = grid.edge_id(p, d) else { continue };
            let w = weight_of(weighting, id, knowledge, hypotheses);
            if w <= 0.0 {
                continue;
            }
            let q = grid.neighbor(p, d).unwrap();
            let qi = grid.intersection_index(q);
            if done[qi] || label.path.contains(&q) {
                continue;
            }
            let mut path = label.path.clone();
            path.push(q);
            let cand = Label { cost: label.cost - w.ln(), len: label.len + 1, path };
            let replace = match &labels[qi] {
                None => true,
                Some(existing) => better(&cand, existing),
            };
            if replace {
                labels[qi] = Some(cand);
            }
        }
    }
    Err(Blocked)
}

/// One step of a method, including the random walk (which needs the rng).
pub fn method_step<R: Rng>(
    method: NavigationMethod,
    position: Intersection,
    goal: Intersection,
    knowledge: &EdgeKnowledge,
    hypotheses: &crate::belief::HypothesisSet,
    rng: &mut R,
) -> Result<Step, Blocked> {
    let grid = knowledge.grid();
    match method {
        NavigationMethod::RandomWalk => {
            let candidates: Vec<Step> = Direction::ALL
                .into_iter()
                .filter_map(|d| {
                    let id = grid.edge_id(position, d)?;
                    (knowledge.state(id) != EdgeState::KnownAbsent).then(|| Step {
                        from: position,
                        direction: d,
                        to: grid.neighbor(position, d).unwrap(),
                        edge: id,
                    })
                })
                .collect();
            if candidates.is_empty() {
                return Err(Blocked);
            }
            Ok(candidates[rng.random_range(0..candidates.len())])
        }
        _ => {
            let path = best_path(Weighting::Method(method), position, goal, knowledge, hypotheses)?;
            Ok(step_from_path(grid, &path))
        }
    }
}

/// One attempted traversal and its revealed outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attempt {
    pub from: Intersection,
    pub direction: Direction,
    pub to: Intersection,
    pub success: bool,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavigationOutcome {
    ReachedGoal,
    Blocked,
    StepBoundExceeded,
}

/// A completed navigation run.
#[derive(Debug, Clone)]
pub struct NavigationRun {
    pub outcome: NavigationOutcome,
    pub trajectory: Vec<Attempt>,
    pub knowledge: EdgeKnowledge,
    pub belief: BeliefState,
    /// Attempts charged (each successful or failed attempt costs one unit).
    pub attempts: u64,
    /// Successful traversals within `attempts`.
    pub traversals: u64,
    /// Edges moved out of `Unknown` during the run.
    pub edges_learned: u64,
}

/// Default step bound: four times the grid's total edge count.
pub fn default_step_bound(grid: GridSpec) -> u64 {
    (4 * grid.edge_count()) as u64
}

/// Run one method from `start` to `goal` against the true world, folding
/// every revealed edge into knowledge and belief.
#[allow(clippy::too_many_arguments)]
pub fn navigate<R: Rng>(
    method: NavigationMethod,
    start: Intersection,
    goal: Intersection,
    true_world: &MapHypothesis,
    knowledge: EdgeKnowledge,
    belief: BeliefState,
    step_offset: u64,
    rng: &mut R,
) -> NavigationRun {
    let grid = true_world.grid();
    let bound = default_step_bound(grid);
    let mut run = NavigationRun {
        outcome: NavigationOutcome::ReachedGoal,
        trajectory: Vec::new(),
        knowledge,
        belief,
        attempts: 0,
        traversals: 0,
        edges_learned: 0,
    };
    let mut position = start;
    while position != goal {
        if run.attempts >= bound {
            run.outcome = NavigationOutcome::StepBoundExceeded;
            return run;
        }
        let step = match method_step(
            method,
            position,
            goal,
            &run.knowledge,
            run.belief.hypotheses(),
            rng,
        ) {
            Ok(s) => s,
            Err(Blocked) => {
                run.outcome = NavigationOutcome::Blocked;
                return run;
            }
        };
        let success = true_world.has_edge(step.edge);
        let was_unknown = run.knowledge.state(step.edge) == EdgeState::Unknown;
        run.knowledge.set(step.edge, success);
        if was_unknown {
            run.edges_learned += 1;
            run.belief = run
                .belief
                .update_edge(step.from, step.direction, success, step_offset + run.attempts)
                .unwrap_or_else(|e| match e {
                    // All maps die but NOTA absorbs it; regeneration is the
                    // caller's policy, so keep the belief usable.
                    BeliefError::DegenerateEvidence => run.belief.clone(),
                    other => panic!("belief update failed: {other}"),
                });
        }
        run.attempts += 1;
        run.trajectory.push(Attempt {
            from: step.from,
            direction: step.direction,
            to: step.to,
            success,
            step: step_offset + run.attempts,
        });
        if success {
            run.traversals += 1;
            position = step.to;
        }
    }
    run
}

/// Monte-Carlo cost statistics for one method on one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_dev: f64,
    pub success_rate: f64,
    pub mean_edges_learned: f64,
}

/// Sample worlds from the belief (NOTA draws a fresh evidence-consistent
/// map), run the method, and average attempt counts.
pub fn estimate_method_cost<R: Rng>(
    method: NavigationMethod,
    belief: &BeliefState,
    task: &TaskSpec,
    rollouts: usize,
    rng: &mut R,
) -> CostEstimate {
    assert!(rollouts >= 1);
    let grid = belief.grid();
    let constraints = belief.edge_constraints().unwrap_or_else(|| EdgeConstraints::none(grid));
    let mut costs = Vec::with_capacity(rollouts);
    let mut successes = 0usize;
    let mut learned = 0u64;
    for _ in 0..rollouts {
        let world = sample_world_from_belief(belief, &constraints, rng);
        let knowledge = EdgeKnowledge::from_belief(belief);
        let run = navigate(
            method,
            task.origin,
            task.destination,
            &world,
            knowledge,
            belief.clone(),
            0,
            rng,
        );
        costs.push(run.attempts as f64);
        learned += run.edges_learned;
        if run.outcome == NavigationOutcome::ReachedGoal {
            successes += 1;
        }
    }
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / costs.len() as f64;
    CostEstimate {
        mean,
        std_dev: var.sqrt(),
        success_rate: successes as f64 / rollouts as f64,
        mean_edges_learned: learned as f64 / rollouts as f64,
    }
}

fn sample_world_from_belief<R: Rng>(
    belief: &BeliefState,
    constraints: &EdgeConstraints,
    rng: &mut R,
) -> MapHypothesis {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in belief.map_probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return belief.hypotheses().maps()[i].clone();
        }
    }
    // NOTA: a fresh evidence-consistent, density-preferred map.
    sample_map_constrained(belief.grid(), rng, true, constraints, 100_000)
        .unwrap_or_else(|| belief.hypotheses().maps()[0].clone())
}
