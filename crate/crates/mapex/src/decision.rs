//! Expected-cost choice between the known route and an exploratory one.
//!
//! Costs are counted in edge traversals. `cost(task, plan, true)` is the
//! shortest path through the corridors present in both maps, which reduces
//! to the plan map's own shortest path whenever the plan is a subgraph of
//! the true world; an unreachable pair costs the penalty bound `2*nx*ny`.
//! Futures charge each anticipated task at its expected count, planned
//! with the posterior-mode map and evaluated against a candidate true map.
//! NOTA carries no map, so it contributes the penalty bound everywhere.

use thiserror::Error;

use crate::belief::BeliefState;
use crate::grid::{GridSpec, Intersection};
use crate::world::MapHypothesis;

#[derive(Debug, Error, PartialEq)]
pub enum DecisionError {
    #[error("outcome likelihoods must sum to one per hypothesis (row {row} sums to {sum})")]
    OutcomesNotExhaustive { row: String, sum: f64 },
}

/// A point-to-point traversal demand.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: usize,
    pub origin: Intersection,
    pub destination: Intersection,
    /// Expected number of future occurrences of this task.
    pub expected_count: f64,
}

/// Worst-case traversal charge for unreachable or map-less plans.
pub fn penalty_bound(grid: GridSpec) -> f64 {
    (2 * grid.nx * grid.ny) as f64
}

/// Travel cost of `task` when planning with `plan` inside `true_map`.
pub fn cost(task: &TaskSpec, plan: &MapHypothesis, true_map: &MapHypothesis) -> f64 {
    leg_cost(task.origin, task.destination, plan, true_map)
}

fn leg_cost(a: Intersection, b: Intersection, plan: &MapHypothesis, true_map: &MapHypothesis) -> f64 {
    let grid = plan.grid();
    debug_assert_eq!(grid, true_map.grid());
    let shared = plan.edges().intersect(true_map.edges());
    // The shared edge set may break LDP connectivity; path search does not
    // care, so bypass the hypothesis constructor.
    let walkable = MapWalk { grid, edges: shared };
    match walkable.shortest(a, b) {
        Some(n) => n as f64,
        None => penalty_bound(grid),
    }
}

/// Cost of a waypoint route (used for the modified task T*').
pub fn route_cost(
    waypoints: &[Intersection],
    plan: &MapHypothesis,
    true_map: &MapHypothesis,
) -> f64 {
    waypoints
        .windows(2)
        .map(|w| leg_cost(w[0], w[1], plan, true_map))
        .sum()
}

struct MapWalk {
    grid: GridSpec,
    edges: crate::grid::EdgeSet,
}

impl MapWalk {
    fn shortest(&self, a: Intersection, b: Intersection) -> Option<u32> {
        use std::collections::VecDeque;
        if a == b {
            return Some(0);
        }
        let n = self.grid.intersection_count();
        let mut dist = vec![u32::MAX; n];
        dist[self.grid.intersection_index(a)] = 0;
        let mut queue = VecDeque::from([a]);
        while let Some(p) = queue.pop_front() {
            let dp = dist[self.grid.intersection_index(p)];
            for d in crate::grid::Direction::ALL {
                let Some(id) = self.grid.edge_id(p, d) else { continue };
                if !self.edges.contains(id) {
                    continue;
                }
                let q = self.grid.neighbor(p, d).unwrap();
                let qi = self.grid.intersection_index(q);
                if dist[qi] == u32::MAX {
                    dist[qi] = dp + 1;
                    if q == b {
                        return Some(dp + 1);
                    }
                    queue.push_back(q);
                }
            }
        }
        None
    }
}

/// Precomputed `cost` for every (task, plan map, true map) triple; the
/// current planning map is carried as one extra plan row.
#[derive(Debug, Clone)]
pub struct CostTable {
    tasks: usize,
    plans: usize,
    trues: usize,
    entries: Vec<f64>,
}

impl CostTable {
    /// `plan_extra` is the current route-planning map, appended after the
    /// hypothesis maps on the plan axis.
    pub fn build(
        tasks: &[TaskSpec],
        maps: &[MapHypothesis],
        plan_extra: Option<&MapHypothesis>,
    ) -> CostTable {
        let plans = maps.len() + plan_extra.iter().len();
        let trues = maps.len();
        let mut entries = Vec::with_capacity(tasks.len() * plans * trues);
        for task in tasks {
            for pi in 0..plans {
                let plan = if pi < maps.len() { &maps[pi] } else { plan_extra.unwrap() };
                for true_map in maps {
                    entries.push(cost(task, plan, true_map));
                }
            }
        }
        CostTable { tasks: tasks.len(), plans, trues, entries }
    }

    pub fn get(&self, task: usize, plan: usize, true_map: usize) -> f64 {
        debug_assert!(task < self.tasks && plan < self.plans && true_map < self.trues);
        self.entries[(task * self.plans + plan) * self.trues + true_map]
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A posterior view the decision formulas consume: hypothesis maps plus the
/// distribution over them and NOTA (last entry).
#[derive(Debug, Clone, Copy)]
pub struct InfoState<'a> {
    pub maps: &'a [MapHypothesis],
    pub probs: &'a [f64],
}

impl<'a> InfoState<'a> {
    pub fn from_belief(belief: &'a BeliefState) -> InfoState<'a> {
        InfoState { maps: belief.hypotheses().maps(), probs: belief.probs() }
    }

    pub fn nota_prob(&self) -> f64 {
        *self.probs.last().unwrap()
    }

    /// Posterior-mode map index (NOTA excluded, ties to the lowest index).
    pub fn map_argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.maps.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Expected future-task cost against `true_map`, planning every future
/// task with the posterior-mode map of `info`.
pub fn futures(tasks: &[TaskSpec], true_map: &MapHypothesis, info: &InfoState) -> f64 {
    if tasks.is_empty() || info.maps.is_empty() {
        return 0.0;
    }
    let map_star = &info.maps[info.map_argmax()];
    tasks.iter().map(|t| t.expected_count * cost(t, map_star, true_map)).sum()
}

/// Futures value of the NOTA state: the penalty bound per expected task.
pub fn futures_nota(tasks: &[TaskSpec], grid: GridSpec) -> f64 {
    let b = penalty_bound(grid);
    tasks.iter().map(|t| t.expected_count * b).sum()
}

/// Expected value of the known path under imperfect classification:
/// sum over hypotheses of posterior times (immediate cost + futures).
pub fn ev_known_path(
    tasks: &[TaskSpec],
    task: &TaskSpec,
    plan_map: &MapHypothesis,
    info: &InfoState,
) -> f64 {
    let grid = plan_map.grid();
    let mut ev = 0.0;
    for (j, m) in info.maps.iter().enumerate() {
        let p = info.probs[j];
        if p == 0.0 {
            continue;
        }
        ev += p * (cost(task, plan_map, m) + futures(tasks, m, info));
    }
    let p_nota = info.nota_prob();
    if p_nota > 0.0 {
        ev += p_nota * (penalty_bound(grid) + futures_nota(tasks, grid));
    }
    ev
}

/// The perfect-classification variant: the simulator grants the true map.
pub fn ev_known_path_perfect(
    tasks: &[TaskSpec],
    task: &TaskSpec,
    plan_map: &MapHypothesis,
    true_map: &MapHypothesis,
    info: &InfoState,
) -> f64 {
    cost(task, plan_map, true_map) + futures(tasks, true_map, info)
}

/// One candidate exploratory sensing action with its enumerated outcomes.
#[derive(Debug, Clone)]
pub struct SensingProposal {
    pub location: Intersection,
    pub detectors: Vec<crate::sensing::Detector>,
    /// `outcome_given_map[i][j]` = P(O_i | M_j); rows must sum to one over
    /// `i` for each map `j`.
    pub outcome_given_map: Vec<Vec<f64>>,
    /// P(O_i | NOTA).
    pub outcome_given_nota: Vec<f64>,
    /// The modified route for the current task, as waypoints through the
    /// sensing location.
    pub route: Vec<Intersection>,
}

impl SensingProposal {
    pub fn outcome_count(&self) -> usize {
        self.outcome_given_nota.len()
    }

    fn validate(&self, k: usize) -> Result<(), DecisionError> {
        let n = self.outcome_count();
        for j in 0..k {
            let sum: f64 = (0..n).map(|i| self.outcome_given_map[i][j]).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(DecisionError::OutcomesNotExhaustive { row: format!("map {j}"), sum });
            }
        }
        let sum: f64 = self.outcome_given_nota.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DecisionError::OutcomesNotExhaustive { row: "NOTA".to_string(), sum });
        }
        Ok(())
    }
}

/// Expected value of the unknown path: immediate cost of the modified
/// route plus outcome-weighted futures under the updated posterior.
pub fn ev_unknown_path(
    tasks: &[TaskSpec],
    plan_map: &MapHypothesis,
    info: &InfoState,
    proposal: &SensingProposal,
) -> Result<f64, DecisionError> {
    let k = info.maps.len();
    proposal.validate(k)?;
    let grid = plan_map.grid();
    let b = penalty_bound(grid);

    let mut immediate = 0.0;
    for (j, m) in info.maps.iter().enumerate() {
        if info.probs[j] > 0.0 {
            immediate += info.probs[j] * route_cost(&proposal.route, plan_map, m);
        }
    }
    if info.nota_prob() > 0.0 {
        immediate += info.nota_prob() * b;
    }

    let mut future_term = 0.0;
    for i in 0..proposal.outcome_count() {
        // P(O_i) marginalized over maps and NOTA.
        let mut p_outcome = 0.0;
        let mut posterior: Vec<f64> = Vec::with_capacity(k + 1);
        for j in 0..k {
            let w = info.probs[j] * proposal.outcome_given_map[i][j];
            posterior.push(w);
            p_outcome += w;
        }
        let w_nota = info.nota_prob() * proposal.outcome_given_nota[i];
        posterior.push(w_nota);
        p_outcome += w_nota;
        if p_outcome <= 0.0 {
            continue;
        }
        for w in &mut posterior {
            *w /= p_outcome;
        }
        let post_info = InfoState { maps: info.maps, probs: &posterior };
        let mut inner = 0.0;
        for (j, m) in info.maps.iter().enumerate() {
            if posterior[j] > 0.0 {
                inner += posterior[j] * futures(tasks, m, &post_info);
            }
        }
        if posterior[k] > 0.0 {
            inner += posterior[k] * futures_nota(tasks, grid);
        }
        future_term += p_outcome * inner;
    }

    Ok(immediate + future_term)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathChoice {
    Known,
    Unknown,
}

impl PathChoice {
    pub fn name(self) -> &'static str {
        match self {
            PathChoice::Known => "PK",
            PathChoice::Unknown => "PU",
        }
    }
}

/// Both expected values and the argmin choice (ties prefer the known path).
#[derive(Debug, Clone, Copy)]
pub struct PathDecision {
    pub choice: PathChoice,
    pub ev_known: f64,
    pub ev_unknown: f64,
}

/// Compare the known route against the exploratory proposal. The planning
/// map is the posterior-mode map of `info`.
pub fn choose_path(
    tasks: &[TaskSpec],
    task: &TaskSpec,
    info: &InfoState,
    proposal: &SensingProposal,
) -> Result<PathDecision, DecisionError> {
    let plan_map = &info.maps[info.map_argmax()];
    let ev_known = ev_known_path(tasks, task, plan_map, info);
    let ev_unknown = ev_unknown_path(tasks, plan_map, info, proposal)?;
    let choice = if ev_unknown < ev_known { PathChoice::Unknown } else { PathChoice::Known };
    Ok(PathDecision { choice, ev_known, ev_unknown })
}
