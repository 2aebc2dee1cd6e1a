//! Map hypotheses over the corridor grid.
//!
//! A hypothesis assigns a junction type to every intersection. Because the
//! assignment must be edge-consistent (a corridor exists at one end iff it
//! exists at the other), a hypothesis is stored as the set of present
//! corridor edges; junction types are derived views. The second structural
//! invariant is that all LDPs (intersections with at least one incident
//! corridor) form a single connected component.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Direction, DirectionSet, EdgeId, EdgeSet, GridSpec, Intersection};

/// Ceiling on `2^edges` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("enumeration budget exceeded: 2^{edges} subsets > budget {budget}")]
    BudgetExceeded { edges: usize, budget: u64 },
    #[error("map text malformed at line {line}: {reason}")]
    MalformedMapText { line: usize, reason: String },
    #[error("edge set violates LDP connectivity")]
    Disconnected,
}

/// Classification of a junction by its incident corridor pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JunctionClass {
    None,
    DeadEnd,
    Straight,
    L,
    T,
    Cross,
}

impl JunctionClass {
    pub fn name(self) -> &'static str {
        match self {
            JunctionClass::None => "none",
            JunctionClass::DeadEnd => "dead_end",
            JunctionClass::Straight => "straight",
            JunctionClass::L => "L",
            JunctionClass::T => "T",
            JunctionClass::Cross => "cross",
        }
    }
}

/// The set of corridor directions incident on one intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct JunctionType {
    pub directions: DirectionSet,
}

impl JunctionType {
    pub fn new(directions: DirectionSet) -> JunctionType {
        JunctionType { directions }
    }

    /// The class label is a pure function of the direction set.
    pub fn class(self) -> JunctionClass {
        let d = self.directions;
        match d.len() {
            0 => JunctionClass::None,
            1 => JunctionClass::DeadEnd,
            2 => {
                let ns = d.contains(Direction::North) && d.contains(Direction::South);
                let ew = d.contains(Direction::East) && d.contains(Direction::West);
                if ns || ew {
                    JunctionClass::Straight
                } else {
                    JunctionClass::L
                }
            }
            3 => JunctionClass::T,
            _ => JunctionClass::Cross,
        }
    }

    pub fn is_ldp(self) -> bool {
        !self.directions.is_empty()
    }
}

/// Corridor-density of a hypothesis: present edges over possible edges.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Density(pub f64);

impl Density {
    /// Triangular sampling preference peaking at medium density,
    /// floored at 0.05.
    pub fn preference_weight(self) -> f64 {
        (1.0 - 2.0 * (self.0 - 0.5).abs()).max(0.05)
    }
}

/// Whether a path between two intersections exists in a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathLength {
    Reachable(u32),
    Unreachable,
}

impl PathLength {
    pub fn reachable(self) -> Option<u32> {
        match self {
            PathLength::Reachable(n) => Some(n),
            PathLength::Unreachable => None,
        }
    }
}

/// Forced edge statuses used when sampling must respect prior evidence.
#[derive(Debug, Clone)]
pub struct EdgeConstraints {
    pub forced_present: EdgeSet,
    pub forced_absent: EdgeSet,
}

impl EdgeConstraints {
    pub fn none(grid: GridSpec) -> EdgeConstraints {
        let n = grid.edge_count();
        EdgeConstraints { forced_present: EdgeSet::empty(n), forced_absent: EdgeSet::empty(n) }
    }

    pub fn is_satisfiable_shape(&self) -> bool {
        !self.forced_present.overlaps(&self.forced_absent)
    }

    pub fn admits(&self, edges: &EdgeSet) -> bool {
        self.forced_present.iter().all(|e| edges.contains(e))
            && self.forced_absent.iter().all(|e| !edges.contains(e))
    }
}

/// One full, consistent assignment of junction types to the grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MapHypothesis {
    grid: GridSpec,
    edges: EdgeSet,
}

impl PartialOrd for MapHypothesis {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MapHypothesis {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.edges.cmp(&other.edges)
    }
}

impl MapHypothesis {
    /// Build from an explicit edge set, checking LDP connectivity.
    pub fn from_edges(grid: GridSpec, edges: EdgeSet) -> Result<MapHypothesis, WorldError> {
        assert_eq!(edges.len(), grid.edge_count());
        if !ldp_connected(grid, &edges) {
            return Err(WorldError::Disconnected);
        }
        Ok(MapHypothesis { grid, edges })
    }

    pub fn empty(grid: GridSpec) -> MapHypothesis {
        MapHypothesis { grid, edges: EdgeSet::empty(grid.edge_count()) }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.count()
    }

    pub fn has_edge(&self, id: EdgeId) -> bool {
        self.edges.contains(id)
    }

    /// True when a corridor leaves `p` in direction `d`.
    pub fn has_corridor(&self, p: Intersection, d: Direction) -> bool {
        match self.grid.edge_id(p, d) {
            Some(id) => self.edges.contains(id),
            None => false,
        }
    }

    pub fn junction_type(&self, p: Intersection) -> JunctionType {
        let mut set = DirectionSet::EMPTY;
        for d in Direction::ALL {
            if self.has_corridor(p, d) {
                set = set.with(d);
            }
        }
        JunctionType::new(set)
    }

    pub fn is_ldp(&self, p: Intersection) -> bool {
        self.junction_type(p).is_ldp()
    }

    pub fn ldps(&self) -> Vec<Intersection> {
        self.grid.intersections().filter(|p| self.is_ldp(*p)).collect()
    }

    pub fn density(&self) -> Density {
        let total = self.grid.edge_count();
        if total == 0 {
            Density(0.0)
        } else {
            Density(self.edges.count() as f64 / total as f64)
        }
    }

    /// Breadth-first shortest path length in edge traversals.
    pub fn shortest_path(&self, a: Intersection, b: Intersection) -> PathLength {
        debug_assert!(self.grid.contains(a) && self.grid.contains(b));
        if a == b {
            return PathLength::Reachable(0);
        }
        let n = self.grid.intersection_count();
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        dist[self.grid.intersection_index(a)] = 0;
        queue.push_back(a);
        while let Some(p) = queue.pop_front() {
            let dp = dist[self.grid.intersection_index(p)];
            for d in Direction::ALL {
                if !self.has_corridor(p, d) {
                    continue;
                }
                let q = self.grid.neighbor(p, d).unwrap();
                let qi = self.grid.intersection_index(q);
                if dist[qi] == u32::MAX {
                    dist[qi] = dp + 1;
                    if q == b {
                        return PathLength::Reachable(dp + 1);
                    }
                    queue.push_back(q);
                }
            }
        }
        PathLength::Unreachable
    }

    /// Serialize to the documented map text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "grid {} {}", self.grid.nx, self.grid.ny).unwrap();
        for e in self.grid.edges() {
            if self.edges.contains(e.id) {
                writeln!(out, "edge {} {} {}", e.a.x, e.a.y, e.direction.letter()).unwrap();
            }
        }
        out
    }

    /// Parse the map text format; inverse of [`MapHypothesis::to_text`].
    pub fn from_text(text: &str) -> Result<MapHypothesis, WorldError> {
        let mut grid = None;
        let mut edges: Option<EdgeSet> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let malformed = |reason: &str| WorldError::MalformedMapText {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            match parts.next() {
                Some("grid") => {
                    let nx: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| malformed("bad nx"))?;
                    let ny: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| malformed("bad ny"))?;
                    let g = GridSpec::new(nx, ny)
                        .map_err(|e| malformed(&e.to_string()))?;
                    edges = Some(EdgeSet::empty(g.edge_count()));
                    grid = Some(g);
                }
                Some("edge") => {
                    let g = grid.ok_or_else(|| malformed("edge before grid line"))?;
                    let x: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| malformed("bad x"))?;
                    let y: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| malformed("bad y"))?;
                    let d = parts
                        .next()
                        .and_then(|s| s.chars().next())
                        .and_then(Direction::from_letter)
                        .ok_or_else(|| malformed("bad direction"))?;
                    let id = g
                        .edge_id(Intersection::new(x, y), d)
                        .ok_or_else(|| malformed("edge off grid"))?;
                    edges.as_mut().unwrap().insert(id);
                }
                Some(other) => {
                    return Err(malformed(&format!("unknown record `{other}`")));
                }
                None => {}
            }
        }
        let grid = grid.ok_or(WorldError::MalformedMapText {
            line: 0,
            reason: "missing grid line".to_string(),
        })?;
        MapHypothesis::from_edges(grid, edges.unwrap())
    }
}

/// All LDPs connected? Empty maps pass vacuously.
pub fn ldp_connected(grid: GridSpec, edges: &EdgeSet) -> bool {
    let all = grid.edges();
    let mut start = None;
    for e in &all {
        if edges.contains(e.id) {
            start = Some(e.a);
            break;
        }
    }
    let Some(start) = start else { return true };
    let n = grid.intersection_count();
    let mut seen = vec![false; n];
    seen[grid.intersection_index(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for d in Direction::ALL {
            let Some(id) = grid.edge_id(p, d) else { continue };
            if !edges.contains(id) {
                continue;
            }
            let q = grid.neighbor(p, d).unwrap();
            let qi = grid.intersection_index(q);
            if !seen[qi] {
                seen[qi] = true;
                queue.push_back(q);
            }
        }
    }
    // Every endpoint of a present edge must have been reached.
    for e in &all {
        if edges.contains(e.id)
            && (!seen[grid.intersection_index(e.a)] || !seen[grid.intersection_index(e.b())]) {
                return false;
            }
    }
    true
}

/// Every consistent, LDP-connected hypothesis, ascending by edge bitmask.
pub fn enumerate_maps(grid: GridSpec, budget: u64) -> Result<Vec<MapHypothesis>, WorldError> {
    enumerate_maps_constrained(grid, budget, &EdgeConstraints::none(grid))
}

/// Enumeration restricted to edge constraints (used for evidence-consistent
/// counting and exhaustive regeneration).
pub fn enumerate_maps_constrained(
    grid: GridSpec,
    budget: u64,
    constraints: &EdgeConstraints,
) -> Result<Vec<MapHypothesis>, WorldError> {
    let e = grid.edge_count();
    if e >= 63 || (1u64 << e) > budget {
        return Err(WorldError::BudgetExceeded { edges: e, budget });
    }
    let mut out = Vec::new();
    for mask in 0..(1u64 << e) {
        let edges = EdgeSet::from_mask(e, mask);
        if !constraints.admits(&edges) {
            continue;
        }
        if ldp_connected(grid, &edges) {
            out.push(MapHypothesis { grid, edges });
        }
    }
    Ok(out)
}

/// Sample one valid hypothesis, deterministically for a given seed.
///
/// With `density_pref` the acceptance weight is triangular in density; the
/// stationary distribution is that weight over all consistent maps. Without
/// it, sampling is uniform over consistent maps.
pub fn sample_map(grid: GridSpec, seed: u64, density_pref: bool) -> MapHypothesis {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_map_with(grid, &mut rng, density_pref)
}

pub fn sample_map_with<R: Rng>(grid: GridSpec, rng: &mut R, density_pref: bool) -> MapHypothesis {
    sample_map_constrained(grid, rng, density_pref, &EdgeConstraints::none(grid), usize::MAX)
        .expect("unconstrained sampling cannot fail")
}

/// Rejection sampling subject to forced edges. `attempt_cap` bounds the
/// number of proposals; `None` is returned when it is exhausted (which for
/// satisfiable constraints at desk scale does not happen in practice).
pub fn sample_map_constrained<R: Rng>(
    grid: GridSpec,
    rng: &mut R,
    density_pref: bool,
    constraints: &EdgeConstraints,
    attempt_cap: usize,
) -> Option<MapHypothesis> {
    if !constraints.is_satisfiable_shape() {
        return None;
    }
    let e = grid.edge_count();
    let mut attempts = 0usize;
    while attempts < attempt_cap {
        attempts += 1;
        let mut edges = EdgeSet::empty(e);
        for i in 0..e {
            let id = EdgeId(i);
            let present = if constraints.forced_present.contains(id) {
                true
            } else if constraints.forced_absent.contains(id) {
                false
            } else {
                rng.random::<bool>()
            };
            edges.set(id, present);
        }
        if !ldp_connected(grid, &edges) {
            continue;
        }
        if density_pref {
            let total = e.max(1) as f64;
            let w = Density(edges.count() as f64 / total).preference_weight();
            if rng.random::<f64>() >= w {
                continue;
            }
        }
        return Some(MapHypothesis { grid, edges });
    }
    None
}
