//! Coarsened decision grids: regions, abstract edges, abstract costs, and
//! the level-switch rule.
//!
//! Level 0 is the base grid (one region per intersection). Each level up
//! merges 2x2 blocks of the finer level's regions, with remainder blocks
//! absorbed at the high-index edges, until a single region covers the
//! grid. An abstract edge between two adjacent regions exists exactly when
//! some base corridor crosses their shared boundary.

use thiserror::Error;

use crate::belief::BeliefState;
use crate::grid::{Direction, GridSpec, Intersection};
use crate::world::{enumerate_maps_constrained, MapHypothesis, WorldError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("regions {a:?} and {b:?} are not adjacent at this level")]
    NotAdjacent { a: (usize, usize), b: (usize, usize) },
    #[error("no abstract route between the task endpoints at this level")]
    Unreachable,
}

/// One level of the region hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbstractionLevel {
    pub level: u32,
    pub grid: GridSpec,
    pub regions_x: usize,
    pub regions_y: usize,
}

/// A region's coordinates at some level.
pub type RegionId = (usize, usize);

impl AbstractionLevel {
    fn new(grid: GridSpec, level: u32) -> AbstractionLevel {
        let block = 1usize << level;
        AbstractionLevel {
            level,
            grid,
            regions_x: grid.nx.div_ceil(block),
            regions_y: grid.ny.div_ceil(block),
        }
    }

    pub fn region_count(&self) -> usize {
        self.regions_x * self.regions_y
    }

    pub fn region_of(&self, p: Intersection) -> RegionId {
        let block = 1usize << self.level;
        (p.x / block, p.y / block)
    }

    /// Half-open intersection ranges covered by a region.
    pub fn region_span(&self, r: RegionId) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let block = 1usize << self.level;
        let x0 = r.0 * block;
        let y0 = r.1 * block;
        (x0..(x0 + block).min(self.grid.nx), y0..(y0 + block).min(self.grid.ny))
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        let rx = self.regions_x;
        (0..self.regions_y).flat_map(move |ry| (0..rx).map(move |x| (x, ry)))
    }

    pub fn region_index(&self, r: RegionId) -> usize {
        r.1 * self.regions_x + r.0
    }

    pub fn adjacent(&self, a: RegionId, b: RegionId) -> bool {
        let dx = a.0.abs_diff(b.0);
        let dy = a.1.abs_diff(b.1);
        dx + dy == 1
    }

    /// Ordered adjacent region pairs: east neighbor, then north neighbor.
    pub fn adjacent_pairs(&self) -> Vec<(RegionId, RegionId)> {
        let mut out = Vec::new();
        for r in self.regions() {
            if r.0 + 1 < self.regions_x {
                out.push((r, (r.0 + 1, r.1)));
            }
            if r.1 + 1 < self.regions_y {
                out.push((r, (r.0, r.1 + 1)));
            }
        }
        out
    }

    /// Base corridor edges crossing the shared boundary of two adjacent
    /// regions, as (intersection, direction) pairs on the `a` side.
    pub fn boundary_edges(
        &self,
        a: RegionId,
        b: RegionId,
    ) -> Result<Vec<(Intersection, Direction)>, HierarchyError> {
        if !self.adjacent(a, b) {
            return Err(HierarchyError::NotAdjacent { a, b });
        }
        // Normalize so `lo` is west/south of `hi`.
        let (lo, hi, dir) = if a.0 + 1 == b.0 && a.1 == b.1 {
            (a, b, Direction::East)
        } else if b.0 + 1 == a.0 && a.1 == b.1 {
            (b, a, Direction::East)
        } else if a.1 + 1 == b.1 && a.0 == b.0 {
            (a, b, Direction::North)
        } else {
            (b, a, Direction::North)
        };
        let (lo_x, lo_y) = self.region_span(lo);
        let _ = self.region_span(hi);
        let mut out = Vec::new();
        match dir {
            Direction::East => {
                let x = lo_x.end - 1;
                for y in lo_y {
                    let p = Intersection::new(x, y);
                    if self.grid.neighbor(p, Direction::East).is_some() {
                        out.push((p, Direction::East));
                    }
                }
            }
            Direction::North => {
                let y = lo_y.end - 1;
                for x in lo_x {
                    let p = Intersection::new(x, y);
                    if self.grid.neighbor(p, Direction::North).is_some() {
                        out.push((p, Direction::North));
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(out)
    }

    /// Default intra-region traversal estimate: the region side length.
    pub fn side_estimate(&self, r: RegionId) -> f64 {
        let (xs, ys) = self.region_span(r);
        xs.len().max(ys.len()) as f64
    }
}

/// Base level up to the single-region level, inclusive.
pub fn build_hierarchy(grid: GridSpec) -> Vec<AbstractionLevel> {
    let mut levels = vec![AbstractionLevel::new(grid, 0)];
    while levels.last().unwrap().region_count() > 1 {
        let next = AbstractionLevel::new(grid, levels.last().unwrap().level + 1);
        levels.push(next);
    }
    levels
}

/// Does any base corridor cross the boundary between `a` and `b`?
pub fn abstract_edge_exists(
    level: &AbstractionLevel,
    a: RegionId,
    b: RegionId,
    base_map: &MapHypothesis,
) -> Result<bool, HierarchyError> {
    let boundary = level.boundary_edges(a, b)?;
    Ok(boundary.iter().any(|(p, d)| base_map.has_corridor(*p, *d)))
}

/// Per-region content summary carried by an abstract map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSummary {
    pub ldp_count: usize,
    /// Whether the region's LDPs are connected using only intra-region
    /// corridors.
    pub internally_connected: bool,
}

/// The abstraction of a base map at one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractMap {
    pub level: u32,
    pub regions_x: usize,
    pub regions_y: usize,
    /// Presence bit per `adjacent_pairs()` entry.
    pub edge_bits: Vec<bool>,
    pub summaries: Vec<RegionSummary>,
}

/// Project a base map onto a level of the hierarchy.
pub fn abstraction_of(base_map: &MapHypothesis, level: &AbstractionLevel) -> AbstractMap {
    let pairs = level.adjacent_pairs();
    let edge_bits = pairs
        .iter()
        .map(|(a, b)| abstract_edge_exists(level, *a, *b, base_map).unwrap())
        .collect();
    let mut summaries = Vec::with_capacity(level.region_count());
    for r in level.regions() {
        let (xs, ys) = level.region_span(r);
        let mut ldps = Vec::new();
        for y in ys.clone() {
            for x in xs.clone() {
                let p = Intersection::new(x, y);
                if base_map.is_ldp(p) {
                    ldps.push(p);
                }
            }
        }
        // Union-find over intra-region corridors only.
        let mut parent: Vec<usize> = (0..ldps.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, p) in ldps.iter().enumerate() {
            for d in [Direction::East, Direction::North] {
                if !base_map.has_corridor(*p, d) {
                    continue;
                }
                let q = base_map.grid().neighbor(*p, d).unwrap();
                if let Some(j) = ldps.iter().position(|l| *l == q) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
        let roots: std::collections::BTreeSet<usize> =
            (0..ldps.len()).map(|i| find(&mut parent, i)).collect();
        summaries.push(RegionSummary {
            ldp_count: ldps.len(),
            internally_connected: roots.len() <= 1,
        });
    }
    AbstractMap {
        level: level.level,
        regions_x: level.regions_x,
        regions_y: level.regions_y,
        edge_bits,
        summaries,
    }
}

impl AbstractMap {
    fn pair_index(&self, level: &AbstractionLevel, a: RegionId, b: RegionId) -> Option<usize> {
        level.adjacent_pairs().iter().position(|(x, y)| (*x, *y) == (a, b) || (*x, *y) == (b, a))
    }

    pub fn has_abstract_edge(&self, level: &AbstractionLevel, a: RegionId, b: RegionId) -> bool {
        self.pair_index(level, a, b).map(|i| self.edge_bits[i]).unwrap_or(false)
    }
}

/// Intra-region traversal estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionEstimate {
    /// Region side length (the default).
    SideLength,
    Constant(f64),
}

impl RegionEstimate {
    fn of(&self, level: &AbstractionLevel, r: RegionId) -> f64 {
        match self {
            RegionEstimate::SideLength => level.side_estimate(r),
            RegionEstimate::Constant(c) => *c,
        }
    }
}

/// Cheapest abstract route between two base intersections: one unit per
/// abstract edge plus the traversal estimate of every region entered. An
/// intra-region task costs just the region's estimate.
pub fn abstract_cost(
    origin: Intersection,
    destination: Intersection,
    abstract_map: &AbstractMap,
    level: &AbstractionLevel,
    estimate: RegionEstimate,
) -> Result<f64, HierarchyError> {
    let start = level.region_of(origin);
    let goal = level.region_of(destination);
    if start == goal {
        return Ok(estimate.of(level, start));
    }
    // Dijkstra over the region graph; entering region r costs 1 + est(r).
    let n = level.region_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut visited = vec![false; n];
    dist[level.region_index(start)] = 0.0;
    loop {
        let mut u = None;
        let mut best = f64::INFINITY;
        for r in level.regions() {
            let i = level.region_index(r);
            if !visited[i] && dist[i] < best {
                best = dist[i];
                u = Some(r);
            }
        }
        let Some(u) = u else { break };
        let ui = level.region_index(u);
        visited[ui] = true;
        if u == goal {
            return Ok(dist[ui]);
        }
        let neighbors = [
            (u.0 + 1, u.1),
            (u.0.wrapping_sub(1), u.1),
            (u.0, u.1 + 1),
            (u.0, u.1.wrapping_sub(1)),
        ];
        for v in neighbors {
            if v.0 >= level.regions_x || v.1 >= level.regions_y {
                continue;
            }
            if !abstract_map.has_abstract_edge(level, u, v) {
                continue;
            }
            let vi = level.region_index(v);
            let cost = dist[ui] + 1.0 + estimate.of(level, v);
            if cost < dist[vi] {
                dist[vi] = cost;
            }
        }
    }
    Err(HierarchyError::Unreachable)
}

/// Abstract-edge statuses forced by certain base-edge knowledge: present
/// when a known corridor crosses the boundary, absent when every boundary
/// edge is known absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbstractEdgeStatus {
    ForcedPresent,
    ForcedAbsent,
    Undetermined,
}

/// Classify each abstract edge of a level from base edge constraints.
pub fn abstract_edge_statuses(
    level: &AbstractionLevel,
    constraints: &crate::world::EdgeConstraints,
) -> Vec<AbstractEdgeStatus> {
    level
        .adjacent_pairs()
        .iter()
        .map(|(a, b)| {
            let boundary = level.boundary_edges(*a, *b).unwrap();
            let grid = level.grid;
            let mut any_present = false;
            let mut all_absent = !boundary.is_empty();
            for (p, d) in &boundary {
                let id = grid.edge_id(*p, *d).unwrap();
                if constraints.forced_present.contains(id) {
                    any_present = true;
                }
                if !constraints.forced_absent.contains(id) {
                    all_absent = false;
                }
            }
            if any_present {
                AbstractEdgeStatus::ForcedPresent
            } else if all_absent {
                AbstractEdgeStatus::ForcedAbsent
            } else {
                AbstractEdgeStatus::Undetermined
            }
        })
        .collect()
}

/// Is an abstract map consistent with evidence-forced abstract edges?
pub fn abstract_consistent(
    abstract_map: &AbstractMap,
    statuses: &[AbstractEdgeStatus],
) -> bool {
    abstract_map.edge_bits.iter().zip(statuses).all(|(bit, st)| match st {
        AbstractEdgeStatus::ForcedPresent => *bit,
        AbstractEdgeStatus::ForcedAbsent => !*bit,
        AbstractEdgeStatus::Undetermined => true,
    })
}

/// Estimated number of hypotheses at the next more detailed level that
/// remain consistent with the belief's evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextLevelCount {
    pub count: u128,
    pub exact: bool,
}

/// Count hypotheses for `next_level` (one step more detailed than the
/// active level). Exact under the enumeration budget by projecting every
/// consistent base map; otherwise a product-form upper bound.
pub fn next_level_hypothesis_count(belief: &BeliefState, next_level: &AbstractionLevel) -> NextLevelCount {
    let Some(constraints) = belief.edge_constraints() else {
        return NextLevelCount { count: 0, exact: true };
    };
    if next_level.level == 0 {
        let c = belief.consistent_map_count();
        return NextLevelCount { count: c.count, exact: c.exact };
    }
    match enumerate_maps_constrained(belief.grid(), belief.enumeration_budget(), &constraints) {
        Ok(maps) => {
            let mut distinct: Vec<AbstractMap> = Vec::new();
            for m in &maps {
                let a = abstraction_of(m, next_level);
                if !distinct.contains(&a) {
                    distinct.push(a);
                }
            }
            NextLevelCount { count: distinct.len() as u128, exact: true }
        }
        Err(WorldError::BudgetExceeded { .. }) => {
            let statuses = abstract_edge_statuses(next_level, &constraints);
            let free = statuses
                .iter()
                .filter(|s| matches!(s, AbstractEdgeStatus::Undetermined))
                .count();
            NextLevelCount { count: 1u128 << free.min(127), exact: false }
        }
        Err(_) => NextLevelCount { count: 0, exact: true },
    }
}

/// The level-switch rule: descend while the next more detailed level's
/// consistent-hypothesis count is within the threshold.
pub fn should_descend(
    active: &AbstractionLevel,
    next_detailed: &AbstractionLevel,
    belief: &BeliefState,
    threshold: u128,
) -> bool {
    debug_assert!(next_detailed.level + 1 == active.level);
    let c = next_level_hypothesis_count(belief, next_detailed);
    c.count <= threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BeliefState, HypothesisSet};
    use crate::sensing::{scan, Evidence, NoiseModel};
    use crate::world::{enumerate_maps, sample_map, DEFAULT_ENUMERATION_BUDGET};

    fn grid(nx: usize, ny: usize) -> GridSpec {
        GridSpec::new(nx, ny).unwrap()
    }

    #[test]
    fn hierarchy_shape_4x4() {
        let levels = build_hierarchy(grid(4, 4));
        let dims: Vec<(usize, usize)> =
            levels.iter().map(|l| (l.regions_x, l.regions_y)).collect();
        assert_eq!(dims, vec![(4, 4), (2, 2), (1, 1)]);
        // Power-of-two depth: ceil(log2(4)) + 1.
        assert_eq!(levels.len(), 3);
    }

    #[test]
    fn hierarchy_shape_1x1_and_5x5() {
        assert_eq!(build_hierarchy(grid(1, 1)).len(), 1);
        let levels = build_hierarchy(grid(5, 5));
        let dims: Vec<(usize, usize)> =
            levels.iter().map(|l| (l.regions_x, l.regions_y)).collect();
        assert_eq!(dims, vec![(5, 5), (3, 3), (2, 2), (1, 1)]);
    }

    #[test]
    fn hierarchy_depth_on_power_of_two_grids() {
        for (n, depth) in [(1usize, 1usize), (2, 2), (4, 3), (8, 4)] {
            assert_eq!(build_hierarchy(grid(n, n)).len(), depth, "grid {n}x{n}");
        }
    }

    #[test]
    fn partition_is_exact_with_remainders() {
        for (nx, ny) in [(5, 5), (3, 7), (6, 2)] {
            let g = grid(nx, ny);
            for level in build_hierarchy(g) {
                let mut covered = vec![false; g.intersection_count()];
                for r in level.regions() {
                    let (xs, ys) = level.region_span(r);
                    for y in ys.clone() {
                        for x in xs.clone() {
                            let idx = g.intersection_index(Intersection::new(x, y));
                            assert!(!covered[idx], "overlap at ({x},{y}) level {}", level.level);
                            covered[idx] = true;
                            assert_eq!(level.region_of(Intersection::new(x, y)), r);
                        }
                    }
                }
                assert!(covered.iter().all(|c| *c), "level {} misses cells", level.level);
            }
        }
    }

    #[test]
    fn abstract_edges_match_boundary_scan_on_random_maps() {
        let g = grid(4, 4);
        let levels = build_hierarchy(g);
        let level = &levels[1];
        for seed in 0..200 {
            let m = sample_map(g, seed, true);
            for (a, b) in level.adjacent_pairs() {
                // Independent check: scan every boundary-crossing base
                // edge directly.
                let expected = level
                    .boundary_edges(a, b)
                    .unwrap()
                    .iter()
                    .any(|(p, d)| m.has_corridor(*p, *d));
                assert_eq!(abstract_edge_exists(level, a, b, &m).unwrap(), expected);
            }
        }
    }

    #[test]
    fn non_adjacent_regions_error() {
        let g = grid(4, 4);
        let level = &build_hierarchy(g)[1];
        let err = abstract_edge_exists(level, (0, 0), (1, 1), &sample_map(g, 1, true));
        assert_eq!(err.unwrap_err(), HierarchyError::NotAdjacent { a: (0, 0), b: (1, 1) });
    }

    #[test]
    fn abstract_edge_monotone_under_edge_addition() {
        let g = grid(4, 4);
        let level = &build_hierarchy(g)[1];
        let all_edges = crate::grid::EdgeSet::full(g.edge_count());
        let full = crate::world::MapHypothesis::from_edges(g, all_edges).unwrap();
        for seed in 0..50 {
            let m = sample_map(g, seed, true);
            for (a, b) in level.adjacent_pairs() {
                if abstract_edge_exists(level, a, b, &m).unwrap() {
                    assert!(abstract_edge_exists(level, a, b, &full).unwrap());
                }
            }
        }
    }

    #[test]
    fn abstract_cost_basic_cases() {
        let g = grid(4, 4);
        let level = &build_hierarchy(g)[1]; // 2x2 regions of side 2
        let all_edges = crate::grid::EdgeSet::full(g.edge_count());
        let full = crate::world::MapHypothesis::from_edges(g, all_edges).unwrap();
        let am = abstraction_of(&full, level);
        // Same region: just the estimate (side 2).
        let c = abstract_cost(
            Intersection::new(0, 0),
            Intersection::new(1, 1),
            &am,
            level,
            RegionEstimate::SideLength,
        )
        .unwrap();
        assert_eq!(c, 2.0);
        // Adjacent regions: edge + estimate = 1 + 2.
        let c = abstract_cost(
            Intersection::new(0, 0),
            Intersection::new(3, 0),
            &am,
            level,
            RegionEstimate::SideLength,
        )
        .unwrap();
        assert_eq!(c, 3.0);
    }

    #[test]
    fn abstract_cost_unreachable() {
        let g = grid(4, 4);
        let level = &build_hierarchy(g)[1];
        let empty = crate::world::MapHypothesis::empty(g);
        let am = abstraction_of(&empty, level);
        let err = abstract_cost(
            Intersection::new(0, 0),
            Intersection::new(3, 3),
            &am,
            level,
            RegionEstimate::SideLength,
        );
        assert_eq!(err.unwrap_err(), HierarchyError::Unreachable);
    }

    #[test]
    fn true_map_abstraction_survives_noiseless_evidence() {
        let g = grid(4, 4);
        let levels = build_hierarchy(g);
        for seed in 0..50 {
            let world = sample_map(g, seed, true);
            let mut belief =
                BeliefState::init(g, 3, NoiseModel::NOISELESS, seed, DEFAULT_ENUMERATION_BUDGET)
                    .unwrap();
            // Noiseless scans of a few junctions plus some edge probes.
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng;
            use rand_chacha::rand_core::SeedableRng;
            for p in g.intersections().take(5) {
                let readings = scan(&world, p, &NoiseModel::NOISELESS, 0, &mut rng);
                let items: Vec<Evidence> = readings.into_iter().map(Evidence::Sensor).collect();
                belief = match belief.update_batch(&items) {
                    Ok(b) => b,
                    Err(_) => belief.regenerate(seed + 1).unwrap(),
                };
            }
            for e in g.edges().into_iter().take(6) {
                if rng.random::<bool>() {
                    belief = belief
                        .update_edge(e.a, e.direction, world.has_edge(e.id), 99)
                        .unwrap_or(belief);
                }
            }
            let constraints = belief.edge_constraints().expect("noiseless evidence is coherent");
            for level in &levels[1..] {
                let statuses = abstract_edge_statuses(level, &constraints);
                let am = abstraction_of(&world, level);
                assert!(abstract_consistent(&am, &statuses), "seed {seed} level {}", level.level);
            }
        }
    }

    #[test]
    fn descend_rule_with_threshold() {
        let g = grid(2, 2);
        let levels = build_hierarchy(g);
        assert_eq!(levels.len(), 2);
        let maps = enumerate_maps(g, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let world = maps.last().unwrap().clone();
        let set = HypothesisSet::new(maps.clone(), true);
        let mut belief = BeliefState::from_parts(
            g,
            NoiseModel::NOISELESS,
            set,
            vec![1.0 / 15.0; 15],
            DEFAULT_ENUMERATION_BUDGET,
        )
        .unwrap();
        // Infinite-threshold always descends.
        assert!(should_descend(&levels[1], &levels[0], &belief, u128::MAX));
        // With no evidence there are 14 consistent maps; threshold 5 says no.
        assert!(!should_descend(&levels[1], &levels[0], &belief, 5));
        // Pin three junctions; every edge becomes determined, so exactly
        // one map stays consistent.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        use rand_chacha::rand_core::SeedableRng;
        for p in g.intersections().take(3) {
            let readings = scan(&world, p, &NoiseModel::NOISELESS, 0, &mut rng);
            let items: Vec<Evidence> = readings.into_iter().map(Evidence::Sensor).collect();
            belief = belief.update_batch(&items).unwrap();
        }
        let c = belief.consistent_map_count();
        assert!(c.exact && c.count <= 4, "count {c:?}");
        assert!(should_descend(&levels[1], &levels[0], &belief, 5));
    }
}
