//! Shared oracle code for integration tests. Everything here recomputes
//! results from first principles (explicit joint enumeration,
//! Floyd-Warshall paths) so it shares no algorithmic path with the crate.
#![allow(dead_code)] // each test target uses a different subset

use mapex::grid::{Direction, GridSpec, Intersection};
use mapex::sensing::{geometry_features, Evidence, NoiseModel};
use mapex::world::{JunctionType, MapHypothesis};

/// All-pairs shortest path lengths over the edges present in BOTH maps,
/// by Floyd-Warshall (the crate uses BFS, so this is an independent route).
pub fn oracle_intersection_distances(
    plan: &MapHypothesis,
    true_map: &MapHypothesis,
) -> Vec<Vec<f64>> {
    let grid = plan.grid();
    let n = grid.intersection_count();
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in grid.edges() {
        if plan.has_edge(e.id) && true_map.has_edge(e.id) {
            let a = grid.intersection_index(e.a);
            let b = grid.intersection_index(e.b());
            dist[a][b] = 1.0;
            dist[b][a] = 1.0;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let relaxed = dist[i][k] + dist[k][j];
                if relaxed < dist[i][j] {
                    dist[i][j] = relaxed;
                }
            }
        }
    }
    dist
}

/// Shortest-path cost with the penalty fallback, oracle edition.
pub fn oracle_cost(
    origin: Intersection,
    destination: Intersection,
    plan: &MapHypothesis,
    true_map: &MapHypothesis,
) -> f64 {
    let grid = plan.grid();
    let d = oracle_intersection_distances(plan, true_map);
    let v = d[grid.intersection_index(origin)][grid.intersection_index(destination)];
    if v.is_finite() {
        v
    } else {
        (2 * grid.nx * grid.ny) as f64
    }
}

/// Valid junction types at an intersection.
pub fn valid_types(grid: GridSpec, p: Intersection) -> Vec<JunctionType> {
    grid.valid_directions(p).subsets().map(JunctionType::new).collect()
}

/// Likelihood of one evidence item under an explicit junction assignment,
/// with corridor semantics (a corridor is real only when both ends agree).
pub fn assignment_likelihood(
    grid: GridSpec,
    assignment: &dyn Fn(Intersection) -> JunctionType,
    item: &Evidence,
    noise: &NoiseModel,
) -> f64 {
    match item {
        Evidence::Sensor(r) => {
            let det = r.detector;
            let x = match det.wedge.cardinal_direction() {
                Some(d) => {
                    let corridor = match grid.neighbor(r.location, d) {
                        Some(q) => {
                            assignment(r.location).directions.contains(d)
                                && assignment(q).directions.contains(d.opposite())
                        }
                        None => false,
                    };
                    match det.feature {
                        mapex::sensing::Feature::Opening => corridor,
                        mapex::sensing::Feature::FlatWall => !corridor,
                        _ => false,
                    }
                }
                None => geometry_features(assignment(r.location)).truth(det),
            };
            noise.likelihood(x, r.result)
        }
        Evidence::Edge { from, direction, present, .. } => {
            let corridor = match grid.neighbor(*from, *direction) {
                Some(q) => {
                    assignment(*from).directions.contains(*direction)
                        && assignment(q).directions.contains(direction.opposite())
                }
                None => false,
            };
            if corridor == *present {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Posterior over K maps plus NOTA by full joint enumeration: maps carry
/// their own junction assignments; NOTA sums over every per-junction
/// uniform assignment of valid types.
pub fn brute_force_posterior(
    grid: GridSpec,
    maps: &[MapHypothesis],
    prior: &[f64],
    noise: &NoiseModel,
    evidence: &[Evidence],
) -> Option<Vec<f64>> {
    assert_eq!(prior.len(), maps.len() + 1);
    let mut weights = Vec::with_capacity(prior.len());
    for (k, map) in maps.iter().enumerate() {
        let assignment = |p: Intersection| map.junction_type(p);
        let lik: f64 = evidence
            .iter()
            .map(|item| assignment_likelihood(grid, &assignment, item, noise))
            .product();
        weights.push(prior[k] * lik);
    }

    // NOTA: enumerate the joint assignment space.
    let points: Vec<Intersection> = grid.intersections().collect();
    let spaces: Vec<Vec<JunctionType>> =
        points.iter().map(|p| valid_types(grid, *p)).collect();
    let total: usize = spaces.iter().map(|s| s.len()).product();
    assert!(total <= 1 << 20, "assignment space too large for the oracle");
    let mut nota_lik = 0.0f64;
    let mut digits = vec![0usize; points.len()];
    for _ in 0..total {
        let assignment = |p: Intersection| {
            let idx = points.iter().position(|q| *q == p).unwrap();
            spaces[idx][digits[idx]]
        };
        let mut w = 1.0f64;
        for (i, s) in spaces.iter().enumerate() {
            let _ = i;
            w /= s.len() as f64;
        }
        for item in evidence {
            w *= assignment_likelihood(grid, &assignment, item, noise);
            if w == 0.0 {
                break;
            }
        }
        nota_lik += w;
        for d in (0..digits.len()).rev() {
            digits[d] += 1;
            if digits[d] < spaces[d].len() {
                break;
            }
            digits[d] = 0;
        }
    }
    weights.push(prior[maps.len()] * nota_lik);

    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    Some(weights.into_iter().map(|w| w / sum).collect())
}

/// Convenience: deterministic distinct map sampling for test setups.
pub fn distinct_maps(grid: GridSpec, n: usize, seed: u64) -> Vec<MapHypothesis> {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<MapHypothesis> = Vec::with_capacity(n);
    while out.len() < n {
        let m = mapex::world::sample_map_with(grid, &mut rng, true);
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// Direction helper for readable test setup.
pub fn dir(letter: char) -> Direction {
    Direction::from_letter(letter).unwrap()
}
