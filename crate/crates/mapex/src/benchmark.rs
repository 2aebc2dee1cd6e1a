//! The clique-cost benchmark and the navigation-method comparison.
//!
//! The benchmark sweeps hypothesis-set sizes against exploration lengths
//! on a fixed grid. Per run it samples a true world, a random visit order
//! of the intersections, and a fresh hypothesis set; "explored"
//! intersections have their thirty-two sensor nodes instantiated from a
//! noiseless scan and their junction node entered as evidence, which is
//! what lets explored territory drop out of the triangulation. Exploration
//! lengths are nested per run (length L explores the first L entries of
//! the run's visit order) and the same worlds and orders are reused across
//! hypothesis sizes, so the cost trends are paired comparisons rather than
//! noise.
//!
//! Wall-clock update times are informational; re-runs reproduce every
//! other column byte for byte.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::BeliefState;
use crate::explorer::{navigate, EdgeKnowledge, NavigationMethod, NavigationOutcome};
use crate::grid::{GridSpec, Intersection};
use crate::inference::{build_grid_network, propagate, GridModelConfig, Structure};
use crate::scenario::Scenario;
use crate::sensing::{Evidence, NoiseModel};
use crate::world::{sample_map_with, MapHypothesis};

/// Sweep configuration; the defaults match the reference experiment.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub grid: GridSpec,
    pub hypothesis_sizes: Vec<usize>,
    pub exploration_lengths: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    /// Record wall-clock propagation time. When false the time column is
    /// zero and output files are byte-reproducible.
    pub measure_time: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            grid: GridSpec::new(4, 4).expect("4x4 grid"),
            hypothesis_sizes: vec![10, 20, 30],
            exploration_lengths: vec![4, 6, 8, 10],
            runs: 10,
            seed: 0,
            measure_time: true,
        }
    }
}

/// One averaged cell of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub hypothesis_size: usize,
    pub exploration_length: usize,
    pub update_time_ms: f64,
    pub largest_clique_cost: f64,
}

/// Run the sweep; rows come out in (hypothesis_size, exploration_length)
/// order.
pub fn benchmark_clique_costs(cfg: &BenchmarkConfig) -> Vec<BenchmarkRow> {
    let grid = cfg.grid;
    let noise = NoiseModel::DEFAULT;

    // Paired randomness: per run, one world and one visit order shared by
    // every cell; hypothesis sets depend on (run, size) only.
    let mut worlds = Vec::with_capacity(cfg.runs);
    let mut orders: Vec<Vec<Intersection>> = Vec::with_capacity(cfg.runs);
    for r in 0..cfg.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
        rng.set_stream(1);
        worlds.push(sample_map_with(grid, &mut rng, true));
        let mut order: Vec<Intersection> = grid.intersections().collect();
        order.shuffle(&mut rng);
        orders.push(order);
    }

    let mut rows = Vec::new();
    for &k in &cfg.hypothesis_sizes {
        let mut sets: Vec<Vec<MapHypothesis>> = Vec::with_capacity(cfg.runs);
        for r in 0..cfg.runs {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            rng.set_stream(2 + k as u64);
            let mut maps = Vec::with_capacity(k);
            while maps.len() < k {
                let m = sample_map_with(grid, &mut rng, true);
                if !maps.contains(&m) {
                    maps.push(m);
                }
            }
            sets.push(maps);
        }
        for &len in &cfg.exploration_lengths {
            let mut cost_sum = 0.0;
            let mut time_sum = 0.0;
            for r in 0..cfg.runs {
                let world = &worlds[r];
                let explored = &orders[r][..len.min(orders[r].len())];
                let maps = &sets[r];
                let model = GridModelConfig {
                    grid,
                    maps,
                    noise,
                    structure: Structure::Multiply,
                };
                // Noiseless scans of the explored intersections.
                let mut scan_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
                let mut items = Vec::new();
                for p in explored {
                    for reading in
                        crate::sensing::scan(world, *p, &NoiseModel::NOISELESS, 0, &mut scan_rng)
                    {
                        items.push(Evidence::Sensor(reading));
                    }
                }
                let mut gn = build_grid_network(&model, &items);
                // The sensors pin the junction classifications; enter them
                // as evidence so explored junctions leave the graph.
                for p in explored {
                    let pi = grid.intersection_index(*p);
                    let state = gn.j_state_index(pi, world.junction_type(*p));
                    gn.evidence.insert(gn.j[&pi], state);
                }
                let t0 = Instant::now();
                let tree = propagate(&gn.net, &gn.evidence).expect("benchmark evidence is coherent");
                let dt = t0.elapsed().as_secs_f64() * 1e3;
                cost_sum += tree.largest_clique_cost() as f64;
                if cfg.measure_time {
                    time_sum += dt;
                }
            }
            rows.push(BenchmarkRow {
                hypothesis_size: k,
                exploration_length: len,
                update_time_ms: time_sum / cfg.runs as f64,
                largest_clique_cost: cost_sum / cfg.runs as f64,
            });
        }
    }
    rows
}

/// CSV with the four benchmark columns.
pub fn benchmark_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("hypothesis_size,exploration_length,update_time_ms,largest_clique_cost\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{:.3},{:.1}",
            r.hypothesis_size, r.exploration_length, r.update_time_ms, r.largest_clique_cost
        )
        .unwrap();
    }
    out
}

/// Comparison results for one navigation method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: NavigationMethod,
    pub estimated_mean_cost: f64,
    pub estimated_std_dev: f64,
    pub realized_mean_cost: f64,
    pub realized_success_rate: f64,
    pub mean_edges_learned: f64,
}

/// Estimate and realize costs for each method under a scenario's grid,
/// noise, and task list.
pub fn compare_methods(
    scenario: &Scenario,
    methods: &[NavigationMethod],
    trials: usize,
) -> Result<Vec<MethodRow>, crate::scenario::ConfigError> {
    scenario.validate()?;
    let grid = scenario.grid_spec().expect("validated");
    let noise = scenario.noise_model().expect("validated");
    let tasks = scenario.task_specs();
    assert!(trials >= 1);

    let mut rows = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let mut est_mean = 0.0;
        let mut est_dev = 0.0;
        let mut realized = 0.0;
        let mut successes = 0usize;
        let mut attempts_runs = 0usize;
        let mut edges = 0.0;
        for t in 0..trials {
            let mut master =
                ChaCha8Rng::seed_from_u64(scenario.seed.wrapping_add(t as u64));
            master.set_stream(100 + mi as u64);
            let world_seed: u64 = master.random();
            let belief_seed: u64 = master.random();
            let nav_seed: u64 = master.random();

            let mut world_rng = ChaCha8Rng::seed_from_u64(world_seed);
            let world = sample_map_with(grid, &mut world_rng, true);
            let belief = BeliefState::init(
                grid,
                scenario.hypotheses,
                noise,
                belief_seed,
                scenario.enumeration_budget,
            )
            .expect("validated hypothesis count");

            if let Some(first) = tasks.first() {
                let mut est_rng = ChaCha8Rng::seed_from_u64(nav_seed ^ 0xe57);
                let est = crate::explorer::estimate_method_cost(method, &belief, first, 8, &mut est_rng);
                est_mean += est.mean;
                est_dev += est.std_dev;
            }

            let mut nav_rng = ChaCha8Rng::seed_from_u64(nav_seed);
            let mut knowledge = EdgeKnowledge::unknown(grid);
            let mut bel = belief;
            let mut position = scenario.start_position().unwrap_or(Intersection::new(0, 0));
            for task in &tasks {
                for goal in [task.origin, task.destination] {
                    if position == goal {
                        continue;
                    }
                    let run = navigate(
                        method,
                        position,
                        goal,
                        &world,
                        knowledge,
                        bel,
                        0,
                        &mut nav_rng,
                    );
                    realized += run.attempts as f64;
                    edges += run.edges_learned as f64;
                    attempts_runs += 1;
                    if run.outcome == NavigationOutcome::ReachedGoal {
                        successes += 1;
                        position = goal;
                    }
                    knowledge = run.knowledge;
                    bel = run.belief;
                }
            }
        }
        let denom = trials as f64;
        rows.push(MethodRow {
            method,
            estimated_mean_cost: est_mean / denom,
            estimated_std_dev: est_dev / denom,
            realized_mean_cost: realized / denom,
            realized_success_rate: if attempts_runs == 0 {
                1.0
            } else {
                successes as f64 / attempts_runs as f64
            },
            mean_edges_learned: edges / denom,
        })
    }
    Ok(rows)
}

/// CSV for the method comparison.
pub fn compare_csv(rows: &[MethodRow]) -> String {
    let mut out = String::from(
        "method,estimated_mean_cost,estimated_std_dev,realized_mean_cost,realized_success_rate,mean_edges_learned\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.method.name(),
            r.estimated_mean_cost,
            r.estimated_std_dev,
            r.realized_mean_cost,
            r.realized_success_rate,
            r.mean_edges_learned
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_benchmark_runs_and_orders_rows() {
        let cfg = BenchmarkConfig {
            grid: GridSpec::new(3, 3).unwrap(),
            hypothesis_sizes: vec![2, 4],
            exploration_lengths: vec![2, 4],
            runs: 2,
            seed: 7,
            measure_time: false,
        };
        let rows = benchmark_clique_costs(&cfg);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].hypothesis_size, 2);
        assert_eq!(rows[0].exploration_length, 2);
        assert_eq!(rows[3].hypothesis_size, 4);
        // Larger hypothesis node, same run pairing: cost must not fall.
        assert!(rows[2].largest_clique_cost >= rows[0].largest_clique_cost);
        let csv = benchmark_csv(&rows);
        assert!(csv.starts_with(
            "hypothesis_size,exploration_length,update_time_ms,largest_clique_cost\n"
        ));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn benchmark_without_timing_is_deterministic() {
        let cfg = BenchmarkConfig {
            grid: GridSpec::new(3, 3).unwrap(),
            hypothesis_sizes: vec![3],
            exploration_lengths: vec![2],
            runs: 2,
            seed: 9,
            measure_time: false,
        };
        let a = benchmark_csv(&benchmark_clique_costs(&cfg));
        let b = benchmark_csv(&benchmark_clique_costs(&cfg));
        assert_eq!(a, b);
    }

    #[test]
    fn full_exploration_collapses_to_hypothesis_dominated_cost() {
        let grid = GridSpec::new(3, 3).unwrap();
        let cfg = BenchmarkConfig {
            grid,
            hypothesis_sizes: vec![6],
            exploration_lengths: vec![0, 9],
            runs: 2,
            seed: 3,
            measure_time: false,
        };
        let rows = benchmark_clique_costs(&cfg);
        // With every junction observed the biggest clique is the H node
        // with one junction child at most: cost <= (K+1) * max junction
        // cardinality.
        assert!(rows[1].largest_clique_cost <= (7 * 16) as f64);
        assert!(rows[0].largest_clique_cost > rows[1].largest_clique_cost);
    }

    #[test]
    fn round_trips_rank_methods_as_expected() {
        // Over fifty seeded worlds with an out-and-back journey each, the
        // weighted path is cheaper than a random walk, and the
        // known-avoiding variant learns more edges than the weighted path
        // (its down-weighting of known corridors only matters once some
        // corridors are known, hence the return leg).
        use crate::belief::BeliefState;
        use crate::explorer::navigate;
        use crate::sensing::NoiseModel;
        use crate::world::{sample_map, DEFAULT_ENUMERATION_BUDGET};

        let g = GridSpec::new(3, 3).unwrap();
        let mut edges = std::collections::BTreeMap::new();
        let mut attempts = std::collections::BTreeMap::new();
        for seed in 0..50u64 {
            let world = sample_map(g, 90_000 + seed, true);
            let ldps = world.ldps();
            if ldps.len() < 2 {
                continue;
            }
            let (a, b) = (ldps[0], *ldps.last().unwrap());
            for method in [
                NavigationMethod::WeightedPath,
                NavigationMethod::AvoidKnown,
                NavigationMethod::RandomWalk,
            ] {
                let belief =
                    BeliefState::init(g, 5, NoiseModel::NOISELESS, seed, DEFAULT_ENUMERATION_BUDGET)
                        .unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let out = navigate(method, a, b, &world, EdgeKnowledge::unknown(g), belief, 0, &mut rng);
                let back =
                    navigate(method, b, a, &world, out.knowledge, out.belief, out.attempts, &mut rng);
                *edges.entry(method.name()).or_insert(0u64) +=
                    out.edges_learned + back.edges_learned;
                *attempts.entry(method.name()).or_insert(0u64) += out.attempts + back.attempts;
            }
        }
        assert!(
            attempts["weighted_path"] <= attempts["random_walk"],
            "weighted {} vs random {}",
            attempts["weighted_path"],
            attempts["random_walk"]
        );
        assert!(
            edges["avoid_known"] >= edges["weighted_path"],
            "avoid {} vs weighted {}",
            edges["avoid_known"],
            edges["weighted_path"]
        );
    }

    #[test]
    fn compare_methods_reports_each_method() {
        use crate::scenario::{GridConfig, TaskConfig};
        let scenario = Scenario {
            seed: 5,
            grid: GridConfig { nx: 3, ny: 3 },
            hypotheses: 4,
            noise: Default::default(),
            structure: "multiply".into(),
            method: "weighted_path".into(),
            hierarchy: Default::default(),
            time_scale: Default::default(),
            enumeration_budget: crate::world::DEFAULT_ENUMERATION_BUDGET,
            start: Some([0, 0]),
            task_draws: None,
            tasks: vec![TaskConfig {
                id: 0,
                origin: [0, 0],
                destination: [2, 2],
                expected_count: 1.0,
            }],
        };
        let rows = compare_methods(
            &scenario,
            &[NavigationMethod::WeightedPath, NavigationMethod::RandomWalk],
            3,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        let csv = compare_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("weighted_path"));
        assert!(csv.contains("random_walk"));
    }
}
