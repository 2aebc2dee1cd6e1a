//! Sequential belief updates against full joint enumeration.

mod common;

use common::{brute_force_posterior, distinct_maps};
use mapex::belief::{BeliefState, HypothesisSet};
use mapex::grid::{GridSpec, Intersection};
use mapex::sensing::{scan, Evidence, NoiseModel};
use mapex::world::{sample_map, DEFAULT_ENUMERATION_BUDGET};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn belief_with(grid: GridSpec, maps: Vec<mapex::world::MapHypothesis>, noise: NoiseModel) -> BeliefState {
    let n = maps.len() + 1;
    BeliefState::from_parts(
        grid,
        noise,
        HypothesisSet::new(maps, false),
        vec![1.0 / n as f64; n],
        DEFAULT_ENUMERATION_BUDGET,
    )
    .unwrap()
}

#[test]
fn one_noisy_reading_matches_joint_enumeration_to_1e12() {
    let grid = GridSpec::new(2, 2).unwrap();
    let noise = NoiseModel::new(0.1, 0.05).unwrap();
    let world = sample_map(grid, 100, true);
    for seed in 0..10 {
        let maps = distinct_maps(grid, 3, seed);
        let belief = belief_with(grid, maps.clone(), noise);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reading = scan(&world, Intersection::new(0, 0), &noise, 0, &mut rng)[7];
        let after = belief.update(reading).unwrap();
        let prior = vec![0.25; 4];
        let oracle = brute_force_posterior(
            grid,
            &maps,
            &prior,
            &noise,
            &[Evidence::Sensor(reading)],
        )
        .unwrap();
        for (got, want) in after.probs().iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-12, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn long_mixed_evidence_matches_joint_enumeration() {
    let grid = GridSpec::new(2, 2).unwrap();
    for (seed, fn_rate, fp_rate) in [(0u64, 0.1, 0.05), (1, 0.3, 0.2), (2, 0.0, 0.0)] {
        let noise = NoiseModel::new(fn_rate, fp_rate).unwrap();
        let world = sample_map(grid, 200 + seed, true);
        let maps = distinct_maps(grid, 4, 300 + seed);
        let mut belief = belief_with(grid, maps.clone(), noise);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut evidence: Vec<Evidence> = Vec::new();
        for (i, p) in grid.intersections().enumerate() {
            for r in scan(&world, p, &noise, i as u64, &mut rng).into_iter().take(6) {
                evidence.push(Evidence::Sensor(r));
            }
        }
        evidence.push(Evidence::Edge {
            from: Intersection::new(0, 0),
            direction: common::dir('E'),
            present: world.has_corridor(Intersection::new(0, 0), common::dir('E')),
            step: 50,
        });
        let prior = vec![1.0 / 5.0; 5];
        match brute_force_posterior(grid, &maps, &prior, &noise, &evidence) {
            Some(oracle) => {
                for item in &evidence {
                    belief = belief.update_batch(std::slice::from_ref(item)).unwrap();
                }
                for (got, want) in belief.probs().iter().zip(&oracle) {
                    assert!(
                        (got - want).abs() < 1e-10,
                        "seed {seed}: {:?} vs {oracle:?}",
                        belief.probs()
                    );
                }
            }
            None => {
                let mut failed = false;
                for item in &evidence {
                    match belief.update_batch(std::slice::from_ref(item)) {
                        Ok(b) => belief = b,
                        Err(_) => {
                            failed = true;
                            break;
                        }
                    }
                }
                assert!(failed, "oracle says degenerate, update must agree");
            }
        }
    }
}

#[test]
fn junction_tree_h_readout_matches_joint_enumeration() {
    // The clique-tree route to the same posterior, over both structure
    // modes of the bigger builder.
    use mapex::inference::{build_grid_network, propagate, GridModelConfig, Structure};
    let grid = GridSpec::new(2, 2).unwrap();
    let noise = NoiseModel::new(0.15, 0.1).unwrap();
    let world = sample_map(grid, 400, true);
    let maps = distinct_maps(grid, 5, 500);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut evidence: Vec<Evidence> = Vec::new();
    for p in grid.intersections() {
        for r in scan(&world, p, &noise, 0, &mut rng).into_iter().take(8) {
            evidence.push(Evidence::Sensor(r));
        }
    }
    let prior = vec![1.0 / 6.0; 6];
    let oracle = brute_force_posterior(grid, &maps, &prior, &noise, &evidence).unwrap();
    let cfg = GridModelConfig { grid, maps: &maps, noise, structure: Structure::Multiply };
    let gn = build_grid_network(&cfg, &evidence);
    let tree = propagate(&gn.net, &gn.evidence).unwrap();
    let h = tree.marginal(gn.h.unwrap());
    for (got, want) in h.iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-9, "{h:?} vs {oracle:?}");
    }
}
