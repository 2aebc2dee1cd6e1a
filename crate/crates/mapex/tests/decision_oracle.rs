//! Expected-value formulas against a from-scratch expectation oracle.

mod common;

use common::{distinct_maps, oracle_cost};
use mapex::decision::{
    ev_known_path, ev_unknown_path, InfoState, SensingProposal, TaskSpec,
};
use mapex::grid::{GridSpec, Intersection};
use mapex::sensing::{Detector, Feature, Wedge};
use mapex::world::MapHypothesis;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Instance {
    grid: GridSpec,
    maps: Vec<MapHypothesis>,
    probs: Vec<f64>,
    tasks: Vec<TaskSpec>,
    proposal: SensingProposal,
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, ny) = *[(2usize, 2usize), (3, 2), (3, 3)]
        .get(rng.random_range(0..3usize))
        .unwrap();
    let grid = GridSpec::new(nx, ny).unwrap();
    let k = rng.random_range(2..=5usize);
    let maps = distinct_maps(grid, k, seed ^ 0xabc);
    let mut probs: Vec<f64> = (0..=k).map(|_| rng.random::<f64>() + 0.02).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);

    let rand_point = |rng: &mut ChaCha8Rng| {
        Intersection::new(rng.random_range(0..nx), rng.random_range(0..ny))
    };
    let task_count = rng.random_range(1..=3usize);
    let tasks: Vec<TaskSpec> = (0..task_count)
        .map(|id| TaskSpec {
            id,
            origin: rand_point(&mut rng),
            destination: rand_point(&mut rng),
            expected_count: rng.random::<f64>() * 3.0,
        })
        .collect();

    let outcomes = rng.random_range(2..=4usize);
    let mut outcome_given_map = vec![vec![0.0f64; k]; outcomes];
    for j in 0..k {
        let mut col: Vec<f64> = (0..outcomes).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = col.iter().sum();
        for (i, c) in col.iter_mut().enumerate() {
            *c /= s;
            outcome_given_map[i][j] = *c;
        }
    }
    let mut nota: Vec<f64> = (0..outcomes).map(|_| rng.random::<f64>() + 0.01).collect();
    let s: f64 = nota.iter().sum();
    nota.iter_mut().for_each(|x| *x /= s);

    let waypoints = vec![rand_point(&mut rng), rand_point(&mut rng), rand_point(&mut rng)];
    let proposal = SensingProposal {
        location: waypoints[1],
        detectors: vec![Detector::new(Feature::Opening, Wedge(6))],
        outcome_given_map,
        outcome_given_nota: nota,
        route: waypoints,
    };
    Instance { grid, maps, probs, tasks, proposal }
}

fn penalty(grid: GridSpec) -> f64 {
    (2 * grid.nx * grid.ny) as f64
}

/// The oracle recomputes both expectations with explicit loops and
/// Floyd-Warshall costs only.
fn oracle_evs(inst: &Instance, task: &TaskSpec, plan_idx: usize) -> (f64, f64) {
    let k = inst.maps.len();
    let plan = &inst.maps[plan_idx];
    let b = penalty(inst.grid);

    let map_star_index = |probs: &[f64]| -> usize {
        let mut best = 0;
        for i in 1..k {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        best
    };
    let futures_of = |true_idx: Option<usize>, probs: &[f64]| -> f64 {
        match true_idx {
            None => inst.tasks.iter().map(|t| t.expected_count * b).sum(),
            Some(ti) => {
                let star = &inst.maps[map_star_index(probs)];
                inst.tasks
                    .iter()
                    .map(|t| {
                        t.expected_count
                            * oracle_cost(t.origin, t.destination, star, &inst.maps[ti])
                    })
                    .sum()
            }
        }
    };

    // Known path.
    let mut ev_k = 0.0;
    for j in 0..k {
        ev_k += inst.probs[j]
            * (oracle_cost(task.origin, task.destination, plan, &inst.maps[j])
                + futures_of(Some(j), &inst.probs));
    }
    ev_k += inst.probs[k] * (b + futures_of(None, &inst.probs));

    // Unknown path: immediate route cost plus outcome-weighted futures.
    let route = &inst.proposal.route;
    let mut ev_u = 0.0;
    for j in 0..k {
        let mut rc = 0.0;
        for w in route.windows(2) {
            rc += oracle_cost(w[0], w[1], plan, &inst.maps[j]);
        }
        ev_u += inst.probs[j] * rc;
    }
    ev_u += inst.probs[k] * b;
    let outcomes = inst.proposal.outcome_given_nota.len();
    for i in 0..outcomes {
        let mut p_outcome = 0.0;
        let mut post = vec![0.0f64; k + 1];
        for j in 0..k {
            post[j] = inst.probs[j] * inst.proposal.outcome_given_map[i][j];
            p_outcome += post[j];
        }
        post[k] = inst.probs[k] * inst.proposal.outcome_given_nota[i];
        p_outcome += post[k];
        if p_outcome <= 0.0 {
            continue;
        }
        post.iter_mut().for_each(|p| *p /= p_outcome);
        let mut inner = 0.0;
        for j in 0..k {
            inner += post[j] * futures_of(Some(j), &post);
        }
        inner += post[k] * futures_of(None, &post);
        ev_u += p_outcome * inner;
    }
    (ev_k, ev_u)
}

#[test]
fn evs_match_brute_force_on_50_random_instances() {
    let start = std::time::Instant::now();
    for seed in 0..50 {
        let inst = random_instance(seed);
        let info = InfoState { maps: &inst.maps, probs: &inst.probs };
        let plan_idx = info.map_argmax();
        let task = &inst.tasks[0];
        let (want_k, want_u) = oracle_evs(&inst, task, plan_idx);
        let got_k = ev_known_path(&inst.tasks, task, &inst.maps[plan_idx], &info);
        let got_u =
            ev_unknown_path(&inst.tasks, &inst.maps[plan_idx], &info, &inst.proposal).unwrap();
        assert!((got_k - want_k).abs() < 1e-9, "seed {seed}: PK {got_k} vs {want_k}");
        assert!((got_u - want_u).abs() < 1e-9, "seed {seed}: PU {got_u} vs {want_u}");
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "oracle comparison too slow");
}

#[test]
fn choose_path_argmin_agrees_with_oracle() {
    use mapex::decision::{choose_path, PathChoice};
    for seed in 100..140 {
        let inst = random_instance(seed);
        let info = InfoState { maps: &inst.maps, probs: &inst.probs };
        let plan_idx = info.map_argmax();
        let task = &inst.tasks[0];
        let (want_k, want_u) = oracle_evs(&inst, task, plan_idx);
        let decision = choose_path(&inst.tasks, task, &info, &inst.proposal).unwrap();
        let expect = if want_u < want_k { PathChoice::Unknown } else { PathChoice::Known };
        assert_eq!(decision.choice, expect, "seed {seed}");
    }
}
