//! Posterior over a bounded set of candidate maps plus the explicit
//! none-of-the-above state.
//!
//! Candidate-map likelihoods factor per reading, so they are accumulated
//! directly. The NOTA state has no map: its junction types are latent and
//! independently uniform, and readings at or between junctions couple
//! through them, so its evidence likelihood is the probability of the
//! whole evidence set under a junction-only network, computed by the
//! inference engine. Each update renormalizes in the log domain.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Direction, GridSpec, Intersection};
use crate::inference::{build_evidence_network, propagate, GridModelConfig, Structure};
use crate::sensing::{geometry_features, Evidence, NoiseModel, SensorReading};
use crate::world::{
    enumerate_maps_constrained, sample_map_constrained, EdgeConstraints, JunctionType,
    MapHypothesis, WorldError,
};

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("all hypothesis likelihoods are zero; regenerate the hypothesis set")]
    DegenerateEvidence,
    #[error("no map is consistent with the accumulated evidence")]
    NoConsistentMap,
    #[error("belief requires at least one candidate map")]
    EmptyHypothesisSet,
    #[error("probabilities malformed: {0}")]
    BadDistribution(String),
}

/// Distinct candidate maps; `exhaustive` records that they are known to be
/// every map consistent with the evidence they were generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    maps: Vec<MapHypothesis>,
    exhaustive: bool,
}

impl HypothesisSet {
    pub fn new(maps: Vec<MapHypothesis>, exhaustive: bool) -> HypothesisSet {
        debug_assert!({
            let mut sorted = maps.clone();
            sorted.sort();
            sorted.dedup();
            sorted.len() == maps.len()
        });
        HypothesisSet { maps, exhaustive }
    }

    pub fn maps(&self) -> &[MapHypothesis] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn position_of(&self, map: &MapHypothesis) -> Option<usize> {
        self.maps.iter().position(|m| m == map)
    }
}

/// Posterior over `K` maps plus NOTA (always the last entry of `probs`).
#[derive(Debug, Clone)]
pub struct BeliefState {
    grid: GridSpec,
    noise: NoiseModel,
    hypotheses: HypothesisSet,
    probs: Vec<f64>,
    evidence: Vec<Evidence>,
    /// Configured hypothesis count; regeneration aims for this size.
    k_config: usize,
    enumeration_budget: u64,
    /// Cached ln P(evidence | NOTA) for incremental updates.
    nota_log_lik: f64,
}

impl BeliefState {
    /// Uniform prior over `k` freshly sampled maps plus NOTA. When the grid
    /// is enumerable within budget and has at most `k` consistent maps, the
    /// set is exhaustive instead.
    pub fn init(
        grid: GridSpec,
        k: usize,
        noise: NoiseModel,
        seed: u64,
        budget: u64,
    ) -> Result<BeliefState, BeliefError> {
        if k == 0 {
            return Err(BeliefError::EmptyHypothesisSet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let constraints = EdgeConstraints::none(grid);
        let hypotheses = generate_hypotheses(grid, k, &constraints, budget, &mut rng)
            .ok_or(BeliefError::NoConsistentMap)?;
        let n = hypotheses.len() + 1;
        Ok(BeliefState {
            grid,
            noise,
            hypotheses,
            probs: vec![1.0 / n as f64; n],
            evidence: Vec::new(),
            k_config: k,
            enumeration_budget: budget,
            nota_log_lik: 0.0,
        })
    }

    /// Assemble a belief from explicit parts; evidence likelihoods are
    /// recomputed so the probabilities must already reflect the evidence
    /// (or the evidence list be empty).
    pub fn from_parts(
        grid: GridSpec,
        noise: NoiseModel,
        hypotheses: HypothesisSet,
        probs: Vec<f64>,
        budget: u64,
    ) -> Result<BeliefState, BeliefError> {
        if hypotheses.is_empty() {
            return Err(BeliefError::EmptyHypothesisSet);
        }
        if probs.len() != hypotheses.len() + 1 {
            return Err(BeliefError::BadDistribution(format!(
                "{} entries for {} maps",
                probs.len(),
                hypotheses.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(BeliefError::BadDistribution(format!("sum {sum}")));
        }
        let k = hypotheses.len();
        Ok(BeliefState {
            grid,
            noise,
            hypotheses,
            probs,
            evidence: Vec::new(),
            k_config: k,
            enumeration_budget: budget,
            nota_log_lik: 0.0,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.hypotheses
    }

    /// Full distribution: one entry per map, NOTA last. Sums to one.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn map_probs(&self) -> &[f64] {
        &self.probs[..self.hypotheses.len()]
    }

    pub fn nota_prob(&self) -> f64 {
        *self.probs.last().unwrap()
    }

    pub fn evidence(&self) -> &[Evidence] {
        &self.evidence
    }

    pub fn enumeration_budget(&self) -> u64 {
        self.enumeration_budget
    }

    /// Index of the most probable map, NOTA excluded; ties fall to the
    /// lowest index.
    pub fn map_posterior_argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.map_probs().iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Strictly-most-probable test for the NOTA state.
    pub fn nota_triggered(&self) -> bool {
        let max_map = self.map_probs().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.nota_prob() > max_map
    }

    /// Condition on one sensor reading.
    pub fn update(&self, reading: SensorReading) -> Result<BeliefState, BeliefError> {
        self.update_batch(&[Evidence::Sensor(reading)])
    }

    /// Condition on a revealed corridor status (certain evidence).
    pub fn update_edge(
        &self,
        from: Intersection,
        direction: Direction,
        present: bool,
        step: u64,
    ) -> Result<BeliefState, BeliefError> {
        self.update_batch(&[Evidence::Edge { from, direction, present, step }])
    }

    /// Condition on several evidence items at once. One NOTA network
    /// evaluation covers the whole batch, which matters for full scans.
    pub fn update_batch(&self, items: &[Evidence]) -> Result<BeliefState, BeliefError> {
        if items.is_empty() {
            return Ok(self.clone());
        }
        let mut evidence = self.evidence.clone();
        evidence.extend_from_slice(items);

        let mut log_weights: Vec<f64> = Vec::with_capacity(self.probs.len());
        for (i, map) in self.hypotheses.maps().iter().enumerate() {
            let prior = self.probs[i];
            if prior <= 0.0 {
                log_weights.push(f64::NEG_INFINITY);
                continue;
            }
            let mut lw = prior.ln();
            for item in items {
                let lik = map_likelihood(map, item, &self.noise);
                if lik <= 0.0 {
                    lw = f64::NEG_INFINITY;
                    break;
                }
                lw += lik.ln();
            }
            log_weights.push(lw);
        }

        let new_nota_log = nota_log_likelihood(self.grid, &self.noise, &evidence);
        let nota_prior = self.nota_prob();
        let nota_lw = if nota_prior <= 0.0 {
            f64::NEG_INFINITY
        } else {
            nota_prior.ln() + (new_nota_log - self.nota_log_lik)
        };
        log_weights.push(nota_lw);

        let probs = normalize_log_weights(&log_weights).ok_or(BeliefError::DegenerateEvidence)?;
        Ok(BeliefState {
            grid: self.grid,
            noise: self.noise,
            hypotheses: self.hypotheses.clone(),
            probs,
            evidence,
            k_config: self.k_config,
            enumeration_budget: self.enumeration_budget,
            nota_log_lik: new_nota_log,
        })
    }

    /// Junction types pinned by the evidence: locations where exactly one
    /// valid type is consistent with every reading taken there, reading the
    /// results as noiseless.
    pub fn pinned_junctions(&self) -> Vec<(Intersection, JunctionType)> {
        let mut out = Vec::new();
        for p in self.grid.intersections() {
            let readings: Vec<&SensorReading> = self
                .evidence
                .iter()
                .filter_map(|e| match e {
                    Evidence::Sensor(r) if r.location == p => Some(r),
                    _ => None,
                })
                .collect();
            if readings.is_empty() {
                continue;
            }
            let candidates: Vec<JunctionType> = self
                .grid
                .valid_directions(p)
                .subsets()
                .map(JunctionType::new)
                .filter(|t| {
                    let table = geometry_features(*t);
                    readings.iter().all(|r| table.truth(r.detector) == r.result)
                })
                .collect();
            if candidates.len() == 1 {
                out.push((p, candidates[0]));
            }
        }
        out
    }

    /// Forced edge statuses implied by pinned junctions and by certain
    /// edge observations. `None` when the constraints conflict.
    pub fn edge_constraints(&self) -> Option<EdgeConstraints> {
        let mut constraints = EdgeConstraints::none(self.grid);
        let mut force = |id: crate::grid::EdgeId, present: bool| -> bool {
            if present {
                if constraints.forced_absent.contains(id) {
                    return false;
                }
                constraints.forced_present.insert(id);
            } else {
                if constraints.forced_present.contains(id) {
                    return false;
                }
                constraints.forced_absent.insert(id);
            }
            true
        };
        for item in &self.evidence {
            if let Evidence::Edge { from, direction, present, .. } = item {
                let Some(id) = self.grid.edge_id(*from, *direction) else { continue };
                if !force(id, *present) {
                    return None;
                }
            }
        }
        for (p, t) in self.pinned_junctions() {
            for d in Direction::ALL {
                let Some(id) = self.grid.edge_id(p, d) else { continue };
                if !force(id, t.directions.contains(d)) {
                    return None;
                }
            }
        }
        Some(constraints)
    }

    /// Replace the hypothesis set with maps as consistent as possible with
    /// the evidence, reset the prior, and re-apply the evidence log.
    pub fn regenerate(&self, seed: u64) -> Result<BeliefState, BeliefError> {
        let constraints = self.edge_constraints().ok_or(BeliefError::NoConsistentMap)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hypotheses =
            generate_hypotheses(self.grid, self.k_config, &constraints, self.enumeration_budget, &mut rng)
                .ok_or(BeliefError::NoConsistentMap)?;
        let n = hypotheses.len() + 1;
        let fresh = BeliefState {
            grid: self.grid,
            noise: self.noise,
            hypotheses,
            probs: vec![1.0 / n as f64; n],
            evidence: Vec::new(),
            k_config: self.k_config,
            enumeration_budget: self.enumeration_budget,
            nota_log_lik: 0.0,
        };
        if self.evidence.is_empty() {
            return Ok(fresh);
        }
        fresh.update_batch(&self.evidence)
    }

    /// How many maps are consistent with the current evidence: exact under
    /// the enumeration budget, otherwise a per-junction product upper bound.
    pub fn consistent_map_count(&self) -> CountEstimate {
        match self.edge_constraints() {
            None => CountEstimate { count: 0, exact: true },
            Some(constraints) => {
                match enumerate_maps_constrained(self.grid, self.enumeration_budget, &constraints) {
                    Ok(maps) => CountEstimate { count: maps.len() as u128, exact: true },
                    Err(WorldError::BudgetExceeded { .. }) => {
                        let mut bound = 1u128;
                        for p in self.grid.intersections() {
                            let readings: Vec<&SensorReading> = self
                                .evidence
                                .iter()
                                .filter_map(|e| match e {
                                    Evidence::Sensor(r) if r.location == p => Some(r),
                                    _ => None,
                                })
                                .collect();
                            let types = self
                                .grid
                                .valid_directions(p)
                                .subsets()
                                .map(JunctionType::new)
                                .filter(|t| {
                                    let table = geometry_features(*t);
                                    readings.iter().all(|r| table.truth(r.detector) == r.result)
                                })
                                .count();
                            bound = bound.saturating_mul(types.max(1) as u128);
                        }
                        CountEstimate { count: bound, exact: false }
                    }
                    Err(_) => CountEstimate { count: 0, exact: true },
                }
            }
        }
    }
}

/// Exact count or a product-form upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountEstimate {
    pub count: u128,
    pub exact: bool,
}

/// Likelihood of one evidence item under a specific map.
pub fn map_likelihood(map: &MapHypothesis, item: &Evidence, noise: &NoiseModel) -> f64 {
    match item {
        Evidence::Sensor(r) => {
            let x = geometry_features(map.junction_type(r.location)).truth(r.detector);
            noise.likelihood(x, r.result)
        }
        Evidence::Edge { from, direction, present, .. } => {
            if map.has_corridor(*from, *direction) == *present {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// ln P(evidence | NOTA): junction types independently uniform over the
/// valid types, corridors real only when both ends agree. Delegates to the
/// clique-tree engine over a junction-only network.
pub fn nota_log_likelihood(grid: GridSpec, noise: &NoiseModel, evidence: &[Evidence]) -> f64 {
    if evidence.is_empty() {
        return 0.0;
    }
    let cfg = GridModelConfig { grid, maps: &[], noise: *noise, structure: Structure::Multiply };
    let gn = build_evidence_network(&cfg, evidence);
    if gn.contradiction {
        return f64::NEG_INFINITY;
    }
    match propagate(&gn.net, &gn.evidence) {
        Ok(tree) => tree.log_evidence(),
        Err(_) => f64::NEG_INFINITY,
    }
}

fn normalize_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let unnorm: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let sum: f64 = unnorm.iter().sum();
    Some(unnorm.iter().map(|w| w / sum).collect())
}

/// Sample (or enumerate) a hypothesis set honoring edge constraints.
fn generate_hypotheses<R: rand::Rng>(
    grid: GridSpec,
    k: usize,
    constraints: &EdgeConstraints,
    budget: u64,
    rng: &mut R,
) -> Option<HypothesisSet> {
    if !constraints.is_satisfiable_shape() {
        return None;
    }
    match enumerate_maps_constrained(grid, budget, constraints) {
        Ok(all) => {
            if all.is_empty() {
                return None;
            }
            if all.len() <= k {
                return Some(HypothesisSet::new(all, true));
            }
            let mut picked: Vec<MapHypothesis> = Vec::with_capacity(k);
            let mut attempts = 0usize;
            while picked.len() < k && attempts < 500_000 {
                attempts += 1;
                if let Some(m) = sample_map_constrained(grid, rng, true, constraints, 10_000) {
                    if !picked.contains(&m) {
                        picked.push(m);
                    }
                }
            }
            (picked.len() == k).then(|| HypothesisSet::new(picked, false))
        }
        Err(WorldError::BudgetExceeded { .. }) => {
            let mut picked: Vec<MapHypothesis> = Vec::with_capacity(k);
            let mut attempts = 0usize;
            while picked.len() < k && attempts < 500_000 {
                attempts += 1;
                {
                    let m = sample_map_constrained(grid, rng, true, constraints, 10_000)?;
                    if !picked.contains(&m) {
                        picked.push(m);
                    }
                }
            }
            (!picked.is_empty()).then(|| HypothesisSet::new(picked, false))
        }
        Err(_) => None,
    }
}
