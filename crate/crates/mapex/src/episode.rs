//! The episode loop: sense, decide between known and exploratory routes,
//! move, and keep the hypothesis set honest.
//!
//! Each loop turn at an LDP: scan it on first visit, regenerate when NOTA
//! dominates, settle the hierarchy level, then either follow the
//! navigation method directly (above the base level, or when no known
//! route exists yet) or run the expected-cost comparison between the known
//! route and the shortest route consistent with current knowledge, with a
//! single exploratory sensing action proposed at the first unknown edge.
//!
//! Every record carries fixed-precision numbers so a rerun with the same
//! scenario is byte-identical.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::{BeliefError, BeliefState};
use crate::decision::{choose_path, InfoState, PathChoice, SensingProposal, TaskSpec};
use crate::explorer::{
    default_step_bound, known_path, method_path, method_step, step_from_path, Blocked,
    EdgeKnowledge, EdgeState, NavigationMethod,
};
use crate::grid::Intersection;
use crate::hierarchy::{build_hierarchy, should_descend};
use crate::scenario::{ConfigError, Scenario};
use crate::sensing::{scan, select_detector_allowing_reuse, sense, Evidence, SensorReading};
use crate::world::{sample_map_with, MapHypothesis};

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskOutcome {
    Reached,
    Blocked,
    StepBoundExceeded,
}

impl TaskOutcome {
    fn name(self) -> &'static str {
        match self {
            TaskOutcome::Reached => "reached",
            TaskOutcome::Blocked => "blocked",
            TaskOutcome::StepBoundExceeded => "step_bound_exceeded",
        }
    }
}

/// One log line; see `to_text` for the exact format.
#[derive(Debug, Clone)]
pub enum Record {
    TaskStart { index: usize, task: TaskSpec },
    Scan { step: u64, loc: Intersection },
    Reading(SensorReading),
    Belief { step: u64, probs: Vec<f64> },
    Regenerated { step: u64, k: usize, exhaustive: bool },
    Level { step: u64, active: u32, count: u128, exact: bool },
    Decision { step: u64, ev_known: f64, ev_unknown: f64, choice: PathChoice, frontier: Intersection },
    Attempt { step: u64, from: Intersection, to: Intersection, direction: crate::grid::Direction, success: bool },
    TaskDone { index: usize, outcome: TaskOutcome, attempts: u64, traversals: u64, sensing: u64 },
}

/// Aggregate episode results.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub attempts: u64,
    pub traversals: u64,
    pub sensing_actions: u64,
    pub tasks_completed: usize,
    pub tasks_total: usize,
    /// Posterior mass on the true map if it is in the final hypothesis set.
    pub posterior_true: f64,
    pub nota_regenerations: u64,
    pub simulated_minutes: f64,
}

/// A fully reproducible episode transcript.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub scenario: Scenario,
    pub world: MapHypothesis,
    pub records: Vec<Record>,
    pub metrics: EpisodeMetrics,
    pub final_belief: BeliefState,
}

impl EpisodeLog {
    /// Fixed-format text: floating values printed with nine decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.scenario;
        writeln!(
            out,
            "scenario seed={} grid={}x{} k={} fn={:.6} fp={:.6} structure={} method={} hierarchy={} threshold={}",
            s.seed,
            s.grid.nx,
            s.grid.ny,
            s.hypotheses,
            s.noise.false_negative,
            s.noise.false_positive,
            s.structure,
            s.method,
            s.hierarchy.enabled as u8,
            s.hierarchy.descend_threshold,
        )
        .unwrap();
        for line in self.world.to_text().lines() {
            writeln!(out, "world {line}").unwrap();
        }
        for r in &self.records {
            match r {
                Record::TaskStart { index, task } => writeln!(
                    out,
                    "task {index} start origin=({},{}) dest=({},{}) expected={:.6}",
                    task.origin.x,
                    task.origin.y,
                    task.destination.x,
                    task.destination.y,
                    task.expected_count
                )
                .unwrap(),
                Record::Scan { step, loc } => {
                    writeln!(out, "scan step={step} loc=({},{})", loc.x, loc.y).unwrap()
                }
                Record::Reading(r) => writeln!(
                    out,
                    "reading {} {} {} {} {} {}",
                    r.location.x,
                    r.location.y,
                    r.detector.feature.name(),
                    r.detector.wedge.0,
                    r.result as u8,
                    r.step
                )
                .unwrap(),
                Record::Belief { step, probs } => {
                    let (nota, maps) = probs.split_last().expect("probs include NOTA");
                    let body: Vec<String> =
                        maps.iter().enumerate().map(|(i, p)| format!("m{i}={p:.9}")).collect();
                    writeln!(out, "belief step={step} {} nota={nota:.9}", body.join(" ")).unwrap()
                }
                Record::Regenerated { step, k, exhaustive } => writeln!(
                    out,
                    "regen step={step} k={k} exhaustive={}",
                    *exhaustive as u8
                )
                .unwrap(),
                Record::Level { step, active, count, exact } => writeln!(
                    out,
                    "level step={step} active={active} consistent={count} exact={}",
                    *exact as u8
                )
                .unwrap(),
                Record::Decision { step, ev_known, ev_unknown, choice, frontier } => writeln!(
                    out,
                    "decide step={step} ev_pk={ev_known:.9} ev_pu={ev_unknown:.9} choice={} frontier=({},{})",
                    choice.name(),
                    frontier.x,
                    frontier.y
                )
                .unwrap(),
                Record::Attempt { step, from, to, direction, success } => writeln!(
                    out,
                    "attempt step={step} from=({},{}) to=({},{}) dir={} ok={}",
                    from.x,
                    from.y,
                    to.x,
                    to.y,
                    direction.letter(),
                    *success as u8
                )
                .unwrap(),
                Record::TaskDone { index, outcome, attempts, traversals, sensing } => writeln!(
                    out,
                    "task {index} done outcome={} attempts={attempts} traversals={traversals} sensing={sensing}",
                    outcome.name()
                )
                .unwrap(),
            }
        }
        let m = &self.metrics;
        writeln!(
            out,
            "metrics attempts={} traversals={} sensing={} tasks={}/{} regens={} posterior_true={:.9} minutes={:.3}",
            m.attempts,
            m.traversals,
            m.sensing_actions,
            m.tasks_completed,
            m.tasks_total,
            m.nota_regenerations,
            m.posterior_true,
            m.simulated_minutes,
        )
        .unwrap();
        out
    }
}

struct EpisodeState {
    scenario: Scenario,
    tasks: Vec<TaskSpec>,
    world: MapHypothesis,
    belief: BeliefState,
    knowledge: EdgeKnowledge,
    position: Intersection,
    method: NavigationMethod,
    levels: Vec<crate::hierarchy::AbstractionLevel>,
    active_level: usize,
    records: Vec<Record>,
    step: u64,
    attempts: u64,
    traversals: u64,
    sensing_actions: u64,
    regenerations: u64,
    scanned: std::collections::BTreeSet<Intersection>,
    sensing_rng: ChaCha8Rng,
    nav_rng: ChaCha8Rng,
    regen_rng: ChaCha8Rng,
    regen_exhausted: bool,
}

/// The true world an episode with this seed will sample. Exposed so that
/// scenario generators can draw coherent tasks for the same seed.
pub fn derive_world(seed: u64, grid: crate::grid::GridSpec) -> MapHypothesis {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let world_seed: u64 = master.random();
    let mut world_rng = ChaCha8Rng::seed_from_u64(world_seed);
    sample_map_with(grid, &mut world_rng, true)
}

/// Run one scenario to completion.
pub fn run_episode(scenario: &Scenario) -> Result<EpisodeLog, EpisodeError> {
    scenario.validate()?;
    let grid = scenario.grid_spec().expect("validated");
    let noise = scenario.noise_model().expect("validated");
    let method = scenario.navigation_method().expect("validated");

    let mut master = ChaCha8Rng::seed_from_u64(scenario.seed);
    let world_seed: u64 = master.random();
    let belief_seed: u64 = master.random();
    let sensing_seed: u64 = master.random();
    let nav_seed: u64 = master.random();
    let regen_seed: u64 = master.random();
    let task_seed: u64 = master.random();

    let mut world_rng = ChaCha8Rng::seed_from_u64(world_seed);
    let world = sample_map_with(grid, &mut world_rng, true);
    debug_assert_eq!(world, derive_world(scenario.seed, grid));
    let belief = BeliefState::init(
        grid,
        scenario.hypotheses,
        noise,
        belief_seed,
        scenario.enumeration_budget,
    )
    .expect("validated hypothesis count");

    let tasks = task_sequence(scenario, task_seed);
    let levels = build_hierarchy(grid);
    let active_level = if scenario.hierarchy.enabled { levels.len() - 1 } else { 0 };

    let mut st = EpisodeState {
        tasks: tasks.clone(),
        world,
        belief,
        knowledge: EdgeKnowledge::unknown(grid),
        position: scenario.start_position().unwrap_or(Intersection::new(0, 0)),
        method,
        levels,
        active_level,
        records: Vec::new(),
        step: 0,
        attempts: 0,
        traversals: 0,
        sensing_actions: 0,
        regenerations: 0,
        scanned: Default::default(),
        sensing_rng: ChaCha8Rng::seed_from_u64(sensing_seed),
        nav_rng: ChaCha8Rng::seed_from_u64(nav_seed),
        regen_rng: ChaCha8Rng::seed_from_u64(regen_seed),
        regen_exhausted: false,
        scenario: scenario.clone(),
    };

    for (index, task) in tasks.iter().enumerate() {
        st.records.push(Record::TaskStart { index, task: task.clone() });
        let before_attempts = st.attempts;
        let before_traversals = st.traversals;
        let before_sensing = st.sensing_actions;
        let mut outcome = TaskOutcome::Reached;
        for goal in [task.origin, task.destination] {
            if st.position == goal {
                continue;
            }
            outcome = st.run_leg(goal);
            if outcome != TaskOutcome::Reached {
                break;
            }
        }
        st.records.push(Record::TaskDone {
            index,
            outcome,
            attempts: st.attempts - before_attempts,
            traversals: st.traversals - before_traversals,
            sensing: st.sensing_actions - before_sensing,
        });
    }

    let tasks_completed = st
        .records
        .iter()
        .filter(|r| matches!(r, Record::TaskDone { outcome: TaskOutcome::Reached, .. }))
        .count();
    let posterior_true = st
        .belief
        .hypotheses()
        .position_of(&st.world)
        .map(|i| st.belief.map_probs()[i])
        .unwrap_or(0.0);
    let metrics = EpisodeMetrics {
        attempts: st.attempts,
        traversals: st.traversals,
        sensing_actions: st.sensing_actions,
        tasks_completed,
        tasks_total: tasks.len(),
        posterior_true,
        nota_regenerations: st.regenerations,
        simulated_minutes: st.attempts as f64 * scenario.time_scale.minutes_per_traversal
            + st.sensing_actions as f64 * scenario.time_scale.minutes_per_sensing,
    };
    Ok(EpisodeLog {
        scenario: scenario.clone(),
        world: st.world,
        records: st.records,
        metrics,
        final_belief: st.belief,
    })
}

/// Listed order, or `task_draws` weighted draws when configured.
fn task_sequence(scenario: &Scenario, seed: u64) -> Vec<TaskSpec> {
    let specs = scenario.task_specs();
    match scenario.task_draws {
        None => specs,
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let total: f64 = specs.iter().map(|t| t.expected_count).sum();
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let mut u: f64 = rng.random::<f64>() * total;
                let mut chosen = specs.last().unwrap();
                for t in &specs {
                    if u < t.expected_count {
                        chosen = t;
                        break;
                    }
                    u -= t.expected_count;
                }
                out.push(chosen.clone());
            }
            out
        }
    }
}

impl EpisodeState {
    fn grid(&self) -> crate::grid::GridSpec {
        self.world.grid()
    }

    fn snapshot_belief(&mut self) {
        self.records
            .push(Record::Belief { step: self.step, probs: self.belief.probs().to_vec() });
    }

    /// Scan the current LDP once per episode.
    fn maybe_scan(&mut self) {
        let p = self.position;
        if self.scanned.contains(&p) || !self.world.is_ldp(p) {
            return;
        }
        self.scanned.insert(p);
        self.records.push(Record::Scan { step: self.step, loc: p });
        let readings = scan(&self.world, p, self.belief.noise(), self.step, &mut self.sensing_rng);
        self.sensing_actions += readings.len() as u64;
        self.step += readings.len() as u64;
        for r in &readings {
            self.records.push(Record::Reading(*r));
            // Noiseless scans double as corridor knowledge.
            if self.belief.noise().is_noiseless()
                && r.detector.feature == crate::sensing::Feature::Opening
            {
                if let Some(d) = r.detector.wedge.cardinal_direction() {
                    if let Some(id) = self.grid().edge_id(p, d) {
                        self.knowledge.set(id, r.result);
                    }
                }
            }
        }
        let items: Vec<Evidence> = readings.into_iter().map(Evidence::Sensor).collect();
        match self.belief.update_batch(&items) {
            Ok(b) => self.belief = b,
            Err(BeliefError::DegenerateEvidence) => self.try_regenerate(),
            Err(e) => panic!("belief update failed: {e}"),
        }
        self.snapshot_belief();
    }

    fn try_regenerate(&mut self) {
        if self.regen_exhausted {
            return;
        }
        let seed: u64 = self.regen_rng.random();
        match self.belief.regenerate(seed) {
            Ok(b) => {
                self.belief = b;
                self.regenerations += 1;
                self.records.push(Record::Regenerated {
                    step: self.step,
                    k: self.belief.hypotheses().len(),
                    exhaustive: self.belief.hypotheses().exhaustive(),
                });
                self.snapshot_belief();
            }
            Err(_) => {
                // Conflicting pins under noise; keep the current set.
                self.regen_exhausted = true;
            }
        }
    }

    fn settle_hierarchy(&mut self) {
        while self.active_level > 0 {
            let active = self.levels[self.active_level];
            let next = self.levels[self.active_level - 1];
            if !should_descend(
                &active,
                &next,
                &self.belief,
                self.scenario.hierarchy.descend_threshold as u128,
            ) {
                break;
            }
            self.active_level -= 1;
            let c = crate::hierarchy::next_level_hypothesis_count(&self.belief, &next);
            self.records.push(Record::Level {
                step: self.step,
                active: self.levels[self.active_level].level,
                count: c.count,
                exact: c.exact,
            });
        }
    }

    fn run_leg(&mut self, goal: Intersection) -> TaskOutcome {
        let bound = default_step_bound(self.grid());
        let mut leg_attempts = 0u64;
        while self.position != goal {
            if leg_attempts >= bound {
                return TaskOutcome::StepBoundExceeded;
            }
            self.maybe_scan();
            if self.belief.nota_triggered() {
                self.try_regenerate();
            }
            if self.scenario.hierarchy.enabled {
                self.settle_hierarchy();
            }
            let step = match self.pick_step(goal) {
                Ok(s) => s,
                Err(Blocked) => return TaskOutcome::Blocked,
            };
            let success = self.world.has_edge(step.edge);
            let was_unknown = self.knowledge.state(step.edge) == EdgeState::Unknown;
            self.knowledge.set(step.edge, success);
            self.step += 1;
            self.attempts += 1;
            leg_attempts += 1;
            self.records.push(Record::Attempt {
                step: self.step,
                from: step.from,
                to: step.to,
                direction: step.direction,
                success,
            });
            if was_unknown {
                match self.belief.update_edge(step.from, step.direction, success, self.step) {
                    Ok(b) => self.belief = b,
                    Err(BeliefError::DegenerateEvidence) => self.try_regenerate(),
                    Err(e) => panic!("belief update failed: {e}"),
                }
                self.snapshot_belief();
            }
            if success {
                self.traversals += 1;
                self.position = step.to;
            }
        }
        TaskOutcome::Reached
    }

    /// Decide the next edge to attempt.
    fn pick_step(&mut self, goal: Intersection) -> Result<crate::explorer::Step, Blocked> {
        let grid = self.grid();
        // Above the base level (early exploration) the configured method
        // navigates directly; the expected-cost machinery starts once the
        // hierarchy has bottomed out.
        if self.active_level > 0 {
            return method_step(
                self.method,
                self.position,
                goal,
                &self.knowledge,
                self.belief.hypotheses(),
                &mut self.nav_rng,
            );
        }
        let known = known_path(self.position, goal, &self.knowledge, self.belief.hypotheses());
        let Some(known) = known else {
            return method_step(
                self.method,
                self.position,
                goal,
                &self.knowledge,
                self.belief.hypotheses(),
                &mut self.nav_rng,
            );
        };
        // Shortest route consistent with current knowledge.
        let consistent = method_path(
            NavigationMethod::ShortestIgnoringUnknown,
            self.position,
            goal,
            &self.knowledge,
            self.belief.hypotheses(),
        )?;
        // The exploratory candidate must teach something new: it needs an
        // unknown edge. Path search already guarantees it is never longer
        // than the known route.
        let frontier = consistent.windows(2).find_map(|w| {
            let step = step_from_path(grid, w);
            (self.knowledge.state(step.edge) == EdgeState::Unknown).then_some(step.from)
        });
        let Some(frontier) = frontier else {
            return Ok(step_from_path(grid, &known));
        };
        // Build the single-step sensing proposal at the frontier. Reuse is
        // allowed because a visited frontier has exhausted its detectors
        // and repeat measurements still inform under noise.
        let detector = select_detector_allowing_reuse(&self.belief, frontier);
        let proposal = self.build_proposal(frontier, detector, goal);
        let remaining = TaskSpec {
            id: usize::MAX,
            origin: self.position,
            destination: goal,
            expected_count: 0.0,
        };
        let info = InfoState::from_belief(&self.belief);
        let decision = choose_path(&self.tasks, &remaining, &info, &proposal)
            .expect("proposal outcomes are exhaustive by construction");
        self.records.push(Record::Decision {
            step: self.step,
            ev_known: decision.ev_known,
            ev_unknown: decision.ev_unknown,
            choice: decision.choice,
            frontier,
        });
        match decision.choice {
            PathChoice::Known => Ok(step_from_path(grid, &known)),
            PathChoice::Unknown => {
                if self.position == frontier {
                    // Execute the exploratory sensing action before taking
                    // the unknown edge.
                    let reading = sense(
                        &self.world,
                        frontier,
                        detector,
                        self.belief.noise(),
                        self.step,
                        &mut self.sensing_rng,
                    );
                    self.sensing_actions += 1;
                    self.step += 1;
                    self.records.push(Record::Reading(reading));
                    match self.belief.update(reading) {
                        Ok(b) => self.belief = b,
                        Err(BeliefError::DegenerateEvidence) => self.try_regenerate(),
                        Err(e) => panic!("belief update failed: {e}"),
                    }
                    self.snapshot_belief();
                }
                Ok(step_from_path(grid, &consistent))
            }
        }
    }

    fn build_proposal(
        &self,
        frontier: Intersection,
        detector: crate::sensing::Detector,
        goal: Intersection,
    ) -> SensingProposal {
        let noise = self.belief.noise();
        let maps = self.belief.hypotheses().maps();
        // Outcomes: the detector fires true (index 0) or false (index 1).
        let mut given_map = vec![Vec::with_capacity(maps.len()), Vec::with_capacity(maps.len())];
        for m in maps {
            let x = crate::sensing::geometry_features(m.junction_type(frontier)).truth(detector);
            given_map[0].push(noise.likelihood(x, true));
            given_map[1].push(noise.likelihood(x, false));
        }
        // NOTA predictive from the junction-only model, conditioned on the
        // accumulated evidence.
        let base = crate::belief::nota_log_likelihood(self.grid(), noise, self.belief.evidence());
        let mut with_true = self.belief.evidence().to_vec();
        with_true.push(Evidence::Sensor(SensorReading {
            location: frontier,
            detector,
            result: true,
            step: self.step,
        }));
        let p_true = if base == f64::NEG_INFINITY {
            0.5
        } else {
            (crate::belief::nota_log_likelihood(self.grid(), noise, &with_true) - base).exp()
        };
        let p_true = p_true.clamp(0.0, 1.0);
        SensingProposal {
            location: frontier,
            detectors: vec![detector],
            outcome_given_map: given_map,
            outcome_given_nota: vec![p_true, 1.0 - p_true],
            route: vec![self.position, frontier, goal],
        }
    }
}
