//! Construction of the exploration decision network over a corridor grid.
//!
//! The network has four tiers: a hypothesis node `H` ranging over the
//! candidate maps plus the none-of-the-above state; one junction node per
//! intersection (deterministic given a map, uniform over the valid types
//! given NOTA); boolean feature nodes per (intersection, wedge, feature);
//! and a noisy sensor node per reading.
//!
//! In `Multiply` mode the opening/flat-wall features of a cardinal wedge
//! that faces a neighbor live on nodes shared by both endpoints, with both
//! junction nodes as parents: the corridor exists only when the two ends
//! agree. In `Singly` mode every feature node has exactly one junction
//! parent and reads that junction's claimed direction set at face value.
//!
//! [`build_grid_network`] materializes the whole grid (the form the
//! clique-cost benchmark measures); [`build_evidence_network`] creates
//! only the junction and feature nodes the evidence actually touches,
//! which yields identical posteriors because unobserved feature leaves
//! and unconnected junctions marginalize away exactly.

use std::collections::{BTreeMap, BTreeSet};

use crate::grid::{Direction, GridSpec, Intersection};
use crate::sensing::{geometry_features, Detector, Evidence, Feature, NoiseModel, Wedge};
use crate::world::{JunctionType, MapHypothesis};

use super::network::{DiscreteNetwork, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Singly,
    Multiply,
}

impl Structure {
    pub fn name(self) -> &'static str {
        match self {
            Structure::Singly => "singly",
            Structure::Multiply => "multiply",
        }
    }

    pub fn from_name(s: &str) -> Option<Structure> {
        match s {
            "singly" => Some(Structure::Singly),
            "multiply" => Some(Structure::Multiply),
            _ => None,
        }
    }
}

/// Inputs for network construction.
#[derive(Debug, Clone)]
pub struct GridModelConfig<'a> {
    pub grid: GridSpec,
    /// Candidate maps; when empty no hypothesis node is built and junction
    /// nodes get the NOTA (uniform) prior directly.
    pub maps: &'a [MapHypothesis],
    pub noise: NoiseModel,
    pub structure: Structure,
}

/// The built network plus handles for entering evidence and reading out.
#[derive(Debug, Clone)]
pub struct GridNetwork {
    pub net: DiscreteNetwork,
    pub h: Option<NodeId>,
    /// Junction node per included intersection index.
    pub j: BTreeMap<usize, NodeId>,
    /// Valid junction types per included intersection, in state order.
    pub j_states: BTreeMap<usize, Vec<JunctionType>>,
    /// Feature node per (intersection index, wedge, feature index).
    x: BTreeMap<(usize, u8, usize), NodeId>,
    /// Evidence assignments accumulated from the supplied items.
    pub evidence: BTreeMap<NodeId, usize>,
    /// Set when two certain observations disagree about one node; the
    /// evidence then has probability zero without running propagation.
    pub contradiction: bool,
}

impl GridNetwork {
    pub fn x_node(&self, loc_index: usize, wedge: Wedge, feature: Feature) -> NodeId {
        self.x[&(loc_index, wedge.0, feature.index())]
    }

    /// State index of `t` within the junction node at `loc_index`.
    pub fn j_state_index(&self, loc_index: usize, t: JunctionType) -> usize {
        self.j_states[&loc_index]
            .iter()
            .position(|s| *s == t)
            .expect("junction type must be valid at this intersection")
    }
}

struct NetBuilder<'a> {
    cfg: &'a GridModelConfig<'a>,
    net: DiscreteNetwork,
    h: Option<NodeId>,
    j: BTreeMap<usize, NodeId>,
    j_states: BTreeMap<usize, Vec<JunctionType>>,
    x: BTreeMap<(usize, u8, usize), NodeId>,
}

impl<'a> NetBuilder<'a> {
    fn new(cfg: &'a GridModelConfig<'a>) -> NetBuilder<'a> {
        let mut net = DiscreteNetwork::new();
        let k = cfg.maps.len();
        let h = if k > 0 {
            let card = k + 1;
            let prior = vec![1.0 / card as f64; card];
            Some(net.add_node("H", card, vec![], prior).expect("H prior is well formed"))
        } else {
            None
        };
        NetBuilder { cfg, net, h, j: BTreeMap::new(), j_states: BTreeMap::new(), x: BTreeMap::new() }
    }

    fn ensure_junction(&mut self, p: Intersection) -> NodeId {
        let grid = self.cfg.grid;
        let pi = grid.intersection_index(p);
        if let Some(id) = self.j.get(&pi) {
            return *id;
        }
        let states: Vec<JunctionType> =
            grid.valid_directions(p).subsets().map(JunctionType::new).collect();
        let card = states.len();
        let name = format!("J({},{})", p.x, p.y);
        let id = match self.h {
            Some(h_id) => {
                let mut cpt = Vec::with_capacity((self.cfg.maps.len() + 1) * card);
                for map in self.cfg.maps {
                    let t = map.junction_type(p);
                    for s in &states {
                        cpt.push(if *s == t { 1.0 } else { 0.0 });
                    }
                }
                cpt.extend(std::iter::repeat_n(1.0 / card as f64, card));
                self.net.add_node(name, card, vec![h_id], cpt).expect("junction CPT well formed")
            }
            None => {
                let prior = vec![1.0 / card as f64; card];
                self.net.add_node(name, card, vec![], prior).expect("junction prior well formed")
            }
        };
        self.j.insert(pi, id);
        self.j_states.insert(pi, states);
        id
    }

    /// Whether this (wedge, feature) at `p` lives on a node shared with the
    /// neighbor across the corridor.
    fn is_shared(&self, p: Intersection, w: Wedge, f: Feature) -> Option<Intersection> {
        if self.cfg.structure != Structure::Multiply || !w.is_cardinal() {
            return None;
        }
        if !matches!(f, Feature::Opening | Feature::FlatWall) {
            return None;
        }
        self.cfg.grid.neighbor(p, w.cardinal_direction().unwrap())
    }

    fn ensure_feature(&mut self, p: Intersection, w: Wedge, f: Feature) -> NodeId {
        let grid = self.cfg.grid;
        let pi = grid.intersection_index(p);
        let key = (pi, w.0, f.index());
        if let Some(id) = self.x.get(&key) {
            return *id;
        }
        let id = if let Some(q) = self.is_shared(p, w, f) {
            let d = w.cardinal_direction().unwrap();
            // Canonicalize to the west/south endpoint so both sides build
            // the identical node.
            let (owner, other, dir) = match d {
                Direction::East | Direction::North => (p, q, d),
                Direction::West | Direction::South => (q, p, d.opposite()),
            };
            let oi = grid.intersection_index(owner);
            let ti = grid.intersection_index(other);
            let owner_key = (oi, Wedge::for_direction(dir).0, f.index());
            if let Some(id) = self.x.get(&owner_key) {
                let id = *id;
                self.x.insert(key, id);
                return id;
            }
            let jo = self.ensure_junction(owner);
            let jt = self.ensure_junction(other);
            let states_o = self.j_states[&oi].clone();
            let states_t = self.j_states[&ti].clone();
            let opposite = dir.opposite();
            let want_open = f == Feature::Opening;
            let name = format!("X({},{},{},{})", owner.x, owner.y, Wedge::for_direction(dir).0, f.name());
            // Junction ids ascend with (y, x); the owner is always the
            // lower one, so the parent list is sorted.
            debug_assert!(jo < jt);
            let id = self
                .net
                .add_deterministic_bool(name, vec![jo, jt], move |digits| {
                    let to = states_o[digits[0]];
                    let tt = states_t[digits[1]];
                    let corridor =
                        to.directions.contains(dir) && tt.directions.contains(opposite);
                    corridor == want_open
                })
                .expect("shared feature CPT well formed");
            self.x.insert(owner_key, id);
            id
        } else {
            let jp = self.ensure_junction(p);
            let states_p = self.j_states[&pi].clone();
            let det = Detector::new(f, w);
            let name = format!("X({},{},{},{})", p.x, p.y, w.0, f.name());
            self.net
                .add_deterministic_bool(name, vec![jp], move |digits| {
                    geometry_features(states_p[digits[0]]).truth(det)
                })
                .expect("local feature CPT well formed")
        };
        self.x.insert(key, id);
        id
    }

    fn enter_evidence(self, items: &[Evidence]) -> GridNetwork {
        let mut gn = GridNetwork {
            net: self.net,
            h: self.h,
            j: self.j,
            j_states: self.j_states,
            x: self.x,
            evidence: BTreeMap::new(),
            contradiction: false,
        };
        let grid = self.cfg.grid;
        let fp = self.cfg.noise.false_positive;
        let fnr = self.cfg.noise.false_negative;
        for (idx, item) in items.iter().enumerate() {
            match item {
                Evidence::Sensor(r) => {
                    let pi = grid.intersection_index(r.location);
                    let parent = gn.x_node(pi, r.detector.wedge, r.detector.feature);
                    let cpt = vec![
                        1.0 - fp, fp, // X = false
                        fnr, 1.0 - fnr, // X = true
                    ];
                    let s = gn
                        .net
                        .add_node(format!("S{idx}"), 2, vec![parent], cpt)
                        .expect("sensor CPT well formed");
                    gn.evidence.insert(s, r.result as usize);
                }
                Evidence::Edge { from, direction, present, .. } => {
                    let pi = grid.intersection_index(*from);
                    let node = gn.x_node(pi, Wedge::for_direction(*direction), Feature::Opening);
                    let state = *present as usize;
                    if let Some(prev) = gn.evidence.insert(node, state) {
                        if prev != state {
                            gn.contradiction = true;
                        }
                    }
                }
            }
        }
        gn
    }
}

/// Build the full decision network (every junction and feature node on the
/// grid) and enter the given evidence items.
pub fn build_grid_network(cfg: &GridModelConfig, items: &[Evidence]) -> GridNetwork {
    let mut b = NetBuilder::new(cfg);
    for p in cfg.grid.intersections() {
        b.ensure_junction(p);
    }
    for p in cfg.grid.intersections() {
        for w in Wedge::ALL {
            for f in Feature::ALL {
                b.ensure_feature(p, w, f);
            }
        }
    }
    b.enter_evidence(items)
}

/// Build only the slice of the network the evidence touches. Posterior
/// readouts over `H` and the included junctions match the full network.
pub fn build_evidence_network(cfg: &GridModelConfig, items: &[Evidence]) -> GridNetwork {
    let grid = cfg.grid;
    let mut b = NetBuilder::new(cfg);
    // Deterministic node layout: junctions first, sorted; then features.
    let mut junctions: BTreeSet<Intersection> = BTreeSet::new();
    let mut features: BTreeSet<(Intersection, u8, usize)> = BTreeSet::new();
    for item in items {
        match item {
            Evidence::Sensor(r) => {
                junctions.insert(r.location);
                features.insert((r.location, r.detector.wedge.0, r.detector.feature.index()));
                if b.is_shared(r.location, r.detector.wedge, r.detector.feature).is_some() {
                    let d = r.detector.wedge.cardinal_direction().unwrap();
                    junctions.insert(grid.neighbor(r.location, d).unwrap());
                }
            }
            Evidence::Edge { from, direction, .. } => {
                junctions.insert(*from);
                features.insert((*from, Wedge::for_direction(*direction).0, Feature::Opening.index()));
                if let Some(q) = grid.neighbor(*from, *direction) {
                    if cfg.structure == Structure::Multiply {
                        junctions.insert(q);
                    }
                }
            }
        }
    }
    for p in junctions {
        b.ensure_junction(p);
    }
    for (p, w, f) in features {
        b.ensure_feature(p, Wedge(w), Feature::ALL[f]);
    }
    b.enter_evidence(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Intersection;
    use crate::inference::clique_tree::propagate;
    use crate::inference::triangulate::{largest_clique_cost, triangulate};
    use crate::world::{enumerate_maps, DEFAULT_ENUMERATION_BUDGET};

    fn grid(nx: usize, ny: usize) -> GridSpec {
        GridSpec::new(nx, ny).unwrap()
    }

    fn pick_maps(g: GridSpec, n: usize) -> Vec<MapHypothesis> {
        enumerate_maps(g, DEFAULT_ENUMERATION_BUDGET)
            .unwrap()
            .into_iter()
            .rev() // denser maps first, more interesting junctions
            .take(n)
            .collect()
    }

    #[test]
    fn h_cardinality_is_k_plus_one() {
        let g = grid(2, 2);
        let maps = pick_maps(g, 2);
        let cfg = GridModelConfig {
            grid: g,
            maps: &maps,
            noise: NoiseModel::DEFAULT,
            structure: Structure::Multiply,
        };
        let gn = build_grid_network(&cfg, &[]);
        assert_eq!(gn.net.card(gn.h.unwrap()), 3);
    }

    #[test]
    fn singly_mode_moral_graph_is_a_tree_on_1x2() {
        let g = grid(1, 2);
        let maps = pick_maps(g, 2);
        let cfg = GridModelConfig {
            grid: g,
            maps: &maps,
            noise: NoiseModel::DEFAULT,
            structure: Structure::Singly,
        };
        let gn = build_grid_network(&cfg, &[]);
        assert!(gn.net.moralize().is_forest());
    }

    #[test]
    fn multiply_mode_moral_graph_cycles_through_junctions_on_2x2() {
        let g = grid(2, 2);
        let maps = pick_maps(g, 2);
        let cfg = GridModelConfig {
            grid: g,
            maps: &maps,
            noise: NoiseModel::DEFAULT,
            structure: Structure::Multiply,
        };
        let gn = build_grid_network(&cfg, &[]);
        let moral = gn.net.moralize();
        assert!(!moral.is_forest());
        // The four junction nodes form a cycle via married shared-feature
        // parents: (0,0)-(1,0), (1,0)-(1,1), (1,1)-(0,1), (0,1)-(0,0).
        let jn: Vec<usize> = gn.j.values().map(|n| n.0).collect();
        assert!(moral.has_edge(jn[0], jn[1]));
        assert!(moral.has_edge(jn[1], jn[3]));
        assert!(moral.has_edge(jn[3], jn[2]));
        assert!(moral.has_edge(jn[2], jn[0]));
    }

    #[test]
    fn h_marginal_without_evidence_is_uniform_prior() {
        let g = grid(2, 2);
        let maps = pick_maps(g, 3);
        let cfg = GridModelConfig {
            grid: g,
            maps: &maps,
            noise: NoiseModel::DEFAULT,
            structure: Structure::Multiply,
        };
        let gn = build_grid_network(&cfg, &[]);
        let tree = propagate(&gn.net, &gn.evidence).unwrap();
        let h = tree.marginal(gn.h.unwrap());
        for p in h {
            assert!((p - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn junction_marginal_under_pure_nota_is_uniform() {
        let g = grid(2, 2);
        let cfg = GridModelConfig {
            grid: g,
            maps: &[],
            noise: NoiseModel::DEFAULT,
            structure: Structure::Multiply,
        };
        let gn = build_grid_network(&cfg, &[]);
        let tree = propagate(&gn.net, &gn.evidence).unwrap();
        let m = tree.marginal(gn.j[&0]);
        assert_eq!(m.len(), 4); // corner: subsets of {N, E}
        for p in m {
            assert!((p - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn multiply_mode_costs_more_than_singly_with_unobserved_blocks() {
        for (nx, ny) in [(2, 2), (3, 3)] {
            let g = grid(nx, ny);
            let maps: Vec<MapHypothesis> =
                (0..3).map(|s| crate::world::sample_map(g, s, true)).collect();
            let cost_of = |structure| {
                let cfg =
                    GridModelConfig { grid: g, maps: &maps, noise: NoiseModel::DEFAULT, structure };
                let gn = build_grid_network(&cfg, &[]);
                let moral = gn.net.moralize();
                let tri = triangulate(&moral, &gn.net.cards());
                largest_clique_cost(&tri.cliques, &gn.net.cards())
            };
            let singly = cost_of(Structure::Singly);
            let multiply = cost_of(Structure::Multiply);
            assert!(multiply > singly, "{nx}x{ny}: multiply {multiply} vs singly {singly}");
        }
    }

    #[test]
    fn singly_mode_moral_graph_is_a_forest_on_larger_grids() {
        // Every feature node has one junction parent and every junction
        // hangs off the hypothesis node, so no marriages happen anywhere.
        for (nx, ny) in [(3, 3), (4, 2)] {
            let g = grid(nx, ny);
            let maps: Vec<MapHypothesis> =
                (0..2).map(|s| crate::world::sample_map(g, s, true)).collect();
            let cfg = GridModelConfig {
                grid: g,
                maps: &maps,
                noise: NoiseModel::DEFAULT,
                structure: Structure::Singly,
            };
            let gn = build_grid_network(&cfg, &[]);
            assert!(gn.net.moralize().is_forest(), "{nx}x{ny}");
        }
    }

    #[test]
    fn shared_nodes_are_mirrored() {
        let g = grid(2, 2);
        let maps = pick_maps(g, 2);
        let cfg = GridModelConfig {
            grid: g,
            maps: &maps,
            noise: NoiseModel::DEFAULT,
            structure: Structure::Multiply,
        };
        let gn = build_grid_network(&cfg, &[]);
        // Opening east of (0,0) is the same node as opening west of (1,0).
        let a = gn.x_node(0, Wedge::for_direction(Direction::East), Feature::Opening);
        let b = gn.x_node(1, Wedge::for_direction(Direction::West), Feature::Opening);
        assert_eq!(a, b);
        // Diagonals stay local.
        let c = gn.x_node(0, Wedge(7), Feature::ConvexCorner);
        let d = gn.x_node(1, Wedge(7), Feature::ConvexCorner);
        assert_ne!(c, d);
    }

    #[test]
    fn conflicting_edge_observations_flag_contradiction() {
        let g = grid(2, 2);
        let p = Intersection::new(0, 0);
        let cfg = GridModelConfig {
            grid: g,
            maps: &[],
            noise: NoiseModel::DEFAULT,
            structure: Structure::Multiply,
        };
        let items = [
            Evidence::Edge { from: p, direction: Direction::East, present: true, step: 0 },
            Evidence::Edge { from: p, direction: Direction::East, present: false, step: 1 },
        ];
        let gn = build_grid_network(&cfg, &items);
        assert!(gn.contradiction);
    }

    #[test]
    fn evidence_network_matches_full_network_posteriors() {
        use crate::sensing::{scan, SensorReading};
        use crate::world::sample_map;
        use rand_chacha::rand_core::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        let g = grid(3, 3);
        let world = sample_map(g, 77, true);
        let maps = pick_maps(g, 3);
        let noise = NoiseModel::new(0.2, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut items: Vec<Evidence> = Vec::new();
        for p in [Intersection::new(0, 0), Intersection::new(1, 1)] {
            for r in scan(&world, p, &noise, 0, &mut rng).into_iter().take(12) {
                items.push(Evidence::Sensor(r));
            }
        }
        items.push(Evidence::Edge {
            from: Intersection::new(1, 0),
            direction: Direction::East,
            present: world.has_corridor(Intersection::new(1, 0), Direction::East),
            step: 9,
        });
        items.push(Evidence::Sensor(SensorReading {
            location: Intersection::new(2, 2),
            detector: Detector::new(Feature::ConcaveCorner, Wedge(1)),
            result: true,
            step: 10,
        }));

        for structure in [Structure::Multiply, Structure::Singly] {
            let cfg = GridModelConfig { grid: g, maps: &maps, noise, structure };
            let full = build_grid_network(&cfg, &items);
            let lean = build_evidence_network(&cfg, &items);
            assert!(lean.net.len() < full.net.len());
            let t_full = propagate(&full.net, &full.evidence).unwrap();
            let t_lean = propagate(&lean.net, &lean.evidence).unwrap();
            assert!((t_full.log_evidence() - t_lean.log_evidence()).abs() < 1e-9);
            let hf = t_full.marginal(full.h.unwrap());
            let hl = t_lean.marginal(lean.h.unwrap());
            for (a, b) in hf.iter().zip(&hl) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
