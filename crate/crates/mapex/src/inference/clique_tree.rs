//! Clique-tree construction and two-pass (collect/distribute) propagation.
//!
//! Evidence is absorbed before triangulation: observed nodes are sliced out
//! of every CPT factor and drop out of the graph entirely, so the tree is
//! built over the unobserved nodes only. Fully-observed factor families
//! leave behind scalar likelihoods which are folded into the evidence
//! probability. Disconnected clique forests are bridged with empty
//! separators so a single collect/distribute pass calibrates everything.

use std::collections::BTreeMap;

use super::factor::Factor;
use super::network::{DiscreteNetwork, InferenceError, NodeId, UGraph};
use super::triangulate::{largest_clique_cost, triangulate};

#[derive(Debug, Clone)]
struct TreeEdge {
    a: usize,
    b: usize,
    sep_vars: Vec<usize>,
    sep: Factor,
}

/// A calibrated clique tree; query marginals with [`CliqueTree::marginal`].
#[derive(Debug, Clone)]
pub struct CliqueTree {
    cards: Vec<usize>,
    clique_vars: Vec<Vec<usize>>,
    potentials: Vec<Factor>,
    edges: Vec<TreeEdge>,
    evidence: BTreeMap<usize, usize>,
    var_home: BTreeMap<usize, usize>,
    log_evidence: f64,
}

impl CliqueTree {
    /// Cliques as sorted global node-id lists.
    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.clique_vars
    }

    /// ln P(evidence).
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// Product of member state-space sizes of the largest clique.
    pub fn largest_clique_cost(&self) -> u128 {
        largest_clique_cost(&self.clique_vars, &self.cards)
    }

    /// Posterior marginal of one node given the entered evidence.
    pub fn marginal(&self, node: NodeId) -> Vec<f64> {
        if let Some(state) = self.evidence.get(&node.0) {
            let mut out = vec![0.0; self.cards[node.0]];
            out[*state] = 1.0;
            return out;
        }
        let home = self.var_home[&node.0];
        self.potentials[home].marginalize(&[node.0]).normalized_values()
    }

    /// Largest L-inf distance between the two ends of any separator,
    /// after normalization. Calibration should leave this near zero.
    pub fn max_separator_inconsistency(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for e in &self.edges {
            if e.sep_vars.is_empty() {
                continue;
            }
            let fa = self.potentials[e.a].marginalize(&e.sep_vars).normalized_values();
            let fb = self.potentials[e.b].marginalize(&e.sep_vars).normalized_values();
            for (x, y) in fa.iter().zip(&fb) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }
}

/// Build, calibrate, and return the clique tree for `net` under `evidence`.
pub fn propagate(
    net: &DiscreteNetwork,
    evidence: &BTreeMap<NodeId, usize>,
) -> Result<CliqueTree, InferenceError> {
    let cards = net.cards();
    for (node, state) in evidence {
        if *state >= cards[node.0] {
            return Err(InferenceError::BadEvidenceState {
                node: net.node(*node).name.clone(),
                state: *state,
                card: cards[node.0],
            });
        }
    }
    let observed = |v: usize| evidence.get(&NodeId(v)).copied();

    // Slice evidence out of every CPT factor.
    let mut scalar_log = 0.0f64;
    let mut factors: Vec<Factor> = Vec::with_capacity(net.len());
    for (id, _) in net.nodes() {
        let f = net.node_factor(id).reduce(&observed);
        if f.is_scalar() {
            let total = f.log_total();
            if total == f64::NEG_INFINITY {
                return Err(InferenceError::ZeroProbabilityEvidence);
            }
            scalar_log += total;
        } else {
            if f.is_all_zero() {
                return Err(InferenceError::ZeroProbabilityEvidence);
            }
            factors.push(f);
        }
    }

    // Dense re-indexing of the unobserved nodes.
    let hidden: Vec<usize> =
        (0..net.len()).filter(|v| !evidence.contains_key(&NodeId(*v))).collect();
    let dense: BTreeMap<usize, usize> =
        hidden.iter().enumerate().map(|(i, v)| (*v, i)).collect();

    if hidden.is_empty() {
        // Everything observed: a single scalar clique carries the mass.
        return Ok(CliqueTree {
            cards,
            clique_vars: vec![vec![]],
            potentials: vec![Factor::scalar(1.0)],
            edges: vec![],
            evidence: evidence.iter().map(|(k, v)| (k.0, *v)).collect(),
            var_home: BTreeMap::new(),
            log_evidence: scalar_log,
        });
    }

    let mut graph = UGraph::new(hidden.len());
    for f in &factors {
        let scope: Vec<usize> = f.vars().iter().map(|v| dense[v]).collect();
        for (i, a) in scope.iter().enumerate() {
            for b in &scope[i + 1..] {
                graph.add_edge(*a, *b);
            }
        }
    }
    let dense_cards: Vec<usize> = hidden.iter().map(|v| cards[*v]).collect();
    let tri = triangulate(&graph, &dense_cards);

    // Back to global node ids.
    let clique_vars: Vec<Vec<usize>> = tri
        .cliques
        .iter()
        .map(|c| {
            let mut v: Vec<usize> = c.iter().map(|d| hidden[*d]).collect();
            v.sort_unstable();
            v
        })
        .collect();

    // Junction tree: maximum spanning forest on separator size, then
    // bridge components with empty separators.
    let k = clique_vars.len();
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let sep = sorted_intersection(&clique_vars[i], &clique_vars[j]);
            if !sep.is_empty() {
                candidates.push((sep.len(), i, j));
            }
        }
    }
    candidates.sort_by(|x, y| (y.0, x.1, x.2).cmp(&(x.0, y.1, y.2)));
    let mut parent_uf: Vec<usize> = (0..k).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut tree_pairs: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in candidates {
        let (ri, rj) = (find(&mut parent_uf, i), find(&mut parent_uf, j));
        if ri != rj {
            parent_uf[ri] = rj;
            tree_pairs.push((i, j));
        }
    }
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..k {
        let r = find(&mut parent_uf, i);
        if !reps.contains(&r) {
            reps.push(r);
        }
    }
    for pair in reps.windows(2) {
        parent_uf[pair[1]] = pair[0];
        tree_pairs.push((pair[0], pair[1]));
    }

    let mut edges: Vec<TreeEdge> = tree_pairs
        .into_iter()
        .map(|(a, b)| {
            let sep_vars = sorted_intersection(&clique_vars[a], &clique_vars[b]);
            let sep_cards: Vec<usize> = sep_vars.iter().map(|v| cards[*v]).collect();
            TreeEdge { a, b, sep_vars: sep_vars.clone(), sep: Factor::unit(sep_vars, sep_cards) }
        })
        .collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (ei, e) in edges.iter().enumerate() {
        adj[e.a].push(ei);
        adj[e.b].push(ei);
    }

    // Initialize potentials: unit over the clique scope times every factor
    // assigned to it (first containing clique wins).
    let card_of = |v: usize| cards[v];
    let mut potentials: Vec<Factor> = clique_vars
        .iter()
        .map(|c| Factor::unit(c.clone(), c.iter().map(|v| cards[*v]).collect()))
        .collect();
    for f in &factors {
        let home = clique_vars
            .iter()
            .position(|c| f.vars().iter().all(|v| c.binary_search(v).is_ok()))
            .expect("factor scope must be covered by a clique");
        potentials[home] = potentials[home].product(f, card_of);
    }

    // BFS orientation from clique 0.
    let mut order = vec![0usize];
    let mut parent_edge: Vec<Option<usize>> = vec![None; k];
    let mut seen = vec![false; k];
    seen[0] = true;
    let mut qi = 0;
    while qi < order.len() {
        let c = order[qi];
        qi += 1;
        for &ei in &adj[c] {
            let other = if edges[ei].a == c { edges[ei].b } else { edges[ei].a };
            if !seen[other] {
                seen[other] = true;
                parent_edge[other] = Some(ei);
                order.push(other);
            }
        }
    }
    debug_assert!(seen.iter().all(|s| *s));

    // Collect toward the root.
    for &c in order.iter().rev() {
        let Some(ei) = parent_edge[c] else { continue };
        let target = if edges[ei].a == c { edges[ei].b } else { edges[ei].a };
        let msg = potentials[c].marginalize(&edges[ei].sep_vars);
        let update = msg.divide_same_scope(&edges[ei].sep);
        potentials[target] = potentials[target].product(&update, card_of);
        edges[ei].sep = msg;
    }

    let log_evidence = potentials[0].log_total() + scalar_log;
    if !log_evidence.is_finite() {
        return Err(InferenceError::ZeroProbabilityEvidence);
    }

    // Distribute back out.
    for &c in order.iter() {
        for &ei in adj[c].clone().iter() {
            let other = if edges[ei].a == c { edges[ei].b } else { edges[ei].a };
            if parent_edge[other] != Some(ei) {
                continue; // only push toward children
            }
            let msg = potentials[c].marginalize(&edges[ei].sep_vars);
            let update = msg.divide_same_scope(&edges[ei].sep);
            potentials[other] = potentials[other].product(&update, card_of);
            edges[ei].sep = msg;
        }
    }

    let mut var_home = BTreeMap::new();
    for (ci, c) in clique_vars.iter().enumerate() {
        for v in c {
            var_home.entry(*v).or_insert(ci);
        }
    }

    Ok(CliqueTree {
        cards,
        clique_vars,
        potentials,
        edges,
        evidence: evidence.iter().map(|(kk, v)| (kk.0, *v)).collect(),
        var_home,
        log_evidence,
    })
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|v| b.binary_search(v).is_ok()).cloned().collect()
}
