//! Discrete Bayesian networks and their moral graphs.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::factor::Factor;

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("node {node} CPT row {row} sums to {sum}, expected 1")]
    MalformedCpt { node: String, row: usize, sum: f64 },
    #[error("node {node} CPT has {got} entries, expected {expected}")]
    CptShape { node: String, expected: usize, got: usize },
    #[error("parent id {parent} not defined before node {node}")]
    UnknownParent { node: String, parent: usize },
    #[error("evidence assigns state {state} to node {node} of cardinality {card}")]
    BadEvidenceState { node: String, state: usize, card: usize },
    #[error("evidence has probability zero under the network")]
    ZeroProbabilityEvidence,
}

/// Index of a node within its network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct NodeDef {
    pub name: String,
    pub card: usize,
    pub parents: Vec<NodeId>,
    /// Row per parent configuration (declared parent order, last parent
    /// fastest), `card` entries per row.
    pub cpt: Vec<f64>,
}

/// A directed acyclic network over finitely-valued nodes. Parents must be
/// added before their children, which makes cycles unrepresentable.
#[derive(Debug, Clone, Default)]
pub struct DiscreteNetwork {
    nodes: Vec<NodeDef>,
}

impl DiscreteNetwork {
    pub fn new() -> DiscreteNetwork {
        DiscreteNetwork { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &NodeDef {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeDef)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn card(&self, id: NodeId) -> usize {
        self.nodes[id.0].card
    }

    pub fn cards(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.card).collect()
    }

    pub fn add_node(
        &mut self,
        name: impl Into<String>,
        card: usize,
        parents: Vec<NodeId>,
        cpt: Vec<f64>,
    ) -> Result<NodeId, InferenceError> {
        let name = name.into();
        assert!(card >= 1, "node cardinality must be positive");
        for p in &parents {
            if p.0 >= self.nodes.len() {
                return Err(InferenceError::UnknownParent { node: name, parent: p.0 });
            }
        }
        let rows: usize = parents.iter().map(|p| self.nodes[p.0].card).product();
        let expected = rows * card;
        if cpt.len() != expected {
            return Err(InferenceError::CptShape { node: name, expected, got: cpt.len() });
        }
        for row in 0..rows {
            let sum: f64 = cpt[row * card..(row + 1) * card].iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(InferenceError::MalformedCpt { node: name, row, sum });
            }
        }
        self.nodes.push(NodeDef { name, card, parents, cpt });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Deterministic node: one-hot rows selected by `truth`.
    pub fn add_deterministic_bool(
        &mut self,
        name: impl Into<String>,
        parents: Vec<NodeId>,
        truth: impl Fn(&[usize]) -> bool,
    ) -> Result<NodeId, InferenceError> {
        let rows: usize = parents.iter().map(|p| self.nodes[p.0].card).product();
        let parent_cards: Vec<usize> = parents.iter().map(|p| self.nodes[p.0].card).collect();
        let mut cpt = Vec::with_capacity(rows * 2);
        let mut digits = vec![0usize; parents.len()];
        for _ in 0..rows {
            let t = truth(&digits);
            cpt.extend_from_slice(if t { &[0.0, 1.0] } else { &[1.0, 0.0] });
            for d in (0..parents.len()).rev() {
                digits[d] += 1;
                if digits[d] < parent_cards[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        self.add_node(name, 2, parents, cpt)
    }

    /// The CPT of `v` as a factor over `{v} ∪ parents(v)`, sorted.
    pub fn node_factor(&self, v: NodeId) -> Factor {
        let def = &self.nodes[v.0];
        let mut vars: Vec<usize> = def.parents.iter().map(|p| p.0).collect();
        vars.push(v.0);
        vars.sort_unstable();
        vars.dedup();
        let cards: Vec<usize> = vars.iter().map(|i| self.nodes[*i].card).collect();
        let total: usize = cards.iter().product::<usize>().max(1);

        let mut values = vec![0.0; total];
        let mut digits = vec![0usize; vars.len()];
        let pos_of = |node: usize| vars.binary_search(&node).unwrap();
        for slot in values.iter_mut() {
            // Row index from parents in declared order, then the node state.
            let mut row = 0usize;
            for p in &def.parents {
                row = row * self.nodes[p.0].card + digits[pos_of(p.0)];
            }
            let state = digits[pos_of(v.0)];
            *slot = def.cpt[row * def.card + state];
            for d in (0..vars.len()).rev() {
                digits[d] += 1;
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        Factor::from_values(vars, cards, values)
    }

    /// Marry parents of every node and drop edge directions.
    pub fn moralize(&self) -> UGraph {
        let mut g = UGraph::new(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            for p in &n.parents {
                g.add_edge(i, p.0);
            }
            for (a, pa) in n.parents.iter().enumerate() {
                for pb in &n.parents[a + 1..] {
                    g.add_edge(pa.0, pb.0);
                }
            }
        }
        g
    }
}

/// Simple undirected graph on `0..n`.
#[derive(Debug, Clone)]
pub struct UGraph {
    n: usize,
    adj: Vec<BTreeSet<usize>>,
}

impl UGraph {
    pub fn new(n: usize) -> UGraph {
        UGraph { n, adj: vec![BTreeSet::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.adj[a].insert(b);
        self.adj[b].insert(a);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Sorted (a, b) pairs with a < b.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in &self.adj[a] {
                if a < *b {
                    out.push((a, *b));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    /// True when the graph contains no cycle.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (a, b) in self.edges() {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }
}
