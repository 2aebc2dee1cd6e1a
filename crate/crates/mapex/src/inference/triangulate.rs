//! Min-fill triangulation and clique extraction.
//!
//! Elimination picks the node adding the fewest fill edges; ties fall to
//! the smaller state-space product of the would-be clique, then to the
//! smaller node id, so the result is deterministic.

use super::network::UGraph;

#[derive(Debug, Clone)]
pub struct Triangulation {
    /// Input graph plus fill edges.
    pub chordal: UGraph,
    /// Maximal cliques, as sorted node lists, in elimination order.
    pub cliques: Vec<Vec<usize>>,
    pub elimination_order: Vec<usize>,
}

/// Triangulate `g`; `cards[v]` is the state-space size of node `v`.
pub fn triangulate(g: &UGraph, cards: &[usize]) -> Triangulation {
    let n = g.len();
    debug_assert_eq!(cards.len(), n);
    let mut work = g.clone();
    let mut chordal = g.clone();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut raw_cliques: Vec<Vec<usize>> = Vec::with_capacity(n);

    for _ in 0..n {
        // Pick by (fill count, clique weight, id).
        let mut best: Option<(usize, u128, usize)> = None;
        for v in 0..n {
            if !alive[v] {
                continue;
            }
            let nbrs: Vec<usize> =
                work.neighbors(v).iter().cloned().filter(|u| alive[*u]).collect();
            let mut fill = 0usize;
            for (i, a) in nbrs.iter().enumerate() {
                for b in &nbrs[i + 1..] {
                    if !work.has_edge(*a, *b) {
                        fill += 1;
                    }
                }
            }
            let weight = nbrs
                .iter()
                .fold(cards[v] as u128, |acc, u| acc.saturating_mul(cards[*u] as u128));
            let key = (fill, weight, v);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        let (_, _, v) = best.unwrap();
        let nbrs: Vec<usize> = work.neighbors(v).iter().cloned().filter(|u| alive[*u]).collect();
        for (i, a) in nbrs.iter().enumerate() {
            for b in &nbrs[i + 1..] {
                if !work.has_edge(*a, *b) {
                    work.add_edge(*a, *b);
                    chordal.add_edge(*a, *b);
                }
            }
        }
        let mut clique = nbrs;
        clique.push(v);
        clique.sort_unstable();
        raw_cliques.push(clique);
        alive[v] = false;
        order.push(v);
    }

    // Keep only maximal cliques, preserving elimination order.
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for c in &raw_cliques {
        let dominated = raw_cliques
            .iter()
            .any(|other| other.len() > c.len() && c.iter().all(|v| other.binary_search(v).is_ok()));
        let duplicate = cliques.iter().any(|kept| kept == c);
        if !dominated && !duplicate {
            cliques.push(c.clone());
        }
    }

    Triangulation { chordal, cliques, elimination_order: order }
}

/// Product of member state-space sizes, maximized over cliques.
pub fn largest_clique_cost(cliques: &[Vec<usize>], cards: &[usize]) -> u128 {
    cliques
        .iter()
        .map(|c| c.iter().fold(1u128, |acc, v| acc.saturating_mul(cards[*v] as u128)))
        .max()
        .unwrap_or(1)
}

/// Verify chordality via the recorded elimination order: at elimination
/// time every node's remaining neighborhood must be a clique.
#[cfg(test)]
pub fn is_perfect_elimination(g: &UGraph, order: &[usize]) -> bool {
    let n = g.len();
    let mut pos = vec![0usize; n];
    for (i, v) in order.iter().enumerate() {
        pos[*v] = i;
    }
    for v in 0..n {
        let later: Vec<usize> =
            g.neighbors(v).iter().cloned().filter(|u| pos[*u] > pos[v]).collect();
        for (i, a) in later.iter().enumerate() {
            for b in &later[i + 1..] {
                if !g.has_edge(*a, *b) {
                    return false;
                }
            }
        }
    }
    true
}
