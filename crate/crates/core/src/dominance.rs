//! First-order stochastic dominance on the subset lattice.
//!
//! `P` dominates `Q` when there is a coupling `(S, S')` with `S ~ P`,
//! `S' ~ Q` and `S ⊇ S'` almost surely. By Strassen's theorem this is a
//! transportation feasibility question: ship the mass of `P` to the mass of
//! `Q` along edges `S -> S'` with `S ⊇ S'`. We decide it with a max-flow.

use std::collections::VecDeque;

use crate::model::ItemSet;
use crate::TOL;

/// Residual capacities below this are treated as saturated.
const FLOW_EPS: f64 = 1e-15;

struct FlowNetwork {
    head: Vec<usize>,
    cap: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(cap);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(0.0);
    }

    /// Edmonds–Karp; the graphs here have at most a few hundred nodes.
    fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let nodes = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut via = vec![usize::MAX; nodes];
            let mut seen = vec![false; nodes];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for &e in &self.adj[u] {
                    let w = self.head[e];
                    if !seen[w] && self.cap[e] > FLOW_EPS {
                        seen[w] = true;
                        via[w] = e;
                        queue.push_back(w);
                    }
                }
            }
            if !seen[sink] {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let e = via[v];
                bottleneck = bottleneck.min(self.cap[e]);
                v = self.head[e ^ 1];
            }
            let mut v = sink;
            while v != source {
                let e = via[v];
                self.cap[e] -= bottleneck;
                self.cap[e ^ 1] += bottleneck;
                v = self.head[e ^ 1];
            }
            total += bottleneck;
        }
    }
}

/// Decides whether `p` dominates `q` (within [`TOL`] of total mass).
///
/// Both arguments are distributions over item sets; entries with
/// nonpositive probability are ignored.
pub fn dominates(p: &[(ItemSet, f64)], q: &[(ItemSet, f64)]) -> bool {
    let supply: Vec<(ItemSet, f64)> = p.iter().copied().filter(|&(_, w)| w > 0.0).collect();
    let demand: Vec<(ItemSet, f64)> = q.iter().copied().filter(|&(_, w)| w > 0.0).collect();
    let need: f64 = demand.iter().map(|&(_, w)| w).sum();
    if need <= TOL {
        return true;
    }

    // Mass on ∅ can be served by anything; handle it without the network.
    let (empty_demand, demand): (Vec<_>, Vec<_>) = demand.into_iter().partition(|(s, _)| s.is_empty());
    let empty_need: f64 = empty_demand.iter().map(|&(_, w)| w).sum();
    let supply_total: f64 = supply.iter().map(|&(_, w)| w).sum();

    let source = 0;
    let sink = 1;
    let sup0 = 2;
    let dem0 = sup0 + supply.len();
    let mut net = FlowNetwork::new(dem0 + demand.len());
    for (a, &(s, w)) in supply.iter().enumerate() {
        net.add_edge(source, sup0 + a, w);
        for (b, &(t, _)) in demand.iter().enumerate() {
            if s.is_superset(t) {
                net.add_edge(sup0 + a, dem0 + b, f64::INFINITY);
            }
        }
    }
    for (b, &(_, w)) in demand.iter().enumerate() {
        net.add_edge(dem0 + b, sink, w);
    }
    let nonempty_need = need - empty_need;
    let flow = net.max_flow(source, sink);
    flow >= nonempty_need - TOL && supply_total - flow >= empty_need - TOL
}

/// `Σ_S P(S)·|S|`, the expected number of items.
pub fn expected_size(p: &[(ItemSet, f64)]) -> f64 {
    p.iter().map(|&(s, w)| w * s.len() as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(items: &[usize]) -> ItemSet {
        ItemSet::from_items(items.iter().copied(), 4).unwrap()
    }

    #[test]
    fn bundle_dominates_split() {
        assert!(dominates(&[(s(&[0, 1]), 1.0)], &[(s(&[0]), 0.5), (s(&[1]), 0.5)]));
    }

    #[test]
    fn split_does_not_dominate_bundle() {
        assert!(!dominates(&[(s(&[0]), 0.5), (s(&[1]), 0.5)], &[(s(&[0, 1]), 1.0)]));
    }

    #[test]
    fn partial_coupling_with_empty_set() {
        assert!(dominates(
            &[(s(&[0]), 0.5), (s(&[1]), 0.5)],
            &[(s(&[0]), 0.5), (ItemSet::EMPTY, 0.5)]
        ));
        assert!(!dominates(
            &[(s(&[0]), 0.5), (ItemSet::EMPTY, 0.5)],
            &[(s(&[0]), 0.5), (s(&[1]), 0.5)]
        ));
    }

    #[test]
    fn mass_must_be_matched_not_just_support() {
        // {0} w.p. .3 cannot cover {0} w.p. .6
        assert!(!dominates(
            &[(s(&[0]), 0.3), (s(&[1]), 0.7)],
            &[(s(&[0]), 0.6), (ItemSet::EMPTY, 0.4)]
        ));
    }

    #[test]
    fn reflexive() {
        let p = [(s(&[0]), 0.2), (s(&[1, 2]), 0.3), (s(&[0, 1, 2]), 0.5)];
        assert!(dominates(&p, &p));
    }
}
