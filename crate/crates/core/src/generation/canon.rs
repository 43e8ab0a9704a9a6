//! Canonical labelling of small directed graphs by colour refinement and
//! individualisation with backtracking.
//!
//! Input nodes are coloured apart from all other nodes, so two graphs share a
//! canonical form iff some bijection preserves both the edges and the
//! input/non-input partition. Activations, biases and weights are ignored.

use std::collections::BTreeMap;

use crate::graph::{CapsuleGraph, NodeId};

/// Isomorphism-invariant code of a graph; equal codes mean isomorphic graphs.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm(Vec<u64>);

struct Adjacency {
    n: usize,
    out: Vec<u64>,
    inc: Vec<u64>,
    is_input: Vec<bool>,
}

impl Adjacency {
    fn from_graph(g: &CapsuleGraph) -> Self {
        let ids: Vec<&NodeId> = g.node_ids().collect();
        let n = ids.len();
        assert!(n <= 64, "canonical forms support at most 64 nodes");
        let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut out = vec![0u64; n];
        let mut inc = vec![0u64; n];
        for e in g.edges() {
            if let (Some(&s), Some(&d)) = (index.get(&e.src), index.get(&e.dst)) {
                out[s] |= 1 << d;
                inc[d] |= 1 << s;
            }
        }
        let is_input = ids.iter().map(|id| g.input(id).is_some()).collect();
        Adjacency { n, out, inc, is_input }
    }

    fn neighbours(mask: u64) -> impl Iterator<Item = usize> {
        (0..64).filter(move |i| mask & (1 << i) != 0)
    }

    /// Refines `colours` until stable. Colours are dense ranks, and a vertex's
    /// new colour sorts first by its old colour, so refinement never reorders cells.
    fn refine(&self, colours: &mut [usize]) {
        loop {
            let before = distinct(colours);
            let sigs: Vec<(usize, Vec<usize>, Vec<usize>)> = (0..self.n)
                .map(|v| {
                    let mut o: Vec<usize> = Self::neighbours(self.out[v]).map(|u| colours[u]).collect();
                    let mut i: Vec<usize> = Self::neighbours(self.inc[v]).map(|u| colours[u]).collect();
                    o.sort_unstable();
                    i.sort_unstable();
                    (colours[v], o, i)
                })
                .collect();
            let mut sorted = sigs.clone();
            sorted.sort();
            sorted.dedup();
            for v in 0..self.n {
                colours[v] = sorted.binary_search(&sigs[v]).expect("signature present");
            }
            if distinct(colours) == before {
                return;
            }
        }
    }

    fn code(&self, colours: &[usize]) -> Vec<u64> {
        // colours are a permutation of 0..n at a leaf
        let mut order = vec![0; self.n];
        for (v, &c) in colours.iter().enumerate() {
            order[c] = v;
        }
        let mut input_mask = 0u64;
        for (pos, &v) in order.iter().enumerate() {
            if self.is_input[v] {
                input_mask |= 1 << pos;
            }
        }
        let mut code = vec![self.n as u64, input_mask];
        for &v in &order {
            let mut row = 0u64;
            for (pos, &u) in order.iter().enumerate() {
                if self.out[v] & (1 << u) != 0 {
                    row |= 1 << pos;
                }
            }
            code.push(row);
        }
        code
    }

    fn search(&self, colours: Vec<usize>, best: &mut Option<Vec<u64>>) {
        if distinct(&colours) == self.n {
            let code = self.code(&colours);
            if best.as_ref().is_none_or(|b| code > *b) {
                *best = Some(code);
            }
            return;
        }
        // first non-singleton cell
        let mut counts = vec![0usize; self.n];
        for &c in &colours {
            counts[c] += 1;
        }
        let target = (0..self.n).find(|&c| counts[c] > 1).expect("partition is not discrete");
        let cell: Vec<usize> = (0..self.n).filter(|&v| colours[v] == target).collect();
        // vertices with identical in- and out-neighbourhoods are swapped by an
        // automorphism fixing everything else, so one representative suffices
        let mut tried: Vec<(u64, u64)> = Vec::new();
        for &v in &cell {
            let key = (self.out[v], self.inc[v]);
            if tried.contains(&key) {
                continue;
            }
            tried.push(key);
            let mut next: Vec<usize> = colours
                .iter()
                .enumerate()
                .map(|(u, &c)| 2 * c + usize::from(c == target && u != v))
                .collect();
            let mut ranks = next.clone();
            ranks.sort_unstable();
            ranks.dedup();
            for c in next.iter_mut() {
                *c = ranks.binary_search(c).expect("rank present");
            }
            self.refine(&mut next);
            self.search(next, best);
        }
    }
}

fn distinct(colours: &[usize]) -> usize {
    let mut c = colours.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

pub fn canonical_form(g: impl AsRef<CapsuleGraph>) -> CanonicalForm {
    let adj = Adjacency::from_graph(g.as_ref());
    if adj.n == 0 {
        return CanonicalForm(vec![0, 0]);
    }
    let mut colours: Vec<usize> = if adj.is_input.iter().all(|&b| b) || adj.is_input.iter().all(|&b| !b) {
        vec![0; adj.n]
    } else {
        adj.is_input.iter().map(|&b| usize::from(!b)).collect()
    };
    adj.refine(&mut colours);
    let mut best = None;
    adj.search(colours, &mut best);
    CanonicalForm(best.expect("search visits at least one leaf"))
}

/// Structural isomorphism with inputs distinguished from all other nodes.
pub fn is_isomorphic(a: impl AsRef<CapsuleGraph>, b: impl AsRef<CapsuleGraph>) -> bool {
    let (a, b) = (a.as_ref(), b.as_ref());
    a.node_count() == b.node_count()
        && a.edges().len() == b.edges().len()
        && canonical_form(a) == canonical_form(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{apply_growth, apply_neuron, unit_links, Neuron};
    use crate::graph::CapsuleFn;

    fn sig(id: &str) -> Neuron {
        Neuron::new(id, CapsuleFn::Sigmoid, 0.0)
    }

    #[test]
    fn self_isomorphic_and_relabelling_invariant() {
        let a = apply_neuron(&unit_links(&["x1"]), sig("h1")).unwrap();
        let a = apply_growth(&a, &unit_links(&["x1", "h1"]), sig("h2")).unwrap();
        assert!(is_isomorphic(&a, &a));
        let b = apply_neuron(&unit_links(&["q"]), sig("z")).unwrap();
        let b = apply_growth(&b, &unit_links(&["z", "q"]), sig("a")).unwrap();
        assert!(is_isomorphic(&a, &b));
    }

    #[test]
    fn chain_is_not_fan() {
        let base = apply_neuron(&unit_links(&["x1"]), sig("h1")).unwrap();
        let chain = apply_growth(&base, &unit_links(&["h1"]), sig("h2")).unwrap();
        let fan = apply_growth(&base, &unit_links(&["x1"]), sig("h2")).unwrap();
        assert!(!is_isomorphic(&chain, &fan));
    }

    #[test]
    fn input_partition_matters() {
        // x -> h versus a graph with the same shape but where the source is not an input
        // cannot be built as a valid scalar net, so compare a 2-input fan-in with a 1-input fan-out.
        let fan_in = apply_neuron(&unit_links(&["x1", "x2"]), sig("h")).unwrap();
        let base = apply_neuron(&unit_links(&["x1"]), sig("h1")).unwrap();
        let fan_out = apply_growth(&base, &unit_links(&["x1"]), sig("h2")).unwrap();
        assert!(!is_isomorphic(&fan_in, &fan_out));
    }

    #[test]
    fn cross_base_growth_collision() {
        let base = apply_neuron(&unit_links(&["x1"]), sig("h1")).unwrap();
        let chain = apply_growth(&base, &unit_links(&["h1"]), sig("h2")).unwrap();
        let fan = apply_growth(&base, &unit_links(&["x1"]), sig("h2")).unwrap();
        let from_chain = apply_growth(&chain, &unit_links(&["x1"]), sig("h3")).unwrap();
        let from_fan = apply_growth(&fan, &unit_links(&["h1"]), sig("h3")).unwrap();
        assert!(is_isomorphic(&from_chain, &from_fan));
    }
}
