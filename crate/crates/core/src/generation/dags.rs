use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{canonical_form, Neuron, ScalarNet};
use crate::error::{Error, Result};
use crate::graph::{self, CapsuleFn, CapsuleGraph, NodeId, WeightingOp};
use crate::tensor::Tensor;

/// A bare directed graph: vertex ids and edges, no parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    pub vertices: Vec<NodeId>,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl Dag {
    pub fn new(vertices: &[&str], edges: &[(&str, &str)]) -> Self {
        Dag {
            vertices: vertices.iter().map(|&v| NodeId::from(v)).collect(),
            edges: edges.iter().map(|&(a, b)| (NodeId::from(a), NodeId::from(b))).collect(),
        }
    }

    /// The skeleton of a capsule graph.
    pub fn from_graph(g: &CapsuleGraph) -> Self {
        Dag {
            vertices: g.node_ids().cloned().collect(),
            edges: g.edges().iter().map(|e| (e.src.clone(), e.dst.clone())).collect(),
        }
    }

    /// The induced network: vertices without incoming edges become input
    /// variables, every other vertex `h` computes `f(Σ w·y + b)` with the
    /// activation and bias from `node` and edge weights from `weight`.
    pub fn induced_network(
        &self,
        node: impl Fn(&NodeId) -> (CapsuleFn, f64),
        weight: impl Fn(&NodeId, &NodeId) -> f64,
    ) -> Result<ScalarNet> {
        let targets: BTreeSet<&NodeId> = self.edges.iter().map(|(_, d)| d).collect();
        let mut g = CapsuleGraph::new();
        for v in self.vertices.iter().filter(|v| !targets.contains(v)) {
            g = g.with_input(v.clone(), &[]);
        }
        for v in self.vertices.iter().filter(|v| targets.contains(v)) {
            let (f, b) = node(v);
            let n = Neuron::new(v.clone(), f, b);
            g = g.with_capsule(n.id, n.activation, Tensor::scalar(n.bias));
        }
        for (s, d) in &self.edges {
            g = g.with_edge(s.clone(), d.clone(), WeightingOp::ScalarMult, Some(Tensor::scalar(weight(s, d))));
        }
        let report = graph::validate(&g);
        for v in &report.violations {
            match v {
                graph::Violation::Cycle(c) => {
                    return Err(Error::CycleDetected(c.iter().map(|n| n.to_string()).collect()))
                }
                graph::Violation::NotConnected { .. } => return Err(Error::NotConnected),
                _ => {}
            }
        }
        ScalarNet::from_graph(g)
    }

    /// Induced network with sigmoid activations, zero biases and unit weights.
    pub fn induced_default(&self) -> Result<ScalarNet> {
        self.induced_network(|_| (CapsuleFn::Sigmoid, 0.0), |_, _| 1.0)
    }
}

fn forward_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn weakly_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![false; n];
    reach[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for &(a, b) in edges {
            if reach[a] != reach[b] {
                reach[a] = true;
                reach[b] = true;
                changed = true;
            }
        }
    }
    reach.into_iter().all(|r| r)
}

fn dag_from_indices(names: &[NodeId], edges: &[(usize, usize)]) -> Dag {
    Dag {
        vertices: names.to_vec(),
        edges: edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect(),
    }
}

/// One representative of every weakly connected DAG on `n` vertices, up to
/// isomorphism. Exhaustive over upper-triangular edge sets, so keep `n ≤ 7`.
pub fn connected_dags(n: usize) -> Vec<Dag> {
    assert!((1..=7).contains(&n), "exhaustive DAG enumeration supports 1..=7 vertices");
    let names: Vec<NodeId> = (0..n).map(|i| NodeId::new(format!("v{i}"))).collect();
    let pairs = forward_pairs(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &p)| p)
            .collect();
        if !weakly_connected(n, &edges) {
            continue;
        }
        let dag = dag_from_indices(&names, &edges);
        let form = canonical_form(dag.induced_default().expect("forward edges form a connected DAG"));
        if seen.insert(form) {
            out.push(dag);
        }
    }
    out
}

/// A random weakly connected DAG on `n` vertices whose ids are shuffled, so
/// lexicographic order says nothing about topological order.
pub fn random_connected_dag(n: usize, rng: &mut impl Rng) -> Dag {
    assert!(n >= 1);
    let mut names: Vec<NodeId> = (0..n).map(|i| NodeId::new(format!("n{i}"))).collect();
    names.shuffle(rng);
    let pairs = forward_pairs(n);
    loop {
        let density: f64 = rng.gen_range(0.15..0.6);
        let edges: Vec<(usize, usize)> = pairs.iter().copied().filter(|_| rng.gen_bool(density)).collect();
        if weakly_connected(n, &edges) {
            return dag_from_indices(&names, &edges);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn connected_dag_counts_match_known_sequence() {
        // weakly connected unlabeled DAGs: 1, 1, 4, 24, 267
        let counts: Vec<usize> = (1..=5).map(|n| connected_dags(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 4, 24, 267]);
    }

    #[test]
    fn induced_network_rejects_cycles_and_disconnection() {
        let cyc = Dag::new(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("c", "b")]);
        assert!(matches!(cyc.induced_default(), Err(Error::CycleDetected(_))));
        let split = Dag::new(&["a", "b", "c"], &[("a", "b")]);
        assert!(matches!(split.induced_default(), Err(Error::NotConnected)));
        let single = Dag::new(&["x"], &[]);
        let net = single.induced_default().unwrap();
        assert_eq!(net.graph().inputs().len(), 1);
    }

    #[test]
    fn random_dags_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=10 {
            let d = random_connected_dag(n, &mut rng);
            assert_eq!(d.vertices.len(), n);
            assert!(d.induced_default().is_ok());
        }
    }
}
