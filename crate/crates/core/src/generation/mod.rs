//! Scalar neural networks built by the four generation rules.
//!
//! * **variable** – a lone input node `x` with `y_x = x`;
//! * **neuron** – a fresh node fed by a nonempty set of input variables;
//! * **growth** – a fresh node fed by a nonempty subset of an existing network;
//! * **convergence** – a fresh node fed by nonempty subsets of two or more
//!   node-disjoint networks, merging them.
//!
//! Every connected DAG's induced network can be produced this way;
//! [`derive`] constructs the rule sequence and [`replay`] executes it.

mod canon;
mod dags;
mod derivation;
mod enumerate;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{self, CapsuleFn, CapsuleGraph, NodeId, WeightingOp};
use crate::tensor::Tensor;

pub use canon::{canonical_form, is_isomorphic, CanonicalForm};
pub use dags::{connected_dags, random_connected_dag, Dag};
pub use derivation::{derive, derive_structure, replay, Derivation, RuleCounts};
pub use enumerate::{base_network, enumerate_growth, Enumeration, Semantics};

/// A capsule graph whose tensors are all scalars, whose edges are all scalar
/// multiplications and whose capsules are elementwise activations.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarNet(CapsuleGraph);

impl ScalarNet {
    /// Accepts a valid graph of scalar shape.
    pub fn from_graph(g: CapsuleGraph) -> Result<Self> {
        if !g.is_scalar() {
            return Err(Error::InvalidSpec(
                "not a scalar network: tensors must be rank 0, edges scalar_mult, capsules elementwise".into(),
            ));
        }
        let report = graph::validate(&g);
        if !report.is_ok() {
            return Err(Error::InvalidGraph(report));
        }
        Ok(ScalarNet(g))
    }

    pub fn graph(&self) -> &CapsuleGraph {
        &self.0
    }

    pub fn into_graph(self) -> CapsuleGraph {
        self.0
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.0.contains(id)
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.0.node_ids().cloned().collect()
    }

    pub fn hidden_count(&self) -> usize {
        self.0.nodes().len()
    }
}

impl AsRef<CapsuleGraph> for ScalarNet {
    fn as_ref(&self) -> &CapsuleGraph {
        &self.0
    }
}

/// The node a rule creates: its id, activation `f` and bias `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Neuron {
    pub id: NodeId,
    pub activation: CapsuleFn,
    pub bias: f64,
}

impl Neuron {
    pub fn new(id: impl Into<NodeId>, activation: CapsuleFn, bias: f64) -> Self {
        Neuron {
            id: id.into(),
            activation,
            bias,
        }
    }
}

/// Weighted connections `(source, w)` into a new node.
pub type Links = Vec<(NodeId, f64)>;

/// Shorthand for building [`Links`] with unit weights.
pub fn unit_links(ids: &[&str]) -> Links {
    ids.iter().map(|&s| (NodeId::from(s), 1.0)).collect()
}

fn check_neuron(neuron: &Neuron) -> Result<()> {
    if !neuron.activation.is_scalar_activation() {
        return Err(Error::InvalidSpec(format!(
            "`{}` is not an elementwise activation",
            neuron.activation
        )));
    }
    if !neuron.bias.is_finite() {
        return Err(Error::NonFiniteValue(neuron.id.to_string()));
    }
    if neuron.id.as_str().is_empty() {
        return Err(Error::InvalidSpec("empty node id".into()));
    }
    Ok(())
}

fn check_links(links: &[(NodeId, f64)], what: &str) -> Result<()> {
    if links.is_empty() {
        return Err(Error::EmptySubset(what.to_string()));
    }
    let mut seen = BTreeSet::new();
    for (id, w) in links {
        if !seen.insert(id) {
            return Err(Error::NodeCollision(id.to_string()));
        }
        if !w.is_finite() {
            return Err(Error::NonFiniteValue(format!("{id}->")));
        }
    }
    Ok(())
}

fn attach(mut g: CapsuleGraph, links: &[(NodeId, f64)], neuron: Neuron) -> CapsuleGraph {
    g = g.with_capsule(neuron.id.clone(), neuron.activation, Tensor::scalar(neuron.bias));
    for (src, w) in links {
        g = g.with_edge(src.clone(), neuron.id.clone(), WeightingOp::ScalarMult, Some(Tensor::scalar(*w)));
    }
    g
}

/// Rule of variable: the trivial network on input `x`.
pub fn apply_variable(x: impl Into<NodeId>) -> ScalarNet {
    ScalarNet(CapsuleGraph::new().with_input(x, &[]))
}

/// Rule of neuron: input variables `links` feeding one new node.
pub fn apply_neuron(links: &[(NodeId, f64)], neuron: Neuron) -> Result<ScalarNet> {
    check_neuron(&neuron)?;
    check_links(links, "rule of neuron needs at least one input")?;
    if links.iter().any(|(id, _)| id == &neuron.id) {
        return Err(Error::NodeCollision(neuron.id.to_string()));
    }
    let mut g = CapsuleGraph::new();
    for (id, _) in links {
        g = g.with_input(id.clone(), &[]);
    }
    Ok(ScalarNet(attach(g, links, neuron)))
}

/// Rule of growth: a new node fed by the subset `links` of `net`'s nodes.
pub fn apply_growth(net: &ScalarNet, links: &[(NodeId, f64)], neuron: Neuron) -> Result<ScalarNet> {
    check_neuron(&neuron)?;
    check_links(links, "rule of growth needs a nonempty subset N")?;
    if net.contains(&neuron.id) {
        return Err(Error::NodeCollision(neuron.id.to_string()));
    }
    if let Some((id, _)) = links.iter().find(|(id, _)| !net.contains(id)) {
        return Err(Error::UnknownNode(id.to_string()));
    }
    Ok(ScalarNet(attach(net.0.clone(), links, neuron)))
}

/// Rule of convergence: merges `K ≥ 2` node-disjoint networks through a new
/// node fed by a nonempty subset `links[k]` of each network `nets[k]`.
pub fn apply_convergence(nets: &[ScalarNet], links: &[Links], neuron: Neuron) -> Result<ScalarNet> {
    check_neuron(&neuron)?;
    if nets.len() < 2 {
        return Err(Error::InvalidSpec("rule of convergence needs at least two networks".into()));
    }
    if links.len() != nets.len() {
        return Err(Error::InvalidSpec(format!(
            "{} networks but {} subsets",
            nets.len(),
            links.len()
        )));
    }
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    for net in nets {
        for id in net.node_ids() {
            if !seen.insert(id.clone()) {
                return Err(Error::NotDisjoint(id.to_string()));
            }
        }
    }
    if seen.contains(&neuron.id) {
        return Err(Error::NodeCollision(neuron.id.to_string()));
    }
    for (k, (net, subset)) in nets.iter().zip(links).enumerate() {
        check_links(subset, &format!("rule of convergence needs a nonempty subset A_{}", k + 1))?;
        if let Some((id, _)) = subset.iter().find(|(id, _)| !net.contains(id)) {
            return Err(Error::UnknownNode(id.to_string()));
        }
    }
    let (mut inputs, mut nodes, mut edges) = (Vec::new(), Vec::new(), Vec::new());
    for net in nets {
        inputs.extend(net.0.inputs().iter().cloned());
        nodes.extend(net.0.nodes().iter().cloned());
        edges.extend(net.0.edges().iter().cloned());
    }
    let merged = CapsuleGraph::from_parts(inputs, nodes, edges);
    let all: Links = links.iter().flatten().cloned().collect();
    Ok(ScalarNet(attach(merged, &all, neuron)))
}

/// The rule of neuron expressed through the other rules: variables for each
/// input, then growth (one input) or convergence (several).
pub fn neuron_via_other_rules(links: &[(NodeId, f64)], neuron: Neuron) -> Result<ScalarNet> {
    check_links(links, "rule of neuron needs at least one input")?;
    let vars: Vec<ScalarNet> = links.iter().map(|(id, _)| apply_variable(id.clone())).collect();
    if vars.len() == 1 {
        apply_growth(&vars[0], links, neuron)
    } else {
        let per_base: Vec<Links> = links.iter().map(|l| vec![l.clone()]).collect();
        apply_convergence(&vars, &per_base, neuron)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::classify;

    fn sig(id: &str) -> Neuron {
        Neuron::new(id, CapsuleFn::Sigmoid, 0.0)
    }

    fn one_in_one_n() -> ScalarNet {
        apply_neuron(&unit_links(&["x1"]), sig("h1")).unwrap()
    }

    #[test]
    fn variable_gives_trivial_network() {
        let net = apply_variable("x1");
        assert_eq!(net.graph().node_count(), 1);
        assert!(net.graph().edges().is_empty());
    }

    #[test]
    fn growth_preserves_base_and_adds_edges() {
        let base = one_in_one_n();
        let grown = apply_growth(&base, &unit_links(&["x1", "h1"]), sig("h2")).unwrap();
        assert_eq!(grown.graph().node_count(), 3);
        assert_eq!(grown.graph().edges().len(), 3);
        for e in base.graph().edges() {
            assert!(grown.graph().edge(&e.src, &e.dst).is_some());
        }
        assert_eq!(classify(grown.graph()).unwrap().outputs, vec![NodeId::from("h2")]);
    }

    #[test]
    fn rule_errors() {
        let base = one_in_one_n();
        assert!(matches!(apply_growth(&base, &[], sig("h2")), Err(Error::EmptySubset(_))));
        assert!(matches!(
            apply_growth(&base, &unit_links(&["x1"]), sig("h1")),
            Err(Error::NodeCollision(_))
        ));
        assert!(matches!(
            apply_growth(&base, &unit_links(&["zz"]), sig("h2")),
            Err(Error::UnknownNode(_))
        ));
        let other = apply_neuron(&unit_links(&["x1"]), sig("h9")).unwrap();
        assert!(matches!(
            apply_convergence(&[base.clone(), other], &[unit_links(&["h1"]), unit_links(&["h9"])], sig("h3")),
            Err(Error::NotDisjoint(_))
        ));
        let b2 = apply_variable("x2");
        assert!(matches!(
            apply_convergence(&[base.clone(), b2.clone()], &[unit_links(&["h1"]), vec![]], sig("h3")),
            Err(Error::EmptySubset(_))
        ));
        assert!(apply_convergence(std::slice::from_ref(&base), &[unit_links(&["h1"])], sig("h3")).is_err());
        assert!(apply_growth(&base, &unit_links(&["x1"]), Neuron::new("h2", CapsuleFn::Softmax, 0.0)).is_err());
    }

    #[test]
    fn convergence_merges_disjoint_networks() {
        let a = apply_neuron(&unit_links(&["x1"]), sig("h1")).unwrap();
        let b = apply_neuron(&unit_links(&["x2"]), sig("h2")).unwrap();
        let c = apply_convergence(&[a, b], &[unit_links(&["h1"]), unit_links(&["h2"])], sig("h3")).unwrap();
        let cls = classify(c.graph()).unwrap();
        assert_eq!(cls.inputs.len(), 2);
        assert_eq!(cls.hidden.len(), 2);
        assert_eq!(cls.outputs, vec![NodeId::from("h3")]);
    }

    #[test]
    fn neuron_rule_is_derivable() {
        for ids in [vec!["x1"], vec!["x1", "x2"], vec!["a", "b", "c"]] {
            let links = unit_links(&ids);
            let direct = apply_neuron(&links, sig("h")).unwrap();
            let other = neuron_via_other_rules(&links, sig("h")).unwrap();
            assert!(is_isomorphic(&direct, &other));
        }
    }

    #[test]
    fn scalar_net_rejects_tensor_graphs() {
        let g = CapsuleGraph::new()
            .with_input("x", &[2])
            .with_capsule("h", CapsuleFn::Identity, Tensor::zeros(&[2]))
            .with_edge("x", "h", WeightingOp::IdentityTransfer, None);
        assert!(ScalarNet::from_graph(g).is_err());
    }
}
