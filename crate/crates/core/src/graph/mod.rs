//! Capsule graphs: connected DAGs of input nodes and capsule nodes joined by
//! tensor-weighting edges.
//!
//! A graph may be assembled in any state; [`validate`] reports every broken
//! invariant, and the query functions ([`classify`], [`topo_order`],
//! [`infer_shapes`]) refuse graphs they cannot make sense of.

mod dot;
mod json;
pub(crate) mod ops;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use dot::to_dot;
pub use json::{from_json, to_json, GraphDocument, LoadedGraph};
pub use ops::{CapsuleFn, WeightingOp};
pub use validate::{validate, ValidationReport, Violation};

/// Name of a vertex; unique within a graph.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Self {
        NodeId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputNode {
    pub id: NodeId,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapsuleNode {
    pub id: NodeId,
    pub cap: CapsuleFn,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub op: WeightingOp,
    pub weight: Option<Tensor>,
}

/// A trainable parameter of a graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKey {
    Weight(NodeId, NodeId),
    Bias(NodeId),
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKey::Weight(s, d) => write!(f, "W[{s}->{d}]"),
            ParamKey::Bias(h) => write!(f, "B[{h}]"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CapsuleGraph {
    inputs: Vec<InputNode>,
    nodes: Vec<CapsuleNode>,
    edges: Vec<Edge>,
}

/// Graphs are sets of nodes and edges: insertion order does not matter.
impl PartialEq for CapsuleGraph {
    fn eq(&self, other: &Self) -> bool {
        fn sorted<T, K: Ord>(items: &[T], key: impl Fn(&T) -> K) -> Vec<&T> {
            let mut v: Vec<&T> = items.iter().collect();
            v.sort_by_key(|t| key(t));
            v
        }
        sorted(&self.inputs, |n| n.id.clone()) == sorted(&other.inputs, |n| n.id.clone())
            && sorted(&self.nodes, |n| n.id.clone()) == sorted(&other.nodes, |n| n.id.clone())
            && sorted(&self.edges, |e| (e.src.clone(), e.dst.clone()))
                == sorted(&other.edges, |e| (e.src.clone(), e.dst.clone()))
    }
}

impl CapsuleGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a graph without checking anything; see [`validate`].
    pub fn from_parts(inputs: Vec<InputNode>, nodes: Vec<CapsuleNode>, edges: Vec<Edge>) -> Self {
        CapsuleGraph { inputs, nodes, edges }
    }

    pub fn with_input(mut self, id: impl Into<NodeId>, shape: &[usize]) -> Self {
        self.inputs.push(InputNode {
            id: id.into(),
            shape: shape.to_vec(),
        });
        self
    }

    pub fn with_capsule(mut self, id: impl Into<NodeId>, cap: CapsuleFn, bias: Tensor) -> Self {
        self.nodes.push(CapsuleNode { id: id.into(), cap, bias });
        self
    }

    pub fn with_edge(
        mut self,
        src: impl Into<NodeId>,
        dst: impl Into<NodeId>,
        op: WeightingOp,
        weight: Option<Tensor>,
    ) -> Self {
        self.edges.push(Edge {
            src: src.into(),
            dst: dst.into(),
            op,
            weight,
        });
        self
    }

    pub fn inputs(&self) -> &[InputNode] {
        &self.inputs
    }

    pub fn nodes(&self) -> &[CapsuleNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.inputs.len() + self.nodes.len()
    }

    /// Every vertex id, inputs first, in insertion order.
    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.inputs.iter().map(|n| &n.id).chain(self.nodes.iter().map(|n| &n.id))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.node_ids().any(|n| n == id)
    }

    pub fn input(&self, id: &NodeId) -> Option<&InputNode> {
        self.inputs.iter().find(|n| &n.id == id)
    }

    pub fn capsule(&self, id: &NodeId) -> Option<&CapsuleNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn edge(&self, src: &NodeId, dst: &NodeId) -> Option<&Edge> {
        self.edges.iter().find(|e| &e.src == src && &e.dst == dst)
    }

    /// Edges entering `id`, ordered by source id.
    pub fn incoming(&self, id: &NodeId) -> Vec<&Edge> {
        let mut v: Vec<&Edge> = self.edges.iter().filter(|e| &e.dst == id).collect();
        v.sort_by(|a, b| a.src.cmp(&b.src));
        v
    }

    /// Edges leaving `id`, ordered by destination id.
    pub fn outgoing(&self, id: &NodeId) -> Vec<&Edge> {
        let mut v: Vec<&Edge> = self.edges.iter().filter(|e| &e.src == id).collect();
        v.sort_by(|a, b| a.dst.cmp(&b.dst));
        v
    }

    /// Output shape of a vertex as declared by the graph: the input shape for
    /// input nodes and the bias shape for capsule nodes.
    pub fn declared_shape(&self, id: &NodeId) -> Option<&[usize]> {
        self.input(id)
            .map(|n| n.shape.as_slice())
            .or_else(|| self.capsule(id).map(|n| n.bias.shape()))
    }

    /// True when every tensor is rank 0, every edge is a scalar multiplication
    /// and every capsule is an elementwise activation.
    pub fn is_scalar(&self) -> bool {
        self.inputs.iter().all(|n| n.shape.is_empty())
            && self.nodes.iter().all(|n| n.bias.rank() == 0 && n.cap.is_scalar_activation())
            && self
                .edges
                .iter()
                .all(|e| e.op == WeightingOp::ScalarMult && e.weight.as_ref().is_some_and(|w| w.rank() == 0))
    }

    /// All parameters in a stable order: weights by (src,dst), then biases by node id.
    pub fn param_keys(&self) -> Vec<ParamKey> {
        let mut weights: Vec<ParamKey> = self
            .edges
            .iter()
            .filter(|e| e.weight.is_some())
            .map(|e| ParamKey::Weight(e.src.clone(), e.dst.clone()))
            .collect();
        weights.sort();
        let mut biases: Vec<ParamKey> = self.nodes.iter().map(|n| ParamKey::Bias(n.id.clone())).collect();
        biases.sort();
        weights.extend(biases);
        weights
    }

    pub fn param(&self, key: &ParamKey) -> Option<&Tensor> {
        match key {
            ParamKey::Weight(s, d) => self.edge(s, d).and_then(|e| e.weight.as_ref()),
            ParamKey::Bias(h) => self.capsule(h).map(|n| &n.bias),
        }
    }

    pub fn param_mut(&mut self, key: &ParamKey) -> Option<&mut Tensor> {
        match key {
            ParamKey::Weight(s, d) => self
                .edges
                .iter_mut()
                .find(|e| &e.src == s && &e.dst == d)
                .and_then(|e| e.weight.as_mut()),
            ParamKey::Bias(h) => self.nodes.iter_mut().find(|n| &n.id == h).map(|n| &mut n.bias),
        }
    }

    /// Replaces a parameter tensor, keeping its shape.
    pub fn set_param(&mut self, key: &ParamKey, value: Tensor) -> Result<()> {
        let slot = self
            .param_mut(key)
            .ok_or_else(|| Error::UnknownNode(key.to_string()))?;
        if slot.shape() != value.shape() {
            return Err(Error::shape(format!(
                "{key}: parameter shape {:?} cannot become {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }
}

impl AsRef<CapsuleGraph> for CapsuleGraph {
    fn as_ref(&self) -> &CapsuleGraph {
        self
    }
}

/// The input / hidden / output partition of a graph's vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub inputs: Vec<NodeId>,
    pub hidden: Vec<NodeId>,
    pub outputs: Vec<NodeId>,
}

/// Partitions the vertices by in/out degree. Each class is sorted by id.
pub fn classify(g: &CapsuleGraph) -> Result<Classification> {
    let report = validate(g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report));
    }
    Ok(classify_unchecked(g))
}

pub(crate) fn classify_unchecked(g: &CapsuleGraph) -> Classification {
    let sources: BTreeSet<&NodeId> = g.edges.iter().map(|e| &e.src).collect();
    let mut inputs: Vec<NodeId> = g.inputs.iter().map(|n| n.id.clone()).collect();
    let (mut hidden, mut outputs) = (Vec::new(), Vec::new());
    for n in &g.nodes {
        if sources.contains(&n.id) {
            hidden.push(n.id.clone());
        } else {
            outputs.push(n.id.clone());
        }
    }
    inputs.sort();
    hidden.sort();
    outputs.sort();
    Classification { inputs, hidden, outputs }
}

/// Kahn's algorithm with the smallest ready id taken first.
pub fn topo_order(g: &CapsuleGraph) -> Result<Vec<NodeId>> {
    let ids: BTreeSet<&NodeId> = g.node_ids().collect();
    let mut indegree: BTreeMap<&NodeId, usize> = ids.iter().map(|&id| (id, 0)).collect();
    let mut succ: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in &g.edges {
        if !ids.contains(&e.src) {
            return Err(Error::UnknownNode(e.src.to_string()));
        }
        if let Some(d) = indegree.get_mut(&e.dst) {
            *d += 1;
        } else {
            return Err(Error::UnknownNode(e.dst.to_string()));
        }
        succ.entry(&e.src).or_default().push(&e.dst);
    }
    let mut ready: BTreeSet<&NodeId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(id) = ready.pop_first() {
        order.push(id.clone());
        for &next in succ.get(id).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("known node");
            *d -= 1;
            if *d == 0 {
                ready.insert(next);
            }
        }
    }
    if order.len() != ids.len() {
        let cycle = validate::find_cycle(g).unwrap_or_default();
        return Err(Error::CycleDetected(cycle.iter().map(|n| n.to_string()).collect()));
    }
    Ok(order)
}

/// Output shape of every vertex, checked edge by edge in topological order.
pub fn infer_shapes(g: &CapsuleGraph) -> Result<BTreeMap<NodeId, Vec<usize>>> {
    let order = topo_order(g)?;
    let mut shapes: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for id in order {
        if let Some(input) = g.input(&id) {
            crate::tensor::check_shape(&input.shape).map_err(|e| Error::ShapeConflict {
                node: id.to_string(),
                detail: e.to_string(),
            })?;
            shapes.insert(id, input.shape.clone());
            continue;
        }
        let node = g.capsule(&id).expect("topo order only yields known nodes");
        let conflict = |detail: String| Error::ShapeConflict {
            node: id.to_string(),
            detail,
        };
        let summed = node.cap.input_shape_for(node.bias.shape()).map_err(|e| conflict(e.to_string()))?;
        for edge in g.incoming(&id) {
            let src_shape = &shapes[&edge.src];
            let out = edge
                .op
                .output_shape(edge.weight.as_ref().map(|w| w.shape()), src_shape)
                .map_err(|e| conflict(format!("edge {}->{}: {e}", edge.src, edge.dst)))?;
            if out != summed {
                return Err(conflict(format!(
                    "edge {}->{} yields {:?} but the node sums {:?}",
                    edge.src, edge.dst, out, summed
                )));
            }
        }
        shapes.insert(id, node.bias.shape().to_vec());
    }
    Ok(shapes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> CapsuleGraph {
        let s = || Some(Tensor::scalar(1.0));
        CapsuleGraph::new()
            .with_input("x", &[])
            .with_capsule("c", CapsuleFn::Sigmoid, Tensor::scalar(0.0))
            .with_capsule("b", CapsuleFn::Sigmoid, Tensor::scalar(0.0))
            .with_capsule("a", CapsuleFn::Sigmoid, Tensor::scalar(0.0))
            .with_edge("x", "a", WeightingOp::ScalarMult, s())
            .with_edge("x", "b", WeightingOp::ScalarMult, s())
            .with_edge("a", "c", WeightingOp::ScalarMult, s())
            .with_edge("b", "c", WeightingOp::ScalarMult, s())
    }

    fn ids(v: &[&str]) -> Vec<NodeId> {
        v.iter().map(|&s| NodeId::from(s)).collect()
    }

    #[test]
    fn classify_diamond_and_single_node() {
        let c = classify(&diamond()).unwrap();
        assert_eq!(c.inputs, ids(&["x"]));
        assert_eq!(c.hidden, ids(&["a", "b"]));
        assert_eq!(c.outputs, ids(&["c"]));

        let single = CapsuleGraph::new().with_input("x1", &[]);
        let c = classify(&single).unwrap();
        assert_eq!(c.inputs, ids(&["x1"]));
        assert!(c.hidden.is_empty() && c.outputs.is_empty());
    }

    #[test]
    fn topo_order_breaks_ties_lexicographically() {
        assert_eq!(topo_order(&diamond()).unwrap(), ids(&["x", "a", "b", "c"]));
        let chain = CapsuleGraph::new()
            .with_input("x", &[])
            .with_capsule("h2", CapsuleFn::Identity, Tensor::scalar(0.0))
            .with_capsule("h1", CapsuleFn::Identity, Tensor::scalar(0.0))
            .with_edge("h1", "h2", WeightingOp::ScalarMult, Some(Tensor::scalar(1.0)))
            .with_edge("x", "h1", WeightingOp::ScalarMult, Some(Tensor::scalar(1.0)));
        assert_eq!(topo_order(&chain).unwrap(), ids(&["x", "h1", "h2"]));
    }

    #[test]
    fn topo_order_reports_cycles() {
        let g = CapsuleGraph::new()
            .with_capsule("a", CapsuleFn::Identity, Tensor::scalar(0.0))
            .with_capsule("b", CapsuleFn::Identity, Tensor::scalar(0.0))
            .with_edge("a", "b", WeightingOp::IdentityTransfer, None)
            .with_edge("b", "a", WeightingOp::IdentityTransfer, None);
        match topo_order(&g) {
            Err(Error::CycleDetected(c)) => {
                assert_eq!(c.len(), 2);
                assert!(c.contains(&"a".to_string()) && c.contains(&"b".to_string()));
            }
            other => panic!("expected a cycle, got {other:?}"),
        }
    }

    #[test]
    fn identity_chain_keeps_input_shape() {
        let g = CapsuleGraph::new()
            .with_input("x", &[2, 3])
            .with_capsule("h1", CapsuleFn::Tanh, Tensor::zeros(&[2, 3]))
            .with_capsule("h2", CapsuleFn::Identity, Tensor::zeros(&[2, 3]))
            .with_edge("x", "h1", WeightingOp::IdentityTransfer, None)
            .with_edge("h1", "h2", WeightingOp::IdentityTransfer, None);
        let shapes = infer_shapes(&g).unwrap();
        assert!(shapes.values().all(|s| s == &vec![2, 3]));
    }

    #[test]
    fn infer_shapes_names_first_conflict() {
        let g = CapsuleGraph::new()
            .with_input("x", &[5])
            .with_capsule("h1", CapsuleFn::Sigmoid, Tensor::zeros(&[6]))
            .with_edge("x", "h1", WeightingOp::MatMul, Some(Tensor::zeros(&[7, 5])));
        match infer_shapes(&g) {
            Err(Error::ShapeConflict { node, .. }) => assert_eq!(node, "h1"),
            other => panic!("expected a shape conflict, got {other:?}"),
        }
    }

    #[test]
    fn params_are_listed_in_stable_order() {
        let keys = diamond().param_keys();
        let names: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
        assert_eq!(
            names,
            ["W[a->c]", "W[b->c]", "W[x->a]", "W[x->b]", "B[a]", "B[b]", "B[c]"]
        );
        let mut g = diamond();
        assert!(g.set_param(&keys[0], Tensor::zeros(&[2])).is_err());
        g.set_param(&keys[0], Tensor::scalar(3.0)).unwrap();
        assert_eq!(g.param(&keys[0]).unwrap().item(), Some(3.0));
    }
}
