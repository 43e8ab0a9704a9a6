use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{CapsuleGraph, NodeId};
use crate::tensor::check_shape;

/// One broken graph invariant, naming the offending node or edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyGraph,
    EmptyId,
    DuplicateId(NodeId),
    BadInputShape { node: NodeId, detail: String },
    UnknownEndpoint { src: NodeId, dst: NodeId, missing: NodeId },
    SelfLoop(NodeId),
    DuplicateEdge { src: NodeId, dst: NodeId },
    EdgeIntoInput { src: NodeId, dst: NodeId },
    NoIncomingEdge(NodeId),
    Cycle(Vec<NodeId>),
    NotConnected { components: usize },
    WeightPresence { src: NodeId, dst: NodeId, detail: String },
    CapsuleDomain { node: NodeId, detail: String },
    EdgeShape { src: NodeId, dst: NodeId, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGraph => write!(f, "graph has no nodes"),
            Violation::EmptyId => write!(f, "node with an empty id"),
            Violation::DuplicateId(id) => write!(f, "duplicate node id `{id}`"),
            Violation::BadInputShape { node, detail } => write!(f, "input `{node}`: {detail}"),
            Violation::UnknownEndpoint { src, dst, missing } => {
                write!(f, "edge {src}->{dst}: unknown node `{missing}`")
            }
            Violation::SelfLoop(id) => write!(f, "self-loop on `{id}`"),
            Violation::DuplicateEdge { src, dst } => write!(f, "duplicate edge {src}->{dst}"),
            Violation::EdgeIntoInput { src, dst } => write!(f, "edge {src}->{dst} enters input node `{dst}`"),
            Violation::NoIncomingEdge(id) => write!(f, "capsule node `{id}` has no incoming edge"),
            Violation::Cycle(ids) => {
                let names: Vec<&str> = ids.iter().map(NodeId::as_str).collect();
                write!(f, "cycle through [{}]", names.join(", "))
            }
            Violation::NotConnected { components } => {
                write!(f, "graph is not weakly connected ({components} components)")
            }
            Violation::WeightPresence { src, dst, detail } => write!(f, "edge {src}->{dst}: {detail}"),
            Violation::CapsuleDomain { node, detail } => write!(f, "capsule `{node}`: {detail}"),
            Violation::EdgeShape { src, dst, detail } => write!(f, "edge {src}->{dst}: {detail}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every graph invariant and reports all violations found.
pub fn validate(g: &CapsuleGraph) -> ValidationReport {
    let mut out = Vec::new();
    if g.node_count() == 0 {
        out.push(Violation::EmptyGraph);
        return ValidationReport { violations: out };
    }

    let mut seen = BTreeSet::new();
    for id in g.node_ids() {
        if id.as_str().is_empty() {
            out.push(Violation::EmptyId);
        } else if !seen.insert(id) {
            out.push(Violation::DuplicateId(id.clone()));
        }
    }
    for input in g.inputs() {
        if let Err(e) = check_shape(&input.shape) {
            out.push(Violation::BadInputShape {
                node: input.id.clone(),
                detail: e.to_string(),
            });
        }
    }

    let mut pairs = BTreeSet::new();
    let mut structural_ok = true;
    for e in g.edges() {
        for end in [&e.src, &e.dst] {
            if !seen.contains(end) {
                out.push(Violation::UnknownEndpoint {
                    src: e.src.clone(),
                    dst: e.dst.clone(),
                    missing: end.clone(),
                });
                structural_ok = false;
            }
        }
        if e.src == e.dst {
            out.push(Violation::SelfLoop(e.src.clone()));
        }
        if !pairs.insert((&e.src, &e.dst)) {
            out.push(Violation::DuplicateEdge {
                src: e.src.clone(),
                dst: e.dst.clone(),
            });
        }
        if g.input(&e.dst).is_some() {
            out.push(Violation::EdgeIntoInput {
                src: e.src.clone(),
                dst: e.dst.clone(),
            });
        }
        match (e.op.requires_weight(), &e.weight) {
            (true, None) => out.push(Violation::WeightPresence {
                src: e.src.clone(),
                dst: e.dst.clone(),
                detail: format!("{} requires a weight", e.op.name()),
            }),
            (false, Some(_)) => out.push(Violation::WeightPresence {
                src: e.src.clone(),
                dst: e.dst.clone(),
                detail: format!("{} takes no weight", e.op.name()),
            }),
            _ => {}
        }
    }

    for node in g.nodes() {
        if !g.edges().iter().any(|e| e.dst == node.id) {
            out.push(Violation::NoIncomingEdge(node.id.clone()));
        }
    }

    if structural_ok {
        if let Some(cycle) = find_cycle(g) {
            out.push(Violation::Cycle(cycle));
        }
        let components = weak_components(g);
        if components > 1 {
            out.push(Violation::NotConnected { components });
        }
    }

    check_shapes(g, &mut out);
    ValidationReport { violations: out }
}

// Every node's output shape is fixed by its declaration, so each edge can be
// checked locally against its endpoints.
fn check_shapes(g: &CapsuleGraph, out: &mut Vec<Violation>) {
    let mut summed: BTreeMap<&NodeId, Vec<usize>> = BTreeMap::new();
    for node in g.nodes() {
        match node.cap.input_shape_for(node.bias.shape()) {
            Ok(s) => {
                summed.insert(&node.id, s);
            }
            Err(e) => out.push(Violation::CapsuleDomain {
                node: node.id.clone(),
                detail: e.to_string(),
            }),
        }
    }
    for e in g.edges() {
        let (Some(src_shape), Some(expected)) = (g.declared_shape(&e.src), summed.get(&e.dst)) else {
            continue;
        };
        if e.op.requires_weight() != e.weight.is_some() {
            continue;
        }
        match e.op.output_shape(e.weight.as_ref().map(|w| w.shape()), src_shape) {
            Ok(s) if &s == expected => {}
            Ok(s) => out.push(Violation::EdgeShape {
                src: e.src.clone(),
                dst: e.dst.clone(),
                detail: format!(
                    "{} yields {:?} but `{}` expects {:?}",
                    e.op.name(),
                    s,
                    e.dst,
                    expected
                ),
            }),
            Err(err) => out.push(Violation::EdgeShape {
                src: e.src.clone(),
                dst: e.dst.clone(),
                detail: err.to_string(),
            }),
        }
    }
}

/// A directed cycle, as the sequence of node ids along it, if one exists.
pub(crate) fn find_cycle(g: &CapsuleGraph) -> Option<Vec<NodeId>> {
    let mut succ: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in g.edges() {
        succ.entry(&e.src).or_default().push(&e.dst);
    }
    for list in succ.values_mut() {
        list.sort();
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Open,
        Done,
    }
    let mut roots: Vec<&NodeId> = g.node_ids().collect();
    roots.sort();
    let mut mark: BTreeMap<&NodeId, Mark> = roots.iter().map(|&id| (id, Mark::Fresh)).collect();
    for &root in &roots {
        if mark[root] != Mark::Fresh {
            continue;
        }
        // iterative DFS; `path` mirrors the open nodes
        let mut stack: Vec<(&NodeId, usize)> = vec![(root, 0)];
        let mut path: Vec<&NodeId> = vec![root];
        mark.insert(root, Mark::Open);
        while let Some((node, next)) = stack.last_mut() {
            let children = succ.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                match mark.get(child).copied() {
                    Some(Mark::Fresh) => {
                        mark.insert(child, Mark::Open);
                        stack.push((child, 0));
                        path.push(child);
                    }
                    Some(Mark::Open) => {
                        let start = path.iter().position(|&p| p == child).expect("open node is on the path");
                        return Some(path[start..].iter().map(|&n| n.clone()).collect());
                    }
                    _ => {}
                }
            } else {
                mark.insert(node, Mark::Done);
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

/// Number of weakly connected components.
pub(crate) fn weak_components(g: &CapsuleGraph) -> usize {
    let ids: Vec<&NodeId> = g.node_ids().collect();
    let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for e in g.edges() {
        if let (Some(&a), Some(&b)) = (index.get(&e.src), index.get(&e.dst)) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    (0..ids.len()).filter(|&i| find(&mut parent, i) == i).count()
}
