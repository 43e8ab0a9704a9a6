use std::fmt::Write;

use super::{CapsuleGraph, NodeId, WeightingOp};

/// GraphViz rendering. Nodes are labelled by id (capsule nodes also show
/// their capsule function); edges carry the symbol of their weighting op.
pub fn to_dot(g: &CapsuleGraph) -> String {
    let mut out = String::from("digraph capsnet {\n  rankdir=LR;\n");
    for input in g.inputs() {
        let _ = writeln!(out, "  {} [shape=box, label={}];", quote(&input.id), quote(&input.id));
    }
    for node in g.nodes() {
        let label = format!("{}\\n{}", escape(node.id.as_str()), node.cap);
        let _ = writeln!(out, "  {} [shape=ellipse, label=\"{}\"];", quote(&node.id), label);
    }
    let mut edges: Vec<_> = g.edges().iter().collect();
    edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
    for e in edges {
        let label = match &e.op {
            WeightingOp::Reshape(t) => format!("◁ {t:?}"),
            op => op.symbol().to_string(),
        };
        let _ = writeln!(out, "  {} -> {} [label=\"{}\"];", quote(&e.src), quote(&e.dst), escape(&label));
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn quote(id: &NodeId) -> String {
    format!("\"{}\"", escape(id.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CapsuleFn;
    use crate::tensor::Tensor;

    #[test]
    fn edges_carry_op_symbols() {
        let g = CapsuleGraph::new()
            .with_input("X", &[1, 4, 4])
            .with_capsule("H1", CapsuleFn::Relu, Tensor::zeros(&[1, 3, 3]))
            .with_edge("X", "H1", WeightingOp::Conv2d, Some(Tensor::zeros(&[1, 1, 2, 2])));
        let dot = to_dot(&g);
        assert!(dot.starts_with("digraph capsnet {"));
        assert!(dot.contains("\"X\" -> \"H1\" [label=\"∗\"];"));
        assert!(dot.contains("\"H1\" [shape=ellipse, label=\"H1\\nrelu\"];"));
    }
}
