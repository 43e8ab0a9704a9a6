mod common;

use capsnet::graph::{self, classify, topo_order, validate, Violation};
use capsnet::models::fixtures;
use capsnet::{CapsuleFn, CapsuleGraph, NodeId, Tensor, WeightingOp};
use petgraph::graph::DiGraph;

fn to_petgraph(g: &CapsuleGraph) -> (DiGraph<NodeId, ()>, Vec<NodeId>) {
    let ids: Vec<NodeId> = g.node_ids().cloned().collect();
    let mut pg = DiGraph::new();
    let idx: Vec<_> = ids.iter().map(|id| pg.add_node(id.clone())).collect();
    let pos = |id: &NodeId| ids.iter().position(|x| x == id).unwrap();
    for e in g.edges() {
        pg.add_edge(idx[pos(&e.src)], idx[pos(&e.dst)], ());
    }
    (pg, ids)
}

#[test]
fn every_fixture_is_valid_and_survives_json() {
    for f in fixtures() {
        assert!(validate(&f.graph).is_ok(), "{}: {}", f.name, validate(&f.graph));
        let text = graph::to_json(&f.graph);
        let back = graph::from_json(&text).unwrap();
        assert!(back.missing.is_empty(), "{}", f.name);
        assert_eq!(back.graph, f.graph, "{}", f.name);
        assert_eq!(graph::to_json(&back.graph), text, "{}", f.name);
    }
}

#[test]
fn topological_order_respects_every_edge_and_agrees_with_petgraph_on_acyclicity() {
    for f in fixtures() {
        let order = topo_order(&f.graph).unwrap();
        let rank = |id: &NodeId| order.iter().position(|x| x == id).unwrap();
        for e in f.graph.edges() {
            assert!(rank(&e.src) < rank(&e.dst), "{}: {}->{}", f.name, e.src, e.dst);
        }
        let (pg, _) = to_petgraph(&f.graph);
        assert!(petgraph::algo::toposort(&pg, None).is_ok());
        assert_eq!(petgraph::algo::connected_components(&pg), 1, "{}", f.name);
    }
}

#[test]
fn classification_splits_inputs_hidden_and_outputs() {
    let g = capsnet::models::capsule_mix();
    let c = classify(&g).unwrap();
    let names = |v: &[NodeId]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>();
    assert_eq!(names(&c.inputs), ["aux", "img"]);
    assert_eq!(names(&c.outputs), ["class", "head"]);
    assert_eq!(c.hidden.len(), 4);
}

fn scalar_edge(g: CapsuleGraph, s: &str, d: &str) -> CapsuleGraph {
    g.with_edge(s, d, WeightingOp::ScalarMult, Some(Tensor::scalar(1.0)))
}

#[test]
fn violations_name_the_offenders() {
    let base = CapsuleGraph::new()
        .with_input("x", &[])
        .with_capsule("a", CapsuleFn::Sigmoid, Tensor::scalar(0.0))
        .with_capsule("b", CapsuleFn::Sigmoid, Tensor::scalar(0.0));
    let cyclic = scalar_edge(scalar_edge(scalar_edge(base.clone(), "x", "a"), "a", "b"), "b", "a");
    let r = validate(&cyclic);
    assert!(r
        .violations
        .iter()
        .any(|v| matches!(v, Violation::Cycle(ids) if ids.len() == 2)));
    assert!(r.to_string().contains("cycle through [a, b]"));

    let loose = scalar_edge(base.clone(), "x", "a");
    assert!(validate(&loose).violations.contains(&Violation::NoIncomingEdge("b".into())));

    let into_input = scalar_edge(scalar_edge(scalar_edge(base.clone(), "x", "a"), "x", "b"), "a", "x");
    assert!(validate(&into_input)
        .violations
        .iter()
        .any(|v| matches!(v, Violation::EdgeIntoInput { .. })));

    let split = CapsuleGraph::new()
        .with_input("x", &[])
        .with_input("y", &[])
        .with_capsule("a", CapsuleFn::Sigmoid, Tensor::scalar(0.0))
        .with_capsule("b", CapsuleFn::Sigmoid, Tensor::scalar(0.0));
    let split = scalar_edge(scalar_edge(split, "x", "a"), "y", "b");
    assert!(validate(&split).violations.contains(&Violation::NotConnected { components: 2 }));

    let bad_shape = CapsuleGraph::new()
        .with_input("x", &[3])
        .with_capsule("a", CapsuleFn::Identity, Tensor::zeros(&[4]))
        .with_edge("x", "a", WeightingOp::MatMul, Some(Tensor::zeros(&[4, 2])));
    assert!(validate(&bad_shape)
        .violations
        .iter()
        .any(|v| matches!(v, Violation::EdgeShape { .. })));

    let softmax_on_matrix = CapsuleGraph::new()
        .with_input("x", &[2, 2])
        .with_capsule("a", CapsuleFn::Softmax, Tensor::zeros(&[2, 2]))
        .with_edge("x", "a", WeightingOp::IdentityTransfer, None);
    assert!(validate(&softmax_on_matrix)
        .violations
        .iter()
        .any(|v| matches!(v, Violation::CapsuleDomain { .. })));
}

#[test]
fn missing_parameters_are_reported_not_invented() {
    let text = r#"{
        "inputs": [{"id": "x", "shape": [2]}],
        "nodes": [{"id": "h", "cap": "tanh", "bias_shape": [3]}],
        "edges": [{"from": "x", "to": "h", "op": "matmul", "weight_shape": [3, 2]}]
    }"#;
    let loaded = graph::from_json(text).unwrap();
    assert_eq!(loaded.missing.len(), 2);
    assert!(validate(&loaded.graph).is_ok());
    assert!(graph::from_json(r#"{"inputs": [], "extra": 1}"#).is_err());
    assert!(graph::from_json(r#"{"inputs": [{"id": "x", "shape": [2]}], "edges": [{"from": "x", "to": "x", "op": "warp"}]}"#).is_err());
}

#[test]
fn dot_lists_every_node_and_edge() {
    let g = capsnet::models::capsule_mix();
    let dot = graph::to_dot(&g);
    assert!(dot.starts_with("digraph"));
    for id in g.node_ids() {
        assert!(dot.contains(&format!("\"{id}\" [")), "{id}");
    }
    for e in g.edges() {
        assert!(dot.contains(&format!("\"{}\" -> \"{}\"", e.src, e.dst)));
    }
}

mod json_floats {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn parameters_round_trip_bit_exactly(w in prop::collection::vec(-1e6f64..1e6, 12), b in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 4)) {
            let g = CapsuleGraph::new()
                .with_input("x", &[3])
                .with_capsule("h", CapsuleFn::Tanh, Tensor::vector(&b))
                .with_edge("x", "h", WeightingOp::MatMul, Some(Tensor::new(vec![4, 3], w).unwrap()));
            let back = graph::from_json(&graph::to_json(&g)).unwrap().graph;
            prop_assert_eq!(back, g);
        }
    }
}
