//! Building, validating, serialising and rendering capsule graphs.

use capsnet::graph::{self, validate};
use capsnet::{CapsuleFn, CapsuleGraph, Tensor, WeightingOp};

fn main() -> capsnet::Result<()> {
    let g = capsnet::models::tensor_diamond();
    println!("diamond: {} nodes, {} edges, valid: {}", g.node_count(), g.edges().len(), validate(&g).is_ok());
    println!("shapes: {:?}", graph::infer_shapes(&g)?);

    let text = graph::to_json(&g);
    let back = graph::from_json(&text)?;
    println!("JSON round trip equal: {}", back.graph == g && back.missing.is_empty());

    println!("{}", graph::to_dot(&g));

    let cyclic = CapsuleGraph::new()
        .with_input("x", &[])
        .with_capsule("a", CapsuleFn::Sigmoid, Tensor::scalar(0.0))
        .with_capsule("b", CapsuleFn::Sigmoid, Tensor::scalar(0.0))
        .with_edge("x", "a", WeightingOp::ScalarMult, Some(Tensor::scalar(1.0)))
        .with_edge("a", "b", WeightingOp::ScalarMult, Some(Tensor::scalar(1.0)))
        .with_edge("b", "a", WeightingOp::ScalarMult, Some(Tensor::scalar(1.0)));
    print!("cyclic graph:\n{}", validate(&cyclic));
    Ok(())
}
