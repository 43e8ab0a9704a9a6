//! Forward evaluation of the tensor-computational model.
//!
//! Input nodes pass their tensor through (`Y_Z = Z`); every capsule node `H`
//! computes `U_H = Σ_{Z ∈ IN_H} W_{Z→H} ⊗ Y_Z + B_H` and `Y_H = cap_H(U_H)`,
//! visiting nodes in topological order and summing incoming edges in source-id
//! order, so repeated evaluations are bit-identical.
//!
//! Downsample capsules add their bias after pooling: `Y_H = ↓(Σ W ⊗ Y) + B_H`.
//! For those nodes the recorded pre-activation is that biased, pooled sum and
//! the capsule acts as the identity on it.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{self, CapsuleFn, CapsuleGraph, NodeId};
use crate::tensor::Tensor;

pub type Inputs = BTreeMap<NodeId, Tensor>;

/// Builds an input map from `(id, tensor)` pairs.
pub fn inputs<I, K>(pairs: I) -> Inputs
where
    I: IntoIterator<Item = (K, Tensor)>,
    K: Into<NodeId>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v)).collect()
}

/// Outputs `Y` of every node and pre-activations `U` of every capsule node.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueMap {
    outputs: BTreeMap<NodeId, Tensor>,
    pre_activations: BTreeMap<NodeId, Tensor>,
}

impl ValueMap {
    pub fn output(&self, id: &NodeId) -> Option<&Tensor> {
        self.outputs.get(id)
    }

    pub fn pre_activation(&self, id: &NodeId) -> Option<&Tensor> {
        self.pre_activations.get(id)
    }

    pub fn outputs(&self) -> &BTreeMap<NodeId, Tensor> {
        &self.outputs
    }

    pub fn pre_activations(&self) -> &BTreeMap<NodeId, Tensor> {
        &self.pre_activations
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

fn softmax(u: &Tensor) -> Result<Tensor> {
    if u.rank() != 1 {
        return Err(Error::shape(format!("softmax needs a rank-1 tensor, got {:?}", u.shape())));
    }
    let max = u.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = u.data().iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::new(u.shape().to_vec(), exps.into_iter().map(|e| e / total).collect())
}

fn squash(u: &Tensor) -> Result<Tensor> {
    let n2 = u.norm_squared();
    if n2 == 0.0 {
        return Ok(Tensor::zeros(u.shape()));
    }
    let factor = n2.sqrt() / (1.0 + n2);
    u.scale(factor)
}

/// `cap(u)` for one capsule function.
pub fn apply_capsule(cap: CapsuleFn, u: &Tensor) -> Result<Tensor> {
    match cap {
        CapsuleFn::Identity => Ok(u.clone()),
        CapsuleFn::Sigmoid => u.map(sigmoid),
        CapsuleFn::Tanh => u.map(f64::tanh),
        CapsuleFn::Relu => u.map(|v| v.max(0.0)),
        CapsuleFn::Softmax => softmax(u),
        CapsuleFn::Squash => squash(u),
        CapsuleFn::Downsample(s) => u.downsample(s),
    }
}

/// Evaluates every node of a valid graph.
pub fn eval(g: &CapsuleGraph, inputs: &Inputs) -> Result<ValueMap> {
    let report = graph::validate(g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report));
    }
    let order = graph::topo_order(g)?;
    eval_ordered(g, &order, inputs)
}

/// [`eval`] with a precomputed topological order and no validation.
pub(crate) fn eval_ordered(g: &CapsuleGraph, order: &[NodeId], inputs: &Inputs) -> Result<ValueMap> {
    let mut outputs: BTreeMap<NodeId, Tensor> = BTreeMap::new();
    let mut pre_activations = BTreeMap::new();
    for id in order {
        if let Some(input) = g.input(id) {
            let x = inputs.get(id).ok_or_else(|| Error::MissingInput(id.to_string()))?;
            if x.shape() != input.shape.as_slice() {
                return Err(Error::shape(format!(
                    "input `{id}` declared {:?}, got {:?}",
                    input.shape,
                    x.shape()
                )));
            }
            outputs.insert(id.clone(), x.clone());
            continue;
        }
        let node = g.capsule(id).ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        let at_node = |e: Error| match e {
            Error::NonFiniteValue(_) => Error::NonFiniteValue(id.to_string()),
            other => other,
        };
        let mut sum: Option<Tensor> = None;
        for edge in g.incoming(id) {
            let term = edge.op.apply(edge.weight.as_ref(), &outputs[&edge.src]).map_err(at_node)?;
            match sum.as_mut() {
                None => sum = Some(term),
                Some(acc) => acc.accumulate(&term).map_err(at_node)?,
            }
        }
        let sum = sum.ok_or_else(|| Error::InvalidValues(format!("capsule `{id}` has no incoming edge")))?;
        let (u, y) = match node.cap {
            CapsuleFn::Downsample(_) => {
                let u = apply_capsule(node.cap, &sum).and_then(|p| p.add(&node.bias)).map_err(at_node)?;
                (u.clone(), u)
            }
            cap => {
                let u = sum.add(&node.bias).map_err(at_node)?;
                let y = apply_capsule(cap, &u).map_err(at_node)?;
                (u, y)
            }
        };
        pre_activations.insert(id.clone(), u);
        outputs.insert(id.clone(), y);
    }
    Ok(ValueMap { outputs, pre_activations })
}

/// Evaluates a capsule path built by [`crate::models::build_mlp`] on input `x`,
/// checking each stage against the graph's inferred shapes.
pub fn eval_mlp_path(g: &CapsuleGraph, x: &Tensor) -> Result<ValueMap> {
    eval_path(g, x)
}

/// Evaluates a capsule path built by [`crate::models::build_cnn`] on input `x`,
/// checking the stage pattern conv → pool → conv → pool → reshape → dense and
/// each stage's shape.
pub fn eval_cnn_path(g: &CapsuleGraph, x: &Tensor) -> Result<ValueMap> {
    let stages = crate::models::path_stages(g)?;
    if stages != crate::models::CNN_STAGE_PATTERN {
        return Err(Error::InvalidSpec(format!("not a CNN capsule path: {stages:?}")));
    }
    eval_path(g, x)
}

fn eval_path(g: &CapsuleGraph, x: &Tensor) -> Result<ValueMap> {
    let order = crate::models::path_order(g)?;
    let shapes = graph::infer_shapes(g)?;
    let values = eval(g, &inputs([(order[0].clone(), x.clone())]))?;
    for id in &order {
        let got = values.output(id).expect("every node is evaluated").shape();
        if got != shapes[id].as_slice() {
            return Err(Error::ShapeConflict {
                node: id.to_string(),
                detail: format!("stage produced {got:?}, expected {:?}", shapes[id]),
            });
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightingOp;

    fn scalar_neuron(cap: CapsuleFn, w: f64, b: f64) -> CapsuleGraph {
        CapsuleGraph::new()
            .with_input("x1", &[])
            .with_capsule("h1", cap, Tensor::scalar(b))
            .with_edge("x1", "h1", WeightingOp::ScalarMult, Some(Tensor::scalar(w)))
    }

    #[test]
    fn trivial_network_passes_input_through() {
        let g = CapsuleGraph::new().with_input("x1", &[]);
        let v = eval(&g, &inputs([("x1", Tensor::scalar(3.0))])).unwrap();
        assert_eq!(v.output(&"x1".into()).unwrap().item(), Some(3.0));
        assert!(v.pre_activations().is_empty());
    }

    #[test]
    fn identity_pipeline_and_sigmoid_at_zero() {
        let g = CapsuleGraph::new()
            .with_input("x", &[3])
            .with_capsule("h", CapsuleFn::Identity, Tensor::zeros(&[3]))
            .with_edge("x", "h", WeightingOp::IdentityTransfer, None);
        let x = Tensor::vector(&[1.0, -2.0, 0.5]);
        let v = eval(&g, &inputs([("x", x.clone())])).unwrap();
        assert_eq!(v.output(&"h".into()).unwrap(), &x);

        let g = scalar_neuron(CapsuleFn::Sigmoid, 1.0, 0.0);
        let v = eval(&g, &inputs([("x1", Tensor::scalar(0.0))])).unwrap();
        assert_eq!(v.output(&"h1".into()).unwrap().item(), Some(0.5));
    }

    #[test]
    fn eval_errors() {
        let g = scalar_neuron(CapsuleFn::Identity, 1.0, 0.0);
        assert!(matches!(eval(&g, &Inputs::new()), Err(Error::MissingInput(id)) if id == "x1"));
        assert!(matches!(
            eval(&g, &inputs([("x1", Tensor::vector(&[1.0]))])),
            Err(Error::ShapeMismatch(_))
        ));
        let g = scalar_neuron(CapsuleFn::Identity, 1e300, 0.0);
        assert!(matches!(
            eval(&g, &inputs([("x1", Tensor::scalar(1e300))])),
            Err(Error::NonFiniteValue(id)) if id == "h1"
        ));
    }

    #[test]
    fn capsule_functions() {
        let soft = apply_capsule(CapsuleFn::Softmax, &Tensor::zeros(&[4])).unwrap();
        assert_eq!(soft.data(), &[0.25; 4]);
        let relu = apply_capsule(CapsuleFn::Relu, &Tensor::vector(&[-1.0, 2.0])).unwrap();
        assert_eq!(relu.data(), &[0.0, 2.0]);
        let s = Tensor::vector(&[0.6, 0.8]);
        let sq = apply_capsule(CapsuleFn::Squash, &s).unwrap();
        for (a, b) in sq.data().iter().zip(s.data()) {
            assert!((a - b / 2.0).abs() < 1e-15);
        }
        assert_eq!(apply_capsule(CapsuleFn::Squash, &Tensor::zeros(&[3])).unwrap(), Tensor::zeros(&[3]));
        assert!(apply_capsule(CapsuleFn::Softmax, &Tensor::zeros(&[2, 2])).is_err());
        assert!(apply_capsule(CapsuleFn::Downsample(3), &Tensor::zeros(&[1, 4, 4])).is_err());
    }

    #[test]
    fn downsample_bias_is_added_after_pooling() {
        let g = CapsuleGraph::new()
            .with_input("x", &[1, 2, 2])
            .with_capsule("p", CapsuleFn::Downsample(2), Tensor::full(&[1, 1, 1], 10.0))
            .with_edge("x", "p", WeightingOp::IdentityTransfer, None);
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = eval(&g, &inputs([("x", x)])).unwrap();
        assert_eq!(v.output(&"p".into()).unwrap().data(), &[12.5]);
        assert_eq!(v.pre_activation(&"p".into()).unwrap().data(), &[12.5]);
    }
}
