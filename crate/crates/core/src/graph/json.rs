//! The JSON graph document.
//!
//! ```json
//! {
//!   "inputs": [{"id": "x", "shape": [5]}],
//!   "nodes":  [{"id": "h", "cap": "sigmoid", "bias_shape": [7], "bias": [0, 0, 0, 0, 0, 0, 0]}],
//!   "edges":  [{"from": "x", "to": "h", "op": "matmul", "weight_shape": [7, 5]}]
//! }
//! ```
//!
//! `cap_arg` carries the window of a `downsample` capsule and `op_arg` the
//! target shape of a `reshape` edge. Parameters may be inlined as flat
//! row-major arrays; missing ones load as zeros and are listed in
//! [`LoadedGraph::missing`] so a caller can initialise them. Unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};

use super::{CapsuleFn, CapsuleGraph, CapsuleNode, Edge, InputNode, NodeId, ParamKey, WeightingOp};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub inputs: Vec<InputDoc>,
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDoc {
    pub id: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub cap: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_arg: Option<usize>,
    pub bias_shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op_arg: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_shape: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: CapsuleGraph,
    /// Parameters that were not inlined in the document.
    pub missing: Vec<ParamKey>,
}

fn op_from_doc(e: &EdgeDoc) -> Result<WeightingOp> {
    let op = match (e.op.as_str(), &e.op_arg) {
        ("identity_transfer", None) => WeightingOp::IdentityTransfer,
        ("scalar_mult", None) => WeightingOp::ScalarMult,
        ("matmul", None) => WeightingOp::MatMul,
        ("conv2d", None) => WeightingOp::Conv2d,
        ("reshape", Some(t)) => WeightingOp::Reshape(t.clone()),
        ("reshape", None) => return Err(Error::Format("reshape needs op_arg".into())),
        (op, Some(_)) => return Err(Error::Format(format!("op `{op}` takes no op_arg"))),
        (op, None) => return Err(Error::Format(format!("unknown weighting op `{op}`"))),
    };
    Ok(op)
}

fn param_tensor(what: &str, shape: &[usize], values: Option<&Vec<f64>>) -> Result<(Tensor, bool)> {
    let bad = |e: Error| Error::Format(format!("{what}: {e}"));
    match values {
        Some(v) => Ok((Tensor::new(shape.to_vec(), v.clone()).map_err(bad)?, false)),
        None => {
            crate::tensor::check_shape(shape).map_err(bad)?;
            Ok((Tensor::zeros(shape), true))
        }
    }
}

impl GraphDocument {
    pub fn into_graph(self) -> Result<LoadedGraph> {
        let mut missing = Vec::new();
        let inputs = self
            .inputs
            .into_iter()
            .map(|i| InputNode {
                id: NodeId::new(i.id),
                shape: i.shape,
            })
            .collect();
        let mut nodes = Vec::new();
        for n in self.nodes {
            let cap = CapsuleFn::from_name(&n.cap, n.cap_arg)?;
            let (bias, absent) = param_tensor(&format!("bias of `{}`", n.id), &n.bias_shape, n.bias.as_ref())?;
            let id = NodeId::new(n.id);
            if absent {
                missing.push(ParamKey::Bias(id.clone()));
            }
            nodes.push(CapsuleNode { id, cap, bias });
        }
        let mut edges = Vec::new();
        for e in self.edges {
            let op = op_from_doc(&e)?;
            let what = format!("weight of {}->{}", e.from, e.to);
            let weight = match (&e.weight_shape, &e.weight) {
                (Some(shape), values) => {
                    let (w, absent) = param_tensor(&what, shape, values.as_ref())?;
                    if absent {
                        missing.push(ParamKey::Weight(NodeId::new(e.from.clone()), NodeId::new(e.to.clone())));
                    }
                    Some(w)
                }
                (None, Some(_)) => return Err(Error::Format(format!("{what}: values without weight_shape"))),
                (None, None) => None,
            };
            edges.push(Edge {
                src: NodeId::new(e.from),
                dst: NodeId::new(e.to),
                op,
                weight,
            });
        }
        missing.sort();
        Ok(LoadedGraph {
            graph: CapsuleGraph::from_parts(inputs, nodes, edges),
            missing,
        })
    }

    pub fn from_graph(g: &CapsuleGraph) -> Self {
        GraphDocument {
            inputs: g
                .inputs()
                .iter()
                .map(|i| InputDoc {
                    id: i.id.to_string(),
                    shape: i.shape.clone(),
                })
                .collect(),
            nodes: g
                .nodes()
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.to_string(),
                    cap: n.cap.name().to_string(),
                    cap_arg: n.cap.arg(),
                    bias_shape: n.bias.shape().to_vec(),
                    bias: Some(n.bias.data().to_vec()),
                })
                .collect(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    from: e.src.to_string(),
                    to: e.dst.to_string(),
                    op: e.op.name().to_string(),
                    op_arg: match &e.op {
                        WeightingOp::Reshape(t) => Some(t.clone()),
                        _ => None,
                    },
                    weight_shape: e.weight.as_ref().map(|w| w.shape().to_vec()),
                    weight: e.weight.as_ref().map(|w| w.data().to_vec()),
                })
                .collect(),
        }
    }
}

pub fn from_json(text: &str) -> Result<LoadedGraph> {
    let doc: GraphDocument = serde_json::from_str(text)?;
    doc.into_graph()
}

/// Pretty-printed document with every parameter inlined.
pub fn to_json(g: &CapsuleGraph) -> String {
    let mut s = serde_json::to_string_pretty(&GraphDocument::from_graph(g)).expect("graph documents always serialize");
    s.push('\n');
    s
}
