//! Reverse-mode differentiation over arbitrary capsule DAGs.
//!
//! Nodes are visited in reverse topological order. Each capsule `H` turns the
//! upstream gradient `∂L/∂Y_H` into its sensitivity `δ_H = ∂L/∂U_H`, then
//! pushes `δ_H` through every incoming edge: the edge's weight gradient is
//! recorded and its input gradient is accumulated at the source. The bias
//! gradient is `δ_H` itself.

mod check;

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::{apply_capsule, sigmoid_prime, ValueMap};
use crate::graph::{self, ops::scalar_weight, CapsuleFn, CapsuleGraph, NodeId, ParamKey, WeightingOp};
use crate::tensor::Tensor;

pub use check::{grad_check, relative_error, GradCheck, DEFAULT_EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// `½‖Y − T‖²` per output node.
    Mse,
    /// `−Σ T·log Y` on softmax output nodes.
    SoftmaxCrossEntropy,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::SoftmaxCrossEntropy => "xent",
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "xent" => Ok(LossKind::SoftmaxCrossEntropy),
            other => Err(Error::InvalidConfig(format!("unknown loss `{other}` (mse|xent)"))),
        }
    }
}

/// A loss kind plus one target per output node.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub targets: BTreeMap<NodeId, Tensor>,
}

impl LossSpec {
    pub fn new(kind: LossKind, targets: BTreeMap<NodeId, Tensor>) -> Self {
        LossSpec { kind, targets }
    }

    pub fn mse<I, K>(targets: I) -> Self
    where
        I: IntoIterator<Item = (K, Tensor)>,
        K: Into<NodeId>,
    {
        LossSpec::new(LossKind::Mse, targets.into_iter().map(|(k, t)| (k.into(), t)).collect())
    }

    /// Checks that targets cover exactly the output nodes with matching shapes,
    /// and that cross-entropy is only used on softmax outputs.
    pub fn check(&self, g: &CapsuleGraph) -> Result<()> {
        let outputs = graph::classify(g)?.outputs;
        for id in &outputs {
            let t = self.targets.get(id).ok_or_else(|| Error::MissingTarget(id.to_string()))?;
            let node = g.capsule(id).expect("outputs are capsules");
            if t.shape() != node.bias.shape() {
                return Err(Error::InvalidTarget(format!(
                    "target for `{id}` has shape {:?}, node output is {:?}",
                    t.shape(),
                    node.bias.shape()
                )));
            }
            if self.kind == LossKind::SoftmaxCrossEntropy && node.cap != CapsuleFn::Softmax {
                return Err(Error::InvalidTarget(format!(
                    "cross-entropy needs a softmax output, `{id}` is {}",
                    node.cap
                )));
            }
        }
        if let Some(extra) = self.targets.keys().find(|k| !outputs.contains(k)) {
            return Err(Error::InvalidTarget(format!("`{extra}` is not an output node")));
        }
        Ok(())
    }
}

fn node_loss(kind: LossKind, y: &Tensor, u: Option<&Tensor>, t: &Tensor) -> Result<f64> {
    match kind {
        LossKind::Mse => Ok(0.5 * y.sub(t)?.norm_squared()),
        LossKind::SoftmaxCrossEntropy => {
            let u = u.ok_or_else(|| Error::InvalidValues("missing pre-activation".into()))?;
            if u.shape() != t.shape() {
                return Err(Error::shape(format!("target {:?} vs output {:?}", t.shape(), u.shape())));
            }
            // log-softmax from the pre-activation stays finite when Y underflows
            let max = u.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + u.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            Ok(u.data().iter().zip(t.data()).map(|(&ui, &ti)| -ti * (ui - lse)).sum())
        }
    }
}

/// `L = Σ_H Loss(Y_H, T_H)` over the targeted output nodes.
pub fn total_loss(values: &ValueMap, loss: &LossSpec) -> Result<f64> {
    let mut total = 0.0;
    for (id, t) in &loss.targets {
        let y = values.output(id).ok_or_else(|| Error::MissingTarget(id.to_string()))?;
        if y.shape() != t.shape() {
            return Err(Error::shape(format!("target for `{id}`: {:?} vs output {:?}", t.shape(), y.shape())));
        }
        total += node_loss(loss.kind, y, values.pre_activation(id), t)?;
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteValue("loss".into()));
    }
    Ok(total)
}

/// `δ_H = ∂L/∂U_H` for every capsule node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SensitivityMap {
    pub delta: BTreeMap<NodeId, Tensor>,
}

impl SensitivityMap {
    pub fn get(&self, id: &NodeId) -> Option<&Tensor> {
        self.delta.get(id)
    }
}

/// `∂L/∂W` per weighted edge and `∂L/∂B` per capsule node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientSet {
    pub weight_grads: BTreeMap<(NodeId, NodeId), Tensor>,
    pub bias_grads: BTreeMap<NodeId, Tensor>,
}

impl GradientSet {
    pub fn get(&self, key: &ParamKey) -> Option<&Tensor> {
        match key {
            ParamKey::Weight(s, d) => self.weight_grads.get(&(s.clone(), d.clone())),
            ParamKey::Bias(h) => self.bias_grads.get(h),
        }
    }

    /// Largest absolute gradient entry.
    pub fn max_abs(&self) -> f64 {
        self.weight_grads
            .values()
            .chain(self.bias_grads.values())
            .map(Tensor::max_abs)
            .fold(0.0, f64::max)
    }
}

/// `upstream · ∂cap/∂u`: the vector-Jacobian product of a capsule function
/// at `u`. For downsampling `u` is the pre-pool tensor and the result spreads
/// each entry evenly over its window.
pub fn cap_jacobian(cap: CapsuleFn, u: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    if let CapsuleFn::Downsample(s) = cap {
        let pooled = u.downsample(s)?;
        if pooled.shape() != upstream.shape() {
            return Err(Error::shape(format!(
                "downsample upstream {:?} vs pooled {:?}",
                upstream.shape(),
                pooled.shape()
            )));
        }
        return upstream.downsample_adjoint(s);
    }
    if u.shape() != upstream.shape() {
        return Err(Error::shape(format!("upstream {:?} vs u {:?}", upstream.shape(), u.shape())));
    }
    match cap {
        CapsuleFn::Identity => Ok(upstream.clone()),
        CapsuleFn::Sigmoid => upstream.zip_with(u, "sigmoid'", |g, x| g * sigmoid_prime(x)),
        CapsuleFn::Tanh => upstream.zip_with(u, "tanh'", |g, x| {
            let t = x.tanh();
            g * (1.0 - t * t)
        }),
        CapsuleFn::Relu => upstream.zip_with(u, "relu'", |g, x| if x > 0.0 { g } else { 0.0 }),
        CapsuleFn::Softmax => {
            let y = apply_capsule(cap, u)?;
            let gy = upstream.dot(&y)?;
            y.zip_with(upstream, "softmax'", |yi, gi| yi * (gi - gy))
        }
        CapsuleFn::Squash => {
            let n2 = u.norm_squared();
            if n2 == 0.0 {
                return Ok(Tensor::zeros(u.shape()));
            }
            let n = n2.sqrt();
            let c = n / (1.0 + n2);
            let k = (1.0 - n2) / ((1.0 + n2) * (1.0 + n2) * n) * upstream.dot(u)?;
            upstream.zip_with(u, "squash'", |gi, ui| c * gi + k * ui)
        }
        CapsuleFn::Downsample(_) => unreachable!("handled above"),
    }
}

/// Adjoints of `W ⊗ y` for upstream `delta`: the weight gradient (for
/// weighted ops) and the gradient with respect to `y`.
pub fn op_adjoints(
    op: &WeightingOp,
    weight: Option<&Tensor>,
    y_src: &Tensor,
    delta: &Tensor,
) -> Result<(Option<Tensor>, Tensor)> {
    let out_shape = op.output_shape(weight.map(Tensor::shape), y_src.shape())?;
    if out_shape != delta.shape() {
        return Err(Error::shape(format!(
            "{} delta {:?} vs output {:?}",
            op.name(),
            delta.shape(),
            out_shape
        )));
    }
    match (op, weight) {
        (WeightingOp::IdentityTransfer, _) => Ok((None, delta.clone())),
        (WeightingOp::Reshape(_), _) => Ok((None, delta.reshape(y_src.shape())?)),
        (WeightingOp::ScalarMult, Some(w)) => {
            let wg = Tensor::scalar(delta.dot(y_src)?);
            Ok((Some(wg), delta.scale(scalar_weight(w)?)?))
        }
        (WeightingOp::MatMul, Some(w)) => Ok((Some(delta.matmul_rhs_transposed(y_src)?), w.matmul_transposed(delta)?)),
        (WeightingOp::Conv2d, Some(w)) => {
            let (kh, kw) = (w.shape()[2], w.shape()[3]);
            Ok((Some(y_src.conv2d_kernel_grad(delta, (kh, kw))?), w.conv2d_input_grad(delta)?))
        }
        _ => unreachable!("output_shape checked weight presence"),
    }
}

fn check_values(g: &CapsuleGraph, order: &[NodeId], values: &ValueMap) -> Result<()> {
    let stale = |msg: String| Error::InvalidValues(msg);
    if values.outputs().len() != order.len() || values.pre_activations().len() != g.nodes().len() {
        return Err(stale("node count differs from the graph".into()));
    }
    let shapes = graph::infer_shapes(g)?;
    for id in order {
        let y = values.output(id).ok_or_else(|| stale(format!("no output for `{id}`")))?;
        if y.shape() != shapes[id].as_slice() {
            return Err(stale(format!("output of `{id}` has shape {:?}", y.shape())));
        }
        if let Some(node) = g.capsule(id) {
            let u = values
                .pre_activation(id)
                .ok_or_else(|| stale(format!("no pre-activation for `{id}`")))?;
            if u.shape() != node.bias.shape() {
                return Err(stale(format!("pre-activation of `{id}` has shape {:?}", u.shape())));
            }
        }
    }
    Ok(())
}

/// Sensitivities and parameter gradients of `loss` at `values`, which must
/// come from evaluating `g`.
pub fn backward(g: &CapsuleGraph, values: &ValueMap, loss: &LossSpec) -> Result<(SensitivityMap, GradientSet)> {
    let report = graph::validate(g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report));
    }
    let order = graph::topo_order(g)?;
    check_values(g, &order, values)?;
    loss.check(g)?;

    let mut upstream: BTreeMap<NodeId, Tensor> = BTreeMap::new();
    let mut sens = SensitivityMap::default();
    let mut grads = GradientSet::default();
    for id in order.iter().rev() {
        let Some(node) = g.capsule(id) else { continue };
        let y = values.output(id).expect("checked");
        let u = values.pre_activation(id).expect("checked");
        let delta = match loss.targets.get(id) {
            Some(t) => match loss.kind {
                // δ = Y·ΣT − T, which is Y − T for normalized targets
                LossKind::SoftmaxCrossEntropy => y.scale(t.sum())?.sub(t)?,
                LossKind::Mse => cap_delta(node.cap, u, &y.sub(t)?)?,
            },
            None => {
                let dy = upstream.remove(id).expect("non-output capsules have successors");
                cap_delta(node.cap, u, &dy)?
            }
        };
        // downsampling happens before the bias, so the edges see the pre-pool sum
        let edge_delta = match node.cap {
            CapsuleFn::Downsample(s) => delta.downsample_adjoint(s)?,
            _ => delta.clone(),
        };
        for edge in g.incoming(id) {
            let y_src = values.output(&edge.src).expect("checked");
            let (wg, ig) = op_adjoints(&edge.op, edge.weight.as_ref(), y_src, &edge_delta)?;
            if let Some(wg) = wg {
                grads.weight_grads.insert((edge.src.clone(), id.clone()), wg);
            }
            if g.capsule(&edge.src).is_some() {
                match upstream.get_mut(&edge.src) {
                    Some(acc) => acc.accumulate(&ig)?,
                    None => {
                        upstream.insert(edge.src.clone(), ig);
                    }
                }
            }
        }
        grads.bias_grads.insert(id.clone(), delta.clone());
        sens.delta.insert(id.clone(), delta);
    }
    Ok((sens, grads))
}

/// `∂L/∂U` from `∂L/∂Y`; downsample nodes record the biased pooled sum as
/// `U` and act as the identity on it.
fn cap_delta(cap: CapsuleFn, u: &Tensor, dy: &Tensor) -> Result<Tensor> {
    match cap {
        CapsuleFn::Downsample(_) => Ok(dy.clone()),
        cap => cap_jacobian(cap, u, dy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{eval, inputs};

    fn one_neuron(w: f64, b: f64) -> CapsuleGraph {
        CapsuleGraph::new()
            .with_input("x1", &[])
            .with_capsule("h1", CapsuleFn::Sigmoid, Tensor::scalar(b))
            .with_edge("x1", "h1", WeightingOp::ScalarMult, Some(Tensor::scalar(w)))
    }

    #[test]
    fn loss_values() {
        let g = CapsuleGraph::new()
            .with_input("x", &[2])
            .with_capsule("o", CapsuleFn::Identity, Tensor::zeros(&[2]))
            .with_edge("x", "o", WeightingOp::IdentityTransfer, None);
        let v = eval(&g, &inputs([("x", Tensor::vector(&[1.0, 0.0]))])).unwrap();
        assert_eq!(total_loss(&v, &LossSpec::mse([("o", Tensor::vector(&[0.0, 0.0]))])).unwrap(), 0.5);
        assert_eq!(total_loss(&v, &LossSpec::mse([("o", Tensor::vector(&[1.0, 0.0]))])).unwrap(), 0.0);

        let g = CapsuleGraph::new()
            .with_input("x", &[4])
            .with_capsule("o", CapsuleFn::Softmax, Tensor::zeros(&[4]))
            .with_edge("x", "o", WeightingOp::IdentityTransfer, None);
        let v = eval(&g, &inputs([("x", Tensor::zeros(&[4]))])).unwrap();
        let loss = LossSpec::new(
            LossKind::SoftmaxCrossEntropy,
            [("o".into(), Tensor::vector(&[0.0, 1.0, 0.0, 0.0]))].into(),
        );
        assert!((total_loss(&v, &loss).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hand_chain_rule() {
        let g = one_neuron(0.0, 0.0);
        let v = eval(&g, &inputs([("x1", Tensor::scalar(1.0))])).unwrap();
        let (sens, grads) = backward(&g, &v, &LossSpec::mse([("h1", Tensor::scalar(1.0))])).unwrap();
        assert_eq!(sens.get(&"h1".into()).unwrap().item(), Some(-0.125));
        assert_eq!(grads.get(&ParamKey::Weight("x1".into(), "h1".into())).unwrap().item(), Some(-0.125));
        assert_eq!(grads.get(&ParamKey::Bias("h1".into())).unwrap().item(), Some(-0.125));
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let g = one_neuron(0.7, -0.2);
        let v = eval(&g, &inputs([("x1", Tensor::scalar(0.3))])).unwrap();
        let y = v.output(&"h1".into()).unwrap().clone();
        let (sens, grads) = backward(&g, &v, &LossSpec::mse([("h1", y)])).unwrap();
        assert!(sens.delta.values().all(|d| d.max_abs() == 0.0));
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn jacobian_spot_values() {
        let one = Tensor::scalar(1.0);
        let zero = Tensor::scalar(0.0);
        assert_eq!(cap_jacobian(CapsuleFn::Sigmoid, &zero, &one).unwrap().item(), Some(0.25));
        let up = Tensor::vector(&[1.0, -2.0]);
        assert_eq!(cap_jacobian(CapsuleFn::Identity, &Tensor::vector(&[3.0, 4.0]), &up).unwrap(), up);
        assert_eq!(
            cap_jacobian(CapsuleFn::Relu, &Tensor::vector(&[0.0, 4.0]), &up).unwrap().data(),
            &[0.0, -2.0]
        );
        let pooled = cap_jacobian(CapsuleFn::Downsample(2), &Tensor::zeros(&[1, 2, 2]), &Tensor::full(&[1, 1, 1], 1.0)).unwrap();
        assert_eq!(pooled.data(), &[0.25; 4]);
    }

    #[test]
    fn adjoint_spot_values() {
        let delta = Tensor::vector(&[1.0, 0.0]);
        let y = Tensor::vector(&[2.0, 3.0]);
        let (wg, ig) = op_adjoints(&WeightingOp::MatMul, Some(&Tensor::zeros(&[2, 2])), &y, &delta).unwrap();
        assert_eq!(wg.unwrap(), Tensor::matrix(&[&[2.0, 3.0], &[0.0, 0.0]]));
        assert_eq!(ig.data(), &[0.0, 0.0]);
        let (wg, ig) = op_adjoints(&WeightingOp::IdentityTransfer, None, &y, &delta).unwrap();
        assert!(wg.is_none());
        assert_eq!(ig, delta);
        let (wg, ig) = op_adjoints(&WeightingOp::Reshape(vec![2]), None, &Tensor::zeros(&[1, 2]), &delta).unwrap();
        assert!(wg.is_none());
        assert_eq!(ig.shape(), &[1, 2]);
        assert!(op_adjoints(&WeightingOp::MatMul, Some(&Tensor::zeros(&[3, 2])), &y, &delta).is_err());
    }

    #[test]
    fn target_and_value_errors() {
        let g = one_neuron(1.0, 0.0);
        let v = eval(&g, &inputs([("x1", Tensor::scalar(1.0))])).unwrap();
        assert!(matches!(backward(&g, &v, &LossSpec::mse(Vec::<(&str, Tensor)>::new())), Err(Error::MissingTarget(_))));
        assert!(matches!(
            backward(&g, &v, &LossSpec::mse([("h1", Tensor::vector(&[1.0]))])),
            Err(Error::InvalidTarget(_))
        ));
        let xent = LossSpec::new(LossKind::SoftmaxCrossEntropy, [("h1".into(), Tensor::scalar(1.0))].into());
        assert!(matches!(backward(&g, &v, &xent), Err(Error::InvalidTarget(_))));

        let other = one_neuron(1.0, 0.0).with_capsule("h2", CapsuleFn::Sigmoid, Tensor::scalar(0.0)).with_edge(
            "h1",
            "h2",
            WeightingOp::ScalarMult,
            Some(Tensor::scalar(1.0)),
        );
        assert!(matches!(
            backward(&other, &v, &LossSpec::mse([("h2", Tensor::scalar(1.0))])),
            Err(Error::InvalidValues(_))
        ));
    }

    #[test]
    fn loss_kind_names() {
        for kind in [LossKind::Mse, LossKind::SoftmaxCrossEntropy] {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
