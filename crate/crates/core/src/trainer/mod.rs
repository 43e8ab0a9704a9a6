//! Seeded stochastic gradient descent.
//!
//! One iteration evaluates the graph on a sample, backpropagates the loss and
//! moves every weight and bias by `−η` times its gradient. [`train`] repeats
//! that over the dataset in a freshly shuffled order each epoch.
//!
//! All randomness comes from `ChaCha8Rng` seeded with the configured `u64`,
//! so runs are bit-reproducible across platforms.

mod data;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backprop::{backward, total_loss, LossKind, LossSpec};
use crate::error::{Error, Result};
use crate::forward::eval_ordered;
use crate::graph::{self, CapsuleGraph, ParamKey, WeightingOp};
use crate::tensor::Tensor;

pub use data::{read_history, write_history, Dataset, Sample};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be a positive number, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// `(fan_in, fan_out)` of a weight used by `op`.
pub fn fans(op: &WeightingOp, weight_shape: &[usize]) -> (usize, usize) {
    match (op, weight_shape) {
        (WeightingOp::MatMul, [m, n]) => (*n, *m),
        (WeightingOp::Conv2d, [k, c, kh, kw]) => (c * kh * kw, k * kh * kw),
        _ => (1, 1),
    }
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn draw_weight(g: &CapsuleGraph, key: &ParamKey, rng: &mut ChaCha8Rng) -> Tensor {
    let ParamKey::Weight(s, d) = key else {
        unreachable!("only weights are drawn")
    };
    let edge = g.edge(s, d).expect("key from param_keys");
    let shape = edge.weight.as_ref().expect("weighted edge").shape();
    let (fi, fo) = fans(&edge.op, shape);
    let r = glorot_limit(fi, fo);
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
    Tensor::new(shape.to_vec(), data).expect("finite draws")
}

/// Glorot-uniform weights and zero biases, drawn in parameter-key order.
pub fn init_params(g: &CapsuleGraph, seed: u64) -> Result<CapsuleGraph> {
    let keys = g.param_keys();
    init_selected(g, &keys, seed)
}

/// [`init_params`] restricted to `keys`. Every weight is still drawn in key
/// order, so a parameter's initial value does not depend on which others
/// are selected.
pub fn init_selected(g: &CapsuleGraph, keys: &[ParamKey], seed: u64) -> Result<CapsuleGraph> {
    graph::infer_shapes(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = g.clone();
    for key in g.param_keys() {
        let value = match key {
            ParamKey::Weight(..) => draw_weight(g, &key, &mut rng),
            ParamKey::Bias(_) => Tensor::zeros(g.param(&key).expect("key from param_keys").shape()),
        };
        if keys.contains(&key) {
            out.set_param(&key, value)?;
        }
    }
    Ok(out)
}

fn loss_for(kind: LossKind, sample: &Sample) -> LossSpec {
    LossSpec::new(kind, sample.targets.clone())
}

fn step_in_place(g: &mut CapsuleGraph, order: &[graph::NodeId], sample: &Sample, lr: f64, kind: LossKind) -> Result<f64> {
    let loss = loss_for(kind, sample);
    let values = eval_ordered(g, order, &sample.inputs)?;
    let before = total_loss(&values, &loss)?;
    let (_, grads) = backward(g, &values, &loss)?;
    for key in g.param_keys() {
        let grad = grads.get(&key).expect("gradient for every parameter");
        let slot = g.param_mut(&key).expect("key from param_keys");
        *slot = slot.zip_with(grad, "sgd", |w, d| w - lr * d)?;
    }
    Ok(before)
}

/// One iteration on one sample; returns the updated graph and the loss
/// before the update.
pub fn sgd_step(g: &CapsuleGraph, sample: &Sample, learning_rate: f64, loss: LossKind) -> Result<(CapsuleGraph, f64)> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!("learning rate must be positive, got {learning_rate}")));
    }
    let order = graph::topo_order(g)?;
    let mut out = g.clone();
    let l = step_in_place(&mut out, &order, sample, learning_rate, loss)?;
    Ok((out, l))
}

/// Per-sample SGD for `config.epochs` epochs. Returns the trained graph and
/// the mean pre-update loss of every epoch.
pub fn train(g: &CapsuleGraph, dataset: &Dataset, config: &TrainConfig) -> Result<(CapsuleGraph, Vec<f64>)> {
    config.validate()?;
    let report = graph::validate(g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report));
    }
    dataset.check(g)?;
    if dataset.is_empty() && config.epochs > 0 {
        return Err(Error::InvalidConfig("cannot train on an empty dataset".into()));
    }
    let order = graph::topo_order(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = g.clone();
    let mut history = Vec::with_capacity(config.epochs);
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..config.epochs {
        idx.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &idx {
            total += step_in_place(&mut out, &order, &dataset.samples[i], config.learning_rate, config.loss)?;
        }
        history.push(total / dataset.len() as f64);
    }
    Ok((out, history))
}

/// Mean loss over a dataset without updating anything.
pub fn mean_loss(g: &CapsuleGraph, dataset: &Dataset, loss: LossKind) -> Result<f64> {
    let order = graph::topo_order(g)?;
    let mut total = 0.0;
    for s in &dataset.samples {
        total += total_loss(&eval_ordered(g, &order, &s.inputs)?, &loss_for(loss, s))?;
    }
    Ok(total / dataset.len().max(1) as f64)
}

/// The four XOR cases on inputs `x1`, `x2` with target at `output`.
pub fn xor_dataset(output: &str) -> Dataset {
    let rows = [(0.0, 0.0, 0.0), (0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0)];
    Dataset::new(
        rows.iter()
            .map(|&(a, b, t)| Sample::scalars(&[("x1", a), ("x2", b)], &[(output, t)]))
            .collect(),
    )
}

/// Samples of `y = 2x + 1` at `x ∈ {−2, −1.5, …, 2}` with input `x` and
/// output `y`.
pub fn linear_dataset() -> Dataset {
    Dataset::new(
        (-4..=4)
            .map(|k| {
                let x = f64::from(k) * 0.5;
                Sample::scalars(&[("x", x)], &[("y", 2.0 * x + 1.0)])
            })
            .collect(),
    )
}
