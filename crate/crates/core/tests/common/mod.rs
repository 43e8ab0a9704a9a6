#![allow(dead_code)]

use std::collections::BTreeMap;

use capsnet::forward::{eval, Inputs};
use capsnet::graph::{classify, ParamKey};
use capsnet::trainer::{fans, glorot_limit};
use capsnet::{CapsuleFn, CapsuleGraph, NodeId, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform(shape: &[usize], rng: &mut impl Rng, r: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-r..=r)).collect()).unwrap()
}

/// Random parameters, inputs and targets for `g`: weights uniform within the
/// Glorot bound, biases within ±0.5, inputs within ±1 and targets in [0, 1].
/// Redrawn until every ReLU pre-activation is at least 1e-3 from the kink.
pub fn draw(g0: &CapsuleGraph, seed: u64) -> (CapsuleGraph, Inputs, BTreeMap<NodeId, Tensor>) {
    let outputs = classify(g0).unwrap().outputs;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut g = g0.clone();
        for key in g0.param_keys() {
            let shape = g0.param(&key).unwrap().shape().to_vec();
            let r = match &key {
                ParamKey::Weight(s, d) => {
                    let (fi, fo) = fans(&g0.edge(s, d).unwrap().op, &shape);
                    glorot_limit(fi, fo)
                }
                ParamKey::Bias(_) => 0.5,
            };
            g.set_param(&key, uniform(&shape, &mut rng, r)).unwrap();
        }
        let inputs: Inputs = g.inputs().iter().map(|i| (i.id.clone(), uniform(&i.shape, &mut rng, 1.0))).collect();
        let targets = outputs
            .iter()
            .map(|o| {
                let shape = g.capsule(o).unwrap().bias.shape().to_vec();
                (o.clone(), uniform(&shape, &mut rng, 1.0).map(f64::abs).unwrap())
            })
            .collect();
        let values = eval(&g, &inputs).unwrap();
        let clear = g.nodes().iter().filter(|n| n.cap == CapsuleFn::Relu).all(|n| {
            values.pre_activation(&n.id).unwrap().data().iter().all(|u| u.abs() >= 1e-3)
        });
        if clear {
            return (g, inputs, targets);
        }
    }
}

/// One-hot target of length `n` at `k`.
pub fn one_hot(n: usize, k: usize) -> Tensor {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    Tensor::vector(&v)
}

/// Runs the CLI in-process and returns `(exit code, stdout, stderr)`.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = capsnet::cli::run(std::iter::once("capsnet").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
