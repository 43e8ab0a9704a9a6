//! Backpropagation on a tensor graph, verified by central differences.

use capsnet::backprop::{backward, grad_check, LossSpec, DEFAULT_EPSILON};
use capsnet::forward::{eval, inputs};
use capsnet::models::tensor_diamond;
use capsnet::trainer::init_params;
use capsnet::Tensor;

fn main() -> capsnet::Result<()> {
    let g = init_params(&tensor_diamond(), 3)?;
    let x = inputs([("x", Tensor::vector(&[0.3, -0.7, 1.1]))]);
    let loss = LossSpec::mse([("c", Tensor::vector(&[0.1, 0.2, 0.3, 0.4]))]);

    let values = eval(&g, &x)?;
    let (delta, grads) = backward(&g, &values, &loss)?;
    for (id, d) in &delta.delta {
        println!("delta[{id}] = {:.5?}", d.data());
    }
    for (key, t) in g.param_keys().iter().map(|k| (k, grads.get(k).expect("every parameter"))) {
        println!("{key}: max |grad| = {:.3e}", t.max_abs());
    }

    let report = grad_check(&g, &x, &loss, DEFAULT_EPSILON)?;
    println!(
        "grad check: {} entries, max relative error {:.2e} ({:?})",
        report.checked, report.max_rel_error, report.worst
    );
    Ok(())
}
