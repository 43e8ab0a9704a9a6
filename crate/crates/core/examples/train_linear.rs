//! Recovers `y = 2x + 1` with a single identity capsule.

use capsnet::backprop::LossKind;
use capsnet::graph::ParamKey;
use capsnet::models::linear_unit;
use capsnet::trainer::{linear_dataset, train, TrainConfig};

fn main() -> capsnet::Result<()> {
    let config = TrainConfig {
        learning_rate: 0.05,
        epochs: 2000,
        seed: 42,
        loss: LossKind::Mse,
    };
    let (g, history) = train(&linear_unit(), &linear_dataset(), &config)?;
    let w = g.param(&ParamKey::Weight("x".into(), "y".into())).expect("weight").data()[0];
    let b = g.param(&ParamKey::Bias("y".into())).expect("bias").data()[0];
    println!("w = {w:.6}, b = {b:.6}, final mean loss {:.3e}", history.last().expect("epochs > 0"));
    Ok(())
}
