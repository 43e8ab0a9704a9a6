//! Learns XOR with a three-neuron sigmoid network built by the generation rules.

use capsnet::backprop::LossKind;
use capsnet::forward::eval;
use capsnet::models::xor_network;
use capsnet::trainer::{init_params, train, xor_dataset, TrainConfig};

fn main() -> capsnet::Result<()> {
    let g = init_params(xor_network().graph(), 42)?;
    let data = xor_dataset("o");
    let config = TrainConfig {
        learning_rate: 0.5,
        epochs: 5000,
        seed: 42,
        loss: LossKind::Mse,
    };
    let (trained, history) = train(&g, &data, &config)?;
    for epoch in [1, 10, 100, 1000, 5000] {
        println!("epoch {epoch:>4}: mean loss {:.6}", history[epoch - 1]);
    }
    for s in &data.samples {
        let y = eval(&trained, &s.inputs)?.output(&"o".into()).expect("evaluated").data()[0];
        let x: Vec<f64> = s.inputs.values().map(|t| t.data()[0]).collect();
        println!("{x:?} -> {y:.3} (target {})", s.targets[&"o".into()].data()[0]);
    }
    Ok(())
}
