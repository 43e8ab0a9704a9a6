mod common;

use capsnet::backprop::LossKind;
use capsnet::forward::eval;
use capsnet::graph::ParamKey;
use capsnet::models::{fixture, linear_unit, xor_network};
use capsnet::trainer::{init_params, linear_dataset, mean_loss, read_history, train, write_history, xor_dataset, Dataset, Sample, TrainConfig};
use capsnet::NodeId;
use std::collections::BTreeMap;

fn config(lr: f64, epochs: usize, seed: u64, loss: LossKind) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        epochs,
        seed,
        loss,
    }
}

#[test]
fn xor_is_learned() {
    let g = init_params(xor_network().graph(), 42).unwrap();
    let (trained, history) = train(&g, &xor_dataset("o"), &config(0.5, 5000, 42, LossKind::Mse)).unwrap();
    assert_eq!(history.len(), 5000);
    assert!(history[4999] < history[0]);
    for s in &xor_dataset("o").samples {
        let y = eval(&trained, &s.inputs).unwrap().output(&"o".into()).unwrap().data()[0];
        assert!((y - s.targets[&NodeId::from("o")].data()[0]).abs() < 0.1);
    }
}

#[test]
fn linear_fit_recovers_slope_and_intercept() {
    let (g, _) = train(&linear_unit(), &linear_dataset(), &config(0.05, 2000, 42, LossKind::Mse)).unwrap();
    let w = g.param(&ParamKey::Weight("x".into(), "y".into())).unwrap().data()[0];
    let b = g.param(&ParamKey::Bias("y".into())).unwrap().data()[0];
    assert!((w - 2.0).abs() < 1e-3 && (b - 1.0).abs() < 1e-3, "w={w} b={b}");
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let g = init_params(xor_network().graph(), 1).unwrap();
    let a = train(&g, &xor_dataset("o"), &config(0.5, 50, 9, LossKind::Mse)).unwrap();
    let b = train(&g, &xor_dataset("o"), &config(0.5, 50, 9, LossKind::Mse)).unwrap();
    let c = train(&g, &xor_dataset("o"), &config(0.5, 50, 10, LossKind::Mse)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);
}

#[test]
fn cross_entropy_training_reduces_loss_on_a_small_cnn() {
    let g0 = init_params(&fixture("cnn_small").unwrap(), 0).unwrap();
    let samples: Vec<Sample> = (0..8)
        .map(|k| {
            let (_, x, _) = common::draw(&g0, k);
            Sample::new(x, BTreeMap::from([(NodeId::from("O"), common::one_hot(4, (k % 4) as usize))]))
        })
        .collect();
    let data = Dataset::new(samples);
    let before = mean_loss(&g0, &data, LossKind::SoftmaxCrossEntropy).unwrap();
    let (g1, history) = train(&g0, &data, &config(0.1, 100, 3, LossKind::SoftmaxCrossEntropy)).unwrap();
    let after = mean_loss(&g1, &data, LossKind::SoftmaxCrossEntropy).unwrap();
    assert!(after < 0.5 * before, "{before} -> {after}");
    assert!(history.iter().all(|l| l.is_finite()));
}

#[test]
fn datasets_and_histories_round_trip_through_csv() {
    let g = xor_network().into_graph();
    let data = xor_dataset("o");
    let mut buf = Vec::new();
    data.to_csv(&mut buf, &g).unwrap();
    assert_eq!(Dataset::from_csv(buf.as_slice(), &g).unwrap(), data);

    let history = vec![0.1 + 0.2, 1e-300, 123456.789];
    let mut buf = Vec::new();
    write_history(&mut buf, &history).unwrap();
    assert_eq!(read_history(buf.as_slice()).unwrap(), history);
}

#[test]
fn bad_configurations_are_rejected() {
    let g = linear_unit();
    assert!(train(&g, &linear_dataset(), &config(-0.1, 1, 0, LossKind::Mse)).is_err());
    assert!(train(&g, &linear_dataset(), &config(f64::NAN, 1, 0, LossKind::Mse)).is_err());
    assert!(train(&g, &Dataset::default(), &config(0.1, 1, 0, LossKind::Mse)).is_err());
    assert!(train(&g, &xor_dataset("o"), &config(0.1, 1, 0, LossKind::Mse)).is_err());
}
