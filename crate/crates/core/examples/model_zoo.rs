//! The MLP and CNN capsule paths, evaluated stage by stage.

use capsnet::forward::{eval_cnn_path, eval_mlp_path};
use capsnet::models::{build_cnn, build_mlp, path_order, path_stages, CnnSpec, MlpSpec};
use capsnet::trainer::init_params;
use capsnet::Tensor;

fn main() -> capsnet::Result<()> {
    let mlp = init_params(&build_mlp(&MlpSpec::default())?, 0)?;
    let x = Tensor::vector(&[0.1, 0.2, 0.3, 0.4, 0.5]);
    let v = eval_mlp_path(&mlp, &x)?;
    for id in path_order(&mlp)? {
        println!("mlp {id:>3}: {:?}", v.output(&id).expect("evaluated").shape());
    }

    let spec = CnnSpec::default();
    let cnn = init_params(&build_cnn(&spec)?, 0)?;
    println!("cnn stages: {:?}", path_stages(&cnn)?);
    let [c, h, w] = spec.input;
    let img = Tensor::new(vec![c, h, w], (0..c * h * w).map(|i| ((i % 7) as f64) / 7.0).collect())?;
    let v = eval_cnn_path(&cnn, &img)?;
    for id in path_order(&cnn)? {
        println!("cnn {id:>3}: {:?}", v.output(&id).expect("evaluated").shape());
    }
    let out = v.output(&"O".into()).expect("evaluated");
    println!("class probabilities sum to {:.15}", out.sum());
    Ok(())
}
