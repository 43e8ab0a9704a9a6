//! Forward evaluation of a graph mixing every weighting operation.

use capsnet::forward::{eval, inputs};
use capsnet::models::capsule_mix;
use capsnet::trainer::init_params;
use capsnet::Tensor;

fn main() -> capsnet::Result<()> {
    let g = init_params(&capsule_mix(), 1)?;
    let img = Tensor::new(vec![1, 6, 6], (0..36).map(|i| (f64::from(i) * 0.37).sin()).collect())?;
    let aux = Tensor::new(vec![4, 2], vec![0.5, -0.5, 1.0, 0.0, -1.0, 0.25, 0.75, -0.25])?;
    let values = eval(&g, &inputs([("img", img), ("aux", aux)]))?;
    for (id, y) in values.outputs() {
        println!("{id:>6} {:?} {:.4?}", y.shape(), &y.data()[..y.len().min(4)]);
    }
    let class = values.output(&"class".into()).expect("evaluated");
    println!("softmax sums to {}", class.sum());
    Ok(())
}
