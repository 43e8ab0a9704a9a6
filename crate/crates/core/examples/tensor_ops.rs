//! Dense tensor operations: matmul, valid convolution, pooling, reshape and
//! the adjoints backprop uses.

use capsnet::Tensor;

fn main() -> capsnet::Result<()> {
    let w = Tensor::matrix(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
    let x = Tensor::vector(&[1.0, -1.0]);
    println!("W × x = {:?}", w.matmul(&x)?.data());

    let img = Tensor::new(vec![1, 4, 4], (0..16).map(f64::from).collect())?;
    let k = Tensor::new(vec![2, 1, 2, 2], vec![1.0, 0.0, 0.0, -1.0, 0.25, 0.25, 0.25, 0.25])?;
    let maps = img.conv2d(&k)?;
    println!("conv2d {:?} * {:?} -> {:?}", img.shape(), k.shape(), maps.shape());
    println!("  map 0: {:?}", &maps.data()[..9]);

    let pooled = maps.downsample(3)?;
    println!("downsample(3) -> {:?} {:?}", pooled.shape(), pooled.data());

    // Adjoint identity: <conv(x, k), d> = <x, conv_input_grad(k, d)>.
    let d = Tensor::full(maps.shape(), 0.5);
    let lhs = maps.dot(&d)?;
    let rhs = img.dot(&k.conv2d_input_grad(&d)?)?;
    println!("<conv(x,k), d> = {lhs}, <x, adjoint(d)> = {rhs}");

    println!("reshape [1,4,4] -> [16]: {:?}", img.reshape(&[16])?.shape());
    println!("non-finite values are rejected: {}", Tensor::new(vec![1], vec![f64::NAN]).is_err());
    Ok(())
}
