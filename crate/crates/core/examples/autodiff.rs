//! Reverse-mode gradients of a small conv + sigmoid + BCE graph, checked
//! against central differences.
//!
//! Run: `cargo run --release --example autodiff`

use vln::gradcheck::{check_gradients, GradCheckOptions};
use vln::tensor::{bce_loss, conv2d, Conv2dOptions};
use vln::Tensor;

fn main() -> vln::Result<()> {
    let x = Tensor::<f64>::new(&[1, 1, 4, 4], (0..16).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let target = Tensor::<f64>::new(&[1, 1, 4, 4], (0..16).map(|i| (i % 3) as f64 / 2.0).collect())?;
    let k = Tensor::<f64>::parameter(&[1, 1, 3, 3], (0..9).map(|i| 0.1 * i as f64 - 0.4).collect())?;
    let b = Tensor::<f64>::parameter(&[1], vec![0.05])?;

    let loss = |inputs: &[Tensor<f64>]| {
        let y = conv2d(&inputs[0], &inputs[1], Some(&inputs[2]), Conv2dOptions::default())?.sigmoid();
        Ok(bce_loss(&y, &target)?.sum())
    };
    let l = loss(&[x.clone(), k.clone(), b.clone()])?;
    l.backward()?;
    println!("loss {:.6}", l.item()?);
    println!("dL/db {:?}", b.grad().unwrap());
    println!("dL/dk {:?}", k.grad().unwrap());

    let report = check_gradients(&[x, k, b], loss, GradCheckOptions::double())?;
    println!(
        "checked {} coordinates, max relative error {:.2e}",
        report.checked, report.max_rel_error
    );
    Ok(())
}
