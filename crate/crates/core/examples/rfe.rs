//! Recursive feature elimination on data with two informative columns.
//!
//! cargo run --release --example rfe

use churnlab::featsel::{rfe, LeastSquaresTrainer};
use churnlab::LabeledDataset;
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

fn main() -> churnlab::Result<()> {
    let mut rng = churnlab::rng::rng(5);
    let n = 500;
    let x: Array2<f64> = Array2::from_shape_fn((n, 6), |_| StandardNormal.sample(&mut rng));
    let labels: Vec<u8> = (0..n).map(|i| u8::from(1.5 * x[[i, 1]] - x[[i, 4]] > 0.0)).collect();
    let ds = LabeledDataset::from_numeric(x, labels, &["a", "b", "c", "d", "e", "f"])?;

    let (ranking, reduced) = rfe(&ds, 2, 1, &LeastSquaresTrainer::default())?;
    println!("eliminated in order: {:?}", ranking.elimination_order);
    println!("kept: {:?}", ranking.kept);
    for (i, scores) in ranking.criterion_trace.iter().enumerate() {
        println!("iteration {i}: {scores:.4?}");
    }
    println!("reduced dataset has {} columns", reduced.n_features());
    Ok(())
}
