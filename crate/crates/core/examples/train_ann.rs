//! Trains a small network on XOR-labelled points and prints its loss curve.
//!
//! cargo run --release --example train_ann

use churnlab::metrics;
use churnlab::nnet::{self, Activation, LayerSpec, TrainConfig};
use churnlab::{Classifier, LabeledDataset};
use ndarray::Array2;
use rand::Rng;

fn main() -> churnlab::Result<()> {
    let mut rng = churnlab::rng::rng(1);
    let n = 400;
    let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
    let labels: Vec<u8> = (0..n).map(|i| u8::from((x[[i, 0]] > 0.0) != (x[[i, 1]] > 0.0))).collect();
    let ds = LabeledDataset::from_numeric(x, labels, &["u", "v"])?;

    let layers = [
        LayerSpec::hidden(16, Activation::Tanh, 0.0),
        LayerSpec::hidden(8, Activation::Relu, 0.0),
        LayerSpec::output(),
    ];
    let net = nnet::train(&ds, &layers, &TrainConfig::new(0.01, 300, 32, 1))?;
    for epoch in [0, 9, 49, 99, 299] {
        println!("epoch {:>3}: loss {:.4}", epoch + 1, net.loss_trace[epoch]);
    }
    let p = net.predict_proba(ds.features().view())?;
    println!("training AUC {:.4}", metrics::auc(&p, ds.labels())?);
    println!("parameters: {}", net.params.n_params());
    Ok(())
}
