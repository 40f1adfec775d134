//! Oversamples the minority class of an imbalanced two-blob dataset.
//!
//! cargo run --release --example smote

use churnlab::preprocess::{smote, SmoteConfig, SmoteTarget};
use churnlab::LabeledDataset;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn main() -> churnlab::Result<()> {
    let mut rng = churnlab::rng::rng(3);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let n = 400;
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.1)).collect();
    let x = Array2::from_shape_fn((n, 2), |(i, _)| 2.0 * f64::from(labels[i]) + noise.sample(&mut rng));
    let ds = LabeledDataset::from_numeric(x, labels, &["x0", "x1"])?;
    println!("before: {:?}", ds.class_counts());

    let balanced = smote(&ds, &SmoteConfig::new(3))?;
    println!("match majority: {:?}", balanced.class_counts());

    let cfg = SmoteConfig {
        target_minority_count: SmoteTarget::Count(100),
        ..SmoteConfig::new(3)
    };
    let partial = smote(&ds, &cfg)?;
    println!("target 100: {:?}", partial.class_counts());
    println!("first synthetic row: {}", partial.member_ids()[n]);
    Ok(())
}
