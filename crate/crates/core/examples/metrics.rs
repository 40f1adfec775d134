//! Scores a set of predictions with every metric in the toolkit.
//!
//! cargo run --release --example metrics

use churnlab::metrics::{self, MetricBundle};

fn main() -> churnlab::Result<()> {
    let labels = [1, 1, 1, 0, 1, 0, 0, 0, 1, 0];
    let probas = [0.9, 0.8, 0.7, 0.65, 0.6, 0.4, 0.3, 0.2, 0.35, 0.1];

    let cm = metrics::confusion(&labels, &probas, 0.5)?;
    println!("confusion: {cm:?}");
    println!("accuracy {:.3}", cm.accuracy());
    println!("kappa    {:.4}", metrics::cohen_kappa(&cm));
    println!("mcc      {:.4}", metrics::mcc(&cm));

    let roc = metrics::roc_points(&probas, &labels)?;
    println!("auc {:.4} (trapezoid {:.4})", metrics::auc(&probas, &labels)?, metrics::trapezoid_area(&roc));
    metrics::write_roc_csv(&roc, std::io::stdout())?;

    println!("{:?}", MetricBundle::compute(&labels, &probas, 0.5)?);
    Ok(())
}
