//! Compares base classifiers with hard and soft voting ensembles.
//!
//! cargo run --release --example ensemble_voting

use churnlab::dataset::train_test_split;
use churnlab::metrics::MetricBundle;
use churnlab::models::{fit_gaussian_nb, fit_linear_discriminant, fit_logistic, hard_vote, soft_vote};
use churnlab::{Classifier, LabeledDataset, Model};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

fn main() -> churnlab::Result<()> {
    let mut rng = churnlab::rng::rng(9);
    let n = 2_000;
    let x: Array2<f64> = Array2::from_shape_fn((n, 4), |_| StandardNormal.sample(&mut rng));
    let labels: Vec<u8> = (0..n)
        .map(|i| {
            let z = x[[i, 0]] - 0.8 * x[[i, 1]] + 0.5 * x[[i, 2]] * x[[i, 3]];
            let u: f64 = StandardNormal.sample(&mut rng);
            u8::from(z + u > 0.5)
        })
        .collect();
    let ds = LabeledDataset::from_numeric(x, labels, &["a", "b", "c", "d"])?;
    let (train, test) = train_test_split(&ds, 0.7, 9)?;

    let base = vec![
        Model::Linear(fit_linear_discriminant(&train)?),
        Model::Linear(fit_logistic(&train, 0.5, 500)?),
        Model::GaussianNb(fit_gaussian_nb(&train)?),
    ];
    let mut roster: Vec<(String, Model)> = base.iter().map(|m| (m.kind().to_string(), m.clone())).collect();
    roster.push(("hard_vote".into(), Model::HardVote(hard_vote(base.clone())?)));
    roster.push(("soft_vote".into(), Model::SoftVote(soft_vote(base, vec![1.0, 1.0, 1.0])?)));

    for (name, model) in &roster {
        let p = model.predict_proba(test.features().view())?;
        let m = MetricBundle::compute(test.labels(), &p, 0.5)?;
        println!(
            "{name:<20} acc {:.3}  auc {:.3}  kappa {:.3}  mcc {:.3}",
            m.test_acc, m.auc, m.cohen_kappa, m.mcc
        );
    }
    Ok(())
}
