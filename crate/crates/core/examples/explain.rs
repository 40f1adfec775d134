//! Fits a logistic model to a churn snapshot and ranks its drivers.
//!
//! cargo run --release --example explain

use churnlab::dataset::{build_snapshot, FeatureSpec, InclusionFilters};
use churnlab::interpret::{partial_dependence, permutation_importance, shortlist_candidates, ImportanceMetric};
use churnlab::models::fit_logistic;
use churnlab::preprocess::standardize_fit;
use churnlab::synth::{self, ChurnCorpusConfig};

fn main() -> churnlab::Result<()> {
    let cfg = ChurnCorpusConfig::new(3_000, 11);
    let (records, _) = synth::generate_churn_corpus(&cfg)?;
    let window = cfg.window();
    let filters = InclusionFilters::default();
    let admitted: Vec<_> = records.iter().filter(|r| filters.admits(r, &window)).cloned().collect();
    let snapshot = build_snapshot(&admitted, &window, &synth::churn_recipe())?;

    let numeric: Vec<usize> = (0..snapshot.n_features()).filter(|&j| !snapshot.specs()[j].is_nominal()).collect();
    let ds = snapshot.select_columns(&numeric);
    let scaled = standardize_fit(ds.features().view())?.apply(ds.features().view())?;
    let specs: Vec<FeatureSpec> = ds.specs().to_vec();
    let ds = ds.with_features(scaled, specs)?;

    let model = fit_logistic(&ds, 0.5, 500)?;
    let importances = permutation_importance(&model, &ds, ImportanceMetric::Auc, 5, 11)?;
    let curves = ds
        .feature_names()
        .iter()
        .map(|f| partial_dependence(&model, &ds, f, 10))
        .collect::<churnlab::Result<Vec<_>>>()?;
    for imp in &importances {
        println!("{:<32} drop {:+.4} (sd {:.4})", imp.feature, imp.mean_drop, imp.std);
    }
    for c in shortlist_candidates(&importances, &curves, 3).candidates {
        println!("candidate {} ({:?})", c.feature, c.direction);
    }
    Ok(())
}
