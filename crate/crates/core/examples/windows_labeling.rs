//! Labels a synthetic member corpus at several anchor months.
//!
//! cargo run --release --example windows_labeling

use churnlab::dataset::{build_snapshot, slide_windows, InclusionFilters};
use churnlab::synth::{self, ChurnCorpusConfig};

fn main() -> churnlab::Result<()> {
    let cfg = ChurnCorpusConfig::new(2_000, 7);
    let (records, _) = synth::generate_churn_corpus(&cfg)?;
    let window = cfg.window();
    let filters = InclusionFilters::default();
    let recipe = synth::churn_recipe();

    let admitted: Vec<_> = records.iter().filter(|r| filters.admits(r, &window)).cloned().collect();
    let snapshot = build_snapshot(&admitted, &window, &recipe)?;
    println!(
        "anchor {}: {} of {} members admitted, features {:?}",
        window.anchor_month,
        snapshot.n_rows(),
        records.len(),
        snapshot.feature_names()
    );

    for (i, ds) in slide_windows(&records, &window.shifted(-4), 2, 3, &filters, &recipe)?.iter().enumerate() {
        let (neg, pos) = ds.class_counts();
        println!("window {i} (anchor {}): {} rows, {pos} churned, {neg} retained", window.anchor_month - 4 + 2 * i as i64, ds.n_rows());
    }
    Ok(())
}
