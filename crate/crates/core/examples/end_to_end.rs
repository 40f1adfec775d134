//! Runs every pipeline stage on a fresh synthetic corpus.
//!
//! cargo run --release --example end_to_end [output_dir]

use churnlab::pipeline::{PipelineConfig, Run, Stage};
use churnlab::synth::CHURN_GRAPH;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("churnlab_end_to_end"), Into::into);
    std::fs::create_dir_all(&out)?;
    let graph = out.join("graph.txt");
    std::fs::write(&graph, CHURN_GRAPH)?;

    let config: PipelineConfig = serde_json::from_value(serde_json::json!({
        "seed": 42,
        "synth": {"n_members": 3000},
        "causal": {
            "graph": graph,
            "stabilized": true,
            "treatments": [
                {"name": "high_sg_recency", "column": "sg_contribution_amount_recency", "rule": {"threshold": 2.5}},
                {"name": "low_account_growth", "column": "balance_change_ratio", "rule": {"below": 0.0}}
            ]
        }
    }))?;

    let run = Run::new(config, Some(out.clone()), None)?;
    for stage in Stage::ALL {
        println!("{}", run.run(stage)?);
    }
    println!("outputs in {}", out.display());
    Ok(())
}
