//! Lists the valid adjustment sets of the churn causal graph.
//!
//! cargo run --release --example backdoor

use churnlab::causal::{backdoor_sets, parse_graph, CausalQuery};
use churnlab::synth::CHURN_GRAPH;

fn main() -> churnlab::Result<()> {
    let graph = parse_graph(CHURN_GRAPH)?;
    println!("nodes: {:?}", graph.nodes());
    let outcome = "churn";
    for treatment in graph.nodes().iter().filter(|n| n.as_str() != outcome) {
        let query = CausalQuery::new(&graph, treatment, outcome)?;
        match backdoor_sets(&query) {
            Ok(sets) => println!("{treatment} -> {outcome}: {} sets, smallest {:?}", sets.len(), sets.first()),
            Err(e) => println!("{treatment} -> {outcome}: {e}"),
        }
    }
    Ok(())
}
