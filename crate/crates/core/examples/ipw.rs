//! Recovers a known treatment effect from confounded synthetic data.
//!
//! cargo run --release --example ipw

use churnlab::causal::{self, parse_graph, AnalysisConfig, BinarizeRule, Method, RefuterConfig, TreatmentSpec};
use churnlab::synth::{self, ScmConfig};

fn main() -> churnlab::Result<()> {
    let scm = ScmConfig::canonical_discrete();
    let truth = synth::true_ate(&scm)?;
    let ds = synth::generate_scm(&scm, 20_000, 1)?;

    let t = ds.column("T")?;
    let y = ds.column("Y")?;
    let mean_where = |flag: f64| {
        let v: Vec<f64> = t.iter().zip(&y).filter(|(a, _)| **a == flag).map(|(_, b)| *b).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("true ATE {:.4}", truth.value);
    println!("naive difference {:.4}", mean_where(1.0) - mean_where(0.0));

    let graph = parse_graph("Z -> T\nZ -> Y\nT -> Y")?;
    let treatment = [TreatmentSpec {
        name: "T".into(),
        column: "T".into(),
        rule: BinarizeRule::Threshold(0.5),
    }];
    for method in [Method::Ipw, Method::Regression] {
        let config = AnalysisConfig {
            outcome: "Y".into(),
            method,
            stabilized: false,
            propensity: Default::default(),
            refuter: RefuterConfig::new(2),
        };
        let est = &causal::run_causal_analysis(&ds, &graph, &treatment, &config)?[0];
        println!(
            "{method:?}: adjusted for {:?}, ATE {:.4}, refuter {:.4}, {}",
            est.adjustment_set,
            est.ate.unwrap_or(f64::NAN),
            est.refuter_ate.unwrap_or(f64::NAN),
            est.interpretation.as_deref().unwrap_or("-")
        );
    }
    Ok(())
}
