//! Samples the built-in structural causal models and prints their true effects.
//!
//! cargo run --release --example scm

use churnlab::synth::{self, ScmConfig};

fn main() -> churnlab::Result<()> {
    for (name, cfg) in [
        ("canonical_discrete", ScmConfig::canonical_discrete()),
        ("null_discrete", ScmConfig::null_discrete()),
        ("linear_gaussian", ScmConfig::linear_gaussian(1.25)),
    ] {
        let truth = synth::true_ate(&cfg)?;
        let ds = synth::generate_scm(&cfg, 5, 0)?;
        println!("{name}: ATE {:.4} via {:?}, columns {:?}", truth.value, truth.method, ds.feature_names());
        ds.write_csv(std::io::stdout())?;
    }
    Ok(())
}
