//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the summary is always printed; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use churnlab::causal::{self, backdoor_sets, fit_propensity, ipw_ate, regression_ate, CausalQuery, PropensityConfig};
use churnlab::dataset::LabeledDataset;
use churnlab::featsel::{rfe, LeastSquaresTrainer};
use churnlab::metrics::{self, ConfusionMatrix};
use churnlab::nnet::{self, Activation, AdamConfig, AdamState, LayerSpec, TrainConfig};
use churnlab::pipeline::{self, MetricsReport, OracleReport};
use churnlab::preprocess::{self, SmoteConfig};
use churnlab::synth::{self, Driver, GroundTruth, ScmConfig};
use churnlab::Classifier;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn column_matrix(ds: &LabeledDataset, names: &[&str]) -> Array2<f64> {
    let idx: Vec<usize> = names.iter().map(|n| ds.column_index(n).unwrap()).collect();
    ds.features().select(ndarray::Axis(1), &idx)
}

fn treatment_outcome(ds: &LabeledDataset) -> (Vec<u8>, Vec<f64>) {
    let t = ds.column("T").unwrap().iter().map(|&v| v as u8).collect();
    (t, ds.column("Y").unwrap())
}

fn ipw_estimate(ds: &LabeledDataset) -> churnlab::Result<f64> {
    let (t, y) = treatment_outcome(ds);
    let e = fit_propensity(column_matrix(ds, &["Z"]).view(), &t, &PropensityConfig::default())?;
    ipw_ate(&t, &y, &e, false)
}

fn c1_ipw_recovery() -> Check {
    let start = Instant::now();
    let cfg = ScmConfig::canonical_discrete();
    let truth = synth::true_ate(&cfg).unwrap().value;
    ensure((truth - 0.40).abs() < 1e-12, format!("enumerated ATE {truth}"))?;
    let mut worst_ipw: f64 = 0.0;
    let mut min_naive_gap = f64::INFINITY;
    for seed in 0..5 {
        let ds = synth::generate_scm(&cfg, 50_000, 100 + seed).unwrap();
        let ate = ipw_estimate(&ds).map_err(|e| e.to_string())?;
        let (t, y) = treatment_outcome(&ds);
        let mean = |g: u8| {
            let v: Vec<f64> = t.iter().zip(&y).filter(|(a, _)| **a == g).map(|(_, b)| *b).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        worst_ipw = worst_ipw.max((ate - truth).abs());
        min_naive_gap = min_naive_gap.min((mean(1) - mean(0) - truth).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst_ipw <= 0.02, format!("max |IPW - 0.40| = {worst_ipw:.4}"))?;
    ensure(min_naive_gap >= 0.05, format!("naive gap only {min_naive_gap:.4}"))?;
    ensure(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(format!("max |IPW - 0.40| = {worst_ipw:.4}, min naive gap = {min_naive_gap:.3}, {secs:.1}s"))
}

fn c2_regression() -> Check {
    let beta = 1.25;
    let cfg = ScmConfig::linear_gaussian(beta);
    let ds = synth::generate_scm(&cfg, 50_000, 7).unwrap();
    let t: Vec<u8> = ds.column("T").unwrap().iter().map(|&v| v as u8).collect();
    let y = ds.column("Y").unwrap();
    let r = regression_ate(column_matrix(&ds, &["Z1", "Z2"]).view(), &t, &y).map_err(|e| e.to_string())?;
    ensure((r.ate - beta).abs() <= 0.02, format!("estimate {:.4} vs {beta}", r.ate))?;
    Ok(format!("estimate {:.4} vs planted {beta}", r.ate))
}

fn c3_refuter() -> Check {
    let ds = synth::generate_scm(&ScmConfig::canonical_discrete(), 50_000, 100).unwrap();
    let full = ipw_estimate(&ds).map_err(|e| e.to_string())?;
    let cfg = causal::RefuterConfig::new(11);
    let r = causal::data_subset_refuter(&ipw_estimate, &ds, full, &cfg).map_err(|e| e.to_string())?;
    ensure(r.trials.len() == 10, format!("{} trials completed", r.trials.len()))?;
    ensure((r.mean - full).abs() <= 0.01, format!("refuter {:.5} vs full {full:.5}", r.mean))?;
    Ok(format!("estimate {full:.5}, refuter {:.5}", r.mean))
}

fn c4_backdoor() -> Check {
    let mut rng = common::rng(4);
    for case in 0..200 {
        let n = rng.random_range(2..=5);
        let g = common::random_dag(n, rng.random_range(0.2..0.8), &mut rng);
        let t = rng.random_range(0..n);
        let y = (t + rng.random_range(1..n)) % n;
        let q = CausalQuery::new(&g, &g.nodes()[t], &g.nodes()[y]).unwrap();
        let got = backdoor_sets(&q).map_err(|e| e.to_string())?;
        let want = common::backdoor_oracle(&g, t, y);
        ensure(got == want, format!("case {case}: {:?} vs oracle {want:?} on {:?}", got, g.edges()))?;
    }
    let churn_dag = "gender -> acc_balance\nacc_balance -> churn\nacc_balance_change -> cust_tenure\n\
                acc_growth -> churn\nacc_balance -> cust_tenure\ncust_tenure -> churn";
    let g = causal::parse_graph(churn_dag).map_err(|e| e.to_string())?;
    let sets = backdoor_sets(&CausalQuery::new(&g, "cust_tenure", "churn").unwrap()).unwrap();
    ensure(sets == vec![vec!["acc_balance".to_string()]], format!("churn assumption graph gave {sets:?}"))?;
    Ok("200 random DAGs match the subset oracle; churn assumption graph -> {acc_balance}".into())
}

fn random_batch(rows: usize, cols: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = common::rng(seed);
    let x = Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng));
    let y = (0..rows).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
    (x, y)
}

fn c5_gradient_check() -> Check {
    let small = [LayerSpec::hidden(4, Activation::Tanh, 0.0), LayerSpec::output()];
    let deep = [
        LayerSpec::hidden(8, Activation::Tanh, 0.0),
        LayerSpec::hidden(8, Activation::Relu, 0.0),
        LayerSpec::output(),
    ];
    let mut worst: f64 = 0.0;
    for (dim, layers) in [(2, &small[..]), (4, &deep[..])] {
        for seed in 0..3 {
            let p = nnet::init(dim, layers, seed).unwrap();
            let (x, y) = random_batch(16, dim, 50 + seed);
            worst = worst.max(common::gradient_check(&p, &x, &y));
        }
    }
    ensure(worst <= 1e-4, format!("max relative error {worst:.2e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn c6_adam() -> Check {
    let mut p = nnet::init(3, &[LayerSpec::hidden(4, Activation::Relu, 0.0), LayerSpec::output()], 1).unwrap();
    let before = p.clone();
    let zeros = nnet::Gradients {
        layers: p
            .layers
            .iter()
            .map(|l| nnet::LayerGradient {
                weights: Array2::zeros(l.weights.dim()),
                bias: ndarray::Array1::zeros(l.bias.len()),
            })
            .collect(),
    };
    let mut state = AdamState::new(p.n_params());
    for _ in 0..100 {
        nnet::adam_update(&mut p, &zeros, &mut state, &AdamConfig::new(0.1));
    }
    ensure(p == before, "zero gradient moved parameters")?;

    let cfg = AdamConfig::new(0.1);
    let mut w = [1.0f64];
    let mut s = AdamState::new(1);
    s.step(w.iter_mut(), &[2.0 * 1.0], &cfg);
    let first = (1.0 - w[0]).abs();
    ensure((first - 0.1).abs() <= 0.001, format!("first step {first}"))?;
    for _ in 1..200 {
        let g = [2.0 * w[0]];
        s.step(w.iter_mut(), &g, &cfg);
    }
    ensure(w[0].abs() < 0.05, format!("|w| = {} after 200 steps", w[0].abs()))?;
    Ok(format!("fixpoint exact, first step {first:.6}, |w_200| = {:.4}", w[0].abs()))
}

fn blobs(seed: u64) -> LabeledDataset {
    let mut rng = common::rng(seed);
    let n = 200;
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let c = if label == 1 { 2.0 } else { -2.0 };
        for j in 0..2 {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[[i, j]] = c + 0.5 * e;
        }
        y.push(label);
    }
    LabeledDataset::from_numeric(x, y, &["a", "b"]).unwrap()
}

fn c7_trainability() -> Check {
    let layers = [LayerSpec::hidden(8, Activation::Tanh, 0.0), LayerSpec::output()];
    let mut worst_acc: f64 = 1.0;
    let mut worst_loss: f64 = 0.0;
    for seed in 0..5 {
        let ds = blobs(seed);
        let net = nnet::train(&ds, &layers, &TrainConfig::new(0.05, 100, 32, seed)).map_err(|e| e.to_string())?;
        let pred = net.predict(ds.features().view(), 0.5).unwrap();
        let acc = pred.iter().zip(ds.labels()).filter(|(a, b)| a == b).count() as f64 / ds.n_rows() as f64;
        worst_acc = worst_acc.min(acc);

        let x = ndarray::array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let xor = LabeledDataset::from_numeric(x, vec![0, 1, 1, 0], &["a", "b"]).unwrap();
        let net = nnet::train(&xor, &layers, &TrainConfig::new(0.05, 2000, 4, seed)).map_err(|e| e.to_string())?;
        let p = net.predict_proba(xor.features().view()).unwrap();
        worst_loss = worst_loss.max(nnet::bce_loss(&p, &xor.labels_f64()));
    }
    ensure(worst_acc >= 0.99, format!("blob accuracy {worst_acc}"))?;
    ensure(worst_loss < 0.1, format!("XOR loss {worst_loss}"))?;
    Ok(format!("min blob accuracy {worst_acc:.3}, max XOR loss {worst_loss:.4}"))
}

fn c8_auc() -> Check {
    let mut rng = common::rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..80);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        labels[0] = 0;
        labels[1] = 1;
        let levels = rng.random_range(2..10);
        let probas: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let pair = common::pairwise_auc(&probas, &labels);
        let fast = metrics::auc(&probas, &labels).unwrap();
        let trap = metrics::trapezoid_area(&metrics::roc_points(&probas, &labels).unwrap());
        worst = worst.max((pair - fast).abs()).max((pair - trap).abs());
    }
    ensure(worst <= 1e-9, format!("max disagreement {worst:.2e}"))?;
    let labels = [0, 0, 1, 1, 0, 1];
    let perfect: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    ensure(metrics::auc(&perfect, &labels).unwrap() == 1.0, "perfect predictor")?;
    ensure(metrics::auc(&[0.3; 6], &labels).unwrap() == 0.5, "constant predictor")?;
    Ok(format!("100 instances, max disagreement {worst:.1e}; perfect 1.0, constant 0.5"))
}

fn c9_kappa_mcc() -> Check {
    let mut rng = common::rng(9);
    let mut worst: f64 = 0.0;
    let mut worst_pearson: f64 = 0.0;
    for _ in 0..50 {
        let cm = ConfusionMatrix::new(
            rng.random_range(0..60),
            rng.random_range(0..60),
            rng.random_range(0..60),
            rng.random_range(0..60),
        );
        if cm.total() == 0 {
            continue;
        }
        worst = worst
            .max((metrics::cohen_kappa(&cm) - common::kappa_formula(&cm)).abs())
            .max((metrics::mcc(&cm) - common::mcc_formula(&cm)).abs());
        if !cm.mcc_degenerate() {
            let mut labels = Vec::new();
            let mut preds = Vec::new();
            for (l, p, c) in [(1.0, 1.0, cm.tp), (0.0, 1.0, cm.fp), (0.0, 0.0, cm.tn), (1.0, 0.0, cm.fn_)] {
                labels.extend(std::iter::repeat_n(l, c as usize));
                preds.extend(std::iter::repeat_n(p, c as usize));
            }
            worst_pearson = worst_pearson.max((metrics::mcc(&cm) - common::pearson_formula(&labels, &preds)).abs());
        }
    }
    ensure(worst <= 1e-12, format!("formula disagreement {worst:.2e}"))?;
    ensure(worst_pearson <= 1e-12, format!("MCC vs pearson {worst_pearson:.2e}"))?;
    Ok(format!("50 matrices: formula gap {worst:.1e}, pearson gap {worst_pearson:.1e}"))
}

fn c10_smote() -> Check {
    let mut rng = common::rng(10);
    let n = 400;
    let x = Array2::from_shape_fn((n, 3), |_| StandardNormal.sample(&mut rng));
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 5 == 0)).collect();
    let ds = LabeledDataset::from_numeric(x, labels, &["a", "b", "c"]).unwrap();
    let cfg = SmoteConfig::new(3);
    let out = preprocess::smote(&ds, &cfg).map_err(|e| e.to_string())?;
    let (neg, pos) = out.class_counts();
    ensure(neg == pos, format!("class counts {neg}:{pos}"))?;

    let minority: Vec<usize> = (0..n).filter(|&i| ds.labels()[i] == 1).collect();
    let points: Vec<Vec<f64>> = minority.iter().map(|&i| ds.features().row(i).to_vec()).collect();
    let neighbors: Vec<Vec<usize>> = (0..points.len()).map(|i| common::knn_reference(&points, i, cfg.k_neighbors)).collect();
    let mut synthetic = 0;
    for (r, id) in out.member_ids().iter().enumerate() {
        let row = out.features().row(r).to_vec();
        if id.starts_with("smote:") {
            synthetic += 1;
            ensure(out.labels()[r] == 1, format!("{id} not minority"))?;
            let ok = (0..points.len())
                .any(|a| neighbors[a].iter().any(|&b| common::on_segment(&row, &points[a], &points[b], 1e-9)));
            ensure(ok, format!("{id} lies on no minority neighbour segment"))?;
        } else {
            let orig = ds.member_ids().iter().position(|m| m == id).unwrap();
            let same = ds.features().row(orig).iter().zip(&row).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same && ds.labels()[orig] == out.labels()[r], format!("original row {id} altered"))?;
        }
    }
    Ok(format!("{synthetic} synthetic rows on neighbour segments; classes {neg}:{pos}; originals bit-identical"))
}

fn c11_rfe() -> Check {
    let mut hits = 0;
    for seed in 0..20 {
        let mut rng = common::rng(1100 + seed);
        let n = 300;
        let x = Array2::from_shape_fn((n, 10), |_| StandardNormal.sample(&mut rng));
        let y: Vec<u8> = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                u8::from(x[[i, 0]] - x[[i, 1]] + 0.5 * e > 0.0)
            })
            .collect();
        let names: Vec<String> = (0..10).map(|j| format!("f{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let ds = LabeledDataset::from_numeric(x.clone(), y, &refs).unwrap();
        let (ranking, _) = rfe(&ds, 2, 1, &LeastSquaresTrainer::default()).map_err(|e| e.to_string())?;
        if ranking.kept == ["f0", "f1"] {
            hits += 1;
        }
        if seed < 10 {
            let (full, _) = rfe(&ds, 1, 1, &LeastSquaresTrainer::default()).unwrap();
            let reference: Vec<String> = common::rfe_reference(&x, &ds.labels_f64(), 1)
                .into_iter()
                .map(|j| names[j].clone())
                .collect();
            ensure(full.elimination_order == reference, format!("seed {seed}: path differs from reference"))?;
        }
    }
    ensure(hits >= 19, format!("informative pair kept in {hits}/20 seeds"))?;
    Ok(format!("informative pair kept in {hits}/20 seeds; 10 step-1 paths match the reference"))
}

const CHURN_TREATMENTS: &str = r#"[
  {"name": "high_sg_recency", "column": "sg_contribution_amount_recency", "rule": {"threshold": 2.5}},
  {"name": "low_account_growth", "column": "balance_change_ratio", "rule": {"below": 0.0}},
  {"name": "high_login_count", "column": "login_count_mean", "rule": "median"}
]"#;

fn write_pipeline_config(dir: &Path) -> std::path::PathBuf {
    std::fs::write(dir.join("graph.txt"), synth::CHURN_GRAPH).unwrap();
    let cfg = format!(
        r#"{{
  "seed": 42,
  "output_dir": "out",
  "synth": {{"n_members": 5000}},
  "causal": {{
    "graph": "graph.txt",
    "stabilized": true,
    "treatments": {CHURN_TREATMENTS}
  }}
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn run_all_stages(config: &Path) -> Result<f64, String> {
    let start = Instant::now();
    for stage in pipeline::Stage::ALL {
        let out = Command::new(env!("CARGO_BIN_EXE_churnlab"))
            .arg(stage.name())
            .arg("--config")
            .arg(config)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{stage} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(start.elapsed().as_secs_f64())
}

fn c12_end_to_end(dir: &Path) -> Check {
    let config = write_pipeline_config(dir);
    let secs = run_all_stages(&config)?;
    let out = dir.join("out");
    let report: MetricsReport = pipeline::read_json(&out.join(pipeline::METRICS_JSON)).unwrap();
    let oracle: OracleReport = pipeline::read_json(&out.join(pipeline::ORACLE_JSON)).unwrap();
    let ann = report.models.get("ensemble_ann").ok_or("no ensemble_ann metrics")?.auc;
    ensure(
        (ann - oracle.bayes_auc).abs() <= 0.05,
        format!("ensemble AUC {ann:.4} vs Bayes {:.4}", oracle.bayes_auc),
    )?;

    let imps: Vec<churnlab::interpret::FeatureImportance> =
        pipeline::read_json(&out.join(pipeline::IMPORTANCE_JSON)).unwrap();
    let top5: BTreeSet<&str> = imps.iter().take(5).map(|i| i.feature.as_str()).collect();
    for driver in ["sg_contribution_amount_recency", "balance_change_ratio", "balance_last", "acc_tenure_last"] {
        ensure(top5.contains(driver), format!("{driver} not in top-5 {top5:?}"))?;
    }

    let truth: GroundTruth = pipeline::read_json(&out.join(pipeline::GROUND_TRUTH_JSON)).unwrap();
    let snapshot = LabeledDataset::load(&out.join(pipeline::SNAPSHOT_CSV)).unwrap();
    let rows: Vec<causal::ReportRow> = pipeline::read_json(&out.join(pipeline::CAUSAL_REPORT_JSON)).unwrap();
    let mut gaps = Vec::new();
    for (name, driver) in [("high_sg_recency", Driver::SgRecency), ("low_account_growth", Driver::AccountGrowth)] {
        let planted = truth.effect(driver, snapshot.member_ids()).unwrap();
        let row = rows.iter().find(|r| r.causal_variable == name).ok_or(format!("no row {name}"))?;
        let est = row.estimate_effect.ok_or(format!("{name} not identified"))?;
        ensure((est - planted).abs() <= 0.03, format!("{name}: estimate {est:.4} vs planted {planted:.4}"))?;
        gaps.push(format!("{name} {est:.3}/{planted:.3}"));
    }
    ensure(secs < 300.0, format!("pipeline took {secs:.0}s"))?;
    Ok(format!(
        "ensemble AUC {ann:.3} vs Bayes {:.3}; drivers in top-5; {}; {secs:.1}s",
        oracle.bayes_auc,
        gaps.join(", ")
    ))
}

fn c13_determinism(first: &Path, second: &Path) -> Check {
    let config = write_pipeline_config(second);
    run_all_stages(&config)?;
    let mut compared = 0;
    let mut stack = vec![std::path::PathBuf::new()];
    while let Some(rel) = stack.pop() {
        for entry in std::fs::read_dir(first.join("out").join(&rel)).unwrap() {
            let entry = entry.unwrap();
            let name = rel.join(entry.file_name());
            if entry.file_type().unwrap().is_dir() {
                stack.push(name);
                continue;
            }
            if name == Path::new("config_resolved.json") {
                continue;
            }
            let a = std::fs::read(first.join("out").join(&name)).unwrap();
            let b = std::fs::read(second.join("out").join(&name)).map_err(|e| format!("{}: {e}", name.display()))?;
            ensure(a == b, format!("{} differs between runs", name.display()))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} output files byte-identical"))
}

fn main() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Check>)> = vec![
        (1, "IPW recovers the enumerated ATE", Box::new(c1_ipw_recovery)),
        (2, "regression recovers the planted coefficient", Box::new(c2_regression)),
        (3, "data-subset refuter is stable", Box::new(c3_refuter)),
        (4, "backdoor sets match the exhaustive oracle", Box::new(c4_backdoor)),
        (5, "backprop matches finite differences", Box::new(c5_gradient_check)),
        (6, "Adam fixpoint, convergence and first step", Box::new(c6_adam)),
        (7, "networks fit blobs and XOR", Box::new(c7_trainability)),
        (8, "pairwise AUC equals ROC area", Box::new(c8_auc)),
        (9, "kappa and MCC match their formulas", Box::new(c9_kappa_mcc)),
        (10, "SMOTE points lie on neighbour segments", Box::new(c10_smote)),
        (11, "RFE keeps informative features", Box::new(c11_rfe)),
        (12, "end-to-end pipeline on a 5000-member corpus", Box::new(|| c12_end_to_end(first.path()))),
        (13, "repeated run is byte-identical", Box::new(|| c13_determinism(first.path(), second.path()))),
    ];
    let mut failed = 0;
    for (id, title, check) in &criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2}: PASS  {title} | {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2}: FAIL  {title} | {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
