//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use churnlab::causal::CausalGraph;
use churnlab::metrics::ConfusionMatrix;
use churnlab::nnet::{self, Mode, NetworkParams};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG over `n` nodes named `A`, `B`, .. with a shuffled causal order.
pub fn random_dag(n: usize, edge_p: f64, rng: &mut ChaCha8Rng) -> CausalGraph {
    let names: Vec<String> = (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < edge_p {
                edges.push((names[order[i]].clone(), names[order[j]].clone()));
            }
        }
    }
    CausalGraph::new(names, &edges).unwrap()
}

fn has_edge(g: &CausalGraph, a: usize, b: usize) -> bool {
    g.children(a).contains(&b)
}

/// Every simple path between `x` and `y` in the undirected skeleton.
pub fn simple_paths(g: &CausalGraph, x: usize, y: usize) -> Vec<Vec<usize>> {
    fn go(g: &CausalGraph, path: &mut Vec<usize>, y: usize, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == y {
            out.push(path.clone());
            return;
        }
        let mut next: Vec<usize> = g.parents(v).iter().chain(g.children(v)).copied().collect();
        next.sort_unstable();
        next.dedup();
        for w in next {
            if !path.contains(&w) {
                path.push(w);
                go(g, path, y, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, &mut vec![x], y, &mut out);
    out
}

fn descendants_incl(g: &CausalGraph, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &c in g.children(u) {
            if seen.insert(c) {
                stack.push(c);
            }
        }
    }
    seen
}

/// A path is open when each collider has itself or a descendant in `z` and
/// no other interior node is in `z`.
pub fn path_open(g: &CausalGraph, path: &[usize], z: &BTreeSet<usize>) -> bool {
    for k in 1..path.len().saturating_sub(1) {
        let (a, v, b) = (path[k - 1], path[k], path[k + 1]);
        let collider = has_edge(g, a, v) && has_edge(g, b, v);
        if collider {
            if descendants_incl(g, v).is_disjoint(z) {
                return false;
            }
        } else if z.contains(&v) {
            return false;
        }
    }
    true
}

pub fn d_separated_by_paths(g: &CausalGraph, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
    simple_paths(g, x, y).iter().all(|p| !path_open(g, p, z))
}

/// All minimal sets satisfying the backdoor criterion, by exhaustive search
/// over subsets and explicit backdoor-path blocking.
pub fn backdoor_oracle(g: &CausalGraph, t: usize, y: usize) -> Vec<Vec<String>> {
    let n = g.nodes().len();
    let de = descendants_incl(g, t);
    let backdoor_paths: Vec<Vec<usize>> = simple_paths(g, t, y)
        .into_iter()
        .filter(|p| p.len() >= 2 && has_edge(g, p[1], t))
        .collect();
    let others: Vec<usize> = (0..n).filter(|&v| v != t && v != y).collect();
    let mut valid: Vec<BTreeSet<usize>> = Vec::new();
    for mask in 0u32..(1 << others.len()) {
        let z: BTreeSet<usize> = others
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        if !z.is_disjoint(&de) {
            continue;
        }
        if backdoor_paths.iter().all(|p| !path_open(g, p, &z)) {
            valid.push(z);
        }
    }
    let mut minimal: Vec<Vec<String>> = valid
        .iter()
        .filter(|z| !valid.iter().any(|w| w.len() < z.len() && w.is_subset(z)))
        .map(|z| {
            let mut names: Vec<String> = z.iter().map(|&v| g.nodes()[v].clone()).collect();
            names.sort();
            names
        })
        .collect();
    minimal.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    minimal
}

/// Mann-Whitney AUC by comparing every positive with every negative.
pub fn pairwise_auc(probas: &[f64], labels: &[u8]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if probas[i] > probas[j] {
                credit += 1.0;
            } else if probas[i] == probas[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

pub fn kappa_formula(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let n = tp + fp + tn + fn_;
    let po = (tp + tn) / n;
    let pe = ((tp + fp) * (tp + fn_) + (tn + fn_) * (tn + fp)) / (n * n);
    if pe == 1.0 {
        0.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

pub fn mcc_formula(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den
    }
}

pub fn pearson_formula(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Step-1 elimination with the least-squares criterion `0.5 * 2 sum(x^2) * w^2`.
pub fn rfe_reference(x: &ndarray::Array2<f64>, y: &[f64], n_keep: usize) -> Vec<usize> {
    let mut active: Vec<usize> = (0..x.ncols()).collect();
    let mut removed = Vec::new();
    while active.len() > n_keep {
        let sub = x.select(ndarray::Axis(1), &active);
        let fit = churnlab::linalg::least_squares(sub.view(), y, churnlab::linalg::RIDGE_EPS).unwrap();
        let mut worst = 0;
        let mut worst_c = f64::INFINITY;
        for (k, &j) in active.iter().enumerate() {
            let h: f64 = 2.0 * x.column(j).iter().map(|v| v * v).sum::<f64>();
            let c = 0.5 * h * fit.weights[k] * fit.weights[k];
            if c <= worst_c {
                worst_c = c;
                worst = k;
            }
        }
        removed.push(active.remove(worst));
    }
    removed
}

/// Textbook bias-corrected Adam over a flat parameter vector.
pub struct AdamReference {
    pub lr: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
}

impl AdamReference {
    pub fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        self.t += 1;
        for i in 0..theta.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = self.m[i] / (1.0 - b1.powi(self.t));
            let vh = self.v[i] / (1.0 - b2.powi(self.t));
            theta[i] -= self.lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Mean binary cross-entropy of the inference-mode forward pass.
pub fn network_loss(p: &NetworkParams, x: &ndarray::Array2<f64>, y: &[f64]) -> f64 {
    let probas = nnet::forward(p, x.view(), Mode::Infer, 0).unwrap().probabilities();
    nnet::bce_loss(&probas, y)
}

/// Largest relative error between backprop and central differences.
pub fn gradient_check(p: &NetworkParams, x: &ndarray::Array2<f64>, y: &[f64]) -> f64 {
    let pass = nnet::forward(p, x.view(), Mode::Train, 0).unwrap();
    let analytic = nnet::backward(p, y, &pass).unwrap().flat();
    let base = p.flat();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut q = p.clone();
        let mut v = base.clone();
        v[i] = base[i] + h;
        q.set_flat(&v);
        let up = network_loss(&q, x, y);
        v[i] = base[i] - h;
        q.set_flat(&v);
        let down = network_loss(&q, x, y);
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

/// Is `s` on the segment from `a` to `b`?
pub fn on_segment(s: &[f64], a: &[f64], b: &[f64], tol: f64) -> bool {
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let dd: f64 = d.iter().map(|v| v * v).sum();
    if dd == 0.0 {
        return s.iter().zip(a).all(|(p, q)| (p - q).abs() <= tol);
    }
    let u = s.iter().zip(a).zip(&d).map(|((p, q), r)| (p - q) * r).sum::<f64>() / dd;
    (-tol..=1.0 + tol).contains(&u)
        && s.iter().zip(a).zip(&d).all(|((p, q), r)| (p - (q + u * r)).abs() <= tol)
}

/// Indices of the `k` nearest other points (Euclidean, ties by index).
pub fn knn_reference(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (p.iter().zip(&points[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}
