//! Causal DAGs, d-separation and backdoor adjustment sets.
//!
//! Text format: one `A -> B` edge per line, `#` starts a comment, and a line
//! holding a single name declares an isolated node.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalGraph {
    nodes: Vec<String>,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    parents: Vec<Vec<usize>>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
}

fn valid_token(t: &str) -> bool {
    !t.is_empty()
        && t.chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '=' | '.' | '-'))
        && !t.contains("->")
}

impl CausalGraph {
    /// Builds a graph, rejecting self-loops and duplicate edges. Acyclicity is
    /// checked separately by [`CausalGraph::validate_dag`].
    pub fn new(nodes: Vec<String>, edges: &[(String, String)]) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut all = Vec::new();
        for n in nodes.into_iter().chain(edges.iter().flat_map(|(a, b)| [a.clone(), b.clone()])) {
            if !index.contains_key(&n) {
                index.insert(n.clone(), all.len());
                all.push(n);
            }
        }
        let mut idx_edges = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Graph(format!("self-loop on `{a}`")));
            }
            let e = (index[a], index[b]);
            if !seen.insert(e) {
                return Err(Error::Graph(format!("duplicate edge {a} -> {b}")));
            }
            idx_edges.push(e);
        }
        Ok(Self::from_indices(all, idx_edges))
    }

    fn from_indices(nodes: Vec<String>, edges: Vec<(usize, usize)>) -> Self {
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for &(a, b) in &edges {
            children[a].push(b);
            parents[b].push(a);
        }
        Self {
            nodes,
            edges,
            parents,
            children,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.nodes[a].as_str(), self.nodes[b].as_str()))
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Graph(format!("unknown node `{name}`")))
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Returns a cycle `[a, b, ..., a]` if one exists.
    pub fn validate_dag(&self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = self.nodes.len();
        let mut mark = vec![Mark::New; n];
        let mut stack_path: Vec<usize> = Vec::new();
        for start in 0..n {
            if mark[start] != Mark::New {
                continue;
            }
            // iterative DFS with explicit child cursors
            let mut cursor = vec![(start, 0usize)];
            mark[start] = Mark::Active;
            stack_path.push(start);
            while let Some(&mut (v, ref mut k)) = cursor.last_mut() {
                if *k < self.children[v].len() {
                    let c = self.children[v][*k];
                    *k += 1;
                    match mark[c] {
                        Mark::Active => {
                            let pos = stack_path.iter().position(|&x| x == c).expect("on path");
                            let mut cycle: Vec<String> =
                                stack_path[pos..].iter().map(|&i| self.nodes[i].clone()).collect();
                            cycle.push(self.nodes[c].clone());
                            return Err(Error::Cycle(cycle));
                        }
                        Mark::New => {
                            mark[c] = Mark::Active;
                            stack_path.push(c);
                            cursor.push((c, 0));
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[v] = Mark::Done;
                    stack_path.pop();
                    cursor.pop();
                }
            }
        }
        Ok(())
    }

    /// Nodes reachable from `v` along directed edges, excluding `v`.
    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &c in &self.children[u] {
                if seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    fn ancestors_of_set(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = set.clone();
        let mut queue: VecDeque<usize> = set.iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            for &p in &self.parents[u] {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Copy of the graph with every edge leaving `v` removed.
    pub fn without_outgoing(&self, v: usize) -> Self {
        let edges = self.edges.iter().copied().filter(|&(a, _)| a != v).collect();
        Self::from_indices(self.nodes.clone(), edges)
    }

    /// Whether `z` d-separates `x` from `y`, by reachability over
    /// (node, direction) states ("Bayes ball").
    pub fn d_separated(&self, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
        if z.contains(&x) || z.contains(&y) {
            return true;
        }
        let anc_z = self.ancestors_of_set(z);
        // direction: true = arrived from a child (travelling up), false = from a parent
        let mut visited = BTreeSet::new();
        let mut queue = VecDeque::from([(x, true)]);
        while let Some((v, up)) = queue.pop_front() {
            if !visited.insert((v, up)) {
                continue;
            }
            if v == y {
                return false;
            }
            let observed = z.contains(&v);
            if up {
                if !observed {
                    for &p in &self.parents[v] {
                        queue.push_back((p, true));
                    }
                    for &c in &self.children[v] {
                        queue.push_back((c, false));
                    }
                }
            } else {
                if !observed {
                    for &c in &self.children[v] {
                        queue.push_back((c, false));
                    }
                }
                // collider (or descendant-of-observed collider) opens
                if anc_z.contains(&v) {
                    for &p in &self.parents[v] {
                        queue.push_back((p, true));
                    }
                }
            }
        }
        true
    }

    /// Backdoor criterion: no member of `z` descends from `t`, and `z`
    /// d-separates `t` from `y` once the edges leaving `t` are removed.
    pub fn satisfies_backdoor(&self, t: usize, y: usize, z: &BTreeSet<usize>) -> bool {
        if z.contains(&t) || z.contains(&y) {
            return false;
        }
        let de = self.descendants(t);
        if z.iter().any(|v| de.contains(v)) {
            return false;
        }
        self.without_outgoing(t).d_separated(t, y, z)
    }
}

pub fn parse_graph(text: &str) -> Result<CausalGraph> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split("->").map(str::trim).collect();
        match parts.as_slice() {
            [single] if valid_token(single) => nodes.push(single.to_string()),
            [a, b] if valid_token(a) && valid_token(b) => {
                nodes.push(a.to_string());
                nodes.push(b.to_string());
                edges.push((a.to_string(), b.to_string()));
            }
            _ => {
                return Err(Error::Graph(format!(
                    "line {}: unknown token in `{line}`",
                    lineno + 1
                )))
            }
        }
    }
    let g = CausalGraph::new(nodes, &edges)?;
    g.validate_dag()?;
    Ok(g)
}

pub fn validate_dag(graph: &CausalGraph) -> Result<()> {
    graph.validate_dag()
}

/// Treatment/outcome pair on a graph.
#[derive(Debug, Clone)]
pub struct CausalQuery<'g> {
    pub graph: &'g CausalGraph,
    pub treatment: String,
    pub outcome: String,
}

impl<'g> CausalQuery<'g> {
    pub fn new(graph: &'g CausalGraph, treatment: &str, outcome: &str) -> Result<Self> {
        graph.index_of(treatment)?;
        graph.index_of(outcome)?;
        if treatment == outcome {
            return Err(Error::Graph("treatment and outcome coincide".into()));
        }
        Ok(Self {
            graph,
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
        })
    }
}

/// Largest candidate pool searched exhaustively.
pub const MAX_CANDIDATES: usize = 20;

/// All minimal backdoor adjustment sets, sorted by size then lexicographically.
pub fn backdoor_sets(query: &CausalQuery) -> Result<Vec<Vec<String>>> {
    backdoor_sets_within(query, |_| true)
}

/// As [`backdoor_sets`], drawing adjusters only from nodes accepted by `allowed`
/// (e.g. those with observed data). Minimality is relative to that pool.
pub fn backdoor_sets_within(query: &CausalQuery, allowed: impl Fn(&str) -> bool) -> Result<Vec<Vec<String>>> {
    let g = query.graph;
    g.validate_dag()?;
    let t = g.index_of(&query.treatment)?;
    let y = g.index_of(&query.outcome)?;
    let de = g.descendants(t);
    let mut pool: Vec<usize> = (0..g.nodes.len())
        .filter(|&v| v != t && v != y && !de.contains(&v) && allowed(&g.nodes[v]))
        .collect();
    pool.sort_by(|&a, &b| g.nodes[a].cmp(&g.nodes[b]));
    if pool.len() > MAX_CANDIDATES {
        return Err(Error::Graph(format!(
            "{} candidate adjusters exceed the exhaustive search limit {MAX_CANDIDATES}",
            pool.len()
        )));
    }
    let manipulated = g.without_outgoing(t);
    let mut found: Vec<BTreeSet<usize>> = Vec::new();
    for size in 0..=pool.len() {
        for combo in combinations(pool.len(), size) {
            let z: BTreeSet<usize> = combo.iter().map(|&i| pool[i]).collect();
            if found.iter().any(|f| f.is_subset(&z)) {
                continue;
            }
            if manipulated.d_separated(t, y, &z) {
                found.push(z);
            }
        }
    }
    let mut sets: Vec<Vec<String>> = found
        .into_iter()
        .map(|z| {
            let mut names: Vec<String> = z.into_iter().map(|v| g.nodes[v].clone()).collect();
            names.sort();
            names
        })
        .collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(sets)
}

/// Index combinations of `k` out of `n`, in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}
