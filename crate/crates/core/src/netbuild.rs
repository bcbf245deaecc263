//! Reciprocal friendship networks and per-node structural features.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CorpusWindow, EventKind, InteractionEvent};

pub const EIGEN_TOLERANCE: f64 = 1e-8;
pub const EIGEN_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    /// Retweets, quotes and replies.
    Interaction,
    Retweet,
    /// Quotes and replies.
    Mention,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 3] = [NetworkKind::Interaction, NetworkKind::Retweet, NetworkKind::Mention];

    pub fn admits(self, kind: EventKind) -> bool {
        use EventKind::*;
        match self {
            NetworkKind::Interaction => matches!(kind, Retweet | Quote | Reply),
            NetworkKind::Retweet => matches!(kind, Retweet),
            NetworkKind::Mention => matches!(kind, Quote | Reply),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::Interaction => "interaction",
            NetworkKind::Retweet => "retweet",
            NetworkKind::Mention => "mention",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interaction" => Ok(NetworkKind::Interaction),
            "retweet" => Ok(NetworkKind::Retweet),
            "mention" => Ok(NetworkKind::Mention),
            other => Err(Error::InvalidArgument(format!("unknown network kind {other:?}"))),
        }
    }
}

/// Undirected edge between node indices `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: u64,
}

/// Weighted simple undirected graph over user ids.
///
/// Nodes are kept in ascending id order, so index order is lexicographic
/// order. Edges are sorted by `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FriendshipNetwork {
    kind: NetworkKind,
    nodes: Vec<String>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, u64)>>,
}

impl FriendshipNetwork {
    /// Builds a network from sorted, unique node ids and edges between them.
    pub fn from_edges(kind: NetworkKind, nodes: Vec<String>, mut edges: Vec<Edge>) -> Result<Self> {
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("node ids must be sorted and unique".into()));
        }
        for e in edges.iter_mut() {
            if e.u == e.v {
                return Err(Error::InvalidArgument(format!("self-loop on {}", nodes.get(e.u).map_or("?", |s| s))));
            }
            if e.u.max(e.v) >= nodes.len() {
                return Err(Error::InvalidArgument("edge endpoint out of range".into()));
            }
            if e.weight == 0 {
                return Err(Error::InvalidArgument("edge weight must be positive".into()));
            }
            if e.u > e.v {
                std::mem::swap(&mut e.u, &mut e.v);
            }
        }
        edges.sort();
        if edges.windows(2).any(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::InvalidArgument("parallel edges".into()));
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }
        for list in adjacency.iter_mut() {
            list.sort_unstable();
        }
        Ok(FriendshipNetwork { kind, nodes, edges, adjacency })
    }

    /// Builds from id pairs; nodes are the union of `extra_nodes` and all endpoints.
    pub fn from_named_edges<I>(kind: NetworkKind, extra_nodes: &[String], edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, u64)>,
    {
        let edges: Vec<(String, String, u64)> = edges.into_iter().collect();
        let mut ids: BTreeSet<String> = extra_nodes.iter().cloned().collect();
        for (a, b, _) in &edges {
            ids.insert(a.clone());
            ids.insert(b.clone());
        }
        let nodes: Vec<String> = ids.into_iter().collect();
        let pos = |s: &str| nodes.binary_search_by(|n| n.as_str().cmp(s)).unwrap();
        let indexed = edges
            .iter()
            .map(|(a, b, w)| Edge { u: pos(a), v: pos(b), weight: *w })
            .collect();
        Self::from_edges(kind, nodes.clone(), indexed)
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, u64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<u64> {
        let list = &self.adjacency[u];
        list.binary_search_by(|(n, _)| n.cmp(&v)).ok().map(|i| list[i].1)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Edge set as sorted id pairs.
    pub fn named_edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|e| (self.nodes[e.u].clone(), self.nodes[e.v].clone()))
            .collect()
    }

    /// Same nodes, new edges.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Self::from_edges(self.kind, self.nodes.clone(), edges)
    }

    /// Connected components, each sorted; components ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &(y, _) in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Sidecar written next to an edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub kind: NetworkKind,
    pub nodes: usize,
    pub edges: usize,
    pub total_weight: u64,
    pub window: Option<CorpusWindow>,
    /// Target users without any reciprocal tie.
    pub isolated_targets_dropped: usize,
}

#[derive(Debug, Clone)]
pub struct BuiltNetwork {
    pub network: FriendshipNetwork,
    pub isolated_targets_dropped: usize,
}

/// Reciprocal-interaction network among `targets`.
///
/// An edge joins `u` and `v` when each has at least one admissible event
/// directed at the other; its weight is the admissible event count in both
/// directions. Targets without an edge are not nodes.
pub fn build_friendship_network(
    events: &[InteractionEvent],
    targets: &BTreeSet<String>,
    kind: NetworkKind,
) -> Result<BuiltNetwork> {
    let mut directed: HashMap<(&str, &str), u64> = HashMap::new();
    for e in events {
        if !kind.admits(e.kind) {
            continue;
        }
        let Some(t) = e.target_author.as_deref() else { continue };
        if e.author == t || !targets.contains(&e.author) || !targets.contains(t) {
            continue;
        }
        *directed.entry((e.author.as_str(), t)).or_default() += 1;
    }
    let mut pairs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (&(a, b), &n) in &directed {
        if a < b {
            if let Some(&back) = directed.get(&(b, a)) {
                pairs.insert((a, b), n + back);
            }
        }
    }
    let network = FriendshipNetwork::from_named_edges(
        kind,
        &[],
        pairs.into_iter().map(|((a, b), w)| (a.to_string(), b.to_string(), w)),
    )?;
    Ok(BuiltNetwork {
        isolated_targets_dropped: targets.len() - network.node_count(),
        network,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub user: String,
    pub degree: usize,
    pub degree_centrality: f64,
    pub eigenvector_centrality: f64,
    pub clustering_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    /// Aligned with the network's node order.
    pub features: Vec<NodeFeatures>,
    pub components: usize,
    pub largest_component: usize,
    /// Nodes whose eigenvector centrality is set to zero.
    pub nodes_outside_largest: usize,
    pub eigenvalue: f64,
    pub eigen_iterations: usize,
    pub eigen_converged: bool,
    /// `||Ax - lambda x||_2` of the emitted centrality vector.
    pub eigen_residual: f64,
}

impl FeatureReport {
    pub fn by_user(&self) -> BTreeMap<String, NodeFeatures> {
        self.features.iter().map(|f| (f.user.clone(), f.clone())).collect()
    }

    /// `user,degree,degree_centrality,eigenvector_centrality,clustering_coefficient`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(["user", "degree", "degree_centrality", "eigenvector_centrality", "clustering_coefficient"])?;
        for f in &self.features {
            w.serialize(f)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn local_clustering(net: &FriendshipNetwork, i: usize) -> f64 {
    let nbrs = net.neighbors(i);
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    let mut triangles = 0usize;
    for (a, &(x, _)) in nbrs.iter().enumerate() {
        for &(y, _) in &nbrs[a + 1..] {
            if net.weight(x, y).is_some() {
                triangles += 1;
            }
        }
    }
    triangles as f64 / (k * (k - 1) / 2) as f64
}

struct Eigen {
    vector: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
}

/// Dominant eigenvector of the unweighted adjacency restricted to `comp`.
///
/// Iterates with `A + I`, which shares eigenvectors with `A` but has a
/// strictly dominant eigenvalue on bipartite components.
fn power_iteration(net: &FriendshipNetwork, comp: &[usize]) -> Eigen {
    let n = net.node_count();
    let mut x = vec![0.0; n];
    let init = 1.0 / (comp.len() as f64).sqrt();
    for &i in comp {
        x[i] = init;
    }
    let mut y = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < EIGEN_MAX_ITER {
        iterations += 1;
        for &i in comp {
            y[i] = x[i] + net.neighbors(i).iter().map(|&(j, _)| x[j]).sum::<f64>();
        }
        let norm = comp.iter().map(|&i| y[i] * y[i]).sum::<f64>().sqrt();
        let mut delta = 0.0;
        for &i in comp {
            let v = y[i] / norm;
            delta += (v - x[i]).powi(2);
            x[i] = v;
        }
        if delta.sqrt() < EIGEN_TOLERANCE {
            converged = true;
            break;
        }
    }
    let ax: Vec<f64> = (0..n)
        .map(|i| net.neighbors(i).iter().map(|&(j, _)| x[j]).sum())
        .collect();
    let value: f64 = comp.iter().map(|&i| x[i] * ax[i]).sum();
    let residual = comp
        .iter()
        .map(|&i| (ax[i] - value * x[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Eigen { vector: x, value, iterations, converged, residual }
}

/// Degree, degree centrality, eigenvector centrality and local clustering.
///
/// Eigenvector centrality is computed on the largest connected component
/// (ties broken by smallest member) and is zero elsewhere.
pub fn node_features(net: &FriendshipNetwork) -> Result<FeatureReport> {
    let n = net.node_count();
    if n == 0 {
        return Err(Error::InsufficientData("network has no nodes".into()));
    }
    let comps = net.components();
    let largest = comps
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b[0].cmp(&a[0])))
        .expect("at least one component");
    let eigen = power_iteration(net, largest);
    if !eigen.converged {
        log::warn!(
            "eigenvector centrality did not converge in {} iterations (residual {:.3e})",
            eigen.iterations,
            eigen.residual
        );
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let features = (0..n)
        .map(|i| NodeFeatures {
            user: net.nodes()[i].clone(),
            degree: net.degree(i),
            degree_centrality: if n > 1 { net.degree(i) as f64 / denom } else { 0.0 },
            eigenvector_centrality: eigen.vector[i].max(0.0),
            clustering_coefficient: local_clustering(net, i),
        })
        .collect();
    Ok(FeatureReport {
        features,
        components: comps.len(),
        largest_component: largest.len(),
        nodes_outside_largest: n - largest.len(),
        eigenvalue: eigen.value,
        eigen_iterations: eigen.iterations,
        eigen_converged: eigen.converged,
        eigen_residual: eigen.residual,
    })
}

/// Writes `u v weight` lines in edge order.
pub fn write_edge_list<W: Write>(net: &FriendshipNetwork, mut w: W) -> Result<()> {
    for e in net.edges() {
        let (a, b) = (&net.nodes()[e.u], &net.nodes()[e.v]);
        if a.contains(char::is_whitespace) || b.contains(char::is_whitespace) {
            return Err(Error::Format(format!("user id with whitespace cannot be written: {a:?} / {b:?}")));
        }
        writeln!(w, "{a} {b} {}", e.weight)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_list<R: BufRead>(kind: NetworkKind, r: R) -> Result<FriendshipNetwork> {
    let mut edges = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [a, b, w] = parts.as_slice() else {
            return Err(Error::Malformed { line: i + 1, msg: "expected `u v weight`".into() });
        };
        let weight: u64 = w.parse().map_err(|_| Error::Malformed {
            line: i + 1,
            msg: format!("bad weight {w:?}"),
        })?;
        edges.push((a.to_string(), b.to_string(), weight));
    }
    FriendshipNetwork::from_named_edges(kind, &[], edges)
}

impl NetworkSummary {
    pub fn of(net: &FriendshipNetwork, window: Option<CorpusWindow>, isolated_targets_dropped: usize) -> Self {
        NetworkSummary {
            kind: net.kind(),
            nodes: net.node_count(),
            edges: net.edge_count(),
            total_weight: net.total_weight(),
            window,
            isolated_targets_dropped,
        }
    }
}
