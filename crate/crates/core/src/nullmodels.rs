//! Randomized baselines: degree-preserving edge swaps and random neighbor
//! reassignment, with repeated-trial significance summaries.
//!
//! Scores stay attached to nodes; only the topology is randomized.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{Error, Result};
use crate::netbuild::{Edge, FriendshipNetwork};

pub const DEFAULT_REPS: usize = 100;
pub const DEFAULT_SWAP_MULTIPLIER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModel {
    EdgeSwap,
    NeighborReassign,
}

impl NullModel {
    pub fn as_str(self) -> &'static str {
        match self {
            NullModel::EdgeSwap => "edge_swap",
            NullModel::NeighborReassign => "neighbor_reassign",
        }
    }
}

impl fmt::Display for NullModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NullModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swap" | "edge_swap" => Ok(NullModel::EdgeSwap),
            "reassign" | "neighbor_reassign" => Ok(NullModel::NeighborReassign),
            other => Err(Error::InvalidArgument(format!("unknown null model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullConfig {
    pub model: NullModel,
    pub n_reps: usize,
    pub swap_multiplier: usize,
    pub seed: u64,
}

impl NullConfig {
    pub fn new(model: NullModel, n_reps: usize, swap_multiplier: usize, seed: u64) -> Result<Self> {
        let config = NullConfig { model, n_reps, swap_multiplier, seed };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::InvalidArgument("n_reps must be at least 1".into()));
        }
        if self.swap_multiplier == 0 {
            return Err(Error::InvalidArgument("swap_multiplier must be at least 1".into()));
        }
        Ok(())
    }

    /// One randomized copy of `net` for replicate `rep` (seed `seed + rep`).
    pub fn randomize(&self, net: &FriendshipNetwork, rep: usize) -> Result<FriendshipNetwork> {
        let seed = self.seed.wrapping_add(rep as u64);
        Ok(match self.model {
            NullModel::EdgeSwap => degree_preserving_rewire(net, self.swap_multiplier, seed)?.network,
            NullModel::NeighborReassign => random_neighbor_reassign(net, seed)?.network,
        })
    }
}

/// A randomized network and what happened while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewired {
    pub network: FriendshipNetwork,
    pub attempted: usize,
    pub accepted: usize,
    /// Edge count before duplicate edges were merged.
    pub pre_merge_edges: usize,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Double-edge swaps `(a,b),(c,d) -> (a,d),(c,b)` with `swap_multiplier * |E|`
/// attempts. Swaps creating self-loops or parallel edges are rejected.
/// Graphs with fewer than two edges are returned unchanged.
pub fn degree_preserving_rewire(net: &FriendshipNetwork, swap_multiplier: usize, seed: u64) -> Result<Rewired> {
    let m = net.edge_count();
    if m < 2 {
        return Ok(Rewired { network: net.clone(), attempted: 0, accepted: 0, pre_merge_edges: m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<Edge> = net.edges().to_vec();
    let mut present: HashSet<(usize, usize)> = edges.iter().map(|e| (e.u, e.v)).collect();
    let attempts = swap_multiplier.saturating_mul(m);
    let mut accepted = 0;
    for _ in 0..attempts {
        let i = rng.random_range(0..m);
        let mut j = rng.random_range(0..m - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (edges[i].u, edges[i].v);
        let (c, d) = if rng.random_bool(0.5) {
            (edges[j].u, edges[j].v)
        } else {
            (edges[j].v, edges[j].u)
        };
        if a == d || c == b {
            continue;
        }
        let (k1, k2) = (key(a, d), key(c, b));
        if present.contains(&k1) || present.contains(&k2) {
            continue;
        }
        present.remove(&(edges[i].u, edges[i].v));
        present.remove(&(edges[j].u, edges[j].v));
        present.insert(k1);
        present.insert(k2);
        edges[i] = Edge { u: k1.0, v: k1.1, weight: edges[i].weight };
        edges[j] = Edge { u: k2.0, v: k2.1, weight: edges[j].weight };
        accepted += 1;
    }
    Ok(Rewired {
        network: net.with_edges(edges)?,
        attempted: attempts,
        accepted,
        pre_merge_edges: m,
    })
}

/// Keeps the smaller endpoint of every edge and redraws the other one
/// uniformly among all other nodes. Edges that land on the same pair merge
/// and their weights add.
pub fn random_neighbor_reassign(net: &FriendshipNetwork, seed: u64) -> Result<Rewired> {
    let n = net.node_count();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("neighbor reassignment needs at least 2 nodes, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for e in net.edges() {
        let mut v = rng.random_range(0..n - 1);
        if v >= e.u {
            v += 1;
        }
        *merged.entry(key(e.u, v)).or_default() += e.weight;
    }
    let edges = merged.into_iter().map(|((u, v), weight)| Edge { u, v, weight }).collect();
    Ok(Rewired {
        network: net.with_edges(edges)?,
        attempted: net.edge_count(),
        accepted: net.edge_count(),
        pre_merge_edges: net.edge_count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullStatistic {
    Homophily,
    #[serde(rename = "P")]
    P,
    MeanSNn,
}

impl NullStatistic {
    fn compute(self, net: &FriendshipNetwork, scores: &[Option<f64>]) -> Result<f64> {
        Ok(match self {
            NullStatistic::Homophily => analytics::homophily_correlation(net, scores)?.coefficient,
            NullStatistic::P => analytics::individual_gfp(net, scores)?.p,
            NullStatistic::MeanSNn => analytics::network_gfp(net, scores)?.mean_s_nn,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub statistic: NullStatistic,
    pub observed: f64,
    pub null_mean: f64,
    /// Sample standard deviation (0 for a single replicate).
    pub null_sd: f64,
    /// Two-sided empirical p-value.
    pub p_value: f64,
    pub n_reps: usize,
}

fn summarize(statistic: NullStatistic, observed: f64, null: &[f64]) -> NullSummary {
    let n = null.len();
    let mean = null.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (null.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let dev = (observed - mean).abs();
    let extreme = null.iter().filter(|v| (*v - mean).abs() >= dev).count();
    NullSummary {
        statistic,
        observed,
        null_mean: mean,
        null_sd: sd,
        p_value: (1 + extreme) as f64 / (n + 1) as f64,
        n_reps: n,
    }
}

/// Null distributions of several statistics from one set of replicates.
pub fn null_distributions(
    net: &FriendshipNetwork,
    scores: &[Option<f64>],
    statistics: &[NullStatistic],
    config: &NullConfig,
) -> Result<Vec<NullSummary>> {
    config.validate()?;
    let observed = statistics
        .iter()
        .map(|s| s.compute(net, scores))
        .collect::<Result<Vec<f64>>>()?;
    let replicates = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| {
            let null = config.randomize(net, rep)?;
            statistics.iter().map(|s| s.compute(&null, scores)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(statistics
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let values: Vec<f64> = replicates.iter().map(|r| r[i]).collect();
            summarize(*s, observed[i], &values)
        })
        .collect())
}

pub fn null_distribution(
    net: &FriendshipNetwork,
    scores: &[Option<f64>],
    statistic: NullStatistic,
    config: &NullConfig,
) -> Result<NullSummary> {
    Ok(null_distributions(net, scores, &[statistic], config)?[0])
}

/// Baseline column of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub model: NullModel,
    pub n_reps: usize,
    pub swap_multiplier: usize,
    pub seed: u64,
    #[serde(rename = "P")]
    pub p: NullSummary,
    pub mean_s_nn: NullSummary,
    /// Absent when the observed homophily correlation is undefined.
    pub homophily: Option<NullSummary>,
}

pub fn baseline_summary(net: &FriendshipNetwork, scores: &[Option<f64>], config: &NullConfig) -> Result<BaselineSummary> {
    let with_homophily = analytics::homophily_correlation(net, scores).is_ok();
    let mut stats = vec![NullStatistic::P, NullStatistic::MeanSNn];
    if with_homophily {
        stats.push(NullStatistic::Homophily);
    }
    let out = null_distributions(net, scores, &stats, config)?;
    Ok(BaselineSummary {
        model: config.model,
        n_reps: config.n_reps,
        swap_multiplier: config.swap_multiplier,
        seed: config.seed,
        p: out[0],
        mean_s_nn: out[1],
        homophily: out.get(2).copied(),
    })
}
