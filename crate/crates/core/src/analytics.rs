//! Homophily and generalized friendship paradox statistics.
//!
//! Scores are passed as a slice aligned with the network's node order;
//! `None` marks a node whose metric is undefined. Such nodes are left out
//! of every statistic and do not count as neighbors. A node is evaluated
//! for the paradox when it has a score and at least one scored neighbor;
//! its degree `k` is the number of scored neighbors.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netbuild::FriendshipNetwork;
use crate::nullmodels::BaselineSummary;
use crate::stats::{self, CorrelationResult};
use crate::suscept::{Metric, ScoreTable};

pub const DEFAULT_S_BIN_WIDTH: f64 = 0.05;

/// Scores aligned with `net`'s nodes.
pub fn align_scores(net: &FriendshipNetwork, scores: &BTreeMap<String, f64>) -> Vec<Option<f64>> {
    net.nodes().iter().map(|id| scores.get(id).copied()).collect()
}

fn check_len(net: &FriendshipNetwork, scores: &[Option<f64>]) -> Result<()> {
    if net.node_count() != scores.len() {
        return Err(Error::LengthMismatch(net.node_count(), scores.len()));
    }
    Ok(())
}

/// Edge-weighted mean of each node's scored friends.
pub fn weighted_friend_average(net: &FriendshipNetwork, scores: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    check_len(net, scores)?;
    Ok((0..net.node_count())
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for &(j, w) in net.neighbors(i) {
                if let Some(s) = scores[j] {
                    num += w as f64 * s;
                    den += w as f64;
                }
            }
            (den > 0.0).then(|| num / den)
        })
        .collect())
}

/// Pearson correlation between each user's score and the weighted average
/// of their friends' scores.
pub fn homophily_correlation(net: &FriendshipNetwork, scores: &[Option<f64>]) -> Result<CorrelationResult> {
    let avg = weighted_friend_average(net, scores)?;
    let (own, friends): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .zip(&avg)
        .filter_map(|(s, a)| Some(((*s)?, (*a)?)))
        .unzip();
    if own.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "homophily needs at least 3 users with scored friends, got {}",
            own.len()
        )));
    }
    stats::pearson(&own, &friends)
}

/// Number of scored neighbors of every node (zero for unscored nodes).
pub fn evaluated_degrees(net: &FriendshipNetwork, scores: &[Option<f64>]) -> Vec<usize> {
    (0..net.node_count())
        .map(|i| match scores[i] {
            None => 0,
            Some(_) => net.neighbors(i).iter().filter(|(j, _)| scores[*j].is_some()).count(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualGfp {
    /// Whether the paradox holds at each node; `None` when not evaluated.
    pub holds: Vec<Option<bool>>,
    /// Fraction of evaluated nodes where it holds (0 when none are).
    pub p: f64,
    pub n_evaluated: usize,
}

/// Node-level paradox: own score strictly below the unweighted mean of
/// scored friends.
pub fn individual_gfp(net: &FriendshipNetwork, scores: &[Option<f64>]) -> Result<IndividualGfp> {
    check_len(net, scores)?;
    let holds: Vec<Option<bool>> = (0..net.node_count())
        .map(|i| {
            let s = scores[i]?;
            let mut k = 0usize;
            // Summing differences keeps equal scores exactly at zero.
            let mut excess = 0.0;
            for &(j, _) in net.neighbors(i) {
                if let Some(sj) = scores[j] {
                    k += 1;
                    excess += sj - s;
                }
            }
            (k > 0).then_some(excess > 0.0)
        })
        .collect();
    let n_evaluated = holds.iter().flatten().count();
    let n_hold = holds.iter().flatten().filter(|h| **h).count();
    Ok(IndividualGfp {
        p: if n_evaluated > 0 { n_hold as f64 / n_evaluated as f64 } else { 0.0 },
        holds,
        n_evaluated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkGfp {
    pub mean_s: f64,
    pub mean_s_nn: f64,
    pub holds: bool,
    pub n: usize,
}

/// Network-level paradox: the mean score against the degree-weighted mean
/// `sum(k s) / sum(k)`.
pub fn network_gfp(net: &FriendshipNetwork, scores: &[Option<f64>]) -> Result<NetworkGfp> {
    check_len(net, scores)?;
    let k = evaluated_degrees(net, scores);
    let (ks, ss): (Vec<f64>, Vec<f64>) = (0..net.node_count())
        .filter(|&i| k[i] > 0)
        .map(|i| (k[i] as f64, scores[i].expect("evaluated nodes are scored")))
        .unzip();
    let n = ss.len();
    if n == 0 {
        return Err(Error::InsufficientData("no node with a scored neighbor".into()));
    }
    let mean_s = ss.iter().sum::<f64>() / n as f64;
    let total_k: f64 = ks.iter().sum();
    let mean_k = total_k / n as f64;
    // sum(k s)/sum(k) written as mean_s + sum((k - <k>)(s - <s>))/sum(k); the
    // deviation form is exactly zero when every degree is equal.
    let shift: f64 = ks
        .iter()
        .zip(&ss)
        .map(|(k, s)| (k - mean_k) * (s - mean_s))
        .sum::<f64>()
        / total_k;
    let mean_s_nn = mean_s + shift;
    Ok(NetworkGfp {
        mean_s,
        mean_s_nn,
        holds: mean_s < mean_s_nn,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub count: usize,
    /// `None` for empty cells.
    pub holding_fraction: Option<f64>,
}

/// Paradox holding probability `p(k, s)` on a degree x score grid.
///
/// Bin `i` covers `[edges[i], edges[i+1])`; the last bin on each axis also
/// includes its upper edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadoxGrid {
    pub degree_bins: Vec<usize>,
    pub s_bins: Vec<f64>,
    /// `cells[degree_bin][s_bin]`.
    pub cells: Vec<Vec<GridCell>>,
}

/// `1, 2, 4, ...` up to the first power of two above `max_degree`.
pub fn default_degree_bins(max_degree: usize) -> Vec<usize> {
    let mut edges = vec![1usize];
    while *edges.last().unwrap() <= max_degree.max(1) {
        let next = edges.last().unwrap() * 2;
        edges.push(next);
    }
    edges
}

/// Equal-width score bins over `[0, 1]`; the last bin may be narrower.
pub fn default_s_bins(width: f64) -> Result<Vec<f64>> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(Error::InvalidArgument(format!("score bin width must be in (0, 1], got {width}")));
    }
    let n = (1.0 / width - 1e-9).ceil() as usize;
    let mut edges: Vec<f64> = (0..n).map(|i| i as f64 * width).collect();
    edges.push(1.0);
    Ok(edges)
}

fn find_bin<T: PartialOrd + Copy>(edges: &[T], v: T) -> Option<usize> {
    let last = edges.len() - 1;
    if v < edges[0] || v > edges[last] {
        return None;
    }
    if v == edges[last] {
        return Some(last - 1);
    }
    Some(edges.partition_point(|e| *e <= v) - 1)
}

fn validate_edges<T: PartialOrd>(edges: &[T], what: &str) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("{what} bin edges must be strictly ascending with at least two entries")));
    }
    Ok(())
}

pub fn paradox_grid(
    net: &FriendshipNetwork,
    scores: &[Option<f64>],
    degree_bins: &[usize],
    s_bins: &[f64],
) -> Result<ParadoxGrid> {
    validate_edges(degree_bins, "degree")?;
    validate_edges(s_bins, "score")?;
    let gfp = individual_gfp(net, scores)?;
    let k = evaluated_degrees(net, scores);
    let (nk, ns) = (degree_bins.len() - 1, s_bins.len() - 1);
    let mut counts = vec![vec![(0usize, 0usize); ns]; nk];
    for (i, h) in gfp.holds.iter().enumerate() {
        let Some(h) = h else { continue };
        let s = scores[i].expect("evaluated nodes are scored");
        let kb = find_bin(degree_bins, k[i]).ok_or(Error::OutsideBins(k[i] as f64))?;
        let sb = find_bin(s_bins, s).ok_or(Error::OutsideBins(s))?;
        counts[kb][sb].0 += 1;
        if *h {
            counts[kb][sb].1 += 1;
        }
    }
    let cells = counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(count, hold)| GridCell {
                    count,
                    holding_fraction: (count > 0).then(|| hold as f64 / count as f64),
                })
                .collect()
        })
        .collect();
    Ok(ParadoxGrid {
        degree_bins: degree_bins.to_vec(),
        s_bins: s_bins.to_vec(),
        cells,
    })
}

impl ParadoxGrid {
    pub fn total_count(&self) -> usize {
        self.cells.iter().flatten().map(|c| c.count).sum()
    }

    /// `k_bin_low,k_bin_high,s_bin_low,s_bin_high,count,holding_fraction`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k_bin_low", "k_bin_high", "s_bin_low", "s_bin_high", "count", "holding_fraction"])?;
        for (kb, row) in self.cells.iter().enumerate() {
            for (sb, cell) in row.iter().enumerate() {
                w.write_record([
                    self.degree_bins[kb].to_string(),
                    self.degree_bins[kb + 1].to_string(),
                    self.s_bins[sb].to_string(),
                    self.s_bins[sb + 1].to_string(),
                    cell.count.to_string(),
                    cell.holding_fraction.map(|f| f.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything reported for one network and metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfpReport {
    pub network: String,
    pub metric: Metric,
    /// Spearman correlation of degree and score; `None` if undefined.
    pub rho_ks: Option<CorrelationResult>,
    #[serde(rename = "P")]
    pub p: f64,
    pub mean_s: f64,
    pub mean_s_nn: f64,
    pub network_gfp_holds: bool,
    pub grid: ParadoxGrid,
    pub homophily: Option<CorrelationResult>,
    pub n_nodes_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline1: Option<BaselineSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline2: Option<BaselineSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Degree edges; defaults to powers of two.
    pub degree_bins: Option<Vec<usize>>,
    pub s_bin_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { degree_bins: None, s_bin_width: DEFAULT_S_BIN_WIDTH }
    }
}

/// Computes every paradox and homophily statistic for one metric.
pub fn gfp_report(
    net: &FriendshipNetwork,
    table: &ScoreTable,
    metric: Metric,
    grid: &GridSpec,
    label: &str,
) -> Result<GfpReport> {
    let scores = align_scores(net, &table.metric(metric));
    gfp_report_from_scores(net, &scores, metric, grid, label)
}

pub fn gfp_report_from_scores(
    net: &FriendshipNetwork,
    scores: &[Option<f64>],
    metric: Metric,
    grid: &GridSpec,
    label: &str,
) -> Result<GfpReport> {
    let individual = individual_gfp(net, scores)?;
    let network = network_gfp(net, scores)?;
    let k = evaluated_degrees(net, scores);
    let (kv, sv): (Vec<f64>, Vec<f64>) = (0..net.node_count())
        .filter(|&i| k[i] > 0)
        .map(|i| (k[i] as f64, scores[i].unwrap()))
        .unzip();
    let rho_ks = stats::spearman(&kv, &sv).ok();
    let degree_bins = match &grid.degree_bins {
        Some(b) => b.clone(),
        None => default_degree_bins(k.iter().copied().max().unwrap_or(1)),
    };
    let s_bins = default_s_bins(grid.s_bin_width)?;
    let grid = paradox_grid(net, scores, &degree_bins, &s_bins)?;
    Ok(GfpReport {
        network: label.to_string(),
        metric,
        rho_ks,
        p: individual.p,
        mean_s: network.mean_s,
        mean_s_nn: network.mean_s_nn,
        network_gfp_holds: network.holds,
        grid,
        homophily: homophily_correlation(net, scores).ok(),
        n_nodes_used: individual.n_evaluated,
        baseline1: None,
        baseline2: None,
    })
}
