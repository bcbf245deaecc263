//! Synthetic networks, attributes and event logs with known ground truth.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{Error, Result};
use crate::ingest::{CorpusWindow, EventKind, InteractionEvent, UserMeta, DEFAULT_BUFFER_SECS, DEFAULT_TARGET_THRESHOLD};
use crate::netbuild::{Edge, FriendshipNetwork, NetworkKind};
use crate::stats;

pub const DAY_SECS: i64 = 86_400;
pub const DEFAULT_WINDOW_DAYS: i64 = 365;
/// Planted SAR values are capped here so the spontaneous count stays finite.
pub const MAX_PLANTED_SAR: f64 = 0.99;
const URL_HOST: &str = "https://synth.example";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DegreeDist {
    /// `P(k) ~ k^-exponent` on `k_min..=k_max`.
    Powerlaw { exponent: f64, k_min: usize, k_max: usize },
    Regular { k: usize },
    Poisson { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Marginal {
    Beta { a: f64, b: f64 },
    #[default]
    Uniform,
}

/// How a node's planted rate is derived from its attribute `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planted {
    Constant(f64),
    Attribute,
    OneMinusAttribute,
}

impl Planted {
    fn value(self, s: f64) -> f64 {
        match self {
            Planted::Constant(v) => v,
            Planted::Attribute => s,
            Planted::OneMinusAttribute => 1.0 - s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventParams {
    /// Scales every URL-bearing event; 0 leaves only friend interactions.
    pub intensity: f64,
    /// Broadcast URLs each user is exposed to at intensity 1.
    pub exposures_per_node: usize,
    /// Broadcasting accounts (not part of the network).
    pub n_sources: usize,
    pub iar: Planted,
    pub sar: Planted,
    /// Every node shares at least this many URL events.
    pub target_threshold: usize,
    pub window_days: i64,
    pub buffer_days: i64,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            intensity: 1.0,
            exposures_per_node: 200,
            n_sources: 10,
            iar: Planted::Constant(0.5),
            sar: Planted::Constant(0.3),
            target_threshold: DEFAULT_TARGET_THRESHOLD,
            window_days: DEFAULT_WINDOW_DAYS,
            buffer_days: DEFAULT_BUFFER_SECS / DAY_SECS,
        }
    }
}

impl EventParams {
    pub fn window(&self) -> Result<CorpusWindow> {
        CorpusWindow::new(0, self.window_days * DAY_SECS, self.buffer_days * DAY_SECS)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::InvalidArgument("intensity must be a non-negative number".into()));
        }
        if self.n_sources == 0 {
            return Err(Error::InvalidArgument("n_sources must be positive".into()));
        }
        if self.target_threshold == 0 {
            return Err(Error::InvalidArgument("target_threshold must be positive".into()));
        }
        for p in [self.iar, self.sar] {
            if let Planted::Constant(v) = p {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("planted rate {v} outside [0, 1]")));
                }
            }
        }
        let w = self.window()?;
        if w.end - w.buffer_end < 2 * DAY_SECS || w.buffer_end < 2 * DAY_SECS {
            return Err(Error::InvalidArgument("window and buffer must each leave at least two days".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub degree_dist: DegreeDist,
    #[serde(default)]
    pub rho_ks_target: f64,
    #[serde(default)]
    pub homophily_strength: f64,
    #[serde(default)]
    pub metric_marginal: Marginal,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub events: EventParams,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::InvalidArgument("n_nodes must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho_ks_target) {
            return Err(Error::InvalidArgument("rho_ks_target must lie in [-1, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.homophily_strength) {
            return Err(Error::InvalidArgument("homophily_strength must lie in [0, 1]".into()));
        }
        match self.degree_dist {
            DegreeDist::Powerlaw { exponent, k_min, k_max } => {
                if exponent.is_nan() || exponent <= 0.0 || k_min == 0 || k_min > k_max {
                    return Err(Error::InvalidArgument("powerlaw needs exponent > 0 and 1 <= k_min <= k_max".into()));
                }
            }
            DegreeDist::Regular { k } => {
                if k >= self.n_nodes.max(1) || (k * self.n_nodes) % 2 == 1 {
                    return Err(Error::InvalidArgument(format!("no simple {k}-regular graph on {} nodes", self.n_nodes)));
                }
            }
            DegreeDist::Poisson { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::InvalidArgument("poisson lambda must be positive".into()));
                }
            }
        }
        if let Marginal::Beta { a, b } = self.metric_marginal {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidArgument("beta marginal needs a, b > 0".into()));
            }
        }
        self.events.validate()
    }
}

/// Zero-padded ids so lexicographic order equals numeric order.
pub fn node_ids(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("u{i:0width$}")).collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean of the truncated discrete power law.
pub fn powerlaw_mean(exponent: f64, k_min: usize, k_max: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in k_min..=k_max {
        let p = (k as f64).powf(-exponent);
        num += k as f64 * p;
        den += p;
    }
    num / den
}

fn sample_degrees<R: Rng>(dist: DegreeDist, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let cap = n.saturating_sub(1);
    let mut draw: Box<dyn FnMut(&mut R) -> usize> = match dist {
        DegreeDist::Regular { k } => Box::new(move |_| k),
        DegreeDist::Poisson { lambda } => {
            let p = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Box::new(move |r| (p.sample(r) as usize).min(cap))
        }
        DegreeDist::Powerlaw { exponent, k_min, k_max } => {
            let ks: Vec<usize> = (k_min..=k_max.min(cap.max(k_min))).collect();
            let mut cdf = Vec::with_capacity(ks.len());
            let mut acc = 0.0;
            for &k in &ks {
                acc += (k as f64).powf(-exponent);
                cdf.push(acc);
            }
            Box::new(move |r| {
                let u = r.random::<f64>() * acc;
                ks[cdf.partition_point(|c| *c < u).min(ks.len() - 1)]
            })
        }
    };
    let mut degrees: Vec<usize> = (0..n).map(|_| draw(rng)).collect();
    let mut tries = 0;
    while degrees.iter().sum::<usize>() % 2 == 1 {
        if matches!(dist, DegreeDist::Regular { .. }) || tries > 10_000 {
            return Err(Error::InvalidArgument("degree sequence has an odd sum".into()));
        }
        let i = rng.random_range(0..n);
        degrees[i] = draw(rng);
        tries += 1;
    }
    Ok(degrees)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedGraph {
    pub network: FriendshipNetwork,
    /// Sampled degree sequence before stub matching.
    pub target_degrees: Vec<usize>,
    /// Stubs discarded when the retry budget ran out.
    pub dropped_stubs: usize,
}

/// Configuration model with rejection of self-loops and parallel edges.
///
/// Unmatched stubs are reshuffled and re-paired; once that stalls, the
/// remaining pairs are spliced into random existing edges. Both count
/// against a budget of `100 * |E|` attempts, after which leftover stubs are
/// dropped.
pub fn generate_graph(config: &SynthConfig) -> Result<GeneratedGraph> {
    config.validate()?;
    let n = config.n_nodes;
    let mut rng = rng_for(config.seed, 0);
    let degrees = sample_degrees(config.degree_dist, n, &mut rng)?;
    let mut stubs: Vec<usize> = degrees.iter().enumerate().flat_map(|(i, &d)| std::iter::repeat_n(i, d)).collect();
    let budget = 100 * (stubs.len() / 2).max(1);
    let mut attempts = 0;
    let mut present: HashSet<(usize, usize)> = HashSet::new();
    let mut list: Vec<(usize, usize)> = Vec::new();
    let mut stalled = false;
    while stubs.len() >= 2 && attempts < budget {
        if !stalled {
            stubs.shuffle(&mut rng);
            let mut rejected = Vec::new();
            for pair in stubs.chunks(2) {
                if pair.len() < 2 {
                    rejected.push(pair[0]);
                    continue;
                }
                attempts += 1;
                let e = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if e.0 == e.1 || !present.insert(e) {
                    rejected.extend_from_slice(pair);
                } else {
                    list.push(e);
                }
            }
            stalled = rejected.len() == stubs.len();
            stubs = rejected;
            continue;
        }
        // Repair: rewire a random edge (x, y) into (a, x), (b, y).
        attempts += 1;
        if list.is_empty() {
            break;
        }
        let (a, b) = (stubs[stubs.len() - 2], stubs[stubs.len() - 1]);
        let idx = rng.random_range(0..list.len());
        let (x, y) = if rng.random_bool(0.5) { list[idx] } else { (list[idx].1, list[idx].0) };
        let (e1, e2) = ((a.min(x), a.max(x)), (b.min(y), b.max(y)));
        if a == x || b == y || e1 == e2 || present.contains(&e1) || present.contains(&e2) {
            continue;
        }
        present.remove(&list[idx]);
        list.swap_remove(idx);
        for e in [e1, e2] {
            present.insert(e);
            list.push(e);
        }
        stubs.truncate(stubs.len() - 2);
        stalled = false;
    }
    let edges = list.into_iter().map(|(u, v)| Edge { u, v, weight: 1 }).collect();
    let network = FriendshipNetwork::from_edges(NetworkKind::Interaction, node_ids(n), edges)?;
    if !stubs.is_empty() {
        log::warn!("dropped {} unmatched stubs", stubs.len());
    }
    Ok(GeneratedGraph { network, target_degrees: degrees, dropped_stubs: stubs.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeAssignment {
    /// Aligned with the network's node order.
    pub scores: Vec<f64>,
    pub rho_ks_target: f64,
    /// Spearman correlation between degree and attribute.
    pub achieved_rho_ks: Option<f64>,
    /// Largest degree correlation reachable with this degree sequence.
    pub max_abs_rho_ks: Option<f64>,
    pub rho_ks_feasible: bool,
    pub homophily_strength: f64,
    pub achieved_homophily: Option<f64>,
}

fn draw_marginal<R: Rng>(m: Marginal, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    match m {
        Marginal::Uniform => Ok((0..n).map(|_| rng.random::<f64>()).collect()),
        Marginal::Beta { a, b } => {
            let d = Beta::new(a, b).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok((0..n).map(|_| d.sample(rng)).collect())
        }
    }
}

/// Attributes with a planted degree correlation and homophily.
///
/// A random fraction `|rho_ks_target|` of nodes receive their values in
/// degree order (reversed for negative targets). Nodes are then visited in
/// random order and blended toward the mean of already visited neighbors:
/// `s = h * neighbor_mean + (1 - h) * draw`.
pub fn assign_attributes(net: &FriendshipNetwork, config: &SynthConfig) -> Result<AttributeAssignment> {
    config.validate()?;
    let n = net.node_count();
    let mut rng = rng_for(config.seed, 1);
    let mut base = draw_marginal(config.metric_marginal, n, &mut rng)?;
    let degrees = net.degrees();

    let rho = config.rho_ks_target;
    let n_coupled = (rho.abs() * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut coupled: Vec<usize> = order[..n_coupled].to_vec();
    // shuffled first so tied degrees are ordered randomly
    coupled.shuffle(&mut rng);
    coupled.sort_by_key(|&i| degrees[i]);
    let mut values: Vec<f64> = coupled.iter().map(|&i| base[i]).collect();
    values.sort_by(f64::total_cmp);
    if rho < 0.0 {
        values.reverse();
    }
    for (&i, v) in coupled.iter().zip(values) {
        base[i] = v;
    }

    let h = config.homophily_strength;
    let mut scores = vec![f64::NAN; n];
    let mut assigned = vec![false; n];
    order.shuffle(&mut rng);
    for &i in &order {
        let (mut sum, mut k) = (0.0, 0usize);
        for &(j, _) in net.neighbors(i) {
            if assigned[j] {
                sum += scores[j];
                k += 1;
            }
        }
        scores[i] = if k > 0 { h * (sum / k as f64) + (1.0 - h) * base[i] } else { base[i] };
        assigned[i] = true;
    }

    let kf: Vec<f64> = degrees.iter().map(|&k| k as f64).collect();
    let achieved_rho_ks = stats::spearman(&kf, &scores).ok().map(|r| r.coefficient);
    let mut sorted_by_degree = scores.clone();
    sorted_by_degree.sort_by(f64::total_cmp);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| degrees[i]);
    let mut extreme = vec![0.0; n];
    for (&i, v) in by_degree.iter().zip(sorted_by_degree) {
        extreme[i] = v;
    }
    let max_abs_rho_ks = stats::spearman(&kf, &extreme).ok().map(|r| r.coefficient.abs());
    let scored: Vec<Option<f64>> = scores.iter().copied().map(Some).collect();
    Ok(AttributeAssignment {
        achieved_rho_ks,
        max_abs_rho_ks,
        rho_ks_feasible: max_abs_rho_ks.is_some_and(|m| rho.abs() <= m),
        achieved_homophily: analytics::homophily_correlation(net, &scored).ok().map(|r| r.coefficient),
        scores,
        rho_ks_target: rho,
        homophily_strength: h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRates {
    pub user: String,
    pub iar: f64,
    pub sar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Sorted by timestamp, ids assigned in that order.
    pub events: Vec<InteractionEvent>,
    pub meta: Vec<UserMeta>,
    pub window: CorpusWindow,
    pub planted: Vec<PlantedRates>,
    pub sources: Vec<String>,
}

struct Draft {
    kind: EventKind,
    author: usize,
    target: Option<usize>,
    timestamp: i64,
    urls: Vec<String>,
}

/// Event log whose friendship network is `net` and whose users adopt with
/// the planted rates.
///
/// Broadcaster accounts post every exposure URL inside the buffer; each node
/// follows (retweets) every broadcaster first. A node re-shares each
/// exposure with probability equal to its planted IAR after the buffer and
/// posts enough fresh URLs to reach its planted SAR. Friends interact with
/// each other only at the window end, reusing URLs they already shared, so
/// friendship adds no exposures.
pub fn generate_event_log(
    net: &FriendshipNetwork,
    attributes: &[f64],
    params: &EventParams,
    seed: u64,
) -> Result<SynthCorpus> {
    params.validate()?;
    let n = net.node_count();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot generate events for an empty network".into()));
    }
    if attributes.len() != n {
        return Err(Error::LengthMismatch(n, attributes.len()));
    }
    let window = params.window()?;
    let mut rng = rng_for(seed, 2);
    let ids: Vec<String> = net.nodes().to_vec();
    let sources: Vec<String> = (0..params.n_sources).map(|i| format!("source{i:03}")).collect();
    // authors: nodes 0..n, sources n..n+n_sources
    let name = |a: usize| if a < n { ids[a].clone() } else { sources[a - n].clone() };
    let mut drafts: Vec<Draft> = Vec::new();
    let mut shared: Vec<Vec<String>> = vec![Vec::new(); n];
    let m = (params.exposures_per_node as f64 * params.intensity).round() as usize;
    let after_buffer = |r: &mut ChaCha8Rng| r.random_range(window.buffer_end + 1..window.end);
    let planted: Vec<PlantedRates> = (0..n)
        .map(|i| PlantedRates {
            user: ids[i].clone(),
            iar: params.iar.value(attributes[i]).clamp(0.0, 1.0),
            sar: params.sar.value(attributes[i]).clamp(0.0, 1.0),
        })
        .collect();

    if m > 0 {
        let intro: Vec<String> = (0..params.n_sources).map(|s| format!("{URL_HOST}/{}/intro", sources[s])).collect();
        for (s, url) in intro.iter().enumerate() {
            drafts.push(Draft { kind: EventKind::Original, author: n + s, target: None, timestamp: window.start, urls: vec![url.clone()] });
        }
        let mut exposures: Vec<(usize, String, i64)> = Vec::with_capacity(m);
        for k in 0..m {
            let s = k % params.n_sources;
            let t = rng.random_range(window.start + 2..=window.buffer_end);
            let url = format!("{URL_HOST}/{}/{k}", sources[s]);
            drafts.push(Draft { kind: EventKind::Original, author: n + s, target: None, timestamp: t, urls: vec![url.clone()] });
            exposures.push((s, url, t));
        }
        for u in 0..n {
            for (s, url) in intro.iter().enumerate() {
                drafts.push(Draft {
                    kind: EventKind::Retweet,
                    author: u,
                    target: Some(n + s),
                    timestamp: window.start + 1,
                    urls: vec![url.clone()],
                });
                shared[u].push(url.clone());
            }
            let p = planted[u].iar;
            let mut adopted = Vec::new();
            for (s, url, _) in &exposures {
                if rng.random_bool(p) {
                    adopted.push(url.clone());
                    drafts.push(Draft {
                        kind: EventKind::Retweet,
                        author: u,
                        target: Some(n + s),
                        timestamp: after_buffer(&mut rng),
                        urls: vec![url.clone()],
                    });
                }
            }
            let influenced = adopted.len();
            let sar = planted[u].sar.min(MAX_PLANTED_SAR);
            let spontaneous = if influenced == 0 {
                usize::from(sar > 0.0)
            } else {
                (influenced as f64 * sar / (1.0 - sar)).round() as usize
            };
            let mut own = Vec::with_capacity(spontaneous);
            for k in 0..spontaneous {
                let url = format!("{URL_HOST}/{}/{k}", ids[u]);
                drafts.push(Draft { kind: EventKind::Original, author: u, target: None, timestamp: after_buffer(&mut rng), urls: vec![url.clone()] });
                own.push(url);
            }
            let url_events = params.n_sources + influenced + spontaneous + net.degree(u);
            for k in url_events..params.target_threshold {
                let url = format!("{URL_HOST}/{}/pre{k}", ids[u]);
                drafts.push(Draft {
                    kind: EventKind::Original,
                    author: u,
                    target: None,
                    timestamp: rng.random_range(window.start + 2..=window.buffer_end),
                    urls: vec![url],
                });
            }
            // Friend interactions reuse a URL already shared after the buffer so
            // they add no new adoption; the intro URL is the last resort.
            own.extend(adopted);
            own.append(&mut shared[u]);
            shared[u] = own;
        }
    }

    const FRIEND_KINDS: [EventKind; 3] = [EventKind::Retweet, EventKind::Quote, EventKind::Reply];
    for e in net.edges() {
        for (a, b) in [(e.u, e.v), (e.v, e.u)] {
            drafts.push(Draft {
                kind: FRIEND_KINDS[rng.random_range(0..3)],
                author: a,
                target: Some(b),
                timestamp: window.end,
                urls: shared[a].first().cloned().into_iter().collect(),
            });
        }
    }

    drafts.sort_by_key(|d| d.timestamp);
    let width = drafts.len().to_string().len();
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let events: Vec<InteractionEvent> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if !d.urls.is_empty() {
                *counts.entry(d.author).or_default() += 1;
            }
            InteractionEvent {
                event_id: format!("e{i:0width$}"),
                kind: d.kind,
                author: name(d.author),
                target_author: d.target.map(name),
                timestamp: d.timestamp,
                urls: d.urls,
            }
        })
        .collect();
    let meta = (0..n + params.n_sources)
        .map(|a| {
            let degree = if a < n { net.degree(a) as u64 } else { 0 };
            UserMeta {
                user: name(a),
                followers_count: degree * 50 + rng.random_range(0..100),
                friends_count: degree * 40 + if a < n { params.n_sources as u64 } else { 0 } + rng.random_range(0..100),
                statuses_count: counts.get(&a).copied().unwrap_or(0) + rng.random_range(0..1000),
                favorites_count: rng.random_range(0..5000),
            }
        })
        .collect();
    Ok(SynthCorpus { events, meta, window, planted, sources })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{filter_url_events, select_target_users};
    use crate::netbuild::build_friendship_network;
    use crate::suscept::{build_histories, compute_scores};
    use std::collections::BTreeSet;

    fn config(n: usize, dist: DegreeDist, rho: f64, h: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n_nodes: n,
            degree_dist: dist,
            rho_ks_target: rho,
            homophily_strength: h,
            metric_marginal: Marginal::Uniform,
            seed,
            events: EventParams::default(),
        }
    }

    #[test]
    fn regular_graphs() {
        let g = generate_graph(&config(10, DegreeDist::Regular { k: 2 }, 0.0, 0.0, 1)).unwrap();
        assert_eq!(g.dropped_stubs, 0);
        assert!(g.network.degrees().iter().all(|&d| d == 2));
        let g = generate_graph(&config(2, DegreeDist::Regular { k: 1 }, 0.0, 0.0, 1)).unwrap();
        assert_eq!(g.network.edge_count(), 1);
        assert!(generate_graph(&config(3, DegreeDist::Regular { k: 1 }, 0.0, 0.0, 1)).is_err());
    }

    #[test]
    fn regular_graphs_keep_their_degrees() {
        for seed in 0..50 {
            let g = generate_graph(&config(10, DegreeDist::Regular { k: 2 }, 0.0, 0.0, seed)).unwrap();
            let total: usize = g.network.degrees().iter().sum();
            assert_eq!(total + g.dropped_stubs, 20);
            assert_eq!(g.dropped_stubs, 0, "seed {seed}");
        }
    }

    #[test]
    fn powerlaw_mean_degree() {
        let c = config(10_000, DegreeDist::Powerlaw { exponent: 2.5, k_min: 1, k_max: 100 }, 0.0, 0.0, 3);
        let g = generate_graph(&c).unwrap();
        let mean = g.network.degrees().iter().sum::<usize>() as f64 / 10_000.0;
        let expected = powerlaw_mean(2.5, 1, 100);
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn no_planted_correlation() {
        let mut total = 0.0;
        for seed in 0..20 {
            let c = config(2000, DegreeDist::Poisson { lambda: 8.0 }, 0.0, 0.0, seed);
            let g = generate_graph(&c).unwrap();
            let a = assign_attributes(&g.network, &c).unwrap();
            let r = a.achieved_rho_ks.unwrap();
            assert!(r.abs() < 0.1);
            total += r;
        }
        assert!((total / 20.0).abs() < 0.05);
    }

    #[test]
    fn strong_correlation_gives_network_paradox() {
        let c = config(2000, DegreeDist::Poisson { lambda: 10.0 }, 0.9, 0.0, 5);
        let g = generate_graph(&c).unwrap();
        let a = assign_attributes(&g.network, &c).unwrap();
        assert!(a.achieved_rho_ks.unwrap() > 0.7);
        assert!(a.rho_ks_feasible);
        let scores: Vec<Option<f64>> = a.scores.iter().copied().map(Some).collect();
        assert!(analytics::network_gfp(&g.network, &scores).unwrap().holds);
    }

    #[test]
    fn full_homophily() {
        for seed in 0..20 {
            let c = config(1000, DegreeDist::Poisson { lambda: 6.0 }, 0.0, 1.0, seed);
            let g = generate_graph(&c).unwrap();
            let a = assign_attributes(&g.network, &c).unwrap();
            assert!(a.achieved_homophily.unwrap() > 0.5, "seed {seed}");
        }
    }

    #[test]
    fn attributes_stay_in_unit_interval() {
        let mut c = config(500, DegreeDist::Poisson { lambda: 5.0 }, -0.5, 0.6, 2);
        c.metric_marginal = Marginal::Beta { a: 2.0, b: 5.0 };
        let g = generate_graph(&c).unwrap();
        let a = assign_attributes(&g.network, &c).unwrap();
        assert!(a.scores.iter().all(|s| (0.0..=1.0).contains(s)));
        assert!(a.achieved_rho_ks.unwrap() < 0.0);
    }

    fn pipeline(corpus: &SynthCorpus, threshold: usize) -> (BTreeSet<String>, crate::netbuild::BuiltNetwork, Vec<crate::SusceptibilityScore>) {
        let events = filter_url_events(corpus.events.clone()).events;
        let targets = select_target_users(&events, threshold).unwrap();
        let built = build_friendship_network(&events, &targets, NetworkKind::Interaction).unwrap();
        let hist = build_histories(&events, &targets, &corpus.window).unwrap();
        let scores = hist.values().map(compute_scores).collect();
        (targets, built, scores)
    }

    #[test]
    fn round_trip_recovers_network_and_rates() {
        let c = config(200, DegreeDist::Poisson { lambda: 4.0 }, 0.0, 0.0, 7);
        let g = generate_graph(&c).unwrap();
        let a = assign_attributes(&g.network, &c).unwrap();
        let corpus = generate_event_log(&g.network, &a.scores, &c.events, 7).unwrap();
        for (i, e) in corpus.events.iter().enumerate() {
            e.validate().unwrap();
            if i > 0 {
                assert!(corpus.events[i - 1].timestamp <= e.timestamp);
            }
        }
        let (_, built, scores) = pipeline(&corpus, 10);
        assert_eq!(built.network.named_edge_set(), g.network.named_edge_set());
        let by_user: BTreeMap<&str, &crate::SusceptibilityScore> = scores.iter().map(|s| (s.user.as_str(), s)).collect();
        let mut close = 0;
        for p in &corpus.planted {
            let s = by_user[p.user.as_str()];
            assert_eq!(s.n_exposed, 200);
            if (s.iar.unwrap() - p.iar).abs() <= 0.08 && (s.sar.unwrap() - p.sar).abs() <= 0.08 {
                close += 1;
            }
        }
        assert!(close as f64 >= 0.95 * 200.0, "{close}");
    }

    #[test]
    fn attribute_planted_rates() {
        let mut c = config(100, DegreeDist::Poisson { lambda: 3.0 }, 0.0, 0.0, 8);
        c.events.iar = Planted::Attribute;
        c.events.sar = Planted::OneMinusAttribute;
        let g = generate_graph(&c).unwrap();
        let a = assign_attributes(&g.network, &c).unwrap();
        let corpus = generate_event_log(&g.network, &a.scores, &c.events, 8).unwrap();
        for (p, s) in corpus.planted.iter().zip(&a.scores) {
            assert_eq!(p.iar, *s);
            assert_eq!(p.sar, 1.0 - s);
        }
    }

    #[test]
    fn zero_intensity_emits_only_friend_events() {
        let mut c = config(50, DegreeDist::Poisson { lambda: 3.0 }, 0.0, 0.0, 9);
        c.events.intensity = 0.0;
        let g = generate_graph(&c).unwrap();
        let a = assign_attributes(&g.network, &c).unwrap();
        let corpus = generate_event_log(&g.network, &a.scores, &c.events, 9).unwrap();
        assert_eq!(corpus.events.len(), 2 * g.network.edge_count());
        assert!(corpus.events.iter().all(|e| e.urls.is_empty() && e.kind.is_interaction()));
        let events = filter_url_events(corpus.events.clone()).events;
        assert!(select_target_users(&events, 1).unwrap().is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let c = config(80, DegreeDist::Powerlaw { exponent: 2.2, k_min: 1, k_max: 20 }, 0.3, 0.5, 10);
        let run = || {
            let g = generate_graph(&c).unwrap();
            let a = assign_attributes(&g.network, &c).unwrap();
            let corpus = generate_event_log(&g.network, &a.scores, &c.events, c.seed).unwrap();
            (g, a, corpus)
        };
        assert_eq!(run(), run());
        let mut other = c.clone();
        other.seed = 11;
        assert_ne!(generate_graph(&other).unwrap().network, run().0.network);
    }

    #[test]
    fn empty_network_is_rejected() {
        let net = FriendshipNetwork::from_edges(NetworkKind::Interaction, vec![], vec![]).unwrap();
        assert!(generate_event_log(&net, &[], &EventParams::default(), 0).is_err());
    }

    #[test]
    fn config_json() {
        let json = r#"{"n_nodes": 10, "degree_dist": {"type": "regular", "k": 2}, "seed": 3,
                       "events": {"iar": "attribute", "sar": {"constant": 0.2}}}"#;
        let c: SynthConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.events.iar, Planted::Attribute);
        assert_eq!(c.events.sar, Planted::Constant(0.2));
        assert_eq!(c.events.exposures_per_node, 200);
        assert_eq!(c.metric_marginal, Marginal::Uniform);
        c.validate().unwrap();
    }
}
