//! Fixtures shared by the benchmarks.

use susnet_core::synth::{self, DegreeDist, Marginal, Planted, SynthConfig, SynthCorpus};
use susnet_core::{FriendshipNetwork, Result};

pub fn config(n_nodes: usize, seed: u64) -> SynthConfig {
    let mut config = SynthConfig {
        n_nodes,
        degree_dist: DegreeDist::Powerlaw { exponent: 2.5, k_min: 2, k_max: 100 },
        rho_ks_target: 0.3,
        homophily_strength: 0.5,
        metric_marginal: Marginal::Uniform,
        seed,
        events: Default::default(),
    };
    config.events.iar = Planted::Attribute;
    config.events.exposures_per_node = 50;
    config
}

/// Network and aligned attribute scores.
pub fn scored_network(n_nodes: usize, seed: u64) -> Result<(FriendshipNetwork, Vec<Option<f64>>)> {
    let config = config(n_nodes, seed);
    let net = synth::generate_graph(&config)?.network;
    let attrs = synth::assign_attributes(&net, &config)?;
    Ok((net, attrs.scores.into_iter().map(Some).collect()))
}

pub fn corpus(n_nodes: usize, seed: u64) -> Result<(FriendshipNetwork, SynthCorpus)> {
    let config = config(n_nodes, seed);
    let net = synth::generate_graph(&config)?.network;
    let attrs = synth::assign_attributes(&net, &config)?;
    let corpus = synth::generate_event_log(&net, &attrs.scores, &config.events, seed)?;
    Ok((net, corpus))
}
