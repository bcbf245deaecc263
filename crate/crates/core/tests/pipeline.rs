use std::collections::BTreeSet;

use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

use susnet_core::analytics;
use susnet_core::ingest::{self, EventKind, InteractionEvent};
use susnet_core::netbuild::{self, Edge, FriendshipNetwork, NetworkKind};
use susnet_core::nullmodels;
use susnet_core::suscept;
use susnet_core::synth::{self, DegreeDist, Marginal, Planted, SynthConfig};

fn small_config(n: usize, k_max: usize, seed: u64) -> SynthConfig {
    let mut c = SynthConfig {
        n_nodes: n,
        degree_dist: DegreeDist::Powerlaw { exponent: 2.2, k_min: 1, k_max },
        rho_ks_target: 0.3,
        homophily_strength: 0.4,
        metric_marginal: Marginal::Uniform,
        seed,
        events: Default::default(),
    };
    c.events.exposures_per_node = 20;
    c.events.iar = Planted::Attribute;
    c
}

fn events_from(spec: &[(u8, u8, u8, u8, u8)]) -> Vec<InteractionEvent> {
    let users = ["a", "b", "c", "d"];
    spec.iter()
        .enumerate()
        .map(|(i, &(author, kind, target, t, url))| {
            let author = users[author as usize % 4];
            let kind = [EventKind::Original, EventKind::Retweet, EventKind::Quote, EventKind::Reply][kind as usize % 4];
            let mut target = users[target as usize % 4];
            if target == author {
                target = users[(target.as_bytes()[0] - b'a' + 1) as usize % 4];
            }
            InteractionEvent {
                event_id: format!("e{i:03}"),
                kind,
                author: author.to_string(),
                target_author: (kind != EventKind::Original).then(|| target.to_string()),
                timestamp: t as i64,
                urls: (0..url % 3).map(|j| format!("https://h.test/{}", (url as usize + j as usize) % 5)).collect(),
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthetic_log_rebuilds_its_network(n in 10usize..80, seed in any::<u64>()) {
        let config = small_config(n, 12, seed);
        let net = synth::generate_graph(&config).unwrap().network;
        let attrs = synth::assign_attributes(&net, &config).unwrap();
        let corpus = synth::generate_event_log(&net, &attrs.scores, &config.events, seed).unwrap();
        let events = ingest::filter_url_events(corpus.events).events;
        let targets: BTreeSet<String> = net.nodes().iter().cloned().collect();
        let rebuilt = netbuild::build_friendship_network(&events, &targets, NetworkKind::Interaction).unwrap();
        prop_assert_eq!(rebuilt.network.named_edge_set(), net.named_edge_set());
    }

    #[test]
    fn log_serialization_is_a_fixed_point(spec in proptest::collection::vec(any::<(u8, u8, u8, u8, u8)>(), 0..40)) {
        let events = events_from(&spec);
        let mut first = Vec::new();
        ingest::write_event_log(&events, &mut first).unwrap();
        let parsed = ingest::parse_event_log(&first[..], true).unwrap().events;
        let mut second = Vec::new();
        ingest::write_event_log(&parsed, &mut second).unwrap();
        let reparsed = ingest::parse_event_log(&second[..], true).unwrap().events;
        prop_assert_eq!(parsed, reparsed);
    }

    #[test]
    fn raising_threshold_never_adds_targets(spec in proptest::collection::vec(any::<(u8, u8, u8, u8, u8)>(), 0..40), t in 1usize..6) {
        let events = ingest::filter_url_events(events_from(&spec)).events;
        let low = ingest::select_target_users(&events, t).unwrap();
        let high = ingest::select_target_users(&events, t + 1).unwrap();
        prop_assert!(high.is_subset(&low));
    }

    #[test]
    fn scores_stay_in_unit_interval(spec in proptest::collection::vec(any::<(u8, u8, u8, u8, u8)>(), 0..40)) {
        let mut events = ingest::filter_url_events(events_from(&spec)).events;
        events.sort_by_key(|e| e.timestamp);
        let window = ingest::CorpusWindow::new(0, 255, 60).unwrap();
        let users: BTreeSet<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let histories = suscept::build_histories(&events, &users, &window).unwrap();
        for s in suscept::compute_all_scores(&histories) {
            for v in [s.iar, s.sar].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(s.n_influence_driven <= s.n_exposed.min(s.n_adopted));
        }
    }

    #[test]
    fn homophily_ignores_uniform_weight_scaling(n in 10usize..60, seed in any::<u64>(), scale in 2u64..9) {
        let config = small_config(n, 10, seed);
        let net = synth::generate_graph(&config).unwrap().network;
        let attrs = synth::assign_attributes(&net, &config).unwrap();
        let scores: Vec<Option<f64>> = attrs.scores.iter().copied().map(Some).collect();
        let scaled_edges: Vec<Edge> = net.edges().iter().map(|e| Edge { weight: e.weight * scale, ..*e }).collect();
        let scaled = net.with_edges(scaled_edges).unwrap();
        match (analytics::homophily_correlation(&net, &scores), analytics::homophily_correlation(&scaled, &scores)) {
            (Ok(a), Ok(b)) => prop_assert!((a.coefficient - b.coefficient).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn swap_null_keeps_degrees_and_scores_report_consistently(n in 10usize..60, seed in any::<u64>()) {
        let config = small_config(n, 10, seed);
        let net = synth::generate_graph(&config).unwrap().network;
        let swapped = nullmodels::degree_preserving_rewire(&net, 5, seed).unwrap().network;
        prop_assert_eq!(swapped.degrees(), net.degrees());
        let attrs = synth::assign_attributes(&net, &config).unwrap();
        let scores: Vec<Option<f64>> = attrs.scores.iter().copied().map(Some).collect();
        if let Ok(g) = analytics::network_gfp(&swapped, &scores) {
            prop_assert_eq!(g.holds, g.mean_s_nn > g.mean_s);
        }
    }
}

#[test]
fn edge_list_round_trip() {
    let net = FriendshipNetwork::from_named_edges(
        NetworkKind::Retweet,
        &[],
        [("u1".to_string(), "u2".to_string(), 3), ("u2".to_string(), "u3".to_string(), 2)],
    )
    .unwrap();
    let mut buf = Vec::new();
    netbuild::write_edge_list(&net, &mut buf).unwrap();
    let back = netbuild::read_edge_list(NetworkKind::Retweet, &buf[..]).unwrap();
    assert_eq!(back, net);
}
